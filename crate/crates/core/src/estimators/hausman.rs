use nalgebra::{DMatrix, DVector};

use super::{EstimationResult, CONSTANT};
use crate::error::{Error, Result};
use crate::linalg::pinv_symmetric;
use crate::stats::{chi2_sf, Reference, TestResult};

/// Hausman FE-vs-RE test at the conventional 5% level.
pub fn hausman_test(fe: &EstimationResult, re: &EstimationResult) -> Result<TestResult> {
    hausman_test_at(fe, re, 0.05)
}

/// `H = q' (V_fe - V_re)^+ q` over the slopes both models estimate, with
/// `q = b_fe - b_re`. Degrees of freedom are the rank of the variance
/// difference. The annotation is "Fixed" when `p <= alpha`, else "Random".
pub fn hausman_test_at(fe: &EstimationResult, re: &EstimationResult, alpha: f64) -> Result<TestResult> {
    let common: Vec<(usize, usize)> = fe
        .names
        .iter()
        .enumerate()
        .filter(|(_, n)| n.as_str() != CONSTANT)
        .filter_map(|(i, n)| re.position(n).map(|j| (i, j)))
        .collect();
    if common.is_empty() {
        return Err(Error::InvalidArgument(
            "FE and RE fits share no slope coefficients".into(),
        ));
    }
    let k = common.len();
    let q = DVector::from_iterator(
        k,
        common.iter().map(|&(i, j)| fe.coefficients[i] - re.coefficients[j]),
    );
    let mut dv = DMatrix::zeros(k, k);
    for (a, &(ia, ja)) in common.iter().enumerate() {
        for (b, &(ib, jb)) in common.iter().enumerate() {
            dv[(a, b)] = fe.vcov[(ia, ib)] - re.vcov[(ja, jb)];
        }
    }
    let dv = (&dv + dv.transpose()) * 0.5;
    let (pinv, rank) = pinv_symmetric(&dv);

    let mut notes = Vec::new();
    let mut stat = if rank == 0 { 0.0 } else { (q.transpose() * &pinv * &q)[(0, 0)] };
    if stat < 0.0 {
        notes.push(format!(
            "negative statistic {stat:.4} (variance difference not positive semi-definite) set to 0"
        ));
        stat = 0.0;
    }
    if rank < k {
        notes.push(format!("variance difference has rank {rank} of {k}"));
    }
    let p = if rank == 0 { 1.0 } else { chi2_sf(stat, rank) };
    let mut t = TestResult::new(
        "Hausman",
        stat,
        Reference::ChiSquare(rank),
        "random effects are uncorrelated with the regressors",
    )
    .with_p(p);
    t.annotation = Some(hausman_recommendation(p, alpha).to_string());
    t.notes = notes;
    Ok(t)
}

/// "Fixed" when the p-value is at or below `alpha`, else "Random".
pub fn hausman_recommendation(p: f64, alpha: f64) -> &'static str {
    if p <= alpha {
        "Fixed"
    } else {
        "Random"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::Method;

    fn fit(method: Method, names: &[&str], b: &[f64], v: DMatrix<f64>) -> EstimationResult {
        EstimationResult::assemble(
            method,
            names.iter().map(|s| s.to_string()).collect(),
            DVector::from_column_slice(b),
            v,
            50,
            DVector::from_element(60, 0.1),
            1.0,
            false,
        )
    }

    #[test]
    fn scalar_case_matches_hand_computation() {
        let fe = fit(Method::FixedEffects, &["x"], &[1.0], DMatrix::from_element(1, 1, 0.04));
        let re = fit(
            Method::RandomEffects,
            &["c", "x"],
            &[5.0, 0.8],
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.03]),
        );
        let h = hausman_test(&fe, &re).unwrap();
        assert!((h.statistic - 0.04 / 0.01).abs() < 1e-10);
        assert_eq!(h.reference, Reference::ChiSquare(1));
        assert!((h.p_value.unwrap() - chi2_sf(4.0, 1)).abs() < 1e-12);
        assert_eq!(h.annotation.as_deref(), Some("Fixed"));
    }

    #[test]
    fn zero_rank_difference() {
        let v = DMatrix::from_element(1, 1, 0.02);
        let fe = fit(Method::FixedEffects, &["x"], &[1.0], v.clone());
        let re = fit(Method::RandomEffects, &["x"], &[0.5], v);
        let h = hausman_test(&fe, &re).unwrap();
        assert_eq!(h.statistic, 0.0);
        assert_eq!(h.p_value, Some(1.0));
        assert_eq!(h.annotation.as_deref(), Some("Random"));
    }

    #[test]
    fn recommendation_boundary() {
        assert_eq!(hausman_recommendation(0.05, 0.05), "Fixed");
        assert_eq!(hausman_recommendation(0.0501, 0.05), "Random");
    }
}
