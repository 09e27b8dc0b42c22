use nalgebra::{DMatrix, DVector};

use super::{centered_tss, EstimationResult, Method, CONSTANT};
use crate::error::{Error, Result};
use crate::linalg::{check_full_rank, first_dependent_column, least_squares, project, sandwich};
use crate::panel::DesignMatrix;
use crate::stats::f_sf;

/// Which regressors are endogenous and where their instruments come from.
///
/// Each endogenous regressor is instrumented by its own values `lags`
/// periods earlier within the same entity; rows lacking any lag are dropped.
/// Columns named in `excluded` are taken out of the regressor list and used
/// only as instruments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IvSpec {
    pub endogenous: Vec<String>,
    pub lags: Vec<usize>,
    pub excluded: Vec<String>,
}

impl IvSpec {
    /// First-lag instruments for the named endogenous regressors.
    pub fn first_lags<S: AsRef<str>>(endogenous: &[S]) -> Self {
        Self {
            endogenous: endogenous.iter().map(|s| s.as_ref().to_string()).collect(),
            lags: vec![1],
            excluded: Vec::new(),
        }
    }

    /// Cross-sectional IV: instruments are extra design columns, no lags.
    pub fn with_excluded<S: AsRef<str>, T: AsRef<str>>(endogenous: &[S], excluded: &[T]) -> Self {
        Self {
            endogenous: endogenous.iter().map(|s| s.as_ref().to_string()).collect(),
            lags: Vec::new(),
            excluded: excluded.iter().map(|s| s.as_ref().to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirstStage {
    pub variable: String,
    pub r_squared: f64,
    /// Joint F of the excluded instruments.
    pub partial_f: f64,
    pub partial_f_p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IvDetails {
    pub endogenous: Vec<String>,
    pub instruments: Vec<String>,
    pub n_excluded: usize,
    pub rows_dropped: usize,
    pub first_stage: Vec<FirstStage>,
}

/// Estimation sample with regressor and instrument matrices, both carrying a
/// leading constant.
#[derive(Debug, Clone)]
pub(crate) struct IvSample {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub x_names: Vec<String>,
    pub z: DMatrix<f64>,
    pub z_names: Vec<String>,
    /// Positions of the endogenous regressors among the columns of `x`.
    pub endog_pos: Vec<usize>,
    /// Positions of the excluded instruments among the columns of `z`.
    pub excluded_pos: Vec<usize>,
    pub rows_dropped: usize,
}

impl IvSample {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn n_endog(&self) -> usize {
        self.endog_pos.len()
    }

    pub fn overid_df(&self) -> usize {
        self.excluded_pos.len() - self.endog_pos.len()
    }
}

pub(crate) fn prepare_iv(m: &DesignMatrix, spec: &IvSpec) -> Result<IvSample> {
    let col = |name: &str| {
        m.column_index(name)
            .ok_or_else(|| Error::InvalidArgument(format!("no column `{name}` in the design")))
    };
    for name in &spec.endogenous {
        col(name)?;
        if spec.excluded.contains(name) {
            return Err(Error::InvalidArgument(format!(
                "`{name}` is both endogenous and an excluded instrument"
            )));
        }
    }
    for name in &spec.excluded {
        col(name)?;
    }
    if spec.lags.contains(&0) {
        return Err(Error::InvalidArgument("instrument lags must be positive".into()));
    }
    let n_instr = spec.endogenous.len() * spec.lags.len() + spec.excluded.len();
    if n_instr < spec.endogenous.len() {
        return Err(Error::UnderIdentified(format!(
            "{n_instr} excluded instruments for {} endogenous regressors",
            spec.endogenous.len()
        )));
    }

    // lagged instrument values, None where the lag falls outside the sample
    let mut lag_cols: Vec<(String, Vec<Option<f64>>)> = Vec::new();
    for name in &spec.endogenous {
        let j = col(name)?;
        for &l in &spec.lags {
            let vals = (0..m.n_rows())
                .map(|r| {
                    let e = m.entity_of_row()[r];
                    let p = m.period_of_row()[r] - l as i32;
                    m.row_of(e, p).map(|src| m.x()[(src, j)])
                })
                .collect();
            lag_cols.push((format!("L{l}.{name}"), vals));
        }
    }
    let keep: Vec<usize> = (0..m.n_rows())
        .filter(|&r| lag_cols.iter().all(|(_, v)| v[r].is_some()))
        .collect();
    let n = keep.len();

    let regressors: Vec<usize> = (0..m.n_cols())
        .filter(|&j| !spec.excluded.contains(&m.names()[j]))
        .collect();
    let mut x_names = vec![CONSTANT.to_string()];
    x_names.extend(regressors.iter().map(|&j| m.names()[j].clone()));
    let mut x = DMatrix::from_element(n, regressors.len() + 1, 1.0);
    for (c, &j) in regressors.iter().enumerate() {
        for (i, &r) in keep.iter().enumerate() {
            x[(i, c + 1)] = m.x()[(r, j)];
        }
    }
    let endog_pos: Vec<usize> = spec
        .endogenous
        .iter()
        .map(|name| x_names.iter().position(|n| n == name).expect("checked above"))
        .collect();

    // Z = [exogenous regressors (constant first), lag instruments, excluded columns]
    let mut z_cols: Vec<(String, DVector<f64>)> = Vec::new();
    for j in 0..x.ncols() {
        if !endog_pos.contains(&j) {
            z_cols.push((x_names[j].clone(), x.column(j).into_owned()));
        }
    }
    let n_included = z_cols.len();
    for (name, vals) in &lag_cols {
        let v = DVector::from_iterator(n, keep.iter().map(|&r| vals[r].expect("kept rows")));
        z_cols.push((name.clone(), v));
    }
    for name in &spec.excluded {
        let j = col(name)?;
        let v = DVector::from_iterator(n, keep.iter().map(|&r| m.x()[(r, j)]));
        z_cols.push((name.clone(), v));
    }
    let z_names: Vec<String> = z_cols.iter().map(|(n, _)| n.clone()).collect();
    let mut z = DMatrix::zeros(n, z_cols.len());
    for (c, (_, v)) in z_cols.iter().enumerate() {
        z.set_column(c, v);
    }
    if n <= z.ncols() {
        return Err(Error::DegreesOfFreedom(format!(
            "{n} rows for {} instruments",
            z.ncols()
        )));
    }
    check_full_rank(&z, &z_names)?;

    let y = DVector::from_iterator(n, keep.iter().map(|&r| m.y()[r]));
    Ok(IvSample {
        y,
        x,
        x_names,
        z,
        z_names,
        endog_pos,
        excluded_pos: (n_included..z_cols.len()).collect(),
        rows_dropped: m.n_rows() - n,
    })
}

/// Two-stage least squares with an intercept. Robust covariance is HC1 on
/// the second-stage regressors.
pub fn two_sls(m: &DesignMatrix, spec: &IvSpec, robust: bool) -> Result<EstimationResult> {
    let s = prepare_iv(m, spec)?;
    two_sls_on(&s, robust)
}

pub(crate) fn two_sls_on(s: &IvSample, robust: bool) -> Result<EstimationResult> {
    let n = s.n();
    let k = s.x.ncols();
    if n <= k {
        return Err(Error::DegreesOfFreedom(format!("{n} rows for {k} parameters")));
    }
    let x_hat = project(&s.z, &s.x);
    if let Some(j) = first_dependent_column(&x_hat) {
        return Err(Error::UnderIdentified(format!(
            "projected regressor `{}` is collinear with the other projected columns",
            s.x_names[j]
        )));
    }
    let fit = least_squares(&x_hat, &s.y, &s.x_names)?;
    let coef = fit.coef;
    let resid = &s.y - &s.x * &coef;
    let df = n - k;
    let vcov = if robust {
        sandwich(&fit.xtx_inv, &x_hat, &resid, n as f64 / df as f64)
    } else {
        &fit.xtx_inv * (resid.norm_squared() / df as f64)
    };

    let first_stage = s
        .endog_pos
        .iter()
        .map(|&j| first_stage(s, j))
        .collect::<Result<Vec<_>>>()?;
    let mut res = EstimationResult::assemble(
        Method::TwoStageLeastSquares,
        s.x_names.clone(),
        coef,
        vcov,
        df,
        resid,
        centered_tss(&s.y),
        robust,
    );
    res.iv = Some(IvDetails {
        endogenous: s.endog_pos.iter().map(|&j| s.x_names[j].clone()).collect(),
        instruments: s.z_names.clone(),
        n_excluded: s.excluded_pos.len(),
        rows_dropped: s.rows_dropped,
        first_stage,
    });
    Ok(res)
}

fn first_stage(s: &IvSample, j: usize) -> Result<FirstStage> {
    let target = s.x.column(j).into_owned();
    let full = least_squares(&s.z, &target, &s.z_names)?;
    let inc: Vec<usize> = (0..s.z.ncols()).filter(|c| !s.excluded_pos.contains(c)).collect();
    let zr = s.z.select_columns(&inc);
    let names_r: Vec<String> = inc.iter().map(|&c| s.z_names[c].clone()).collect();
    let restricted = least_squares(&zr, &target, &names_r)?;
    let q = s.excluded_pos.len();
    let df2 = s.n() - s.z.ncols();
    let partial_f = ((restricted.rss - full.rss) / q as f64) / (full.rss / df2 as f64);
    let tss = centered_tss(&target);
    Ok(FirstStage {
        variable: s.x_names[j].clone(),
        r_squared: if tss > 0.0 { 1.0 - full.rss / tss } else { f64::NAN },
        partial_f,
        partial_f_p: f_sf(partial_f, q, df2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::ols;

    fn panel(n: usize, t: usize) -> DesignMatrix {
        let mut y = Vec::new();
        let mut x = Vec::new();
        let mut ent = Vec::new();
        let mut per = Vec::new();
        for i in 0..n {
            for s in 0..t {
                let a = ((i * 13 + s * 7) % 17) as f64 / 3.0 + s as f64 * 0.2;
                let b = ((i * 3 + s * s) % 11) as f64 / 2.0;
                let e = (((i * 29 + s * 23) % 19) as f64 - 9.0) / 10.0;
                y.push(1.0 + 0.5 * a - 0.3 * b + e);
                x.extend([a, b]);
                ent.push(i);
                per.push(2000 + s as i32);
            }
        }
        let rows = y.len();
        DesignMatrix::new(
            "y",
            DVector::from_vec(y),
            vec!["a".into(), "b".into()],
            DMatrix::from_row_slice(rows, 2, &x),
            ent,
            per,
        )
        .unwrap()
    }

    #[test]
    fn no_endogenous_regressors_is_ols() {
        let m = panel(4, 8);
        let iv = two_sls(&m, &IvSpec::first_lags::<&str>(&[]), false).unwrap();
        let o = ols(&m, false).unwrap();
        assert!((iv.coefficients - o.coefficients).amax() < 1e-10);
    }

    #[test]
    fn lag_instruments_drop_first_period() {
        let m = panel(6, 14);
        let iv = two_sls(&m, &IvSpec::first_lags(&["a", "b"]), false).unwrap();
        assert_eq!(iv.n_obs, 78);
        assert_eq!(iv.iv.as_ref().unwrap().rows_dropped, 6);
        let s = prepare_iv(&m, &IvSpec::first_lags(&["a", "b"])).unwrap();
        let zu = s.z.transpose() * &iv.residuals;
        assert!(zu.amax() / (s.n() as f64) < 1e-8);
    }

    #[test]
    fn order_condition() {
        let m = panel(4, 8);
        let spec = IvSpec { endogenous: vec!["a".into()], lags: vec![], excluded: vec![] };
        assert!(matches!(two_sls(&m, &spec, false), Err(Error::UnderIdentified(_))));
    }
}
