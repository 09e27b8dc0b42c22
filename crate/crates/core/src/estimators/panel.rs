use nalgebra::DVector;

use super::{centered_tss, with_constant, Coefficient, EstimationResult, Method, CONSTANT};
use crate::error::{Error, Result};
use crate::linalg::{least_squares, sandwich};
use crate::panel::{quasi_demean, within_transform, DesignMatrix};
use crate::stats::t_two_sided;

/// Within estimator. Time-invariant regressors are dropped and listed in
/// `dropped`; residual df is `n - N - k`. Robust covariance is HC1 with the
/// LSDV parameter count.
pub fn fixed_effects(m: &DesignMatrix, robust: bool) -> Result<EstimationResult> {
    if !m.is_balanced() {
        return Err(Error::Panel("fixed effects requires a balanced design".into()));
    }
    let w = within_transform(m)?;
    let keep: Vec<&str> = w
        .names()
        .iter()
        .zip(w.degenerate())
        .filter(|(_, d)| !**d)
        .map(|(n, _)| n.as_str())
        .collect();
    let dropped = w.degenerate_names();
    if keep.is_empty() {
        return Err(Error::Degenerate(
            "every regressor is time-invariant; nothing to estimate under fixed effects".into(),
        ));
    }
    let w = w.select(&keep)?;
    let n = w.n_rows();
    let k = w.n_cols();
    let n_ent = w.n_entities();
    if n <= n_ent + k {
        return Err(Error::DegreesOfFreedom(format!(
            "{n} rows for {n_ent} entity effects and {k} slopes"
        )));
    }
    let df = n - n_ent - k;

    // [1, x_within] with y_within + grand mean: slopes are the within slopes
    // and the constant is mean(y); the FE constant is then mean(y) - mean(x)'b.
    let grand_y = m.y().mean();
    let xa = with_constant(w.x());
    let ya = w.y().add_scalar(grand_y);
    let mut names_a = vec![CONSTANT.to_string()];
    names_a.extend(keep.iter().map(|s| s.to_string()));
    let fit = least_squares(&xa, &ya, &names_a)?;
    let scale = n as f64 / df as f64;
    let vcov_a = if robust {
        sandwich(&fit.xtx_inv, &xa, &fit.resid, scale)
    } else {
        &fit.xtx_inv * (fit.rss / df as f64)
    };

    let slopes = fit.coef.rows(1, k).into_owned();
    let vcov = vcov_a.view((1, 1), (k, k)).into_owned();
    let names: Vec<String> = keep.iter().map(|s| s.to_string()).collect();
    let mut res = EstimationResult::assemble(
        Method::FixedEffects,
        names,
        slopes.clone(),
        vcov,
        df,
        fit.resid.clone(),
        w.y().norm_squared(),
        robust,
    );
    res.dropped = dropped;

    let xbar: DVector<f64> = DVector::from_iterator(
        k,
        keep.iter().map(|name| m.column(name).expect("kept column exists").mean()),
    );
    let mut a = DVector::zeros(k + 1);
    a[0] = 1.0;
    for j in 0..k {
        a[j + 1] = -xbar[j];
    }
    let c = fit.coef[0] - xbar.dot(&slopes);
    let var_c = (a.transpose() * &vcov_a * &a)[(0, 0)];
    let se_c = var_c.max(0.0).sqrt();
    res.restored_constant = Some(Coefficient {
        name: CONSTANT.to_string(),
        estimate: c,
        se: se_c,
        t: c / se_c,
        p: t_two_sided(c / se_c, df),
    });
    Ok(res)
}

/// Entity intercepts `mean_i(y) - mean_i(x)'b` recovered from a FE fit.
pub fn fe_entity_effects(m: &DesignMatrix, fe: &EstimationResult) -> Result<Vec<f64>> {
    let idx: Vec<usize> = fe
        .names
        .iter()
        .map(|n| {
            m.column_index(n)
                .ok_or_else(|| Error::InvalidArgument(format!("design lacks column `{n}`")))
        })
        .collect::<Result<_>>()?;
    let means = m.entity_means();
    Ok((0..m.n_entities())
        .map(|e| {
            let xb: f64 = idx
                .iter()
                .enumerate()
                .map(|(j, &col)| means[(e, col + 1)] * fe.coefficients[j])
                .sum();
            means[(e, 0)] - xb
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceMethod {
    /// Within residual variance plus the between regression.
    SwamyArora,
    /// Both components from pooled OLS residuals; needs no between regression.
    WallaceHussain,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaChoice {
    Estimate(VarianceMethod),
    /// Forces the quasi-demeaning weight (0 = pooled OLS, 1 = within).
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReOptions {
    pub theta: ThetaChoice,
    /// Use Wallace-Hussain when the Swamy-Arora between regression is
    /// under-identified.
    pub fallback: bool,
}

impl Default for ReOptions {
    fn default() -> Self {
        Self {
            theta: ThetaChoice::Estimate(VarianceMethod::SwamyArora),
            fallback: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceComponents {
    pub sigma2_e: f64,
    pub sigma2_u: f64,
    pub theta: f64,
    pub method: Option<VarianceMethod>,
}

/// Random-effects GLS with Swamy-Arora variance components.
pub fn random_effects(m: &DesignMatrix) -> Result<EstimationResult> {
    random_effects_with(m, &ReOptions::default())
}

pub fn random_effects_with(m: &DesignMatrix, opts: &ReOptions) -> Result<EstimationResult> {
    if !m.is_balanced() {
        return Err(Error::Panel("random effects requires a balanced design".into()));
    }
    let n_ent = m.n_entities();
    if n_ent < 3 {
        return Err(Error::Panel(format!(
            "random effects needs at least 3 entities, got {n_ent}"
        )));
    }
    let t_len = m.groups()[0].len() as f64;
    let mut notes = Vec::new();

    let components = match opts.theta {
        ThetaChoice::Fixed(theta) => {
            if !(0.0..=1.0).contains(&theta) {
                return Err(Error::InvalidArgument(format!("theta {theta} outside [0, 1]")));
            }
            None
        }
        ThetaChoice::Estimate(VarianceMethod::SwamyArora) => match swamy_arora(m, t_len) {
            Ok(vc) => Some(vc),
            Err(Error::UnderIdentified(msg)) if opts.fallback => {
                notes.push(format!(
                    "Swamy-Arora between regression under-identified ({msg}); variance components by Wallace-Hussain"
                ));
                Some(wallace_hussain(m, t_len)?)
            }
            Err(e) => return Err(e),
        },
        ThetaChoice::Estimate(VarianceMethod::WallaceHussain) => Some(wallace_hussain(m, t_len)?),
    };
    let theta = match (opts.theta, &components) {
        (ThetaChoice::Fixed(th), _) => th,
        (_, Some(vc)) => vc.theta,
        _ => unreachable!(),
    };

    let mut names = vec![CONSTANT.to_string()];
    names.extend(m.names().iter().cloned());
    let full = DesignMatrix::new(
        m.y_name(),
        m.y().clone(),
        names,
        with_constant(m.x()),
        m.entity_of_row().to_vec(),
        m.period_of_row().to_vec(),
    )?;
    let q = quasi_demean(&full, &vec![theta; n_ent])?;
    let keep: Vec<&str> = q
        .names()
        .iter()
        .zip(q.degenerate())
        .filter(|(_, d)| !**d)
        .map(|(n, _)| n.as_str())
        .collect();
    let dropped = q.degenerate_names();
    let q = q.select(&keep)?;
    let fit = least_squares(q.x(), q.y(), q.names())?;
    let n = q.n_rows();
    let k = q.n_cols();
    let df = n.checked_sub(k).filter(|d| *d > 0).ok_or_else(|| {
        Error::DegreesOfFreedom(format!("{n} rows for {k} parameters"))
    })?;
    let sigma2_e = match &components {
        Some(vc) => vc.sigma2_e,
        None => fit.rss / df as f64,
    };
    let vcov = &fit.xtx_inv * sigma2_e;
    let resid = m.y() - q_original_fit(&full, &keep, &fit.coef);
    let mut res = EstimationResult::assemble(
        Method::RandomEffects,
        keep.iter().map(|s| s.to_string()).collect(),
        fit.coef,
        vcov,
        df,
        resid,
        centered_tss(m.y()),
        false,
    );
    res.rss = fit.rss;
    res.dropped = dropped.into_iter().filter(|d| d != CONSTANT).collect();
    res.variance_components = Some(components.unwrap_or(VarianceComponents {
        sigma2_e,
        sigma2_u: f64::NAN,
        theta,
        method: None,
    }));
    res.notes = notes;
    Ok(res)
}

/// Untransformed fitted values `X b` for the kept columns.
fn q_original_fit(full: &DesignMatrix, keep: &[&str], coef: &DVector<f64>) -> DVector<f64> {
    let mut fitted = DVector::zeros(full.n_rows());
    for (j, name) in keep.iter().enumerate() {
        let col = full.column(name).expect("kept column exists");
        fitted.axpy(coef[j], &col, 1.0);
    }
    fitted
}

fn theta_from(sigma2_e: f64, sigma2_u: f64, t_len: f64) -> f64 {
    if sigma2_e <= 0.0 {
        return 1.0;
    }
    1.0 - (sigma2_e / (t_len * sigma2_u + sigma2_e)).sqrt()
}

fn swamy_arora(m: &DesignMatrix, t_len: f64) -> Result<VarianceComponents> {
    let n_ent = m.n_entities();
    let k_b = m.n_cols() + 1;
    if n_ent <= k_b {
        return Err(Error::UnderIdentified(format!(
            "between regression has {n_ent} entities for {k_b} parameters"
        )));
    }
    // within part
    let w = within_transform(m)?;
    let keep: Vec<&str> = w
        .names()
        .iter()
        .zip(w.degenerate())
        .filter(|(_, d)| !**d)
        .map(|(n, _)| n.as_str())
        .collect();
    let w = w.select(&keep)?;
    let n = w.n_rows();
    let df_w = n
        .checked_sub(n_ent + w.n_cols())
        .filter(|d| *d > 0)
        .ok_or_else(|| Error::DegreesOfFreedom("within regression has no residual df".into()))?;
    let sigma2_e = if w.n_cols() == 0 {
        w.y().norm_squared() / df_w as f64
    } else {
        least_squares(w.x(), w.y(), w.names())?.rss / df_w as f64
    };

    // between part
    let means = m.entity_means();
    let yb = means.column(0).into_owned();
    let xb = with_constant(&means.columns(1, m.n_cols()).into_owned());
    let mut names = vec![CONSTANT.to_string()];
    names.extend(m.names().iter().cloned());
    let fit_b = least_squares(&xb, &yb, &names).map_err(|e| match e {
        Error::RankDeficient(c) => Error::UnderIdentified(format!(
            "between regression is rank deficient at `{c}`"
        )),
        other => other,
    })?;
    let sigma2_between = fit_b.rss / (n_ent - k_b) as f64;
    let sigma2_u = (sigma2_between - sigma2_e / t_len).max(0.0);
    Ok(VarianceComponents {
        sigma2_e,
        sigma2_u,
        theta: theta_from(sigma2_e, sigma2_u, t_len),
        method: Some(VarianceMethod::SwamyArora),
    })
}

fn wallace_hussain(m: &DesignMatrix, t_len: f64) -> Result<VarianceComponents> {
    let x = with_constant(m.x());
    let mut names = vec![CONSTANT.to_string()];
    names.extend(m.names().iter().cloned());
    let fit = least_squares(&x, m.y(), &names)?;
    let n_ent = m.n_entities();
    let mut within_ss = 0.0;
    let mut between_ss = 0.0;
    for g in m.groups() {
        let r = fit.resid.rows_range(g.clone());
        let mean = r.mean();
        between_ss += mean * mean;
        within_ss += r.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    }
    let sigma2_e = within_ss / (n_ent as f64 * (t_len - 1.0));
    let sigma2_1 = t_len * between_ss / n_ent as f64;
    let sigma2_u = ((sigma2_1 - sigma2_e) / t_len).max(0.0);
    Ok(VarianceComponents {
        sigma2_e,
        sigma2_u,
        theta: theta_from(sigma2_e, sigma2_u, t_len),
        method: Some(VarianceMethod::WallaceHussain),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::ols;
    use nalgebra::DMatrix;

    // y = alpha_i + 2 x1 - x2 + small noise, plus a time-invariant column
    fn panel() -> DesignMatrix {
        let (n, t) = (5, 6);
        let mut y = Vec::new();
        let mut x = Vec::new();
        let mut ent = Vec::new();
        let mut per = Vec::new();
        for i in 0..n {
            for s in 0..t {
                let x1 = ((i * 7 + s * 3) % 11) as f64 + 0.1 * s as f64;
                let x2 = ((i * 5 + s * s) % 7) as f64;
                let z = i as f64 * 1.5 + 1.0;
                let noise = (((i * 31 + s * 17) % 13) as f64 - 6.0) * 0.01;
                y.push(3.0 * i as f64 + 2.0 * x1 - x2 + noise);
                x.extend([x1, x2, z]);
                ent.push(i);
                per.push(2000 + s as i32);
            }
        }
        let rows = y.len();
        DesignMatrix::new(
            "y",
            DVector::from_vec(y),
            vec!["x1".into(), "x2".into(), "z".into()],
            DMatrix::from_row_slice(rows, 3, &x),
            ent,
            per,
        )
        .unwrap()
    }

    #[test]
    fn fe_drops_time_invariant_and_recovers_slopes() {
        let fe = fixed_effects(&panel(), false).unwrap();
        assert_eq!(fe.names, vec!["x1", "x2"]);
        assert_eq!(fe.dropped, vec!["z"]);
        assert!((fe.coefficients[0] - 2.0).abs() < 0.01);
        assert!((fe.coefficients[1] + 1.0).abs() < 0.01);
        assert_eq!(fe.df_resid, 30 - 5 - 2);
        let c = fe.restored_constant.as_ref().unwrap();
        let m = panel();
        let want = m.y().mean()
            - fe.coefficients[0] * m.column("x1").unwrap().mean()
            - fe.coefficients[1] * m.column("x2").unwrap().mean();
        assert!((c.estimate - want).abs() < 1e-10);
        let alphas = fe_entity_effects(&m, &fe).unwrap();
        let avg = alphas.iter().sum::<f64>() / alphas.len() as f64;
        assert!((avg - c.estimate).abs() < 1e-9);
    }

    #[test]
    fn theta_extremes() {
        let m = panel().select(&["x1", "x2"]).unwrap();
        let fe = fixed_effects(&m, false).unwrap();
        let re1 = random_effects_with(
            &m,
            &ReOptions { theta: ThetaChoice::Fixed(1.0), fallback: false },
        )
        .unwrap();
        assert_eq!(re1.names, vec!["x1", "x2"]);
        for j in 0..2 {
            assert!((re1.coefficients[j] - fe.coefficients[j]).abs() < 1e-10);
        }
        let re0 = random_effects_with(
            &m,
            &ReOptions { theta: ThetaChoice::Fixed(0.0), fallback: false },
        )
        .unwrap();
        let pooled = ols(&m, false).unwrap();
        for j in 0..3 {
            assert!((re0.coefficients[j] - pooled.coefficients[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn swamy_arora_theta_in_unit_interval() {
        let m = panel().select(&["x1", "x2"]).unwrap();
        let re = random_effects(&m).unwrap();
        let vc = re.variance_components.unwrap();
        assert!((0.0..=1.0).contains(&vc.theta));
        assert!(vc.sigma2_u > 0.0);
        assert_eq!(re.names[0], "c");
    }

    #[test]
    fn under_identified_between_regression() {
        let m = panel();
        let small = m.filter_rows(&(0..30).map(|r| r < 18).collect::<Vec<_>>()).unwrap();
        let err = random_effects(&small).unwrap_err();
        assert!(matches!(err, Error::UnderIdentified(_)), "{err}");
        let re = random_effects_with(
            &small,
            &ReOptions { fallback: true, ..Default::default() },
        )
        .unwrap();
        assert_eq!(
            re.variance_components.unwrap().method,
            Some(VarianceMethod::WallaceHussain)
        );
        assert_eq!(re.notes.len(), 1);
    }
}
