//! Diagnostics around 2SLS: endogeneity (Wu-Hausman, Durbin-Wu-Hausman),
//! heteroskedasticity (Pagan-Hall) and over-identification (Sargan,
//! Hansen J), plus the decision chain that picks robust errors.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimators::{prepare_iv, two_sls_on, EstimationResult, IvSample, IvSpec};
use crate::linalg::{first_dependent_column, inverse, least_squares, project};
use crate::panel::DesignMatrix;
use crate::stats::{chi2_sf, f_sf, Reference, TestResult};

const EXOGENOUS_NULL: &str = "the instrumented regressors are exogenous";

/// Wu-Hausman F from the control-function regression.
pub fn wu_hausman(m: &DesignMatrix, spec: &IvSpec) -> Result<TestResult> {
    Ok(endogeneity_tests(&prepare_iv(m, spec)?)?.0)
}

/// Durbin-Wu-Hausman chi-square from the control-function regression.
pub fn durbin_wu_hausman(m: &DesignMatrix, spec: &IvSpec) -> Result<TestResult> {
    Ok(endogeneity_tests(&prepare_iv(m, spec)?)?.1)
}

/// Both endogeneity statistics. Each endogenous regressor is regressed on
/// the instruments and its residual appended to the structural equation;
/// the residual block is tested jointly, as
/// `F = ((RSS_r - RSS_u)/m) / (RSS_u/(n-k-m))` and
/// `DWH = n (RSS_r - RSS_u) / RSS_r`.
pub(crate) fn endogeneity_tests(s: &IvSample) -> Result<(TestResult, TestResult)> {
    let m_end = s.n_endog();
    if m_end == 0 {
        return Err(Error::InvalidArgument(
            "endogeneity tests need at least one endogenous regressor".into(),
        ));
    }
    let n = s.n();
    let k = s.x.ncols();
    if n <= k + m_end {
        return Err(Error::DegreesOfFreedom(format!(
            "{n} rows for {} augmented regressors",
            k + m_end
        )));
    }
    let mut aug = DMatrix::zeros(n, k + m_end);
    aug.columns_mut(0, k).copy_from(&s.x);
    let mut names = s.x_names.clone();
    for (c, &j) in s.endog_pos.iter().enumerate() {
        let target = s.x.column(j).into_owned();
        let v = least_squares(&s.z, &target, &s.z_names)?.resid;
        aug.set_column(k + c, &v);
        names.push(format!("v_{}", s.x_names[j]));
    }
    if let Some(j) = first_dependent_column(&aug) {
        return Err(if j >= k {
            Error::WeakInstruments(format!(
                "first-stage residual `{}` is collinear with the regressors",
                names[j]
            ))
        } else {
            Error::RankDeficient(names[j].clone())
        });
    }
    let rss_r = least_squares(&s.x, &s.y, &s.x_names)?.rss;
    let rss_u = least_squares(&aug, &s.y, &names)?.rss;
    let mut notes = Vec::new();
    let mut diff = rss_r - rss_u;
    if diff < 0.0 {
        notes.push(format!("negative RSS difference {diff:e} set to 0"));
        diff = 0.0;
    }
    let df2 = n - k - m_end;
    let f = (diff / m_end as f64) / (rss_u / df2 as f64);
    let chi = n as f64 * diff / rss_r;
    let mut wh = TestResult::new("Wu-Hausman", f, Reference::F(m_end, df2), EXOGENOUS_NULL)
        .with_p(f_sf(f, m_end, df2));
    wh.notes = notes.clone();
    let mut dwh = TestResult::new(
        "Durbin-Wu-Hausman",
        chi,
        Reference::ChiSquare(m_end),
        EXOGENOUS_NULL,
    )
    .with_p(chi2_sf(chi, m_end));
    dwh.notes = notes;
    Ok((wh, dwh))
}

/// Indicator variables the Pagan-Hall test regresses squared residuals on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhIndicators {
    /// Non-constant instruments.
    #[default]
    Instruments,
    /// Non-constant instruments and their squares (0/1 columns once).
    InstrumentsSquared,
    /// Fitted value `X_hat b` of the dependent variable.
    Fitted,
    /// Fitted value and its square.
    FittedSquared,
}

impl std::str::FromStr for PhIndicators {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "instruments" | "ivlev" => Ok(Self::Instruments),
            "instruments_squared" | "ivsq" => Ok(Self::InstrumentsSquared),
            "fitted" | "fitlev" => Ok(Self::Fitted),
            "fitted_squared" | "fitsq" => Ok(Self::FittedSquared),
            other => Err(Error::Config(format!("unknown Pagan-Hall indicator set `{other}`"))),
        }
    }
}

/// Pagan-Hall heteroskedasticity test with the instruments (less the
/// constant) as indicators.
pub fn pagan_hall(m: &DesignMatrix, spec: &IvSpec) -> Result<TestResult> {
    pagan_hall_with(m, spec, PhIndicators::Instruments)
}

pub fn pagan_hall_with(m: &DesignMatrix, spec: &IvSpec, indicators: PhIndicators) -> Result<TestResult> {
    let s = prepare_iv(m, spec)?;
    let fit = two_sls_on(&s, false)?;
    pagan_hall_on(&s, &fit, indicators)
}

fn indicator_matrix(s: &IvSample, fit: &EstimationResult, which: PhIndicators) -> DMatrix<f64> {
    let varies = |c: &DVector<f64>| c.iter().any(|v| *v != c[0]);
    let mut cols: Vec<DVector<f64>> = Vec::new();
    match which {
        PhIndicators::Instruments | PhIndicators::InstrumentsSquared => {
            for c in s.z.column_iter() {
                let c = c.into_owned();
                if varies(&c) {
                    cols.push(c);
                }
            }
            if which == PhIndicators::InstrumentsSquared {
                let squares: Vec<DVector<f64>> = cols
                    .iter()
                    .map(|c| c.map(|v| v * v))
                    .filter(|sq| !cols.contains(sq))
                    .collect();
                cols.extend(squares);
            }
        }
        PhIndicators::Fitted | PhIndicators::FittedSquared => {
            let yhat = project(&s.z, &s.x) * &fit.coefficients;
            if which == PhIndicators::FittedSquared {
                let sq = yhat.map(|v| v * v);
                cols.push(yhat);
                cols.push(sq);
            } else {
                cols.push(yhat);
            }
        }
    }
    if cols.is_empty() {
        return DMatrix::zeros(s.n(), 0);
    }
    DMatrix::from_columns(&cols)
}

pub(crate) fn pagan_hall_on(s: &IvSample, fit: &EstimationResult, indicators: PhIndicators) -> Result<TestResult> {
    let u = &fit.residuals;
    let n = s.n();
    let nf = n as f64;
    let mut psi = indicator_matrix(s, fit, indicators);
    let p = psi.ncols();
    if p == 0 {
        return Err(Error::RankDeficient(
            "Pagan-Hall indicators: every instrument is constant".into(),
        ));
    }
    for mut col in psi.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    let u2 = u.map(|v| v * v);
    let sigma2 = u2.sum() / nf;
    let mu3 = u.iter().map(|v| v * v * v).sum::<f64>() / nf;
    let mu4 = u2.iter().map(|v| v * v).sum::<f64>() / nf;

    let d = psi.transpose() * &u2 / nf;
    let mut xu = s.x.clone();
    for (i, mut row) in xu.row_iter_mut().enumerate() {
        row *= u[i];
    }
    let gamma = psi.transpose() * &xu / nf;
    let x_hat = project(&s.z, &s.x);
    let q = x_hat.transpose() * &x_hat / nf;
    let q_inv = inverse(&q).ok_or_else(|| {
        Error::UnderIdentified("projected regressors are singular in Pagan-Hall".into())
    })?;
    let b1 = psi.transpose() * &psi * ((mu4 - sigma2 * sigma2) / nf);
    let b2 = (psi.transpose() * &x_hat / nf) * &q_inv * gamma.transpose() * (-2.0 * mu3);
    let b4 = &gamma * &q_inv * gamma.transpose() * (4.0 * sigma2);
    let b = &b1 + &b2 + b2.transpose() + &b4;
    let b_inv = inverse(&b).ok_or_else(|| {
        Error::RankDeficient("Pagan-Hall indicator variance matrix is singular".into())
    })?;
    let stat = nf * (d.transpose() * b_inv * &d)[(0, 0)];
    Ok(TestResult::new(
        "Pagan-Hall",
        stat,
        Reference::ChiSquare(p),
        "the disturbance is homoskedastic",
    )
    .with_p(chi2_sf(stat, p)))
}

const OVERID_NULL: &str = "the excluded instruments are valid";

/// Sargan statistic `u'P_Z u / (u'u/n)` from 2SLS residuals.
pub fn sargan(m: &DesignMatrix, spec: &IvSpec) -> Result<TestResult> {
    let s = prepare_iv(m, spec)?;
    let fit = two_sls_on(&s, false)?;
    Ok(sargan_on(&s, &fit.residuals))
}

pub(crate) fn sargan_on(s: &IvSample, u: &DVector<f64>) -> TestResult {
    let n = s.n() as f64;
    let pu = project(&s.z, &DMatrix::from_column_slice(u.len(), 1, u.as_slice()));
    let raw = u.dot(&pu.column(0)) / (u.norm_squared() / n);
    overid_result("Sargan", raw, s.overid_df())
}

/// Hansen J: the two-step efficient GMM criterion with a
/// heteroskedasticity-robust weight built from 2SLS residuals.
pub fn hansen_j(m: &DesignMatrix, spec: &IvSpec) -> Result<TestResult> {
    let s = prepare_iv(m, spec)?;
    let fit = two_sls_on(&s, false)?;
    hansen_j_on(&s, &fit.residuals)
}

pub(crate) fn hansen_j_on(s: &IvSample, u: &DVector<f64>) -> Result<TestResult> {
    let n = s.n() as f64;
    let l = s.z.ncols();
    let mut sm = DMatrix::<f64>::zeros(l, l);
    for (i, zi) in s.z.row_iter().enumerate() {
        sm += zi.transpose() * zi * (u[i] * u[i]);
    }
    sm /= n;
    let w = inverse(&sm).ok_or_else(|| {
        Error::RankDeficient("Hansen J weight matrix is singular".into())
    })?;
    let zx = s.z.transpose() * &s.x;
    let zy = s.z.transpose() * &s.y;
    let lhs = zx.transpose() * &w * &zx;
    let lhs_inv = inverse(&lhs)
        .ok_or_else(|| Error::UnderIdentified("GMM normal equations are singular".into()))?;
    let beta = lhs_inv * zx.transpose() * &w * zy;
    let u2 = &s.y - &s.x * beta;
    let g = s.z.transpose() * u2 / n;
    let raw = n * (g.transpose() * w * &g)[(0, 0)];
    Ok(overid_result("Hansen J", raw, s.overid_df()))
}

fn overid_result(name: &str, raw: f64, df: usize) -> TestResult {
    let mut t = TestResult::new(name, raw, Reference::ChiSquare(df), OVERID_NULL);
    if df == 0 {
        // exactly identified: the criterion is zero up to rounding
        t.statistic = 0.0;
        t.notes.push(format!("exactly identified; computed criterion {raw:e} reported as 0"));
    } else {
        t.p_value = Some(chi2_sf(raw, df));
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverIdTest {
    Sargan,
    HansenJ,
}

#[derive(Debug, Clone)]
pub struct DiagnosticsBundle {
    pub wu_hausman: TestResult,
    pub durbin_wu_hausman: TestResult,
    pub pagan_hall: TestResult,
    pub overid: TestResult,
    pub overid_kind: OverIdTest,
    /// Whether the reported 2SLS column uses robust errors.
    pub robust: bool,
    pub notes: Vec<String>,
}

/// 2SLS estimate together with its diagnostics.
#[derive(Debug, Clone)]
pub struct IvRun {
    pub estimate: EstimationResult,
    pub diagnostics: DiagnosticsBundle,
}

/// Robust-path decision chain: when Pagan-Hall rejects at `alpha` the 2SLS
/// column switches to robust errors and the over-identification row to
/// Hansen J; otherwise classical errors and Sargan. `force_robust`
/// overrides the decision.
pub fn iv_with_diagnostics(
    m: &DesignMatrix,
    spec: &IvSpec,
    alpha: f64,
    force_robust: Option<bool>,
) -> Result<IvRun> {
    iv_with_diagnostics_using(m, spec, alpha, force_robust, PhIndicators::Instruments)
}

/// As [`iv_with_diagnostics`] with a chosen Pagan-Hall indicator set.
pub fn iv_with_diagnostics_using(
    m: &DesignMatrix,
    spec: &IvSpec,
    alpha: f64,
    force_robust: Option<bool>,
    indicators: PhIndicators,
) -> Result<IvRun> {
    let s = prepare_iv(m, spec)?;
    let classical = two_sls_on(&s, false)?;
    let u = classical.residuals.clone();
    let (wu_hausman, durbin_wu_hausman) = endogeneity_tests(&s)?;
    let pagan_hall = pagan_hall_on(&s, &classical, indicators)?;
    let mut notes = Vec::new();
    let robust = match force_robust {
        Some(r) => {
            notes.push(format!(
                "robust errors {} by override",
                if r { "forced on" } else { "forced off" }
            ));
            r
        }
        None => pagan_hall.rejects(alpha).unwrap_or(false),
    };
    let (estimate, overid, overid_kind) = if robust {
        (two_sls_on(&s, true)?, hansen_j_on(&s, &u)?, OverIdTest::HansenJ)
    } else {
        (classical, sargan_on(&s, &u), OverIdTest::Sargan)
    };
    Ok(IvRun {
        estimate,
        diagnostics: DiagnosticsBundle {
            wu_hausman,
            durbin_wu_hausman,
            pagan_hall,
            overid,
            overid_kind,
            robust,
            notes,
        },
    })
}
