//! Regression engines: pooled OLS, fixed effects, random effects, the Hausman
//! test and 2SLS with lagged instruments.

mod hausman;
mod iv;
mod panel;

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::linalg::{least_squares, sandwich};
use crate::panel::DesignMatrix;
use crate::stats::t_two_sided;

pub use hausman::{hausman_recommendation, hausman_test, hausman_test_at};
pub use iv::{two_sls, FirstStage, IvDetails, IvSpec};
pub(crate) use iv::{prepare_iv, two_sls_on, IvSample};
pub use panel::{
    fe_entity_effects, fixed_effects, random_effects, random_effects_with, ReOptions, ThetaChoice,
    VarianceComponents, VarianceMethod,
};

/// Label of the constant term.
pub const CONSTANT: &str = "c";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Ols,
    FixedEffects,
    RandomEffects,
    TwoStageLeastSquares,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Ols => "OLS",
            Method::FixedEffects => "FE",
            Method::RandomEffects => "RE",
            Method::TwoStageLeastSquares => "2SLS",
        })
    }
}

/// One row of a coefficient table.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
}

#[derive(Debug, Clone)]
pub struct EstimationResult {
    pub method: Method,
    pub names: Vec<String>,
    pub coefficients: DVector<f64>,
    pub vcov: DMatrix<f64>,
    pub se: Vec<f64>,
    pub t: Vec<f64>,
    pub p: Vec<f64>,
    pub n_obs: usize,
    pub df_resid: usize,
    /// Regressors removed before estimation (time-invariant under FE).
    pub dropped: Vec<String>,
    pub variance_components: Option<VarianceComponents>,
    pub robust: bool,
    /// Residuals in design-row order.
    pub residuals: DVector<f64>,
    pub rss: f64,
    pub r_squared: f64,
    /// FE only: grand-mean restored constant `mean(y) - mean(x)'b`.
    pub restored_constant: Option<Coefficient>,
    pub iv: Option<IvDetails>,
    pub notes: Vec<String>,
}

impl EstimationResult {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        method: Method,
        names: Vec<String>,
        coefficients: DVector<f64>,
        vcov: DMatrix<f64>,
        df_resid: usize,
        residuals: DVector<f64>,
        tss: f64,
        robust: bool,
    ) -> Self {
        let k = names.len();
        let se: Vec<f64> = (0..k).map(|j| vcov[(j, j)].max(0.0).sqrt()).collect();
        let t: Vec<f64> = (0..k).map(|j| coefficients[j] / se[j]).collect();
        let p: Vec<f64> = t.iter().map(|&tj| t_two_sided(tj, df_resid.max(1))).collect();
        let rss = residuals.norm_squared();
        let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { f64::NAN };
        Self {
            method,
            names,
            coefficients,
            vcov,
            se,
            t,
            p,
            n_obs: residuals.len(),
            df_resid,
            dropped: Vec::new(),
            variance_components: None,
            robust,
            residuals,
            rss,
            r_squared,
            restored_constant: None,
            iv: None,
            notes: Vec::new(),
        }
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn coef(&self, name: &str) -> Option<Coefficient> {
        if let Some(j) = self.position(name) {
            return Some(self.coefficient_at(j));
        }
        match &self.restored_constant {
            Some(c) if c.name == name => Some(c.clone()),
            _ => None,
        }
    }

    pub fn coefficient_at(&self, j: usize) -> Coefficient {
        Coefficient {
            name: self.names[j].clone(),
            estimate: self.coefficients[j],
            se: self.se[j],
            t: self.t[j],
            p: self.p[j],
        }
    }

    pub fn coefficients_table(&self) -> Vec<Coefficient> {
        (0..self.names.len()).map(|j| self.coefficient_at(j)).collect()
    }

    /// Classical sigma^2 estimate `rss / df`.
    pub fn sigma2(&self) -> f64 {
        self.rss / self.df_resid as f64
    }
}

pub(crate) fn centered_tss(y: &DVector<f64>) -> f64 {
    let m = y.mean();
    y.iter().map(|v| (v - m) * (v - m)).sum()
}

pub(crate) fn with_constant(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, k) = x.shape();
    let mut out = DMatrix::from_element(n, k + 1, 1.0);
    out.columns_mut(1, k).copy_from(x);
    out
}

/// Pooled OLS with an intercept labelled `c`. Robust covariance is HC1.
pub fn ols(m: &DesignMatrix, robust: bool) -> Result<EstimationResult> {
    let x = with_constant(m.x());
    let mut names = vec![CONSTANT.to_string()];
    names.extend(m.names().iter().cloned());
    let fit = least_squares(&x, m.y(), &names)?;
    let n = x.nrows();
    let k = x.ncols();
    if n <= k {
        return Err(crate::Error::DegreesOfFreedom(format!("{n} rows for {k} parameters")));
    }
    let df = n - k;
    let vcov = if robust {
        sandwich(&fit.xtx_inv, &x, &fit.resid, n as f64 / df as f64)
    } else {
        &fit.xtx_inv * (fit.rss / df as f64)
    };
    Ok(EstimationResult::assemble(
        Method::Ols,
        names,
        fit.coef,
        vcov,
        df,
        fit.resid,
        centered_tss(m.y()),
        robust,
    ))
}
