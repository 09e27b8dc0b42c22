//! Test-result record shared by every hypothesis test, and the reference
//! distributions used for p-values.

use std::fmt;

use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor, Normal, StudentsT};

/// Distribution a statistic is referred to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    StandardNormal,
    ChiSquare(usize),
    F(usize, usize),
    StudentT(usize),
    /// Frees' Q distribution (no closed-form CDF; decided by critical values).
    FreesQ,
    /// Distribution obtained by seeded simulation.
    Simulated,
}

impl fmt::Display for Reference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reference::StandardNormal => write!(f, "N(0,1)"),
            Reference::ChiSquare(df) => write!(f, "chi2({df})"),
            Reference::F(a, b) => write!(f, "F({a},{b})"),
            Reference::StudentT(df) => write!(f, "t({df})"),
            Reference::FreesQ => write!(f, "Frees Q"),
            Reference::Simulated => write!(f, "simulated"),
        }
    }
}

/// Which tail a critical-value decision looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalValue {
    pub level: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub name: String,
    pub statistic: f64,
    pub reference: Reference,
    pub p_value: Option<f64>,
    pub critical_values: Option<Vec<CriticalValue>>,
    pub tail: Tail,
    pub null_hypothesis: String,
    /// Short decision label, e.g. "Fixed" / "Random" for the Hausman test.
    pub annotation: Option<String>,
    /// Provenance and warnings.
    pub notes: Vec<String>,
}

impl TestResult {
    pub fn new(name: &str, statistic: f64, reference: Reference, null_hypothesis: &str) -> Self {
        Self {
            name: name.to_string(),
            statistic,
            reference,
            p_value: None,
            critical_values: None,
            tail: Tail::Upper,
            null_hypothesis: null_hypothesis.to_string(),
            annotation: None,
            notes: Vec::new(),
        }
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p_value = Some(p.clamp(0.0, 1.0));
        self
    }

    /// Degrees of freedom of chi-square / t references (numerator df for F).
    pub fn df(&self) -> Option<usize> {
        match self.reference {
            Reference::ChiSquare(d) | Reference::StudentT(d) | Reference::F(d, _) => Some(d),
            _ => None,
        }
    }

    pub fn critical_value(&self, level: f64) -> Option<f64> {
        self.critical_values
            .as_ref()?
            .iter()
            .find(|c| (c.level - level).abs() < 1e-12)
            .map(|c| c.value)
    }

    /// Rejection at `alpha`: by p-value when present (`p <= alpha`), else by
    /// the tabulated critical value for that level.
    pub fn rejects(&self, alpha: f64) -> Option<bool> {
        if let Some(p) = self.p_value {
            return Some(p <= alpha);
        }
        let cv = self.critical_value(alpha)?;
        Some(match self.tail {
            Tail::Upper => self.statistic > cv,
            Tail::Lower => self.statistic < cv,
        })
    }
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Two-sided standard-normal p-value.
pub fn normal_two_sided(z: f64) -> f64 {
    (2.0 * Normal::standard().sf(z.abs())).min(1.0)
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Upper-tail chi-square probability.
pub fn chi2_sf(x: f64, df: usize) -> f64 {
    if df == 0 {
        return 1.0;
    }
    if x <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(df as f64).map(|d| d.sf(x)).unwrap_or(f64::NAN)
}

/// Upper-tail F probability.
pub fn f_sf(x: f64, df1: usize, df2: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    FisherSnedecor::new(df1 as f64, df2 as f64)
        .map(|d| d.sf(x))
        .unwrap_or(f64::NAN)
}

/// Two-sided Student-t p-value.
pub fn t_two_sided(t: f64, df: usize) -> f64 {
    if !t.is_finite() {
        return if t.is_nan() { f64::NAN } else { 0.0 };
    }
    StudentsT::new(0.0, 1.0, df as f64)
        .map(|d| (2.0 * d.sf(t.abs())).min(1.0))
        .unwrap_or(f64::NAN)
}

pub fn t_quantile(p: f64, df: usize) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64)
        .map(|d| d.inverse_cdf(p))
        .unwrap_or(f64::NAN)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Empirical quantile (type 7, linear interpolation) of a sorted sample.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
