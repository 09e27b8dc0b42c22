//! Cross-sectional dependence tests on panel residuals: Pesaran CD
//! (Pearson), Friedman (Spearman) and Frees (squared Spearman).

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution};

use crate::error::{Error, Result};
use crate::panel::{DesignMatrix, PanelIndex};
use crate::stats::{chi2_sf, normal_two_sided, quantile_sorted, CriticalValue, Reference, TestResult};

const INDEPENDENCE_NULL: &str = "cross-sectional independence";

/// Tabulated Frees Q critical values (10%, 5%, 1%) for `T = 14`.
pub const FREES_T14: [f64; 3] = [0.184, 0.243, 0.360];

/// Replications used when Frees critical values are simulated.
pub const FREES_SIM_REPS: usize = 100_000;

/// Default seed for simulated Frees critical values.
pub const FREES_SIM_SEED: u64 = 1995;

/// `N x T` residual matrix, one row per entity.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualPanel {
    index: PanelIndex,
    residuals: DMatrix<f64>,
}

impl ResidualPanel {
    pub fn new(index: PanelIndex, residuals: DMatrix<f64>) -> Result<Self> {
        if residuals.shape() != (index.n_entities(), index.n_periods()) {
            return Err(Error::Panel(format!(
                "residual matrix is {}x{}, index is {}x{}",
                residuals.nrows(),
                residuals.ncols(),
                index.n_entities(),
                index.n_periods()
            )));
        }
        if residuals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Panel("residuals must be finite".into()));
        }
        Ok(Self { index, residuals })
    }

    /// Unlabelled residuals: entities `E1..EN`, periods `1..T`.
    pub fn from_matrix(residuals: DMatrix<f64>) -> Result<Self> {
        let ids = (1..=residuals.nrows()).map(|i| format!("E{i}")).collect();
        let index = PanelIndex::new(ids, 1, residuals.ncols())?;
        Self::new(index, residuals)
    }

    /// Residuals of a regression on a balanced design, reshaped by entity.
    pub fn from_design(m: &DesignMatrix, resid: &[f64]) -> Result<Self> {
        if resid.len() != m.n_rows() || !m.is_balanced() {
            return Err(Error::Panel(
                "residual panel needs a balanced design and one residual per row".into(),
            ));
        }
        let t = m.groups()[0].len();
        let periods: Vec<i32> = m.period_of_row()[m.groups()[0].clone()].to_vec();
        for g in m.groups() {
            if m.period_of_row()[g.clone()] != periods[..] {
                return Err(Error::Panel("entities cover different periods".into()));
            }
        }
        let index = PanelIndex::from_periods(m.entity_ids().to_vec(), periods)?;
        let mat = DMatrix::from_row_slice(m.n_entities(), t, resid);
        Self::new(index, mat)
    }

    pub fn index(&self) -> &PanelIndex {
        &self.index
    }

    pub fn residuals(&self) -> &DMatrix<f64> {
        &self.residuals
    }

    fn n(&self) -> usize {
        self.residuals.nrows()
    }

    fn t(&self) -> usize {
        self.residuals.ncols()
    }

    fn row(&self, i: usize) -> Vec<f64> {
        self.residuals.row(i).iter().copied().collect()
    }
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Ranks `1..n` with ties given their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn check_variation(r: &ResidualPanel, what: &str) -> Result<()> {
    for i in 0..r.n() {
        let row = r.residuals.row(i);
        if row.iter().all(|v| *v == row[0]) {
            return Err(Error::Degenerate(format!(
                "entity `{}` has constant residuals; {what} undefined",
                r.index.entities()[i]
            )));
        }
    }
    Ok(())
}

fn pairwise(r: &ResidualPanel, series: &[Vec<f64>], f: impl Fn(f64) -> f64) -> f64 {
    let n = r.n();
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += f(pearson(&series[i], &series[j]));
        }
    }
    sum
}

fn spearman_rows(r: &ResidualPanel) -> Vec<Vec<f64>> {
    (0..r.n()).map(|i| average_ranks(&r.row(i))).collect()
}

/// Pesaran CD: `sqrt(2T/(N(N-1))) * sum_{i<j} rho_ij`, two-sided normal.
pub fn pesaran_cd(r: &ResidualPanel) -> Result<TestResult> {
    check_variation(r, "Pearson correlation")?;
    let (n, t) = (r.n() as f64, r.t() as f64);
    let rows: Vec<Vec<f64>> = (0..r.n()).map(|i| r.row(i)).collect();
    let sum = pairwise(r, &rows, |rho| rho);
    let cd = (2.0 * t / (n * (n - 1.0))).sqrt() * sum;
    Ok(TestResult::new("Pesaran CD", cd, Reference::StandardNormal, INDEPENDENCE_NULL)
        .with_p(normal_two_sided(cd)))
}

/// Mean pairwise Spearman correlation.
pub fn mean_spearman(r: &ResidualPanel) -> Result<f64> {
    check_variation(r, "Spearman correlation")?;
    let n = r.n() as f64;
    let ranks = spearman_rows(r);
    Ok(2.0 * pairwise(r, &ranks, |rho| rho) / (n * (n - 1.0)))
}

/// Friedman's statistic `(T-1)((N-1) R + 1)` with `R` the mean Spearman
/// correlation, referred to chi-square with `T-1` df. This is Friedman's
/// rank-sum statistic written through Kendall's W.
pub fn friedman_cd(r: &ResidualPanel) -> Result<TestResult> {
    let rbar = mean_spearman(r)?;
    let (n, t) = (r.n() as f64, r.t());
    let stat = (t as f64 - 1.0) * ((n - 1.0) * rbar + 1.0);
    Ok(TestResult::new("Friedman", stat, Reference::ChiSquare(t - 1), INDEPENDENCE_NULL)
        .with_p(chi2_sf(stat, t - 1)))
}

/// Frees' statistic `N (R2 - 1/(T-1))` with `R2` the mean squared Spearman
/// correlation. No p-value: the decision uses Q-distribution critical
/// values, tabulated for `T = 14` and simulated otherwise.
pub fn frees_cd(r: &ResidualPanel) -> Result<TestResult> {
    frees_cd_with(r, FREES_SIM_SEED, FREES_SIM_REPS)
}

pub fn frees_cd_with(r: &ResidualPanel, seed: u64, reps: usize) -> Result<TestResult> {
    if r.t() < 4 {
        return Err(Error::Panel("Frees test needs at least 4 periods".into()));
    }
    check_variation(r, "Spearman correlation")?;
    let n = r.n() as f64;
    let ranks = spearman_rows(r);
    let r2 = 2.0 * pairwise(r, &ranks, |rho| rho * rho) / (n * (n - 1.0));
    let stat = n * (r2 - 1.0 / (r.t() as f64 - 1.0));
    let (cv, provenance) = frees_critical_values(r.t(), seed, reps);
    let mut out = TestResult::new("Frees", stat, Reference::FreesQ, INDEPENDENCE_NULL);
    out.critical_values = Some(cv);
    out.notes.push(provenance);
    Ok(out)
}

/// Frees Q critical values at 10%, 5% and 1% for `t` periods, with a
/// provenance label.
pub fn frees_critical_values(t: usize, seed: u64, reps: usize) -> (Vec<CriticalValue>, String) {
    let levels = [0.10, 0.05, 0.01];
    if t == 14 {
        let cv = levels
            .iter()
            .zip(FREES_T14)
            .map(|(&level, value)| CriticalValue { level, value })
            .collect();
        return (cv, "Frees Q critical values: tabulated (T=14)".into());
    }
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64, usize), Vec<f64>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (t, seed, reps);
    let cached = cache.lock().expect("frees cache").get(&key).cloned();
    let values = match cached {
        Some(v) => v,
        None => {
            let v = simulate_frees_q(t, seed, reps);
            cache.lock().expect("frees cache").insert(key, v.clone());
            v
        }
    };
    let cv = levels
        .iter()
        .zip(values)
        .map(|(&level, value)| CriticalValue { level, value })
        .collect();
    (
        cv,
        format!("Frees Q critical values: simulated (T={t}, seed={seed}, reps={reps})"),
    )
}

/// Upper 10/5/1% quantiles of
/// `Q = a(T)(x1 - (T-1)) + b(T)(x2 - T(T-3)/2)` with independent
/// `x1 ~ chi2(T-1)`, `x2 ~ chi2(T(T-3)/2)`.
fn simulate_frees_q(t: usize, seed: u64, reps: usize) -> Vec<f64> {
    let tf = t as f64;
    let a = 4.0 * (tf + 2.0) / (5.0 * (tf - 1.0).powi(2) * (tf + 1.0));
    let b = 2.0 * (5.0 * tf + 6.0) / (5.0 * tf * (tf - 1.0) * (tf + 1.0));
    let df1 = tf - 1.0;
    let df2 = tf * (tf - 3.0) / 2.0;
    let c1 = ChiSquared::new(df1).expect("df1 > 0");
    let c2 = ChiSquared::new(df2).expect("df2 > 0");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<f64> = (0..reps)
        .map(|_| a * (c1.sample(&mut rng) - df1) + b * (c2.sample(&mut rng) - df2))
        .collect();
    q.sort_by(f64::total_cmp);
    [0.90, 0.95, 0.99].iter().map(|&p| quantile_sorted(&q, p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(rows: &[Vec<f64>]) -> ResidualPanel {
        let t = rows[0].len();
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        ResidualPanel::from_matrix(DMatrix::from_row_slice(rows.len(), t, &flat)).unwrap()
    }

    fn wave(t: usize, phase: f64) -> Vec<f64> {
        (0..t).map(|s| (s as f64 * 0.9 + phase).sin() + 0.01 * s as f64).collect()
    }

    #[test]
    fn pesaran_identical_and_flipped() {
        let a = wave(14, 0.3);
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        let cd = pesaran_cd(&panel(&[a.clone(), a.clone()])).unwrap();
        assert!((cd.statistic - 14f64.sqrt()).abs() < 1e-12);
        assert!(cd.p_value.unwrap() < 0.001);
        let cd = pesaran_cd(&panel(&[a, neg])).unwrap();
        assert!((cd.statistic + 14f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn friedman_limits() {
        let a = wave(10, 0.0);
        let p = panel(&[a.clone(), a.clone(), a.clone(), a]);
        let f = friedman_cd(&p).unwrap();
        assert!((f.statistic - 4.0 * 9.0).abs() < 1e-12);
        assert_eq!(f.reference, Reference::ChiSquare(9));
        // ranks (1,2,3,4) vs (2,4,1,3)... choose a pair with zero Spearman
        let x = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let y = vec![2.0, 5.0, 3.0, 1.0, 4.0];
        let r = average_ranks(&x);
        let s = average_ranks(&y);
        assert!(pearson(&r, &s).abs() < 1e-15);
        let f = friedman_cd(&panel(&[x, y])).unwrap();
        assert!((f.statistic - 4.0).abs() < 1e-12);
    }

    #[test]
    fn frees_identical_series_rejects() {
        let a = wave(14, 1.0);
        let p = panel(&[a.clone(), a.clone(), a]);
        let f = frees_cd(&p).unwrap();
        assert!((f.statistic - 3.0 * (1.0 - 1.0 / 13.0)).abs() < 1e-12);
        assert_eq!(f.p_value, None);
        assert_eq!(f.rejects(0.01), Some(true));
        assert_eq!(f.critical_value(0.05), Some(0.243));
    }

    #[test]
    fn simulated_frees_values_match_table_at_t14() {
        let q = simulate_frees_q(14, 7, 100_000);
        for (sim, tab) in q.iter().zip(FREES_T14) {
            assert!((sim - tab).abs() < 0.01, "{sim} vs {tab}");
        }
    }

    #[test]
    fn ties_get_average_ranks() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn constant_entity_is_an_error() {
        let p = panel(&[wave(6, 0.0), vec![1.0; 6]]);
        assert!(matches!(pesaran_cd(&p), Err(Error::Degenerate(_))));
        assert!(matches!(friedman_cd(&p), Err(Error::Degenerate(_))));
    }
}
