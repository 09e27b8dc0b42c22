//! Panel unit-root tests: entity ADF regressions, the IPS t-bar test and
//! Pesaran's cross-sectionally augmented CADF/CIPS test.
//!
//! Null moments of the ADF t-statistic (IPS) and the null distribution of
//! CIPS are obtained by seeded simulation and cached per configuration;
//! every result records the seed and replication count it used.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::montecarlo::replication_rng;
use crate::panel::PanelSeries;
use crate::stats::{normal_cdf, quantile_sorted, CriticalValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Deterministic {
    Constant,
    Trend,
}

impl fmt::Display for Deterministic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Deterministic::Constant => "constant",
            Deterministic::Trend => "constant+trend",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AdfSpec {
    pub deterministic: Deterministic,
    pub lags: usize,
}

impl Default for AdfSpec {
    fn default() -> Self {
        Self {
            deterministic: Deterministic::Constant,
            lags: 2,
        }
    }
}

impl AdfSpec {
    pub fn new(deterministic: Deterministic, lags: usize) -> Self {
        Self { deterministic, lags }
    }

    fn check(&self, t: usize) -> Result<()> {
        if t < 4 || self.lags + 4 > t {
            return Err(Error::DegreesOfFreedom(format!(
                "{} lags need at least {} periods, got {t}",
                self.lags,
                self.lags + 4
            )));
        }
        Ok(())
    }
}

/// Simulation controls for null distributions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOptions {
    pub seed: u64,
    /// Replications for the IPS moments of a single ADF t-statistic.
    pub moment_reps: usize,
    /// Replications for the CIPS null distribution.
    pub cips_reps: usize,
    /// When false, configurations without cached values are an error.
    pub allow: bool,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            seed: 20_030_101,
            moment_reps: 50_000,
            cips_reps: 10_000,
            allow: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitRootResult {
    pub name: String,
    pub spec: AdfSpec,
    pub per_entity_t: Vec<f64>,
    pub tbar: f64,
    /// IPS W statistic; None for CIPS.
    pub standardized: Option<f64>,
    pub p_value: Option<f64>,
    /// Lower-tail critical values of the decision statistic (W for IPS,
    /// CIPS itself for CADF) at 10/5/1%.
    pub critical_values: Vec<CriticalValue>,
    pub provenance: String,
}

impl UnitRootResult {
    /// Statistic compared with `critical_values`.
    pub fn decision_statistic(&self) -> f64 {
        self.standardized.unwrap_or(self.tbar)
    }

    /// Rejection of the unit-root null at `alpha`.
    pub fn rejects(&self, alpha: f64) -> bool {
        if let Some(p) = self.p_value {
            return p <= alpha;
        }
        self.critical_values
            .iter()
            .find(|c| (c.level - alpha).abs() < 1e-12)
            .map(|c| self.decision_statistic() < c.value)
            .unwrap_or(false)
    }
}

/// Rows of the ADF regression with optional extra columns per row.
fn adf_design(
    y: &[f64],
    spec: AdfSpec,
    extra: &dyn Fn(usize) -> Vec<f64>,
    n_extra: usize,
) -> (DMatrix<f64>, DVector<f64>, usize) {
    let t_len = y.len();
    let p = spec.lags;
    let dy: Vec<f64> = (1..t_len).map(|t| y[t] - y[t - 1]).collect();
    let trend = matches!(spec.deterministic, Deterministic::Trend) as usize;
    let k = 2 + trend + p + n_extra;
    let rows: Vec<usize> = (p + 1..t_len).collect();
    let mut x = DMatrix::zeros(rows.len(), k);
    let mut target = DVector::zeros(rows.len());
    for (i, &t) in rows.iter().enumerate() {
        target[i] = dy[t - 1];
        let mut c = 0;
        x[(i, c)] = 1.0;
        c += 1;
        if trend == 1 {
            x[(i, c)] = t as f64;
            c += 1;
        }
        x[(i, c)] = y[t - 1];
        c += 1;
        for l in 1..=p {
            x[(i, c)] = dy[t - 1 - l];
            c += 1;
        }
        for v in extra(t) {
            x[(i, c)] = v;
            c += 1;
        }
    }
    (x, target, 1 + trend)
}

fn t_of(x: &DMatrix<f64>, target: &DVector<f64>, j: usize) -> Result<f64> {
    let (n, k) = x.shape();
    if n <= k {
        return Err(Error::DegreesOfFreedom(format!(
            "{n} usable rows for {k} ADF regressors"
        )));
    }
    let names: Vec<String> = (0..k).map(|c| format!("adf{c}")).collect();
    let fit = least_squares(x, target, &names)?;
    let scale = target.amax().max(1e-300);
    if fit.rss.sqrt() <= 1e-10 * scale * (n as f64).sqrt() {
        return Err(Error::Degenerate("ADF regression fits exactly; t-statistic undefined".into()));
    }
    let s2 = fit.rss / (n - k) as f64;
    Ok(fit.coef[j] / (s2 * fit.xtx_inv[(j, j)]).sqrt())
}

/// t-statistic of `rho` in
/// `dy_t = a (+ b t) + rho y_{t-1} + sum_{l=1..p} c_l dy_{t-l} + e_t`,
/// fitted on the `T - 1 - p` usable rows.
pub fn adf_t(y: &[f64], spec: AdfSpec) -> Result<f64> {
    spec.check(y.len())?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("ADF series must be finite".into()));
    }
    let (x, target, j) = adf_design(y, spec, &|_| Vec::new(), 0);
    t_of(&x, &target, j)
}

/// CADF t-statistic: the ADF regression augmented with the lagged
/// cross-section mean `ybar_{t-1}` and `dybar_t, ..., dybar_{t-p}`.
pub fn cadf_t(y: &[f64], ybar: &[f64], spec: AdfSpec) -> Result<f64> {
    spec.check(y.len())?;
    if ybar.len() != y.len() {
        return Err(Error::InvalidArgument("cross-section mean has the wrong length".into()));
    }
    let p = spec.lags;
    let extra = |t: usize| {
        let mut v = vec![ybar[t - 1]];
        v.extend((0..=p).map(|l| ybar[t - l] - ybar[t - l - 1]));
        v
    };
    let (x, target, j) = adf_design(y, spec, &extra, p + 2);
    t_of(&x, &target, j)
}

fn panel_rows(panel: &PanelSeries) -> Result<Vec<Vec<f64>>> {
    if !panel.is_complete() {
        return Err(Error::Panel(format!(
            "`{}` has missing cells; unit-root tests need a complete panel",
            panel.name()
        )));
    }
    Ok((0..panel.index().n_entities())
        .map(|i| panel.entity_values(i).iter().map(|v| v.expect("complete")).collect())
        .collect())
}

fn check_rows(rows: &[Vec<f64>]) -> Result<usize> {
    let t = rows.first().map(Vec::len).unwrap_or(0);
    if rows.is_empty() || rows.iter().any(|r| r.len() != t) {
        return Err(Error::Panel("unit-root rows must be non-empty and equally long".into()));
    }
    Ok(t)
}

/// IPS t-bar test on a complete panel.
pub fn ips_test(panel: &PanelSeries, spec: AdfSpec) -> Result<UnitRootResult> {
    ips_rows(&panel_rows(panel)?, spec, &SimulationOptions::default())
}

/// IPS on raw entity series (any `N >= 1`).
pub fn ips_rows(rows: &[Vec<f64>], spec: AdfSpec, sim: &SimulationOptions) -> Result<UnitRootResult> {
    let t = check_rows(rows)?;
    let ts = rows.iter().map(|r| adf_t(r, spec)).collect::<Result<Vec<_>>>()?;
    let tbar = ts.iter().sum::<f64>() / ts.len() as f64;
    let (e, v, provenance) = ips_moments(t, spec, sim)?;
    let w = (ts.len() as f64).sqrt() * (tbar - e) / v.sqrt();
    Ok(UnitRootResult {
        name: "IPS".into(),
        spec,
        per_entity_t: ts,
        tbar,
        standardized: Some(w),
        p_value: Some(normal_cdf(w)),
        critical_values: vec![
            CriticalValue { level: 0.10, value: -1.2815515655446004 },
            CriticalValue { level: 0.05, value: -1.6448536269514722 },
            CriticalValue { level: 0.01, value: -2.3263478740408408 },
        ],
        provenance,
    })
}

/// CADF/CIPS test on a complete panel.
pub fn cadf_test(panel: &PanelSeries, spec: AdfSpec) -> Result<UnitRootResult> {
    cadf_rows(&panel_rows(panel)?, spec, &SimulationOptions::default())
}

pub fn cadf_rows(rows: &[Vec<f64>], spec: AdfSpec, sim: &SimulationOptions) -> Result<UnitRootResult> {
    let t = check_rows(rows)?;
    let n = rows.len();
    if n < 2 {
        return Err(Error::Panel("CADF needs at least 2 entities".into()));
    }
    let ts = cadf_statistics(rows, spec)?;
    let cips = ts.iter().sum::<f64>() / n as f64;
    let (null, provenance) = cips_null(n, t, spec, sim)?;
    let below = null.partition_point(|v| *v <= cips);
    let p = (below as f64 + 1.0) / (null.len() as f64 + 1.0);
    let critical_values = [0.10, 0.05, 0.01]
        .iter()
        .map(|&level| CriticalValue { level, value: quantile_sorted(&null, level) })
        .collect();
    Ok(UnitRootResult {
        name: "CIPS".into(),
        spec,
        per_entity_t: ts,
        tbar: cips,
        standardized: None,
        p_value: Some(p.min(1.0)),
        critical_values,
        provenance,
    })
}

fn cadf_statistics(rows: &[Vec<f64>], spec: AdfSpec) -> Result<Vec<f64>> {
    let n = rows.len() as f64;
    let t = rows[0].len();
    let ybar: Vec<f64> = (0..t).map(|s| rows.iter().map(|r| r[s]).sum::<f64>() / n).collect();
    rows.iter().map(|r| cadf_t(r, &ybar, spec)).collect()
}

type MomentKey = (usize, AdfSpec, u64, usize);
type CipsKey = (usize, usize, AdfSpec, u64, usize);

fn random_walk(rng: &mut impl Rng, t: usize) -> Vec<f64> {
    let mut y = Vec::with_capacity(t);
    let mut level = 0.0;
    for _ in 0..t {
        let e: f64 = rng.sample(StandardNormal);
        level += e;
        y.push(level);
    }
    y
}

/// Null mean and variance of the ADF t-statistic for `t` periods.
pub fn ips_moments(t: usize, spec: AdfSpec, sim: &SimulationOptions) -> Result<(f64, f64, String)> {
    spec.check(t)?;
    static CACHE: OnceLock<Mutex<HashMap<MomentKey, (f64, f64)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (t, spec, sim.seed, sim.moment_reps);
    let provenance = format!(
        "IPS moments: simulated random-walk null (T={t}, p={}, {}, seed={}, reps={})",
        spec.lags, spec.deterministic, sim.seed, sim.moment_reps
    );
    if let Some(&(e, v)) = cache.lock().expect("moment cache").get(&key) {
        return Ok((e, v, provenance));
    }
    if !sim.allow {
        return Err(Error::InvalidArgument(format!(
            "no IPS moments for T={t}, p={} and simulation is disabled",
            spec.lags
        )));
    }
    let draws: Vec<f64> = (0..sim.moment_reps)
        .into_par_iter()
        .filter_map(|r| {
            let mut rng = replication_rng(sim.seed, r as u64);
            adf_t(&random_walk(&mut rng, t), spec).ok()
        })
        .collect();
    let m = draws.len() as f64;
    let e = draws.iter().sum::<f64>() / m;
    let v = draws.iter().map(|x| (x - e) * (x - e)).sum::<f64>() / (m - 1.0);
    cache.lock().expect("moment cache").insert(key, (e, v));
    Ok((e, v, provenance))
}

/// Loadings of the common random-walk factor in the simulated CIPS null.
const CIPS_NULL_LOADINGS: (f64, f64) = (0.0, 2.0);

/// Sorted simulated CIPS values under a null of unit roots with a common
/// factor: `dy_it = g_i f_t + e_it`, `g_i ~ U(0, 2)`.
pub fn cips_null(n: usize, t: usize, spec: AdfSpec, sim: &SimulationOptions) -> Result<(Vec<f64>, String)> {
    spec.check(t)?;
    static CACHE: OnceLock<Mutex<HashMap<CipsKey, Vec<f64>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (n, t, spec, sim.seed, sim.cips_reps);
    let provenance = format!(
        "CIPS null: simulated common-factor random walks (N={n}, T={t}, p={}, {}, seed={}, reps={})",
        spec.lags, spec.deterministic, sim.seed, sim.cips_reps
    );
    if let Some(v) = cache.lock().expect("cips cache").get(&key) {
        return Ok((v.clone(), provenance));
    }
    if !sim.allow {
        return Err(Error::InvalidArgument(format!(
            "no CIPS critical values for N={n}, T={t} and simulation is disabled"
        )));
    }
    let mut draws: Vec<f64> = (0..sim.cips_reps)
        .into_par_iter()
        .filter_map(|r| {
            let mut rng = replication_rng(sim.seed ^ 0x00C1_1D5E, r as u64);
            let rows = factor_random_walks(&mut rng, n, t, CIPS_NULL_LOADINGS);
            let ts = cadf_statistics(&rows, spec).ok()?;
            Some(ts.iter().sum::<f64>() / n as f64)
        })
        .collect();
    if draws.len() < sim.cips_reps / 2 {
        return Err(Error::MonteCarlo("CIPS null simulation mostly failed".into()));
    }
    draws.sort_by(f64::total_cmp);
    cache.lock().expect("cips cache").insert(key, draws.clone());
    Ok((draws, provenance))
}

/// `N` unit-root series with increments `g_i f_t + e_it`,
/// `g_i ~ U(lo, hi)`, standard normal `f` and `e`.
pub fn factor_random_walks(rng: &mut impl Rng, n: usize, t: usize, loadings: (f64, f64)) -> Vec<Vec<f64>> {
    let g: Vec<f64> = (0..n).map(|_| rng.random_range(loadings.0..=loadings.1)).collect();
    let f: Vec<f64> = (0..t).map(|_| rng.sample(StandardNormal)).collect();
    g.iter()
        .map(|gi| {
            let mut level = 0.0;
            f.iter()
                .map(|ft| {
                    let e: f64 = rng.sample(StandardNormal);
                    level += gi * ft + e;
                    level
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn deterministic_trend_is_degenerate() {
        let y: Vec<f64> = (0..20).map(|t| t as f64).collect();
        assert!(adf_t(&y, AdfSpec::new(Deterministic::Trend, 0)).is_err());
    }

    #[test]
    fn scale_invariance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let y = random_walk(&mut rng, 30);
        let z: Vec<f64> = y.iter().map(|v| v * 7.5).collect();
        let spec = AdfSpec::default();
        assert!((adf_t(&y, spec).unwrap() - adf_t(&z, spec).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn lag_budget() {
        let y = vec![1.0, 2.0, 1.5, 3.0, 2.0];
        assert!(adf_t(&y, AdfSpec::new(Deterministic::Constant, 2)).is_err());
    }

    #[test]
    fn cadf_identical_pair_is_collinear() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let y = random_walk(&mut rng, 20);
        let sim = SimulationOptions { cips_reps: 50, ..Default::default() };
        assert!(cadf_rows(&[y.clone(), y], AdfSpec::default(), &sim).is_err());
    }

    #[test]
    fn single_entity_tbar() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let y = random_walk(&mut rng, 25);
        let sim = SimulationOptions { moment_reps: 500, ..Default::default() };
        let r = ips_rows(std::slice::from_ref(&y), AdfSpec::default(), &sim).unwrap();
        assert_eq!(r.tbar, adf_t(&y, AdfSpec::default()).unwrap());
    }
}
