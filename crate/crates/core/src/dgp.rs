//! Synthetic data with known ground truth.
//!
//! [`generate`] emits a full bilateral panel in the ingestion schema whose
//! log trade flows follow the gravity equation with chosen coefficients.
//! The smaller generators produce bare designs for targeted experiments.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gravity::{build_dataset, DatasetOptions, Relation};
use crate::ingest::BilateralPanel;
use crate::panel::{DesignMatrix, PanelIndex, PanelSeries};

/// Regressor order of [`DgpSpec::beta`].
pub const BETA_NAMES: [&str; 10] = [
    "fdi", "gdpav", "gdpdif", "gdpcav", "gdpcdif", "gdpg", "popav", "bexr", "dist", "dummy",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EffectMode {
    /// Entity effects independent of the regressors.
    Random,
    /// Entity effects correlated with the entity component of log FDI.
    Correlated(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Heteroskedasticity {
    None,
    /// Error standard deviation multiplied by `exp(gamma * z)` with `z` the
    /// standardized FDI deviation.
    Fdi(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgpSpec {
    pub n_entities: usize,
    pub n_periods: usize,
    pub first_year: i32,
    pub intercept: f64,
    /// Coefficients in [`BETA_NAMES`] order.
    pub beta: Vec<f64>,
    pub sigma_alpha: f64,
    pub sigma_e: f64,
    /// Cross-entity spread of mean log FDI.
    pub sigma_fdi_between: f64,
    /// Innovation scale of the FDI deviation process.
    pub sigma_fdi_within: f64,
    pub effect_mode: EffectMode,
    /// Correlation between FDI innovations and the trade error.
    pub endogeneity: f64,
    pub heteroskedasticity: Heteroskedasticity,
    /// Loading of the trade error on a common time factor.
    pub cross_dependence: f64,
    /// AR coefficient of the FDI deviation process; 1 is a unit root.
    pub persistence: f64,
    pub seed: u64,
}

impl Default for DgpSpec {
    fn default() -> Self {
        Self {
            n_entities: 6,
            n_periods: 14,
            first_year: 2000,
            intercept: 1.0,
            beta: vec![0.10, 0.8, 0.05, 0.3, 0.02, 0.2, 0.1, -0.05, -0.5, 0.2],
            sigma_alpha: 0.5,
            sigma_e: 0.1,
            sigma_fdi_between: 1.0,
            sigma_fdi_within: 0.2,
            effect_mode: EffectMode::Random,
            endogeneity: 0.0,
            heteroskedasticity: Heteroskedasticity::None,
            cross_dependence: 0.0,
            persistence: 0.5,
            seed: 42,
        }
    }
}

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n_entities < 2 || self.n_periods < 3 {
            return bad(format!(
                "need N >= 2 and T >= 3, got {}x{}",
                self.n_entities, self.n_periods
            ));
        }
        if self.beta.len() != BETA_NAMES.len() {
            return bad(format!("beta needs {} entries", BETA_NAMES.len()));
        }
        if let EffectMode::Correlated(r) = self.effect_mode {
            if !(-1.0..=1.0).contains(&r) {
                return bad(format!("effect correlation {r} outside [-1, 1]"));
            }
        }
        if !(-1.0..=1.0).contains(&self.endogeneity) {
            return bad(format!("endogeneity {} outside [-1, 1]", self.endogeneity));
        }
        if !(-1.0..=1.0).contains(&self.persistence) {
            return bad(format!("persistence {} outside [-1, 1]", self.persistence));
        }
        let scales = [self.sigma_alpha, self.sigma_e, self.sigma_fdi_between, self.sigma_fdi_within];
        if scales.iter().any(|s| !s.is_finite() || *s < 0.0) || self.sigma_e == 0.0 {
            return bad("scales must be finite and non-negative, sigma_e positive".into());
        }
        Ok(())
    }

    pub fn beta_of(&self, name: &str) -> Option<f64> {
        BETA_NAMES.iter().position(|n| *n == name).map(|j| self.beta[j])
    }
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Panel drawn from `spec.seed`.
pub fn generate(spec: &DgpSpec) -> Result<BilateralPanel> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    generate_with(spec, &mut rng)
}

/// Panel drawn from an explicit stream (Monte Carlo replications).
pub fn generate_with(spec: &DgpSpec, rng: &mut impl Rng) -> Result<BilateralPanel> {
    spec.validate()?;
    let (n, t) = (spec.n_entities, spec.n_periods);
    let partners: Vec<String> = (1..=n).map(|i| format!("P{i:02}")).collect();
    let index = PanelIndex::new(partners, spec.first_year, t)?;
    let at = |i: usize, s: usize| i * t + s;

    // entity-level draws
    let z: Vec<f64> = (0..n).map(|_| normal(rng)).collect();
    let rho_eff = match spec.effect_mode {
        EffectMode::Random => 0.0,
        EffectMode::Correlated(r) => r,
    };
    let alpha: Vec<f64> = z
        .iter()
        .map(|zi| spec.sigma_alpha * (rho_eff * zi + (1.0 - rho_eff * rho_eff).sqrt() * normal(rng)))
        .collect();
    let dist: Vec<f64> = (0..n).map(|_| (6.5 + 0.6 * normal(rng)).exp()).collect();
    let cee: Vec<f64> = (0..n).map(|i| if i < n / 2 { 1.0 } else { 0.0 }).collect();

    // reporter aggregates
    let gdp_r: Vec<f64> = (0..t).map(|s| (25.0 + 0.03 * s as f64 + 0.02 * normal(rng)).exp()).collect();
    let gdppc_r: Vec<f64> = (0..t).map(|s| (9.5 + 0.03 * s as f64 + 0.02 * normal(rng)).exp()).collect();
    let pop_r: Vec<f64> = (0..t).map(|s| (16.0 + 0.002 * s as f64 + 0.005 * normal(rng)).exp()).collect();
    let factor: Vec<f64> = (0..t).map(|_| normal(rng)).collect();

    let mut gdp_p = vec![0.0; n * t];
    let mut gdppc_p = vec![0.0; n * t];
    let mut pop_p = vec![0.0; n * t];
    let mut growth = vec![0.0; n * t];
    let mut bexr = vec![0.0; n * t];
    let mut eps = [vec![0.0; n * t], vec![0.0; n * t]];
    let mut fdi = [vec![0.0; n * t], vec![0.0; n * t]];
    let rho_en = spec.endogeneity;
    let phi = spec.persistence;
    let stationary_sd = if phi.abs() < 1.0 { 1.0 / (1.0 - phi * phi).sqrt() } else { 0.0 };
    for i in 0..n {
        let gdp_level = 25.5 + 0.8 * normal(rng);
        let pc_level = 9.0 + 0.6 * normal(rng);
        let pop_level = 16.5 + 0.7 * normal(rng);
        let fx_level = 0.5 * normal(rng);
        let mut fx = fx_level;
        for s in 0..t {
            let g = 2.5 + 3.0 * (0.8 * normal(rng)).tanh();
            growth[at(i, s)] = g;
            gdp_p[at(i, s)] = (gdp_level + 0.035 * s as f64 + 0.03 * normal(rng)).exp();
            gdppc_p[at(i, s)] = (pc_level + 0.03 * s as f64 + 0.03 * normal(rng)).exp();
            pop_p[at(i, s)] = (pop_level + 0.003 * s as f64 + 0.01 * normal(rng)).exp();
            fx += 0.05 * normal(rng);
            bexr[at(i, s)] = fx.exp();
        }
        for k in 0..2 {
            let mean = 8.0 + spec.sigma_fdi_between * z[i] + if k == 1 { 0.3 } else { 0.0 };
            let mut d = spec.sigma_fdi_within * stationary_sd * normal(rng);
            for s in 0..t {
                let e = normal(rng);
                let nu = normal(rng);
                let innov = spec.sigma_fdi_within * (rho_en * e + (1.0 - rho_en * rho_en).sqrt() * nu);
                d = phi * d + innov;
                let level = mean + 0.04 * s as f64 + d;
                fdi[k][at(i, s)] = level.exp();
                eps[k][at(i, s)] = e + spec.cross_dependence * factor[s];
            }
        }
    }

    let complete = |name: &str, v: &[f64]| PanelSeries::from_complete(name, index.clone(), v);
    let per_year = |name: &str, v: &[f64]| PanelSeries::from_fn(name, index.clone(), |_, s| Some(v[s]));
    let per_entity = |name: &str, v: &[f64]| PanelSeries::from_fn(name, index.clone(), |i, _| Some(v[i]));
    let ones = vec![1.0; n * t];
    let series = vec![
        complete("exports", &ones)?,
        complete("imports", &ones)?,
        complete("outfdi", &fdi[0])?,
        complete("infdi", &fdi[1])?,
        per_year("gdp_reporter", &gdp_r)?,
        complete("gdp_partner", &gdp_p)?,
        per_year("gdppc_reporter", &gdppc_r)?,
        complete("gdppc_partner", &gdppc_p)?,
        complete("growth_partner", &growth)?,
        per_year("pop_reporter", &pop_r)?,
        complete("pop_partner", &pop_p)?,
        complete("bexr", &bexr)?,
        per_entity("dist", &dist)?,
        per_entity("cee_partner", &cee)?,
    ];
    let mut panel = BilateralPanel::new("R", index.clone(), series)?;

    let relations = [Relation::ALL[0], Relation::ALL[3]];
    for (k, relation) in relations.into_iter().enumerate() {
        let ds = build_dataset(&panel, relation, &DatasetOptions::default())?;
        let cols = ds.regressors();
        let fdi_sd = {
            let v: Vec<f64> = ds.fdi.values().iter().map(|x| x.expect("complete")).collect();
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let sd = (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt();
            (m, sd.max(1e-12))
        };
        let trade = PanelSeries::from_fn(relation.y_name(), index.clone(), |i, s| {
            let mut y = spec.intercept + alpha[i];
            for (b, c) in spec.beta.iter().zip(&cols) {
                y += b * c.get(i, s).expect("complete");
            }
            let scale = match spec.heteroskedasticity {
                Heteroskedasticity::None => 1.0,
                Heteroskedasticity::Fdi(gamma) => {
                    let zf = (ds.fdi.get(i, s).expect("complete") - fdi_sd.0) / fdi_sd.1;
                    (gamma * zf).exp()
                }
            };
            y += spec.sigma_e * scale * eps[k][at(i, s)];
            Some(y.exp())
        })?;
        panel = panel.with_series(relation.trade_var(), trade)?;
    }
    Ok(panel)
}

/// One-regressor panel `y = beta x + alpha_i + e` for estimator checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplePanelSpec {
    pub n: usize,
    pub t: usize,
    pub beta: f64,
    pub sigma_alpha: f64,
    pub sigma_e: f64,
    /// Correlation of `alpha_i` with the entity component of `x`.
    pub effect_corr: f64,
    /// Scale of the entity component of `x`.
    pub x_between: f64,
    /// Scale of the time-varying part of `x`.
    pub x_within: f64,
}

impl Default for SimplePanelSpec {
    fn default() -> Self {
        Self {
            n: 6,
            t: 14,
            beta: 1.5,
            sigma_alpha: 1.0,
            sigma_e: 1.0,
            effect_corr: 0.0,
            x_between: 1.0,
            x_within: 1.0,
        }
    }
}

pub fn simple_panel(spec: &SimplePanelSpec, rng: &mut impl Rng) -> Result<DesignMatrix> {
    let (n, t) = (spec.n, spec.t);
    let r = spec.effect_corr;
    let mut y = Vec::with_capacity(n * t);
    let mut x = Vec::with_capacity(n * t);
    for _ in 0..n {
        let z = normal(rng);
        let alpha = spec.sigma_alpha * (r * z + (1.0 - r * r).sqrt() * normal(rng));
        for _ in 0..t {
            let xv = spec.x_between * z + spec.x_within * normal(rng);
            y.push(spec.beta * xv + alpha + spec.sigma_e * normal(rng));
            x.push(xv);
        }
    }
    DesignMatrix::new(
        "y",
        DVector::from_vec(y),
        vec!["x".into()],
        DMatrix::from_column_slice(n * t, 1, &x),
        (0..n * t).map(|r| r / t).collect(),
        (0..n * t).map(|r| (r % t) as i32).collect(),
    )
}

/// `N` AR(1) series `y_t = phi y_{t-1} + u_t` of length `T` (after a burn-in
/// of 50 when stationary; a unit root starts at 0). With `factor`, the
/// innovation is `g_i f_t + e_it` where `g_i ~ U(lo, hi)` and the factor is
/// itself AR(1) with coefficient `factor_phi`.
pub fn ar_panel(
    rng: &mut impl Rng,
    n: usize,
    t: usize,
    phi: f64,
    factor: Option<((f64, f64), f64)>,
) -> Vec<Vec<f64>> {
    let burn = if phi.abs() < 1.0 { 50 } else { 0 };
    let total = t + burn;
    let (g, f): (Vec<f64>, Vec<f64>) = match factor {
        Some(((lo, hi), fphi)) => {
            let g = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
            let mut level = 0.0;
            let f = (0..total)
                .map(|_| {
                    level = fphi * level + normal(rng);
                    level
                })
                .collect();
            (g, f)
        }
        None => (vec![0.0; n], vec![0.0; total]),
    };
    (0..n)
        .map(|i| {
            let mut y = 0.0;
            let mut out = Vec::with_capacity(t);
            for s in 0..total {
                y = phi * y + g[i] * f[s] + normal(rng);
                if s >= burn {
                    out.push(y);
                }
            }
            out
        })
        .collect()
}

/// Cross-section IV design `y = 1 + beta x + 0.5 w + u` with `x` driven by
/// `n_instruments` instruments and a first-stage error correlated with `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IvDgpSpec {
    pub n: usize,
    pub beta: f64,
    /// Correlation of the structural and first-stage errors.
    pub endog_corr: f64,
    /// First-stage coefficient on each instrument.
    pub strength: f64,
    pub n_instruments: usize,
    /// Correlation of the last instrument with `u` (0 = valid).
    pub invalid_corr: f64,
    /// Share in [0, 1] of the error variance proportional to `z1^2`.
    pub hetero: f64,
}

impl Default for IvDgpSpec {
    fn default() -> Self {
        Self {
            n: 200,
            beta: 1.0,
            endog_corr: 0.8,
            strength: 0.5,
            n_instruments: 2,
            invalid_corr: 0.0,
            hetero: 0.0,
        }
    }
}

impl IvDgpSpec {
    pub fn instrument_names(&self) -> Vec<String> {
        (1..=self.n_instruments).map(|j| format!("z{j}")).collect()
    }
}

/// Design with columns `x, w, z1..zL` (instruments excluded from `x` via
/// the IV spec).
pub fn iv_cross_section(spec: &IvDgpSpec, rng: &mut impl Rng) -> Result<DesignMatrix> {
    let l = spec.n_instruments;
    if l == 0 {
        return Err(Error::InvalidArgument("IV design needs an instrument".into()));
    }
    let rho = spec.endog_corr;
    let c = spec.invalid_corr;
    let k = 2 + l;
    let mut xs = Vec::with_capacity(spec.n * k);
    let mut y = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let e1 = normal(rng);
        let e2 = normal(rng);
        let w = normal(rng);
        let mut z: Vec<f64> = (0..l).map(|_| normal(rng)).collect();
        if c != 0.0 {
            z[l - 1] = c * e1 + (1.0 - c * c).sqrt() * z[l - 1];
        }
        let sd = ((1.0 - spec.hetero) + spec.hetero * z[0] * z[0]).sqrt();
        let u = sd * e1;
        let v = rho * e1 + (1.0 - rho * rho).sqrt() * e2;
        let x = spec.strength * z.iter().sum::<f64>() + 0.3 * w + v;
        y.push(1.0 + spec.beta * x + 0.5 * w + u);
        xs.push(x);
        xs.push(w);
        xs.extend(z);
    }
    let mut names = vec!["x".to_string(), "w".to_string()];
    names.extend(spec.instrument_names());
    DesignMatrix::cross_section("y", DVector::from_vec(y), names, DMatrix::from_row_slice(spec.n, k, &xs))
}
