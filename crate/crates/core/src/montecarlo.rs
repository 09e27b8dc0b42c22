//! Seeded replication harness for size, power and bias experiments.
//!
//! Replication `r` draws from its own ChaCha stream derived from
//! `(master seed, r)`, so results do not depend on how replications are
//! scheduled across threads.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dgp::{generate_with, DgpSpec};
use crate::error::{Error, Result};
use crate::estimators::{
    fixed_effects, hausman_test, random_effects_with, two_sls, IvSpec, ReOptions, ThetaChoice,
    VarianceMethod,
};
use crate::gravity::{build_dataset, DatasetOptions, Relation};
use crate::ivdiag;
use crate::stats::TestResult;
use crate::unitroot::{cadf_rows, ips_rows, AdfSpec, SimulationOptions};
use crate::xsdep::{frees_cd, friedman_cd, pesaran_cd, ResidualPanel};

/// Independent stream for replication `r`.
pub fn replication_rng(master: u64, r: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(r);
    rng
}

/// Share of failed replications above which a run aborts.
pub const MAX_FAILURE_SHARE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct Replicated<T> {
    /// Successful replications in replication order.
    pub values: Vec<T>,
    pub failures: usize,
    /// First few failure messages, for diagnosis.
    pub failure_messages: Vec<String>,
}

/// Runs `f` for replications `0..reps` in parallel. Failing replications
/// are excluded and counted; more than 1% failures abort the run.
pub fn replicate<T, F>(master: u64, reps: usize, f: F) -> Result<Replicated<T>>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> Result<T> + Sync,
{
    let outcomes: Vec<Result<T>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = replication_rng(master, r as u64);
            f(r, &mut rng)
        })
        .collect();
    let mut values = Vec::with_capacity(reps);
    let mut failures = 0;
    let mut failure_messages = Vec::new();
    for (r, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(v) => values.push(v),
            Err(e) => {
                failures += 1;
                if failure_messages.len() < 5 {
                    failure_messages.push(format!("replication {r}: {e}"));
                }
            }
        }
    }
    if failures as f64 > MAX_FAILURE_SHARE * reps as f64 {
        return Err(Error::MonteCarlo(format!(
            "{failures} of {reps} replications failed; first: {}",
            failure_messages.first().map(String::as_str).unwrap_or("")
        )));
    }
    Ok(Replicated {
        values,
        failures,
        failure_messages,
    })
}

/// Share of `decisions` that are true.
pub fn rejection_rate(decisions: &[bool]) -> f64 {
    if decisions.is_empty() {
        return f64::NAN;
    }
    decisions.iter().filter(|d| **d).count() as f64 / decisions.len() as f64
}

/// Statistics and estimates [`run_mc`] can collect per replication. All
/// work on the exports/outward-FDI relationship of the generated panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Analysis {
    PesaranCd,
    Friedman,
    Frees,
    Hausman,
    WuHausman,
    DurbinWuHausman,
    PaganHall,
    Sargan,
    HansenJ,
    Ips,
    Cadf,
    FeFdi,
    ReFdi,
    IvFdi,
}

impl Analysis {
    pub const ALL: [Analysis; 14] = [
        Analysis::PesaranCd,
        Analysis::Friedman,
        Analysis::Frees,
        Analysis::Hausman,
        Analysis::WuHausman,
        Analysis::DurbinWuHausman,
        Analysis::PaganHall,
        Analysis::Sargan,
        Analysis::HansenJ,
        Analysis::Ips,
        Analysis::Cadf,
        Analysis::FeFdi,
        Analysis::ReFdi,
        Analysis::IvFdi,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Analysis::PesaranCd => "pesaran_cd",
            Analysis::Friedman => "friedman",
            Analysis::Frees => "frees",
            Analysis::Hausman => "hausman",
            Analysis::WuHausman => "wu_hausman",
            Analysis::DurbinWuHausman => "durbin_wu_hausman",
            Analysis::PaganHall => "pagan_hall",
            Analysis::Sargan => "sargan",
            Analysis::HansenJ => "hansen_j",
            Analysis::Ips => "ips",
            Analysis::Cadf => "cadf",
            Analysis::FeFdi => "fe_fdi",
            Analysis::ReFdi => "re_fdi",
            Analysis::IvFdi => "iv_fdi",
        }
    }

    fn is_coefficient(self) -> bool {
        matches!(self, Analysis::FeFdi | Analysis::ReFdi | Analysis::IvFdi)
    }
}

impl fmt::Display for Analysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Analysis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let k = s.trim().to_ascii_lowercase();
        Analysis::ALL
            .into_iter()
            .find(|a| a.key() == k)
            .ok_or_else(|| Error::Config(format!("unknown Monte Carlo statistic `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectionSummary {
    pub name: String,
    /// Replications in which the statistic was computed.
    pub replications: usize,
    pub rate_10: f64,
    pub rate_05: f64,
    pub rate_01: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSummary {
    pub name: String,
    pub truth: f64,
    pub mean: f64,
    pub bias: f64,
    pub rmse: f64,
    /// Share of 95% t-intervals covering the truth.
    pub coverage_95: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub replications: usize,
    pub failures: usize,
    pub master_seed: u64,
    pub tests: Vec<RejectionSummary>,
    pub coefficients: Vec<CoefficientSummary>,
}

#[derive(Debug, Clone, PartialEq)]
enum Outcome {
    Test([bool; 3]),
    Coef { estimate: f64, covers: bool },
}

const LEVELS: [f64; 3] = [0.10, 0.05, 0.01];

fn decisions(t: &TestResult) -> Result<[bool; 3]> {
    let mut out = [false; 3];
    for (o, level) in out.iter_mut().zip(LEVELS) {
        *o = t.rejects(level).ok_or_else(|| {
            Error::MonteCarlo(format!("{} has no decision at {level}", t.name))
        })?;
    }
    Ok(out)
}

/// Runs `analyses` on `reps` panels drawn from `spec`, seeded by
/// `spec.seed`.
pub fn run_mc(spec: &DgpSpec, analyses: &[Analysis], reps: usize) -> Result<McSummary> {
    if reps < 100 {
        return Err(Error::InvalidArgument(format!(
            "Monte Carlo needs at least 100 replications, got {reps}"
        )));
    }
    spec.validate()?;
    let relation = Relation::ALL[0];
    let truth = spec.beta[0];
    let sim = SimulationOptions::default();
    let rep = replicate(spec.seed, reps, |_, rng| {
        if analyses.is_empty() {
            return Ok(Vec::new());
        }
        let panel = generate_with(spec, rng)?;
        let ds = build_dataset(&panel, relation, &DatasetOptions::default())?;
        let m = ds.design_matrix()?;
        let fdi = relation.fdi_name();
        let iv_spec = IvSpec::first_lags(&[fdi]);
        // one lag exactly identifies; over-identification tests need a second
        let overid_spec = IvSpec {
            lags: vec![1, 2],
            ..iv_spec.clone()
        };
        let mut out = Vec::with_capacity(analyses.len());
        for a in analyses {
            let o = match a {
                Analysis::PesaranCd | Analysis::Friedman | Analysis::Frees => {
                    let fe = fixed_effects(&m, false)?;
                    let r = ResidualPanel::from_design(&m, fe.residuals.as_slice())?;
                    let t = match a {
                        Analysis::PesaranCd => pesaran_cd(&r)?,
                        Analysis::Friedman => friedman_cd(&r)?,
                        _ => frees_cd(&r)?,
                    };
                    Outcome::Test(decisions(&t)?)
                }
                Analysis::Hausman => {
                    let fe = fixed_effects(&m, false)?;
                    let re = random_effects_with(&m, &re_options())?;
                    Outcome::Test(decisions(&hausman_test(&fe, &re)?)?)
                }
                Analysis::WuHausman => Outcome::Test(decisions(&ivdiag::wu_hausman(&m, &iv_spec)?)?),
                Analysis::DurbinWuHausman => {
                    Outcome::Test(decisions(&ivdiag::durbin_wu_hausman(&m, &iv_spec)?)?)
                }
                Analysis::PaganHall => Outcome::Test(decisions(&ivdiag::pagan_hall(&m, &iv_spec)?)?),
                Analysis::Sargan => Outcome::Test(decisions(&ivdiag::sargan(&m, &overid_spec)?)?),
                Analysis::HansenJ => Outcome::Test(decisions(&ivdiag::hansen_j(&m, &overid_spec)?)?),
                Analysis::Ips | Analysis::Cadf => {
                    let rows = entity_rows(&ds.fdi);
                    let spec = AdfSpec::default();
                    let r = if *a == Analysis::Ips {
                        ips_rows(&rows, spec, &sim)?
                    } else {
                        cadf_rows(&rows, spec, &sim)?
                    };
                    Outcome::Test([r.rejects(0.10), r.rejects(0.05), r.rejects(0.01)])
                }
                Analysis::FeFdi | Analysis::ReFdi | Analysis::IvFdi => {
                    let est = match a {
                        Analysis::FeFdi => fixed_effects(&m, false)?,
                        Analysis::ReFdi => random_effects_with(&m, &re_options())?,
                        _ => two_sls(&m, &iv_spec, false)?,
                    };
                    let c = est.coef(fdi).ok_or_else(|| {
                        Error::MonteCarlo(format!("`{fdi}` missing from the {} fit", est.method))
                    })?;
                    let half = crate::stats::t_quantile(0.975, est.df_resid) * c.se;
                    Outcome::Coef {
                        estimate: c.estimate,
                        covers: (c.estimate - truth).abs() <= half,
                    }
                }
            };
            out.push(o);
        }
        Ok(out)
    })?;

    let mut tests = Vec::new();
    let mut coefficients = Vec::new();
    for (j, a) in analyses.iter().enumerate() {
        let col: Vec<&Outcome> = rep.values.iter().map(|v| &v[j]).collect();
        if a.is_coefficient() {
            let est: Vec<f64> = col
                .iter()
                .map(|o| match o {
                    Outcome::Coef { estimate, .. } => *estimate,
                    _ => unreachable!(),
                })
                .collect();
            let cover: Vec<bool> = col
                .iter()
                .map(|o| matches!(o, Outcome::Coef { covers: true, .. }))
                .collect();
            let mean = est.iter().sum::<f64>() / est.len() as f64;
            let rmse = (est.iter().map(|e| (e - truth) * (e - truth)).sum::<f64>() / est.len() as f64).sqrt();
            coefficients.push(CoefficientSummary {
                name: a.key().to_string(),
                truth,
                mean,
                bias: mean - truth,
                rmse,
                coverage_95: rejection_rate(&cover),
            });
        } else {
            let d: Vec<[bool; 3]> = col
                .iter()
                .map(|o| match o {
                    Outcome::Test(d) => *d,
                    _ => unreachable!(),
                })
                .collect();
            let rate = |k: usize| rejection_rate(&d.iter().map(|x| x[k]).collect::<Vec<_>>());
            tests.push(RejectionSummary {
                name: a.key().to_string(),
                replications: d.len(),
                rate_10: rate(0),
                rate_05: rate(1),
                rate_01: rate(2),
            });
        }
    }
    Ok(McSummary {
        replications: reps,
        failures: rep.failures,
        master_seed: spec.seed,
        tests,
        coefficients,
    })
}

/// Swamy-Arora with the Wallace-Hussain fallback used across the crate
/// for gravity-sized designs.
pub fn re_options() -> ReOptions {
    ReOptions {
        theta: ThetaChoice::Estimate(VarianceMethod::SwamyArora),
        fallback: true,
    }
}

fn entity_rows(s: &crate::panel::PanelSeries) -> Vec<Vec<f64>> {
    (0..s.index().n_entities())
        .map(|i| s.entity_values(i).iter().map(|v| v.unwrap_or(f64::NAN)).collect())
        .collect()
}

/// Writes the summary as CSV: one row per test and per coefficient.
pub fn write_summary<W: Write>(s: &McSummary, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["kind", "name", "replications", "rate_10", "rate_05", "rate_01", "truth", "mean", "bias", "rmse", "coverage_95"])?;
    for t in &s.tests {
        w.write_record([
            "test".to_string(),
            t.name.clone(),
            t.replications.to_string(),
            format!("{:.4}", t.rate_10),
            format!("{:.4}", t.rate_05),
            format!("{:.4}", t.rate_01),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ])?;
    }
    for c in &s.coefficients {
        w.write_record([
            "coefficient".to_string(),
            c.name.clone(),
            (s.replications - s.failures).to_string(),
            String::new(),
            String::new(),
            String::new(),
            format!("{}", c.truth),
            format!("{:.6}", c.mean),
            format!("{:.6}", c.bias),
            format!("{:.6}", c.rmse),
            format!("{:.4}", c.coverage_95),
        ])?;
    }
    w.write_record([
        "meta".to_string(),
        "failures".to_string(),
        s.failures.to_string(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        format!("seed={}", s.master_seed),
    ])?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a: u64 = replication_rng(1, 0).random();
        let b: u64 = replication_rng(1, 1).random();
        let c: u64 = replication_rng(1, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn failures_above_one_percent_abort() {
        let r = replicate(5, 200, |r, _| {
            if r % 100 == 0 {
                Err(Error::Degenerate("planted".into()))
            } else {
                Ok(r)
            }
        })
        .unwrap();
        assert_eq!(r.failures, 2);
        assert_eq!(r.values.len(), 198);
        let err = replicate(5, 100, |r, _| {
            if r < 2 { Err(Error::Degenerate("planted".into())) } else { Ok(r) }
        });
        assert!(matches!(err, Err(Error::MonteCarlo(_))));
    }

    #[test]
    fn empty_analysis_list() {
        let s = run_mc(&DgpSpec::default(), &[], 100).unwrap();
        assert_eq!(s.replications, 100);
        assert!(s.tests.is_empty() && s.coefficients.is_empty());
    }
}
