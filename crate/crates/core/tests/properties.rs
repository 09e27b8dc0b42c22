//! Property-based invariants. Data are drawn from a seeded generator so a
//! failing case shrinks to a seed plus a few scalars.

use gravpanel::dgp::{iv_cross_section, IvDgpSpec};
use gravpanel::estimators::{fixed_effects, two_sls};
use gravpanel::gravity::{abs_diff, avg_pair};
use gravpanel::ingest::{interpolate_gaps, read_panels, write_panels, SchemaConfig};
use gravpanel::ivdiag::{durbin_wu_hausman, hansen_j, sargan, wu_hausman};
use gravpanel::montecarlo::replication_rng;
use gravpanel::panel::{lag, quasi_demean, within_transform};
use gravpanel::unitroot::{adf_t, AdfSpec, Deterministic};
use gravpanel::xsdep::{frees_cd, friedman_cd, pesaran_cd, ResidualPanel};
use gravpanel::{DesignMatrix, IvSpec, PanelIndex, PanelSeries};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn design(seed: u64, n: usize, t: usize, k: usize) -> DesignMatrix {
    let mut rng = replication_rng(seed, 0);
    let rows = n * t;
    let x = DMatrix::from_fn(rows, k, |r, _| rng.sample::<f64, _>(StandardNormal) + (r / t) as f64);
    let y = DVector::from_fn(rows, |r, _| x[(r, 0)] + rng.sample::<f64, _>(StandardNormal));
    DesignMatrix::new(
        "y",
        y,
        (0..k).map(|j| format!("x{j}")).collect(),
        x,
        (0..rows).map(|r| r / t).collect(),
        (0..rows).map(|r| (r % t) as i32).collect(),
    )
    .unwrap()
}

fn series(seed: u64, n: usize, t: usize, lo: f64, hi: f64) -> PanelSeries {
    let mut rng = replication_rng(seed, 1);
    let idx = PanelIndex::new((0..n).map(|i| format!("P{i}")).collect(), 2000, t).unwrap();
    let vals: Vec<f64> = (0..n * t).map(|_| rng.random_range(lo..hi)).collect();
    PanelSeries::from_complete("s", idx, &vals).unwrap()
}

fn residuals(seed: u64, n: usize, t: usize) -> DMatrix<f64> {
    let mut rng = replication_rng(seed, 2);
    DMatrix::from_fn(n, t, |_, _| rng.sample(StandardNormal))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn within_is_idempotent(seed in any::<u64>(), n in 2usize..6, t in 2usize..8) {
        let w = within_transform(&design(seed, n, t, 2)).unwrap();
        let ww = within_transform(&w).unwrap();
        prop_assert!((w.x() - ww.x()).amax() < 1e-10);
        prop_assert!((w.y() - ww.y()).amax() < 1e-10);
    }

    #[test]
    fn within_plus_between_reconstructs_total_variance(seed in any::<u64>(), n in 2usize..6, t in 2usize..8) {
        let m = design(seed, n, t, 1);
        let w = within_transform(&m).unwrap();
        let col = m.x().column(0);
        let grand = col.mean();
        let total: f64 = col.iter().map(|v| (v - grand).powi(2)).sum();
        let within: f64 = w.x().column(0).iter().map(|v| v * v).sum();
        let means = m.entity_means();
        let between: f64 = (0..n).map(|i| t as f64 * (means[(i, 1)] - grand).powi(2)).sum();
        prop_assert!(close(total, within + between, 1e-8));
    }

    #[test]
    fn quasi_demean_at_zero_is_identity(seed in any::<u64>()) {
        let m = design(seed, 4, 5, 2);
        let q = quasi_demean(&m, &[0.0; 4]).unwrap();
        prop_assert_eq!(q.x(), m.x());
        prop_assert_eq!(q.y(), m.y());
    }

    #[test]
    fn lags_compose(seed in any::<u64>(), n in 2usize..5, t in 3usize..10) {
        let s = series(seed, n, t, -5.0, 5.0);
        let twice = lag(&lag(&s, 1).unwrap(), 1).unwrap();
        let two = lag(&s, 2).unwrap();
        prop_assert_eq!(twice.values(), two.values());
    }

    #[test]
    fn pair_transforms_are_symmetric_and_homogeneous(seed in any::<u64>(), lambda in 0.01f64..100.0) {
        let a = series(seed, 3, 4, 1.0, 50.0);
        let b = series(seed.wrapping_add(1), 3, 4, 60.0, 120.0);
        let scale = |s: &PanelSeries| s.map("scaled", |v| lambda * v).unwrap();
        let ab = avg_pair(&a, &b, "avg").unwrap();
        let ba = avg_pair(&b, &a, "avg").unwrap();
        prop_assert_eq!(ab.values(), ba.values());
        let d = abs_diff(&a, &b, "dif").unwrap();
        let db = abs_diff(&b, &a, "dif").unwrap();
        prop_assert_eq!(d.values(), db.values());
        let ab2 = avg_pair(&scale(&a), &scale(&b), "avg").unwrap();
        let d2 = abs_diff(&scale(&a), &scale(&b), "dif").unwrap();
        for k in 0..12 {
            prop_assert!((ab2.values()[k].unwrap() - ab.values()[k].unwrap() - lambda.ln()).abs() < 1e-12);
            prop_assert!((d2.values()[k].unwrap() - d.values()[k].unwrap() - lambda.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_leaves_complete_series_alone(seed in any::<u64>(), gap in 0usize..4) {
        let s = series(seed, 3, 6, 1.0, 9.0);
        let (out, repairs) = interpolate_gaps(&s, gap).unwrap();
        prop_assert_eq!(out, s);
        prop_assert!(repairs.is_empty());
    }

    #[test]
    fn pesaran_cd_ignores_positive_rescaling(seed in any::<u64>(), scales in prop::collection::vec(0.001f64..1000.0, 5)) {
        let r = residuals(seed, 5, 12);
        let mut s = r.clone();
        for (i, c) in scales.iter().enumerate() {
            s.row_mut(i).scale_mut(*c);
        }
        let a = pesaran_cd(&ResidualPanel::from_matrix(r).unwrap()).unwrap().statistic;
        let b = pesaran_cd(&ResidualPanel::from_matrix(s).unwrap()).unwrap().statistic;
        prop_assert!(close(a, b, 1e-12), "{} vs {}", a, b);
    }

    #[test]
    fn rank_statistics_ignore_monotone_transforms(seed in any::<u64>(), shift in -3.0f64..3.0) {
        let r = residuals(seed, 5, 10);
        let f = r.map(|v| (v + shift).exp() + (v * 0.5).powi(3));
        let (a, b) = (ResidualPanel::from_matrix(r).unwrap(), ResidualPanel::from_matrix(f).unwrap());
        prop_assert_eq!(friedman_cd(&a).unwrap().statistic, friedman_cd(&b).unwrap().statistic);
        prop_assert_eq!(frees_cd(&a).unwrap().statistic, frees_cd(&b).unwrap().statistic);
    }

    #[test]
    fn cd_statistics_ignore_entity_order(seed in any::<u64>()) {
        let r = residuals(seed, 6, 14);
        let mut order: Vec<usize> = (0..6).collect();
        order.shuffle(&mut replication_rng(seed, 3));
        let p = DMatrix::from_fn(6, 14, |i, t| r[(order[i], t)]);
        let (a, b) = (ResidualPanel::from_matrix(r).unwrap(), ResidualPanel::from_matrix(p).unwrap());
        prop_assert!(close(pesaran_cd(&a).unwrap().statistic, pesaran_cd(&b).unwrap().statistic, 1e-12));
        prop_assert!(close(friedman_cd(&a).unwrap().statistic, friedman_cd(&b).unwrap().statistic, 1e-12));
        prop_assert!(close(frees_cd(&a).unwrap().statistic, frees_cd(&b).unwrap().statistic, 1e-12));
    }

    #[test]
    fn fe_slopes_ignore_entity_constants_in_y(seed in any::<u64>(), shifts in prop::collection::vec(-50.0f64..50.0, 4)) {
        let m = design(seed, 4, 6, 2);
        let y = DVector::from_fn(m.n_rows(), |r, _| m.y()[r] + shifts[m.entity_of_row()[r]]);
        let a = fixed_effects(&m, false).unwrap();
        let b = fixed_effects(&m.with_y(y).unwrap(), false).unwrap();
        for j in 0..2 {
            let name = format!("x{j}");
            prop_assert!((a.coef(&name).unwrap().estimate - b.coef(&name).unwrap().estimate).abs() < 1e-10);
        }
    }

    #[test]
    fn tsls_residuals_are_orthogonal_to_instruments_when_exactly_identified(seed in any::<u64>()) {
        let spec = IvDgpSpec { n_instruments: 1, ..Default::default() };
        let m = iv_cross_section(&spec, &mut replication_rng(seed, 4)).unwrap();
        let fit = two_sls(&m, &IvSpec::with_excluded(&["x"], &["z1"]), false).unwrap();
        let u = &fit.residuals;
        let n = u.len() as f64;
        prop_assert!(u.sum().abs() / n < 1e-8);
        for name in ["w", "z1"] {
            let z = m.column(name).unwrap();
            prop_assert!(z.dot(u).abs() / n < 1e-8, "{}", name);
        }
    }

    /// Over-identified: residuals are orthogonal to the projected regressors
    /// `P_Z X`, not to each instrument.
    #[test]
    fn tsls_residuals_are_orthogonal_to_projected_regressors(seed in any::<u64>()) {
        let spec = IvDgpSpec { n_instruments: 3, ..Default::default() };
        let m = iv_cross_section(&spec, &mut replication_rng(seed, 4)).unwrap();
        let fit = two_sls(&m, &IvSpec::with_excluded(&["x"], &["z1", "z2", "z3"]), false).unwrap();
        let n = m.n_rows();
        let mut z = DMatrix::from_element(n, 5, 1.0);
        for (j, name) in ["w", "z1", "z2", "z3"].iter().enumerate() {
            z.set_column(j + 1, &m.column(name).unwrap());
        }
        let x = m.column("x").unwrap();
        let ztz = z.transpose() * &z;
        let xhat = &z * ztz.cholesky().unwrap().solve(&(z.transpose() * &x));
        prop_assert!(xhat.dot(&fit.residuals).abs() / (n as f64) < 1e-8);
    }

    #[test]
    fn adf_t_is_scale_free(seed in any::<u64>(), c in 0.001f64..1000.0, lags in 0usize..3) {
        let mut rng = replication_rng(seed, 5);
        let mut level = 0.0;
        let y: Vec<f64> = (0..40).map(|_| { level += rng.sample::<f64, _>(StandardNormal); level }).collect();
        let scaled: Vec<f64> = y.iter().map(|v| c * v).collect();
        for det in [Deterministic::Constant, Deterministic::Trend] {
            let spec = AdfSpec::new(det, lags);
            prop_assert!(close(adf_t(&y, spec).unwrap(), adf_t(&scaled, spec).unwrap(), 1e-10));
        }
    }

    #[test]
    fn pivotal_diagnostics_ignore_scaling_y(seed in any::<u64>(), c in 0.01f64..100.0) {
        let spec = IvDgpSpec { n_instruments: 3, endog_corr: 0.5, ..Default::default() };
        let m = iv_cross_section(&spec, &mut replication_rng(seed, 6)).unwrap();
        let scaled = m.with_y(m.y() * c).unwrap();
        let iv = IvSpec::with_excluded(&["x"], &["z1", "z2", "z3"]);
        for f in [wu_hausman, durbin_wu_hausman, sargan, hansen_j] {
            let a = f(&m, &iv).unwrap().statistic;
            let b = f(&scaled, &iv).unwrap().statistic;
            prop_assert!(close(a, b, 1e-8), "{} vs {}", a, b);
        }
    }
}

#[test]
fn canonical_csv_round_trips() {
    let spec = gravpanel::dgp::DgpSpec::default();
    let panel = gravpanel::dgp::generate(&spec).unwrap();
    let mut first = Vec::new();
    write_panels(std::slice::from_ref(&panel), &mut first).unwrap();
    let back = read_panels(first.as_slice(), &SchemaConfig::default()).unwrap();
    assert_eq!(back, vec![panel]);
    let mut second = Vec::new();
    write_panels(&back, &mut second).unwrap();
    assert_eq!(first, second);
}
