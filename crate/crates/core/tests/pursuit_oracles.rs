mod common;

use common::erf_series;
use orthant_lab::pursuit::{
    closed_form_survival_single, log_grid, sample_captures, survival_curve, PursuitConfig,
};

/// `P(T > t)` for one gap of size `g` with variance 2 per unit time.
fn single_oracle(g: f64, t: f64) -> f64 {
    erf_series(g / (2.0 * t.sqrt()))
}

#[test]
fn closed_form_agrees_with_series() {
    for t in [0.3, 1.0, 7.0, 100.0] {
        for g in [0.5, 1.0, 2.0] {
            let (a, b) = (closed_form_survival_single(g, t), single_oracle(g, t));
            assert!((a - b).abs() < 1e-12, "t = {t}, g = {g}: {a} vs {b}");
        }
    }
}

#[test]
fn single_predator_survival_matches_oracle() {
    let cfg = PursuitConfig::new(vec![1.0], 1e-2, 100.0, 41);
    let curve = survival_curve(&cfg, 20_000, &log_grid(-1, 2, 4)).unwrap();
    for p in &curve.points {
        let want = single_oracle(1.0, p.t);
        let se = (want * (1.0 - want) / curve.reps as f64).sqrt();
        assert!(
            (p.survival - want).abs() <= 3.0 * se + 1e-12,
            "t = {}: {} vs {want}",
            p.t,
            p.survival
        );
    }
}

#[test]
fn bridge_correction_removes_grid_bias() {
    let mut cfg = PursuitConfig::new(vec![1.0], 0.05, 20.0, 42);
    let grid = [1.0, 5.0, 20.0];
    let corrected = survival_curve(&cfg, 20_000, &grid).unwrap();
    cfg.bridge_correction = false;
    let raw = survival_curve(&cfg, 20_000, &grid).unwrap();
    for (c, r) in corrected.points.iter().zip(&raw.points) {
        let want = single_oracle(1.0, c.t);
        let se = (want * (1.0 - want) / 20_000.0).sqrt();
        assert!((c.survival - want).abs() <= 3.0 * se);
        // coarse monitoring misses crossings
        assert!(r.survival > c.survival);
    }
}

#[test]
fn halving_step_keeps_corrected_survival_on_oracle() {
    let grid = [0.5, 2.0, 10.0];
    for h in [0.04, 0.02] {
        let cfg = PursuitConfig::new(vec![1.0], h, 10.0, 44);
        let curve = survival_curve(&cfg, 20_000, &grid).unwrap();
        for p in &curve.points {
            let want = single_oracle(1.0, p.t);
            let se = (want * (1.0 - want) / 20_000.0).sqrt();
            assert!(
                (p.survival - want).abs() <= 3.0 * se,
                "h = {h}, t = {}: {} vs {want}",
                p.t,
                p.survival
            );
        }
    }
}

#[test]
fn independent_pair_survival_is_product_of_singles() {
    let mut cfg = PursuitConfig::new(vec![1.0, 1.0], 1e-2, 100.0, 43);
    cfg.correlated = false;
    let curve = survival_curve(&cfg, 100_000, &log_grid(-1, 2, 4)).unwrap();
    for p in &curve.points {
        let want = single_oracle(1.0, p.t).powi(2);
        let se = (want * (1.0 - want) / curve.reps as f64).sqrt();
        assert!((p.survival - want).abs() <= 3.0 * se + 1e-12, "t = {}", p.t);
    }
    let slope = curve.fit.unwrap().slope;
    assert!((slope + 1.0).abs() <= 0.1, "slope {slope}");
}

#[test]
fn more_predators_never_survive_longer() {
    let reps = 2000;
    let runs: Vec<Vec<f64>> = (1..=5)
        .map(|n| {
            let cfg = PursuitConfig::new(vec![1.0; n], 1e-2, 50.0, 44);
            sample_captures(&cfg, reps)
                .unwrap()
                .iter()
                .map(|s| s.capture_time)
                .collect()
        })
        .collect();
    for n in 1..5 {
        for (i, (more, fewer)) in runs[n].iter().zip(&runs[n - 1]).enumerate() {
            assert!(more <= fewer, "replica {i}: n = {} beats n = {}", n + 1, n);
        }
    }
}
