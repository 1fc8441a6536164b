mod common;

use common::reflected_moments;
use nalgebra::{DMatrix, DVector};
use orthant_lab::experiments::{
    contraction_experiment, fluid_vs_diffusion, return_time_experiment, ContractionParams,
    ExperimentVerdict, FluidVsDiffusionParams, ReturnTimeParams,
};
use orthant_lab::model::{NormKind, SrbmModel};

fn one_dim() -> SrbmModel {
    SrbmModel::new(
        DVector::from_element(1, -1.0),
        DMatrix::identity(1, 1),
        DMatrix::identity(1, 1),
    )
    .unwrap()
}

#[test]
fn one_dimensional_contraction_matches_reflected_oracle() {
    let p = ContractionParams {
        scales: vec![4.0, 8.0],
        c: 2.0,
        gamma: 0.1,
        reps: 2000,
        h: 1e-4,
        seed: 8,
        norm: NormKind::L1,
    };
    let res = contraction_experiment(&one_dim(), &p).unwrap();
    assert_eq!(res.rows.len(), 2);
    for row in &res.rows {
        let (mass, exact) = reflected_moments(p.c * row.scale, row.scale, -1.0);
        assert!((mass - 1.0).abs() < 1e-6);
        assert!(
            (row.estimate - exact).abs() <= 3.0 * row.std_error,
            "M = {}: {} +- {} vs {exact}",
            row.scale,
            row.estimate,
            row.std_error
        );
    }
    assert_eq!(res.verdict, ExperimentVerdict::Pass);
    assert_eq!(res.summary["onset_scale"], 4.0);
}

#[test]
fn one_dimensional_return_time_grows_with_unit_slope() {
    let p = ReturnTimeParams {
        scales: vec![4.0, 8.0, 16.0],
        kappa: 1.0,
        delta: 0.1,
        reps: 400,
        h: 1e-3,
        seed: 9,
        cap: 200.0,
        norm: NormKind::L1,
    };
    let res = return_time_experiment(&one_dim(), &p).unwrap();
    assert_eq!(res.verdict, ExperimentVerdict::Pass, "{}", res.summary);
    for key in ["slope_full", "slope_half"] {
        let s = res.summary[key].as_f64().unwrap();
        assert!((s - 1.0).abs() < 0.1, "{key} = {s}");
    }
    // E tau = M - kappa for a unit downward drift
    for row in res.rows.iter().filter(|r| !r.label.ends_with("/all")) {
        let want = row.scale - p.kappa;
        assert!((row.estimate - want).abs() <= 3.0 * row.std_error + 0.6 * p.h.sqrt());
        assert_eq!(row.censored_fraction, 0.0);
    }
}

#[test]
fn heavy_censoring_is_inconclusive() {
    let p = ReturnTimeParams {
        scales: vec![8.0, 16.0],
        kappa: 1.0,
        delta: 0.1,
        reps: 20,
        h: 1e-2,
        seed: 10,
        cap: 3.0,
        norm: NormKind::L1,
    };
    let res = return_time_experiment(&one_dim(), &p).unwrap();
    assert_eq!(res.verdict, ExperimentVerdict::Inconclusive);
    assert!(res.rows.iter().any(|r| r.censored_fraction > 0.1));
}

#[test]
fn experiments_are_reproducible() {
    let m = SrbmModel::reference_example();
    let p = FluidVsDiffusionParams {
        horizon: 8.0,
        reps: 16,
        h: 1e-2,
        seed: 5,
    };
    let a = fluid_vs_diffusion(&m, &p).unwrap();
    let b = fluid_vs_diffusion(&m, &p).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.rows.len(), 9);
    let fluid: Vec<f64> = a
        .rows
        .iter()
        .filter(|r| r.label == "fluid_affine_z6")
        .map(|r| r.estimate)
        .collect();
    assert!((fluid[2] - 0.4).abs() < 1e-12);
    let c = fluid_vs_diffusion(&m, &FluidVsDiffusionParams { seed: 6, ..p }).unwrap();
    assert_ne!(a.rows, c.rows);
}

#[test]
fn foster_norm_needs_six_dimensions() {
    let p = ContractionParams {
        scales: vec![4.0],
        c: 2.0,
        gamma: 0.1,
        reps: 10,
        h: 1e-2,
        seed: 1,
        norm: NormKind::Foster,
    };
    assert!(contraction_experiment(&one_dim(), &p).is_err());
    assert!(fluid_vs_diffusion(
        &one_dim(),
        &FluidVsDiffusionParams {
            horizon: 1.0,
            reps: 4,
            h: 0.1,
            seed: 1
        }
    )
    .is_err());
}
