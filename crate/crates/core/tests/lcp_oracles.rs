mod common;

use common::{brute_is_p, cramer, random_matrix, random_vector, rng, rows};
use nalgebra::{DMatrix, DVector};
use orthant_lab::fluid::{verify_affine_path, AffinePath};
use orthant_lab::lcp::{
    residual, skorokhod_step, solve_all, Degeneracy, SkorokhodProjector, Stability,
};
use orthant_lab::model::SrbmModel;
use proptest::prelude::*;

/// Exhaustive LCP solutions via Cramer's rule on every support.
fn brute_lcp(theta: &DVector<f64>, r: &DMatrix<f64>) -> Vec<(Vec<f64>, Vec<f64>)> {
    let d = theta.len();
    let full = rows(r);
    let mut out: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for mask in 0u32..(1 << d) {
        let idx: Vec<usize> = (0..d).filter(|i| mask & (1 << i) != 0).collect();
        let sub: Vec<Vec<f64>> = idx
            .iter()
            .map(|&i| idx.iter().map(|&j| full[i][j]).collect())
            .collect();
        let rhs: Vec<f64> = idx.iter().map(|&i| -theta[i]).collect();
        let Some(x) = (if idx.is_empty() {
            Some(vec![])
        } else {
            cramer(&sub, &rhs)
        }) else {
            continue;
        };
        let mut u = vec![0.0; d];
        for (k, &i) in idx.iter().enumerate() {
            u[i] = x[k];
        }
        let v: Vec<f64> = (0..d)
            .map(|i| theta[i] + (0..d).map(|j| full[i][j] * u[j]).sum::<f64>())
            .collect();
        let ok = u.iter().all(|&x| x >= -1e-9)
            && v.iter().all(|&x| x >= -1e-9)
            && idx.iter().all(|&i| v[i] <= 1e-9);
        let dup = out.iter().any(|(fu, fv)| {
            fu.iter()
                .zip(&u)
                .chain(fv.iter().zip(&v))
                .all(|(a, b)| (a - b).abs() <= 1e-8)
        });
        if ok && !dup {
            out.push((u, v));
        }
    }
    out
}

#[test]
fn p_matrices_have_exactly_one_solution() {
    let mut g = rng(31);
    let mut trials = 0;
    while trials < 500 {
        let mut r = random_matrix(&mut g, 3, -1.0, 1.0);
        for i in 0..3 {
            r[(i, i)] += 1.0;
        }
        if !brute_is_p(&r) {
            continue;
        }
        trials += 1;
        let theta = random_vector(&mut g, 3, -2.0, 2.0);
        let rep = solve_all(&theta, &r).unwrap();
        assert_eq!(rep.solutions.len(), 1, "R = {r}, theta = {theta}");
        let s = &rep.solutions[0];
        assert!(residual(&theta, &r, &s.u, &s.v) < 1e-9);
    }
}

#[test]
fn enumeration_matches_cramer_oracle() {
    let mut g = rng(32);
    for _ in 0..300 {
        let r = random_matrix(&mut g, 3, -1.0, 2.0);
        let theta = random_vector(&mut g, 3, -1.0, 1.0);
        let got = solve_all(&theta, &r).unwrap().solutions;
        let want = brute_lcp(&theta, &r);
        assert_eq!(got.len(), want.len(), "R = {r}, theta = {theta}");
        for (u, v) in &want {
            assert!(got.iter().any(|s| {
                s.u.iter()
                    .zip(u)
                    .chain(s.v.iter().zip(v))
                    .all(|(a, b)| (a - b).abs() < 1e-7)
            }));
        }
    }
}

#[test]
fn example_solutions_and_their_fluid_paths() {
    let m = SrbmModel::reference_example();
    let rep = solve_all(m.theta(), m.r()).unwrap();
    let want = brute_lcp(m.theta(), m.r());
    assert_eq!(rep.solutions.len(), want.len());
    let divergent = rep
        .solutions
        .iter()
        .find(|s| s.stability == Stability::Divergent)
        .expect("divergent solution");
    assert_eq!(divergent.support_u, vec![0]);
    assert_eq!(divergent.degeneracy, Degeneracy::Degenerate);
    for s in &rep.solutions {
        let path = AffinePath {
            z0: vec![0.0; 6],
            u: s.u.clone(),
            v: s.v.clone(),
        };
        assert!(verify_affine_path(&path, m.theta(), m.r()).valid);
        // any perturbation of v off the solution breaks the path
        let mut bad = path.clone();
        bad.v[5] += 1e-3;
        assert!(!verify_affine_path(&bad, m.theta(), m.r()).valid);
    }
}

#[test]
fn one_dimensional_projection() {
    let r = DMatrix::from_element(1, 1, 2.0);
    let (dy, z) = skorokhod_step(&[-3.0], &r).unwrap();
    assert_eq!(dy, vec![1.5]);
    assert_eq!(z, vec![0.0]);
    let (dy, z) = skorokhod_step(&[0.7], &r).unwrap();
    assert_eq!((dy, z), (vec![0.0], vec![0.7]));
}

fn example_projector() -> (DMatrix<f64>, SkorokhodProjector) {
    let r = SrbmModel::reference_example().r().clone();
    let p = SkorokhodProjector::new(&r).unwrap();
    (r, p)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn projection_is_identity_inside_orthant(q in prop::collection::vec(0.0f64..10.0, 6)) {
        let (_, p) = example_projector();
        let (mut dy, mut z) = (vec![0.0; 6], vec![0.0; 6]);
        p.project(&q, &mut dy, &mut z).unwrap();
        prop_assert_eq!(dy, vec![0.0; 6]);
        prop_assert_eq!(z, q);
    }

    #[test]
    fn projection_solves_the_skorokhod_step(q in prop::collection::vec(-3.0f64..3.0, 6)) {
        let (r, p) = example_projector();
        let (mut dy, mut z) = (vec![0.0; 6], vec![0.0; 6]);
        p.project(&q, &mut dy, &mut z).unwrap();
        for i in 0..6 {
            let recon = q[i] + (0..6).map(|j| r[(i, j)] * dy[j]).sum::<f64>();
            prop_assert!((z[i] - recon).abs() < 1e-9);
            prop_assert!(z[i] >= 0.0 && dy[i] >= 0.0);
            prop_assert!(dy[i] * z[i] <= 1e-12);
        }
    }

    #[test]
    fn projection_is_positively_homogeneous(
        q in prop::collection::vec(-3.0f64..3.0, 6),
        lambda in 0.1f64..10.0,
    ) {
        let (_, p) = example_projector();
        let (mut dy, mut z) = (vec![0.0; 6], vec![0.0; 6]);
        p.project(&q, &mut dy, &mut z).unwrap();
        let qs: Vec<f64> = q.iter().map(|x| x * lambda).collect();
        let (mut dys, mut zs) = (vec![0.0; 6], vec![0.0; 6]);
        p.project(&qs, &mut dys, &mut zs).unwrap();
        for i in 0..6 {
            prop_assert!((dys[i] - lambda * dy[i]).abs() < 1e-9 * (1.0 + lambda));
            prop_assert!((zs[i] - lambda * z[i]).abs() < 1e-9 * (1.0 + lambda));
        }
    }
}
