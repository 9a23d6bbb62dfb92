mod common;

use cbdc_portfolio::inference::{
    default_truth, design_matrix, fit, fit_matrix, inverse_link, log_likelihood, logit_link,
    odds_change, synth_panel, wald_one_sided, FitOptions, InferenceError, PanelData, SpecKind,
    Specification, DEFAULT_LITERACY,
};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #[test]
    fn link_round_trip(p in 1e-9f64..(1.0 - 1e-9)) {
        let z = logit_link(p).unwrap();
        prop_assert!((inverse_link(z) - p).abs() <= 1e-12 * p.max(1e-3) + 1e-15);
    }

    #[test]
    fn odds_changes_compose(a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let lhs = (1.0 + odds_change(a)) * (1.0 + odds_change(b));
        prop_assert!((lhs - (1.0 + odds_change(a + b))).abs() <= 1e-12 * lhs);
    }
}

#[test]
fn link_rejects_boundary() {
    assert!(matches!(logit_link(0.0), Err(InferenceError::Domain(_))));
    assert!(matches!(logit_link(1.0), Err(InferenceError::Domain(_))));
    assert!(inverse_link(-800.0) >= 0.0 && inverse_link(800.0) <= 1.0);
}

fn panel(kind: SpecKind, n: usize, seed: u64) -> PanelData {
    synth_panel(&default_truth(kind), n, DEFAULT_LITERACY, seed).unwrap()
}

#[test]
fn sandwich_is_positive_semidefinite() {
    for seed in 0..5 {
        let p = panel(SpecKind::ScoreDummies, 1500, seed);
        let f = fit(&p, &Specification::for_panel(SpecKind::ScoreDummies, &p)).unwrap();
        let eig = SymmetricEigen::new(f.robust_covariance.clone());
        let top = eig.eigenvalues.max();
        assert!(eig.eigenvalues.iter().all(|&e| e >= -1e-12 * top), "{:?}", eig.eigenvalues);
    }
}

/// Plain Newton on the logit likelihood, written independently of the crate.
fn newton_logit(x: &DMatrix<f64>, y: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let (n, k) = x.shape();
    let mut b = DVector::zeros(k);
    for _ in 0..100 {
        let mut g = DVector::zeros(k);
        let mut h = DMatrix::zeros(k, k);
        for i in 0..n {
            let xi = x.row(i).transpose();
            let p = 1.0 / (1.0 + (-(xi.dot(&b))).exp());
            g += &xi * (y[i] - p);
            h += &xi * xi.transpose() * (p * (1.0 - p));
        }
        let step = h.clone().lu().solve(&g).unwrap();
        b += &step;
        if step.amax() < 1e-13 {
            // HC0 sandwich with singleton clusters.
            let mut meat = DMatrix::zeros(k, k);
            for i in 0..n {
                let xi = x.row(i).transpose();
                let p = 1.0 / (1.0 + (-(xi.dot(&b))).exp());
                let s = &xi * (y[i] - p);
                meat += &s * s.transpose();
            }
            let hinv = h.try_inverse().unwrap();
            return (b, &hinv * meat * &hinv);
        }
    }
    panic!("reference Newton did not converge");
}

#[test]
fn singleton_clusters_reduce_to_ml_and_hc0() {
    let mut r = common::rng(21);
    let n = 600;
    let x = DMatrix::from_fn(n, 3, |_, j| if j == 0 { 1.0 } else { r.random_range(-1.5..1.5) });
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let eta: f64 = -0.3 + 0.8 * x[(i, 1)] - 0.5 * x[(i, 2)];
            f64::from(r.random_bool(1.0 / (1.0 + (-eta).exp())))
        })
        .collect();
    let ids: Vec<String> = (0..n).map(|i| i.to_string()).collect();
    let ids: Vec<&str> = ids.iter().map(String::as_str).collect();
    let names = vec!["c".to_string(), "x1".to_string(), "x2".to_string()];
    let f = fit_matrix(names, &x, &y, &vec![1.0; n], &ids, &FitOptions::default()).unwrap();
    let (b, v) = newton_logit(&x, &y);
    assert!((&f.coefficients - &b).amax() < 1e-9);
    assert!((&f.robust_covariance - &v).amax() < 1e-9);
}

#[test]
fn dummies_nest_the_linear_score() {
    let p = panel(SpecKind::ScoreDummies, 3000, 3);
    let lin = Specification::for_panel(SpecKind::LinearScore, &p);
    let dum = Specification::for_panel(SpecKind::ScoreDummies, &p);
    let fl = fit(&p, &lin).unwrap();
    let fd = fit(&p, &dum).unwrap();
    assert!(fd.log_likelihood >= fl.log_likelihood - 1e-8);

    // The linear fit is a point in the dummies' parameter space.
    let b = |n: &str| fl.coef(n).unwrap();
    let embedded: Vec<f64> = dum
        .coefficient_names()
        .iter()
        .map(|n| match n.as_str() {
            "beta1" => b("beta"),
            "beta2" => 2.0 * b("beta"),
            "beta3" => 3.0 * b("beta"),
            other => b(other),
        })
        .collect();
    let ll = log_likelihood(&p, &dum, &embedded).unwrap();
    assert!((ll - fl.log_likelihood).abs() < 1e-8 * fl.log_likelihood.abs());
    assert!(ll <= fd.log_likelihood + 1e-8);
}

#[test]
fn reported_log_likelihood_matches_recomputation() {
    let p = panel(SpecKind::LinearScore, 800, 4);
    let spec = Specification::for_panel(SpecKind::LinearScore, &p);
    let f = fit(&p, &spec).unwrap();
    let ll = log_likelihood(&p, &spec, f.coefficients.as_slice()).unwrap();
    assert!((ll - f.log_likelihood).abs() < 1e-9);
    assert_eq!(design_matrix(&p, &spec.coefficient_names()).unwrap().nrows(), 1600);
}

#[test]
fn wald_is_antisymmetric() {
    let p = panel(SpecKind::ScoreDummies, 2000, 5);
    let f = fit(&p, &Specification::for_panel(SpecKind::ScoreDummies, &p)).unwrap();
    let ij = wald_one_sided(&f, "beta1", "beta3").unwrap();
    let ji = wald_one_sided(&f, "beta3", "beta1").unwrap();
    assert!((ij.z + ji.z).abs() < 1e-12);
    assert!((ij.p_value + ji.p_value - 1.0).abs() < 1e-12);
}

#[test]
fn scaling_weights_leaves_estimates_unchanged() {
    let p = panel(SpecKind::LinearScore, 800, 6);
    let spec = Specification::for_panel(SpecKind::LinearScore, &p);
    let names = spec.coefficient_names();
    let x = design_matrix(&p, &names).unwrap();
    let y: Vec<f64> = p.rows().iter().map(|r| f64::from(u8::from(r.outcome))).collect();
    let ids: Vec<&str> = p.rows().iter().map(|r| r.household_id.as_str()).collect();
    let opts = FitOptions::default();
    let a = fit_matrix(names.clone(), &x, &y, &vec![1.0; y.len()], &ids, &opts).unwrap();
    let b = fit_matrix(names, &x, &y, &vec![3.5; y.len()], &ids, &opts).unwrap();
    assert!((&a.coefficients - &b.coefficients).amax() < 1e-10);
    assert!((&a.robust_covariance - &b.robust_covariance).amax() < 1e-10);
}

#[test]
fn panel_csv_round_trips() {
    let p = panel(SpecKind::LinearScore, 50, 7);
    let mut buf = Vec::new();
    p.write_csv(&mut buf).unwrap();
    let q = PanelData::read_csv(buf.as_slice()).unwrap();
    assert_eq!(p, q);
}
