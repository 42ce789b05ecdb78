use ndarray::{array, Array1, Array2};

use super::*;
use crate::linalg::normalize;
use crate::power::{correlated_start, run_power, PowerConfig, TraceLevel};
use crate::rng;
use crate::tensor::{random_components, ComponentDistribution, FactoredTensor3};

fn random_factored(d: usize, k: usize, seed: u64) -> FactoredTensor3 {
    FactoredTensor3::unit_weights(random_components(d, k, seed, ComponentDistribution::UnitSphere).unwrap()).unwrap()
}

fn full_trace(t: &FactoredTensor3, c0: f64, iters: usize, seed: u64) -> crate::power::IterationTrace {
    let mut r = rng::stream(seed, 77);
    let x0 = correlated_start(&mut r, t.component(0), c0).unwrap();
    let cfg = PowerConfig {
        max_iters: Some(iters),
        trace_level: TraceLevel::Full,
        track_target: Some(0),
        ..Default::default()
    };
    run_power(t, x0.view(), &cfg, Some(t)).unwrap()
}

#[test]
fn star_norm_basics() {
    let t = random_factored(10, 20, 1);
    let a = t.components();
    assert!(star_norm(a.view(), a.column(3)).unwrap() >= 1.0 - 1e-12);
    let a = Array2::from_shape_vec((3, 2), vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
    assert_eq!(star_norm(a.view(), array![0.0, 0.0, 5.0].view()).unwrap(), 0.0);
    assert!(star_norm(a.view(), array![1.0, 0.0].view()).is_err());
}

#[test]
fn star_norm_gaussian_max_correlation() {
    let (d, k) = (500, 1000);
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let a = random_factored(d, k, seed);
        let mut r = rng::seeded(100 + seed);
        let u = rng::gaussian_vec(&mut r, d, 1.0);
        let ratio = star_norm(a.components().view(), u.view()).unwrap() / crate::linalg::norm(u.view());
        worst = worst.max(ratio);
    }
    assert!(worst < 5.0 * (2.0 * (1000f64).ln() / 500.0).sqrt(), "{worst}");
}

#[test]
fn star_norm_duality() {
    for seed in 0..20 {
        let a = random_factored(8, 15, seed);
        let mut r = rng::seeded(seed + 50);
        let u = rng::gaussian_vec(&mut r, 8, 1.0);
        let s = star_norm(a.components().view(), u.view()).unwrap();
        let l2 = crate::linalg::norm(a.components().t().dot(&u).view());
        assert!(s <= l2 && l2 <= (15f64).sqrt() * s);
    }
}

#[test]
fn chain_axis_aligned_constraint() {
    let (d, k) = (3, 4);
    let u = array![1.0, -2.0, 0.5];
    let mut chain = ConstraintChain::new(d, k);
    chain.push_right(array![1.0, 0.0, 0.0, 0.0].view(), u.view()).unwrap();
    let m = chain.mean();
    for i in 0..d {
        assert_eq!(m[[i, 0]], u[i]);
        for j in 1..k {
            assert_eq!(m[[i, j]], 0.0);
        }
    }
    let cov = chain.covariance(2.0);
    for i in 0..d {
        for j in 0..k {
            let a = i * k + j;
            let expected = if j == 0 { 0.0 } else { 2.0 };
            assert!((cov[[a, a]] - expected).abs() < 1e-15);
        }
    }
}

#[test]
fn closed_form_matches_generic_conditioner() {
    let chain = random_chain(5, 7, 3, 0.5, 9).unwrap();
    let (l, c) = chain.linear_system();
    let g = GaussianConditioner::new(l, c);
    let mean = g.mean();
    let cov = g.covariance(0.5);
    let closed = chain.covariance(0.5);
    for a in 0..35 {
        assert!((mean[a] - chain.mean()[[a / 7, a % 7]]).abs() < 1e-10);
        for b in 0..35 {
            assert!((cov[(a, b)] - closed[[a, b]]).abs() < 1e-10);
        }
    }
}

#[test]
fn closed_form_samples_satisfy_constraints() {
    let chain = random_chain(6, 9, 5, 1.0, 3).unwrap();
    let mut r = rng::seeded(4);
    let s = chain.sample(&mut r, 1.0);
    for c in chain.constraints() {
        match c {
            Constraint::Right { w, p } => assert!((&s.dot(w) - p).iter().all(|e| e.abs() < 1e-10)),
            Constraint::Left { x, q } => assert!((&s.t().dot(x) - q).iter().all(|e| e.abs() < 1e-10)),
        }
    }
}

#[test]
fn inconsistent_constraint_rejected() {
    let mut chain = ConstraintChain::new(3, 3);
    let x = array![1.0, 0.0, 0.0];
    chain.push_left(x.view(), array![0.0, 0.0, 0.0].view()).unwrap();
    // Requires D w to have a nonzero first entry, but row 1 of D is zero.
    let err = chain.push_right(array![0.0, 1.0, 0.0].view(), array![1.0, 0.0, 0.0].view());
    assert!(matches!(err, Err(crate::Error::Precondition(_))));
    assert!(chain.push_right(array![0.0, 1.0, 0.0].view(), array![0.0, 2.0, 0.0].view()).is_ok());
}

#[test]
fn conditioning_lemma_small() {
    let rep = check_conditioning_lemma(6, 8, 1.0, 2000, 11).unwrap();
    assert!(rep.passed, "{rep:?}");
    assert_eq!(rep.chain_length, 1);
    assert!(check_conditioning_lemma(6, 8, 1.0, 50, 11).is_err());
}

#[test]
fn conditioning_zero_value() {
    let v = array![0.3, -1.0, 2.0, 0.1];
    let rep = check_conditioning_lemma_with(Array1::zeros(3).view(), v.view(), 0.7, 2000, 5).unwrap();
    assert!(rep.passed, "{rep:?}");
    assert!(rep.exact_mean_error < 1e-15);
}

#[test]
fn iterative_conditioning_small_and_deterministic() {
    let a = check_iterative_conditioning(5, 6, 3, 1500, 2).unwrap();
    let b = check_iterative_conditioning(5, 6, 3, 1500, 2).unwrap();
    assert_eq!(a, b);
    assert!(a.passed, "{a:?}");
    assert!(a.orthogonality_residual <= EXACT_TOL);
    assert!(check_iterative_conditioning(5, 6, 6, 1500, 2).is_err());
}

#[test]
fn monitor_needs_full_trace() {
    let t = random_factored(20, 30, 1);
    let mut r = rng::stream(1, 77);
    let x0 = correlated_start(&mut r, t.component(0), 0.5).unwrap();
    let cfg = PowerConfig { track_target: Some(0), ..Default::default() };
    let trace = run_power(&t, x0.view(), &cfg, Some(&t)).unwrap();
    assert!(monitor_hypotheses(&trace, &t, 0).is_err());
}

#[test]
fn monitor_records_and_identities() {
    let t = random_factored(40, 80, 3);
    let trace = full_trace(&t, 0.5, 6, 8);
    let rep = monitor_hypotheses(&trace, &t, 0).unwrap();
    assert_eq!(rep.records.len(), trace.steps.len());
    let first = &rep.records[0];
    assert!((first.proj_x_norm - 1.0).abs() < 1e-15);
    assert_eq!(first.proj_x_parallel, 0.0);
    assert!(first.proj_w_norm.is_none() && first.u_norm.is_none() && first.v_prev_norm.is_none());
    assert!(rep.projection_identity_error < 1e-10);
    for r in &rep.records {
        assert!(r.proj_x_norm >= 0.0 && r.v_norm >= 0.0 && r.progress >= 0.0);
        assert!(r.proj_w_inf.unwrap_or(0.0) <= r.proj_w_norm.unwrap_or(0.0) + 1e-15);
    }
    let corrs: Vec<f64> = trace.correlations().iter().map(|c| c.abs()).collect();
    let mine: Vec<f64> = rep.records.iter().map(|r| r.progress).collect();
    for (a, b) in corrs.iter().zip(&mine) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn second_step_w_projection_is_raw_norm() {
    // W[0] is empty, so the step-2 projection is the full squared correlation vector.
    let t = random_factored(15, 25, 4);
    let trace = full_trace(&t, 0.6, 3, 2);
    let rep = monitor_hypotheses(&trace, &t, 2).unwrap();
    let x0 = trace.steps[0].x.as_ref().unwrap();
    let y = t.components().t().dot(x0);
    let w: Array1<f64> = y.iter().enumerate().filter(|(i, _)| *i != 2).map(|(_, v)| v * v).collect();
    assert!((rep.records[1].proj_w_norm.unwrap() - crate::linalg::norm(w.view())).abs() < 1e-14);
}

#[test]
fn envelope_fit_contains_its_inputs() {
    let t = random_factored(30, 60, 5);
    let reports: Vec<_> = (0..4).map(|s| monitor_hypotheses(&full_trace(&t, 0.5, 5, s), &t, 0).unwrap()).collect();
    let fit = fit_envelopes(&reports).unwrap();
    assert!(reports.iter().all(|r| fit.contains(r, 1.0 + 1e-12)));
    assert!(fit_envelopes(&[]).is_err());
}

#[test]
fn fresh_randomness_trivial_and_spiky() {
    let rep = check_fresh_randomness(50, 400, 0, 200, 1).unwrap();
    assert!(rep.passed);
    let zero = &rep.variants[0];
    // ‖z*z‖ ≈ √(3k) against a bound of √k/40.
    assert!(zero.min_ratio > 40.0);
    let rep = check_fresh_randomness(50, 400, 5, 300, 2).unwrap();
    assert!(rep.passed, "{:?}", rep.variants);
    assert!(!rep.precondition_met);
}

#[test]
fn mixed_norm_bound_and_aligned_probe() {
    let rep = check_mixed_norm_bound(30, 90, 20, 1).unwrap();
    assert!(rep.passed, "{}", rep.max_ratio);
    assert!(check_mixed_norm_bound(30, 20, 5, 1).is_err());

    // u = a₂ / ‖a₂‖² gives ⟨u, a₂⟩ = 1; v = a₂ then picks out a₂ up to cross terms.
    let t = random_factored(200, 3, 7);
    let b = t.components().to_owned();
    let a2 = b.column(1).to_owned();
    let m = mixed_contraction_matrix(&b, &a2);
    let out = m.dot(&a2);
    let cos = out.dot(&a2) / crate::linalg::norm(out.view());
    assert!(cos > 0.9, "{cos}");
    let v = normalize(array![1.0, 2.0, 3.0]).unwrap();
    assert_eq!(v.len(), 3);
}
