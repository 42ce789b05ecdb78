//! Property checks shared by the property suite and the acceptance run.

#![allow(dead_code)]

use ndarray::{Array1, Array2};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use tensor_power::decompose::{decompose, ClusterConfig};
use tensor_power::power::{power_step, PowerConfig};
use tensor_power::probe::star_norm;
use tensor_power::tensor::{DenseTensor3, FactoredTensor3, Mode, Tensor3};

pub const CASES: u32 = 100;

pub fn config() -> Config {
    Config { cases: CASES, failure_persistence: None, ..Config::default() }
}

fn matrix(d: usize, k: usize) -> impl Strategy<Value = Array2<f64>> {
    proptest::collection::vec(-1.0f64..1.0, d * k)
        .prop_map(move |v| Array2::from_shape_vec((d, k), v).unwrap())
        .prop_filter("nonzero columns", |m| m.columns().into_iter().all(|c| c.dot(&c) > 1e-6))
}

fn vector(d: usize) -> impl Strategy<Value = Array1<f64>> {
    proptest::collection::vec(-1.0f64..1.0, d).prop_map(Array1::from)
}

fn unit_vector(d: usize) -> impl Strategy<Value = Array1<f64>> {
    vector(d).prop_filter("nonzero", |v| v.dot(v) > 1e-6).prop_map(|v| {
        let n = v.dot(&v).sqrt();
        v / n
    })
}

/// `(tensor, u, v, w)` with `d ∈ [2, 8]`, `k ∈ [1, 12]`.
pub fn factored_case() -> impl Strategy<Value = (FactoredTensor3, Array1<f64>, Array1<f64>, Array1<f64>)> {
    (2usize..=8, 1usize..=12).prop_flat_map(|(d, k)| {
        (matrix(d, k), proptest::collection::vec(-2.0f64..2.0, k), vector(d), vector(d), vector(d))
            .prop_map(|(a, w, u, v, x)| (FactoredTensor3::from_unnormalized(a, Array1::from(w)).unwrap(), u, v, x))
    })
}

fn close(a: &Array1<f64>, b: &Array1<f64>, tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

pub fn factored_dense_agreement(
    case: (FactoredTensor3, Array1<f64>, Array1<f64>, Array1<f64>),
) -> Result<(), TestCaseError> {
    let (t, u, v, w) = case;
    let dense = t.densify().unwrap();
    for mode in Mode::ALL {
        let a = t.contract_mode(mode, u.view(), v.view()).unwrap();
        let b = dense.contract_mode(mode, u.view(), v.view()).unwrap();
        prop_assert!(close(&a, &b, 1e-10), "mode {:?}: {:?} vs {:?}", mode, a, b);
    }
    let a = t.contract_scalar(u.view(), v.view(), w.view()).unwrap();
    let b = dense.contract_scalar(u.view(), v.view(), w.view()).unwrap();
    prop_assert!((a - b).abs() <= 1e-10);
    Ok(())
}

pub fn permutation_symmetry(
    case: (FactoredTensor3, Array1<f64>, Array1<f64>, Array1<f64>),
) -> Result<(), TestCaseError> {
    let (t, u, v, w) = case;
    let dense = t.densify().unwrap();
    let base = dense.max_abs().max(1.0);
    for perm in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
        let p = dense.permute_modes(perm);
        let diff = p.entries().iter().zip(dense.entries()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        prop_assert!(diff <= 1e-12 * base, "perm {:?} differs by {}", perm, diff);
    }
    let vals = [
        t.contract_scalar(u.view(), v.view(), w.view()).unwrap(),
        t.contract_scalar(v.view(), u.view(), w.view()).unwrap(),
        t.contract_scalar(w.view(), v.view(), u.view()).unwrap(),
        t.contract_scalar(u.view(), w.view(), v.view()).unwrap(),
    ];
    let scale = vals[0].abs().max(1.0);
    prop_assert!(vals.iter().all(|x| (x - vals[0]).abs() <= 1e-12 * scale));
    Ok(())
}

/// `T(I, −x, −x)` equals `T(I, x, x)` bit for bit, for factored and dense.
pub fn sign_flip_bit_equality(
    case: (FactoredTensor3, Array1<f64>, Array1<f64>, Array1<f64>),
) -> Result<(), TestCaseError> {
    let (t, u, _, _) = case;
    prop_assume!(u.dot(&u) > 1e-6);
    let x = &u / u.dot(&u).sqrt();
    let neg = -&x;
    let plus = t.contract_1(x.view(), x.view()).unwrap();
    let minus = t.contract_1(neg.view(), neg.view()).unwrap();
    prop_assert_eq!(&plus, &minus);
    let dense = t.densify().unwrap();
    prop_assert_eq!(dense.contract_1(x.view(), x.view()).unwrap(), dense.contract_1(neg.view(), neg.view()).unwrap());
    if let (Ok(a), Ok(b)) = (power_step(&t, x.view()), power_step(&t, neg.view())) {
        prop_assert_eq!(a, b);
    }
    Ok(())
}

pub fn star_norm_case() -> impl Strategy<Value = (Array2<f64>, Array1<f64>)> {
    (1usize..=10, 1usize..=20).prop_flat_map(|(d, k)| (matrix(d, k), vector(d)))
}

pub fn star_norm_duality(case: (Array2<f64>, Array1<f64>)) -> Result<(), TestCaseError> {
    let (a, u) = case;
    let k = a.ncols() as f64;
    let s = star_norm(a.view(), u.view()).unwrap();
    let l2 = a.t().dot(&u).mapv(|x| x * x).sum().sqrt();
    prop_assert!(s <= l2 * (1.0 + 1e-12) + 1e-300);
    prop_assert!(l2 <= k.sqrt() * s * (1.0 + 1e-12) + 1e-300);
    Ok(())
}

pub fn clustering_case() -> impl Strategy<Value = (FactoredTensor3, Vec<Array1<f64>>, f64)> {
    (3usize..=8, 1usize..=10, 1usize..=15, 0.2f64..=1.0).prop_flat_map(|(d, k, m, nu)| {
        (matrix(d, k), proptest::collection::vec(unit_vector(d), m), Just(nu))
            .prop_map(|(a, inits, nu)| (FactoredTensor3::unit_weights(normalize_columns(a)).unwrap(), inits, nu))
    })
}

fn normalize_columns(mut a: Array2<f64>) -> Array2<f64> {
    for mut c in a.columns_mut() {
        let n = c.dot(&c).sqrt();
        c /= n;
    }
    a
}

/// Emitted estimates are unit vectors with pairwise `|⟨x̂_i, x̂_j⟩| < ν/2`.
pub fn clustering_separation(case: (FactoredTensor3, Vec<Array1<f64>>, f64)) -> Result<(), TestCaseError> {
    let (t, inits, nu) = case;
    let pcfg = PowerConfig { max_iters: Some(10), ..PowerConfig::default() };
    let ccfg = ClusterConfig { nu, ..ClusterConfig::default() };
    let res = decompose(&t, &inits, &pcfg, &ccfg).unwrap();
    prop_assert!(res.len() <= inits.len());
    let e = &res.estimates;
    for i in 0..e.ncols() {
        prop_assert!((e.column(i).dot(&e.column(i)) - 1.0).abs() < 1e-10);
        for j in 0..i {
            let c = e.column(i).dot(&e.column(j)).abs();
            prop_assert!(c < nu / 2.0, "estimates {} and {} correlate {} ≥ ν/2 = {}", j, i, c, nu / 2.0);
        }
    }
    Ok(())
}

/// Runs every property over [`CASES`] random instances; returns the names
/// of failing properties with their messages.
pub fn run_all() -> Vec<(String, Result<(), String>)> {
    let mut out = Vec::new();
    let mut record = |name: &str, r: Result<(), proptest::test_runner::TestError<_>>| {
        out.push((name.to_string(), r.map_err(|e: proptest::test_runner::TestError<_>| format!("{e}"))));
    };
    record(
        "factored/dense agreement",
        TestRunner::new(config()).run(&factored_case(), factored_dense_agreement).map_err(erase),
    );
    record(
        "permutation symmetry",
        TestRunner::new(config()).run(&factored_case(), permutation_symmetry).map_err(erase),
    );
    record(
        "sign-flip bit equality",
        TestRunner::new(config()).run(&factored_case(), sign_flip_bit_equality).map_err(erase),
    );
    record("star-norm duality", TestRunner::new(config()).run(&star_norm_case(), star_norm_duality).map_err(erase));
    record(
        "clustering separation",
        TestRunner::new(config()).run(&clustering_case(), clustering_separation).map_err(erase),
    );
    out
}

fn erase<T: std::fmt::Debug>(e: proptest::test_runner::TestError<T>) -> proptest::test_runner::TestError<String> {
    match e {
        proptest::test_runner::TestError::Abort(r) => proptest::test_runner::TestError::Abort(r),
        proptest::test_runner::TestError::Fail(r, v) => proptest::test_runner::TestError::Fail(r, format!("{v:?}")),
    }
}

pub fn dense_symmetric(d: usize, seed: u64) -> DenseTensor3 {
    DenseTensor3::random_symmetric(d, seed).unwrap()
}
