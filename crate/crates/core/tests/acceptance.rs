//! End-to-end acceptance criteria. Each test prints one PASS/FAIL line with
//! its tolerance and runtime limit, then asserts. A global lock serializes
//! the tests so that runtimes are measured without contention.

mod common;

use std::io::Write;
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};
use tensor_power::harness::{run_experiment, ExperimentConfig, RunOutput, ThresholdCheck};
use tensor_power::lvm::{gmm_modified_moment, gmm_population_moment, SphericalGmm};
use tensor_power::probe::{check_conditioning_lemma, check_iterative_conditioning};
use tensor_power::rng;

static LOCK: Mutex<()> = Mutex::new(());

fn config(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    ExperimentConfig::load(&path).unwrap()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn run(name: &str) -> (RunOutput, Duration) {
    let cfg = config(name);
    let (out, t) = timed(|| run_experiment(&cfg));
    (out.unwrap(), t)
}

fn check<'a>(run: &'a RunOutput, name: &str) -> &'a ThresholdCheck {
    run.report.checks.iter().find(|c| c.name == name).unwrap_or_else(|| panic!("no check named {name}"))
}

fn describe(c: &ThresholdCheck) -> String {
    let bound = match c.threshold.as_slice() {
        [lo, hi] => format!("[{lo}, {hi}]"),
        [t] => format!("{t}"),
        other => format!("{other:?}"),
    };
    format!("{} = {} {} {}", c.name, number(c.value), c.comparison.symbol(), bound)
}

fn number(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e4) {
        format!("{v:.3e}")
    } else {
        format!("{v:.6}")
    }
}

/// Prints the verdict line, bypassing the test harness's output capture,
/// and returns whether everything passed.
fn verdict(n: u32, title: &str, parts: &[(bool, String)], elapsed: Duration, limit: Option<Duration>) -> bool {
    let in_time = limit.is_none_or(|l| elapsed < l);
    let ok = in_time && parts.iter().all(|(p, _)| *p);
    let detail: Vec<&str> = parts.iter().map(|(_, s)| s.as_str()).collect();
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "{} criterion {n}: {title}: {}; runtime {:.2}s{}",
        if ok { "PASS" } else { "FAIL" },
        detail.join("; "),
        elapsed.as_secs_f64(),
        limit.map(|l| format!(" < {}s", l.as_secs())).unwrap_or_default()
    );
    ok
}

fn checks(run: &RunOutput, names: &[&str]) -> Vec<(bool, String)> {
    names.iter().map(|n| check(run, n)).map(|c| (c.passed, describe(c))).collect()
}

#[test]
fn criterion_01_orthogonal_exact_recovery() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let (out, t) = run("orthogonal_d10.json");
    let worst = out.report.per_seed.iter().map(|m| m.values["min_correlation"]).fold(f64::INFINITY, f64::min);
    let mut parts = checks(&out, &["components", "min_recovered_fraction", "max_weight_error"]);
    parts.push((worst >= 1.0 - 1e-8, format!("min |<x, a_j>| = {worst:.12} >= 1 - 1e-8")));
    assert!(verdict(1, "orthogonal exact recovery (d = k = 10)", &parts, t, Some(Duration::from_secs(1))));
}

#[test]
fn criterion_02_overcomplete_dynamics() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let (out, t) = run("dynamics_d100_k300.json");
    let parts = checks(&out, &["success_rate"]);
    let title = "overcomplete dynamics (d = 100, k = 300, 200 seeds, final corr >= 0.95 within 15 iterations)";
    assert!(verdict(2, title, &parts, t, Some(Duration::from_secs(30))));
}

#[test]
fn criterion_03_quadratic_convergence() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let (out, t) = run("dynamics_d100_k300.json");
    let parts = checks(&out, &["quadratic_pass_rate"]);
    let title = "quadratic progress r_(t+1) >= 0.4 r_t^2 while r_t <= 0.5 d/sqrt(k)";
    assert!(verdict(3, title, &parts, t, Some(Duration::from_secs(30))));
}

#[test]
fn criterion_04_noise_tolerance() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let (out, t) = run("noise_d100_k300.json");
    let parts = checks(&out, &["success_rate", "max_noise_norm"]);
    let title = "noise tolerance (||E|| = 0.02 sqrt(k)/d, final corr >= 0.90)";
    assert!(verdict(4, title, &parts, t, Some(Duration::from_secs(60))));
}

#[test]
fn criterion_05_multiview_end_to_end() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let (out, t) = run("multiview_d50_k100.json");
    let parts = checks(&out, &["min_recovered_fraction", "max_frobenius_per_sqrt_k"]);
    let title = "multiview learning (d = 50, k = 100, corr >= 0.95)";
    assert!(verdict(5, title, &parts, t, Some(Duration::from_secs(300))));
}

#[test]
fn criterion_06_empirical_tensor_consistency() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let (out, t) = run("sample_complexity_d15_k20.json");
    let parts = checks(&out, &["median_error_ratio", "median_decomposition_error_ratio"]);
    let title = "empirical tensor consistency (d = 15, k = 20, zeta = 0.05)";
    assert!(verdict(6, title, &parts, t, Some(Duration::from_secs(120))));
}

/// Third moment of `N(μ, σ²I)` by the two-point Gauss-Hermite rule in every
/// coordinate, which is exact for polynomials of degree three.
fn gaussian_third_moment(mu: &Array1<f64>, sigma: f64) -> Vec<f64> {
    let d = mu.len();
    let mut out = vec![0.0; d * d * d];
    let nodes = 1usize << d;
    for mask in 0..nodes {
        let z: Vec<f64> = (0..d).map(|i| mu[i] + sigma * if mask >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
        for i in 0..d {
            for j in 0..d {
                for l in 0..d {
                    out[(i * d + j) * d + l] += z[i] * z[j] * z[l] / nodes as f64;
                }
            }
        }
    }
    out
}

#[test]
fn criterion_07_gmm_moment_identity() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let (d, k, sigma) = (6, 3, 0.3);
    let ((oracle_err, lib_err, emp_err), t) = timed(|| {
        let mut r = rng::seeded(7007);
        let mut means: Array2<f64> =
            Array2::from_shape_fn((d, k), |_| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut r));
        for mut c in means.columns_mut() {
            let n = c.dot(&c).sqrt();
            c /= n;
        }
        let priors = Array1::from(vec![0.5, 0.3, 0.2]);
        let gmm = SphericalGmm::new(means.clone(), priors.clone(), sigma).unwrap();

        let mut oracle = vec![0.0; d * d * d];
        for c in 0..k {
            let m = gaussian_third_moment(&means.column(c).to_owned(), sigma);
            oracle.iter_mut().zip(m).for_each(|(o, v)| *o += priors[c] * v);
        }
        let mean = means.dot(&priors);
        let s2 = sigma * sigma;
        for i in 0..d {
            for j in 0..d {
                oracle[(i * d + j) * d + j] -= s2 * mean[i];
                oracle[(j * d + i) * d + j] -= s2 * mean[i];
                oracle[(j * d + j) * d + i] -= s2 * mean[i];
            }
        }
        let target = gmm.target_tensor().unwrap().densify().unwrap();
        let oracle_err = oracle.iter().zip(target.entries()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let population = gmm_population_moment(&gmm).unwrap();
        let lib_err = population.entries().iter().zip(&oracle).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));

        let (z, _) = gmm.sample(1_000_000, 7008).unwrap();
        let empirical = gmm_modified_moment(&gmm, z.view()).unwrap();
        let emp_err = empirical.sub(&target).unwrap().frobenius_norm();
        (oracle_err, lib_err, emp_err)
    });
    let parts = [
        (oracle_err <= 1e-12, format!("max |M3_oracle - sum lambda a^3| = {oracle_err:.2e} <= 1e-12")),
        (lib_err <= 1e-12, format!("max |M3_analytic - M3_oracle| = {lib_err:.2e} <= 1e-12")),
        (emp_err <= 0.05, format!("||M3_hat(n = 1e6) - M3||_F = {emp_err:.4} <= 0.05")),
    ];
    assert!(verdict(
        7,
        "spherical GMM moment identity (d = 6, k = 3, sigma = 0.3)",
        &parts,
        t,
        Some(Duration::from_secs(60))
    ));
}

#[test]
fn criterion_08_conditioning_checks() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let ((single, chain), t) = timed(|| {
        (
            check_conditioning_lemma(20, 30, 1.0 / 20.0, 10_000, 8001).unwrap(),
            check_iterative_conditioning(20, 30, 3, 10_000, 8002).unwrap(),
        )
    });
    let line = |name: &str, c: &tensor_power::probe::ConditioningCheck| {
        (
            c.passed && c.orthogonality_residual <= 1e-10,
            format!(
                "{name}: max z (mean, row cov, var) = ({:.2}, {:.2}, {:.2}) <= {}, var ratio in [{:.3}, {:.3}], orthogonality {:.1e} <= 1e-10",
                c.mean_max_z,
                c.row_cov_max_z,
                c.variance_max_z,
                c.z_threshold,
                c.variance_ratio_min,
                c.variance_ratio_max,
                c.orthogonality_residual
            ),
        )
    };
    let parts = [line("single constraint (d = 20, k = 30, 1e4 trials)", &single), line("chain of 3", &chain)];
    assert!(verdict(8, "conditioning checks at 4 SE", &parts, t, Some(Duration::from_secs(30))));
}

#[test]
fn criterion_09_property_suites() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let (results, t) = timed(common::run_all);
    let parts: Vec<(bool, String)> = results
        .into_iter()
        .map(|(name, r)| match r {
            Ok(()) => (true, format!("{name}: {} cases green", common::CASES)),
            Err(e) => (false, format!("{name}: {e}")),
        })
        .collect();
    assert!(verdict(9, "property suites", &parts, t, Some(Duration::from_secs(60))));
}

fn csv_outputs(run: &RunOutput, dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = run
        .write(dir)
        .unwrap()
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_10_determinism() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let (parts, t) = timed(|| {
        let mut parts = Vec::new();
        for name in ["dynamics_d100_k300.json", "multiview_d50_k100.json"] {
            let cfg = config(name);
            let outputs: Vec<Vec<(String, Vec<u8>)>> = [1usize, 4]
                .iter()
                .map(|&n| {
                    let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
                    let run = pool.install(|| run_experiment(&cfg)).unwrap();
                    let dir = tempfile::tempdir().unwrap();
                    csv_outputs(&run, dir.path())
                })
                .collect();
            let same = outputs[0] == outputs[1] && !outputs[0].is_empty();
            let names: Vec<&str> = outputs[0].iter().map(|(n, _)| n.as_str()).collect();
            parts.push((same, format!("{name}: {} identical at 1 and 4 threads", names.join(", "))));
        }
        parts
    });
    assert!(verdict(10, "byte-identical CSV outputs across thread counts", &parts, t, None));
}
