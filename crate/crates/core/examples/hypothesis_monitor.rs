//! Record full iterates of several runs and fit the per-step envelopes of
//! the projected quantities.

use tensor_power::power::{correlated_start, run_power, PowerConfig, TraceLevel};
use tensor_power::probe::{fit_envelopes, monitor_hypotheses};
use tensor_power::rng;
use tensor_power::tensor::{random_components, ComponentDistribution, FactoredTensor3};

fn main() -> tensor_power::Result<()> {
    let (d, k) = (100, 300);
    let mut reports = Vec::new();
    for seed in 0..10 {
        let tensor = FactoredTensor3::unit_weights(random_components(d, k, seed, ComponentDistribution::UnitSphere)?)?;
        let x0 = correlated_start(&mut rng::stream(seed, 1), tensor.component(0), 0.35)?;
        let config = PowerConfig {
            max_iters: Some(6),
            trace_level: TraceLevel::Full,
            track_target: Some(0),
            ..PowerConfig::default()
        };
        let trace = run_power(&tensor, x0.view(), &config, Some(&tensor))?;
        let report = monitor_hypotheses(&trace, &tensor, 0)?;
        println!(
            "seed {seed}: quadratic progress {}, projection identity error {:.1e}",
            if report.progress_check.passed { "holds" } else { "fails" },
            report.projection_identity_error
        );
        reports.push(report);
    }
    let fit = fit_envelopes(&reports)?;
    println!("envelope constants over {} seeds (max / ln d):", fit.seeds);
    println!(
        "  ||P w||_2 {:.3}  ||P w||_inf {:.3}  u {:.3}  v {:.3}  perp progress {:.3}",
        fit.proj_w, fit.proj_w_inf, fit.u, fit.v, fit.progress_perp
    );
    Ok(())
}
