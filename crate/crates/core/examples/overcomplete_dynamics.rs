//! Power iteration on a random overcomplete tensor from a start correlated
//! with the first component, with the rescaled progress check.

use tensor_power::power::{correlated_start, quadratic_progress, run_power, PowerConfig};
use tensor_power::rng;
use tensor_power::tensor::{random_components, ComponentDistribution, FactoredTensor3};

fn main() -> tensor_power::Result<()> {
    let (d, k) = (100, 300);
    let a = random_components(d, k, 1, ComponentDistribution::UnitSphere)?;
    let tensor = FactoredTensor3::unit_weights(a)?;
    let mut r = rng::stream(1, 1);
    let config = PowerConfig { max_iters: Some(15), track_target: Some(0), ..PowerConfig::default() };

    for c0 in [0.35, 0.6, 0.9] {
        let x0 = correlated_start(&mut r, tensor.component(0), c0)?;
        let trace = run_power(&tensor, x0.view(), &config, Some(&tensor))?;
        let corr = trace.correlations();
        let progress = quadratic_progress(&corr, d, k);
        let shown: Vec<String> = corr.iter().map(|c| format!("{:.3}", c.abs())).collect();
        println!("start {c0}: {} ({:?})", shown.join(" "), trace.stop_reason);
        println!(
            "  quadratic progress: {} over {} checked steps",
            if progress.passed { "holds" } else { "violated" },
            progress.checked
        );
    }
    Ok(())
}
