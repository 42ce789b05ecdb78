//! Power iteration on a perturbed tensor, tracking the distance between the
//! noisy iterate and its noiseless shadow.

use tensor_power::power::{correlated_start, run_power_with_shadow, PowerConfig};
use tensor_power::rng;
use tensor_power::tensor::{
    random_components, scale_noise_to, ComponentDistribution, DenseTensor3, FactoredTensor3, PerturbedTensor,
};

fn main() -> tensor_power::Result<()> {
    let (d, k) = (100, 50);
    let signal = FactoredTensor3::unit_weights(random_components(d, k, 5, ComponentDistribution::UnitSphere)?)?;
    let target = 0.02 * (k as f64).sqrt() / d as f64;
    let noise = scale_noise_to(&DenseTensor3::random_symmetric(d, 6)?, target, 8, 30, 7)?;
    let perturbed = PerturbedTensor::with_known_norm(signal.clone(), noise, target)?;

    let mut r = rng::stream(5, 1);
    let x0 = correlated_start(&mut r, signal.component(0), 0.5)?;
    let config = PowerConfig { max_iters: Some(12), track_target: Some(0), ..PowerConfig::default() };
    let trace = run_power_with_shadow(&perturbed, x0.view(), &config, Some(&signal))?;
    println!("||E|| = {target:.5}");
    for (t, (c, xi)) in trace.correlations().iter().zip(trace.noise_norms()).enumerate() {
        println!("t = {t:2}  |<x, a_1>| = {:.4}  ||xi|| = {xi:.3e}", c.abs());
    }
    Ok(())
}
