//! Learn the components of a three-view mixture from samples, using the
//! exact, the dense empirical and the implicit empirical moment tensor.
//! Every sample of the batch seeds one power iteration.

use tensor_power::decompose::{learn_multiview, match_and_score, ClusterConfig, MomentSource};
use tensor_power::lvm::{sample_multiview, MixtureModel};
use tensor_power::power::PowerConfig;

fn main() -> tensor_power::Result<()> {
    let (d, k) = (50, 10);
    let model = MixtureModel::random(d, k, 0.05, 3, 9)?;
    let truth = model.population_tensor()?;
    let batch = sample_multiview(&model, 2_000, 10)?;
    let small = batch.truncated(400)?;
    let medium = batch.truncated(1_000)?;
    let power = PowerConfig::default();
    let cluster = ClusterConfig::default();

    for (name, result) in [
        ("exact", learn_multiview(&small, MomentSource::Exact(&truth), &power, &cluster)?),
        ("dense", learn_multiview(&batch, MomentSource::Empirical, &power, &cluster)?),
        ("implicit", learn_multiview(&medium, MomentSource::Implicit, &power, &cluster)?),
    ] {
        let m = match_and_score(result.estimates.view(), &truth)?;
        println!(
            "{name:>8}: {} estimates, {} of {k} with correlation >= 0.9, Frobenius error {:.3}",
            result.len(),
            m.recovered(0.9),
            m.frobenius_error
        );
    }
    Ok(())
}
