//! The corrected third moment of a spherical Gaussian mixture equals the
//! weighted sum of cubed means; compare population and sample versions.

use ndarray::Array1;
use tensor_power::lvm::{gmm_modified_moment, gmm_population_moment, gmm_raw_moment, SphericalGmm};
use tensor_power::tensor::{random_components, ComponentDistribution, Tensor3};

fn main() -> tensor_power::Result<()> {
    let (d, k, sigma) = (6, 3, 0.3);
    let means = random_components(d, k, 21, ComponentDistribution::UnitSphere)?;
    let gmm = SphericalGmm::new(means, Array1::from(vec![0.5, 0.3, 0.2]), sigma)?;
    let target = gmm.target_tensor()?.densify()?;

    let raw = gmm_raw_moment(&gmm)?;
    let population = gmm_population_moment(&gmm)?;
    println!("||E[z^3] - target||_F     = {:.4}", raw.sub(&target)?.frobenius_norm());
    println!("||M3 - target||_F         = {:.2e}", population.sub(&target)?.frobenius_norm());
    for n in [10_000, 100_000, 1_000_000] {
        let (z, _) = gmm.sample(n, 22)?;
        let m = gmm_modified_moment(&gmm, z.view())?;
        println!("||M3_hat(n = {n:>7}) - M3||_F = {:.4}", m.sub(&target)?.frobenius_norm());
    }
    let x = gmm.means().column(0);
    println!("M3(a_1, a_1, a_1) = {:.4}", population.cubic_form(x)?);
    Ok(())
}
