//! Decompose a rank-10 orthogonal tensor from perturbed starts and compare
//! the estimates with the true components.

use ndarray::{Array1, Array2};
use tensor_power::decompose::{decompose, match_and_score, ClusterConfig};
use tensor_power::power::PowerConfig;
use tensor_power::rng;
use tensor_power::tensor::FactoredTensor3;

fn main() -> tensor_power::Result<()> {
    let d = 10;
    let mut r = rng::seeded(11);
    let q =
        nalgebra::DMatrix::from_fn(d, d, |_, _| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut r))
            .qr()
            .q();
    let a = Array2::from_shape_fn((d, d), |(i, j)| q[(i, j)]);
    let weights = Array1::linspace(1.0, 2.0, d);
    let tensor = FactoredTensor3::new(a.clone(), weights)?;

    let inits: Vec<Array1<f64>> = (0..d)
        .map(|j| {
            let x = &a.column(j) + &(rng::unit_vector(&mut r, d) * 0.3);
            let n = x.dot(&x).sqrt();
            x / n
        })
        .collect();

    let result = decompose(&tensor, &inits, &PowerConfig::default(), &ClusterConfig::default())?;
    let report = match_and_score(result.estimates.view(), &tensor)?;
    println!("recovered {} of {d} components", result.len());
    for (j, c) in report.per_component_correlations.iter().enumerate() {
        let est = report.permutation[j].map(|i| result.weights[i]);
        println!(
            "  a_{j}: |<x, a>| = {:.12}, weight {:.6} vs {:.6}",
            c.unwrap_or(0.0),
            est.unwrap_or(f64::NAN),
            tensor.weights()[j]
        );
    }
    Ok(())
}
