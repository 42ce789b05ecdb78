//! Monte Carlo checks of Gaussian conditioning on linear constraints, fresh
//! randomness in a subspace, and the mixed-norm contraction bound.

use tensor_power::probe::{
    check_conditioning_lemma, check_fresh_randomness, check_iterative_conditioning, check_mixed_norm_bound,
};

fn main() -> tensor_power::Result<()> {
    let single = check_conditioning_lemma(20, 30, 1.0 / 20.0, 10_000, 1)?;
    println!(
        "one constraint: passed {} (max z: mean {:.2}, covariance {:.2}, variance {:.2}; exact error {:.1e})",
        single.passed, single.mean_max_z, single.row_cov_max_z, single.variance_max_z, single.exact_cov_error
    );
    let chain = check_iterative_conditioning(30, 40, 3, 10_000, 2)?;
    println!("chain of 3: passed {} (orthogonality residual {:.1e})", chain.passed, chain.orthogonality_residual);

    let fresh = check_fresh_randomness(100, 400, 5, 500, 3)?;
    println!("fresh randomness: passed {} (bound {:.4})", fresh.passed, fresh.bound);
    for v in &fresh.variants {
        println!("  {:?} / {:?}: holds in {:.1}% of trials", v.offset, v.subspace, 100.0 * v.holds_fraction);
    }

    let mixed = check_mixed_norm_bound(50, 150, 100, 4)?;
    println!(
        "mixed norm: max ratio {:.3} <= {:.3}: {} (fitted constant {:.3})",
        mixed.max_ratio, mixed.threshold, mixed.passed, mixed.fitted_c
    );
    Ok(())
}
