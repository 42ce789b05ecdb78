//! Round-trip dense and factored tensors through the binary container and
//! its JSON sidecar.

use tensor_power::tensor::{
    random_components, read_sidecar, read_tensor, write_tensor, ComponentDistribution, DenseTensor3, FactoredTensor3,
    TensorFile,
};

fn main() -> tensor_power::Result<()> {
    let dir = std::env::temp_dir().join(format!("tpi-io-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;

    let factored = FactoredTensor3::unit_weights(random_components(8, 12, 3, ComponentDistribution::UnitSphere)?)?;
    let dense = DenseTensor3::random_symmetric(8, 4)?;
    for (name, file) in [("factored.tpi3", TensorFile::Factored(factored)), ("dense.tpi3", TensorFile::Dense(dense))] {
        let path = dir.join(name);
        write_tensor(&path, &file, Some(3), "example", None)?;
        let back = read_tensor(&path)?;
        let sidecar = read_sidecar(&path)?;
        println!(
            "{name}: {:?}, dim {}, rank {}, identical after reload: {}",
            sidecar.kind,
            sidecar.dim,
            sidecar.rank,
            back == file
        );
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
