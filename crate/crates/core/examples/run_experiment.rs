//! Run a configured experiment through the harness, as the `tpi` binary
//! does, and print its summary tables.

use tensor_power::harness::{render, run_experiment, ExperimentConfig};

const CONFIG: &str = r#"{
  "schema_version": 1,
  "kind": "dynamics",
  "name": "small dynamics",
  "d": 40,
  "k": 20,
  "init_correlation": [0.5, 0.6],
  "seeds": { "count": 20, "base": 1 },
  "power": { "max_iters": 15 },
  "thresholds": { "success_correlation": 0.95, "min_success_rate": 0.8 }
}"#;

fn main() -> tensor_power::Result<()> {
    let config = ExperimentConfig::from_json(CONFIG)?;
    println!("config hash {}", config.hash());
    let run = run_experiment(&config)?;
    print!("{}", render(&run.report, false)?);
    println!("passed: {}", run.report.passed);
    if let Some(dir) = std::env::args().nth(1) {
        for p in run.write(std::path::Path::new(&dir))? {
            println!("wrote {}", p.display());
        }
    }
    Ok(())
}
