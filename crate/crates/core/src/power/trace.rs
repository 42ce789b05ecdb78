use std::io::Write;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// How much of each step a run keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceLevel {
    /// No per-step records; only the final iterate and stop reason.
    None,
    /// Scalar diagnostics per step.
    #[default]
    Norms,
    /// Scalars plus the iterate `x` and, with ground truth, `y = Aᵀx` and `w`.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    TargetReached,
    FixedPoint,
    MaxIters,
}

/// One recorded step. Step 0 is the initialization and has no
/// `unnormalized_norm`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub iteration: usize,
    pub x: Option<Array1<f64>>,
    pub y: Option<Array1<f64>>,
    /// `y` with the tracked entry removed, squared elementwise.
    pub w: Option<Array1<f64>>,
    pub unnormalized_norm: Option<f64>,
    pub target_correlation: Option<f64>,
    pub noise_component_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub steps: Vec<StepRecord>,
    pub final_x: Array1<f64>,
    /// Number of power steps applied.
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub final_correlation: Option<f64>,
    pub level: TraceLevel,
}

#[derive(Debug, Serialize)]
struct Row {
    iteration: usize,
    correlation: Option<f64>,
    unnorm_norm: Option<f64>,
    noise_norm: Option<f64>,
}

impl IterationTrace {
    /// Signed target correlations of all recorded steps.
    pub fn correlations(&self) -> Vec<f64> {
        self.steps.iter().filter_map(|s| s.target_correlation).collect()
    }

    pub fn noise_norms(&self) -> Vec<f64> {
        self.steps.iter().filter_map(|s| s.noise_component_norm).collect()
    }

    /// Recorded iterates (requires [`TraceLevel::Full`]).
    pub fn iterates(&self) -> Option<Vec<&Array1<f64>>> {
        self.steps.iter().map(|s| s.x.as_ref()).collect()
    }

    fn rows(&self) -> impl Iterator<Item = Row> + '_ {
        self.steps.iter().map(|s| Row {
            iteration: s.iteration,
            correlation: s.target_correlation,
            unnorm_norm: s.unnormalized_norm,
            noise_norm: s.noise_component_norm,
        })
    }

    /// One JSON object per step.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for row in self.rows() {
            serde_json::to_writer(&mut out, &row)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// CSV with header `iteration,correlation,unnorm_norm,noise_norm`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in self.rows() {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}
