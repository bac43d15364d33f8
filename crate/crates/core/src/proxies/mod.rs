//! Training-free indicators computed at initialization: the condition number
//! of the empirical neural tangent kernel (trainability) and the number of
//! distinct ReLU activation patterns over sampled inputs (expressivity).

mod eigen;
mod inputs;
mod ntk;
mod regions;

use serde::{Serialize, Serializer};

pub use eigen::{condition_number, symmetric_eigenvalues, Matrix, MAX_SWEEPS, OFF_DIAGONAL_TOL, SINGULAR_TOL};
pub use inputs::{load_batch_file, write_batch_file, InputSource};
pub use ntk::{jacobian_rows, mean_kappa, ntk_kappa, ntk_matrix, KappaEstimate};
pub use regions::{activation_patterns, count_distinct_patterns, count_linear_regions};

use crate::error::{Error, Result};
use crate::hardware::{CostModel, LatencyTable};
use crate::space::{CellArch, MacroConfig, SupernetState};

#[derive(Debug, Clone, Serialize)]
pub struct ProxyConfig {
    /// NTK mini-batch size.
    pub batch_size: usize,
    /// Independent initializations averaged into κ.
    pub ntk_repeats: usize,
    /// Inputs sampled for the linear-region count.
    pub lr_samples: usize,
    /// `[C, H, W]` of linear-region inputs.
    pub lr_input: [usize; 3],
    pub seed: u64,
    #[serde(serialize_with = "source_name")]
    pub input_source: InputSource,
}

fn source_name<S: Serializer>(src: &InputSource, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(src.name())
}

impl Default for ProxyConfig {
    fn default() -> Self {
        ProxyConfig {
            batch_size: 32,
            ntk_repeats: 3,
            lr_samples: 1000,
            lr_input: [3, 8, 8],
            seed: 0,
            input_source: InputSource::Gaussian,
        }
    }
}

impl ProxyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::BatchTooSmall(self.batch_size));
        }
        if self.ntk_repeats == 0 {
            return Err(Error::Config("ntk repeats must be at least 1".into()));
        }
        if self.lr_samples == 0 {
            return Err(Error::Config("linear-region sample count must be at least 1".into()));
        }
        if self.lr_input.contains(&0) {
            return Err(Error::Config("linear-region input dimensions must be positive".into()));
        }
        Ok(())
    }
}

/// Everything known about one architecture at initialization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProxyScores {
    #[serde(serialize_with = "crate::json::f64_or_inf")]
    pub kappa: f64,
    #[serde(serialize_with = "crate::json::vec_f64_or_inf")]
    pub kappa_per_repeat: Vec<f64>,
    pub lr_count: usize,
    pub flops: u64,
    pub params: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency_us: Option<f64>,
}

/// Computes κ, the region count, FLOPs, parameters and (with a table) latency.
pub fn score_arch(a: &CellArch, m: &MacroConfig, cfg: &ProxyConfig, lut: Option<&LatencyTable>) -> Result<ProxyScores> {
    let cost = CostModel::new(m, lut)?.breakdown(a)?;
    let st = SupernetState::from(*a);
    let kappa = ntk_kappa(&st, m, cfg)?;
    let lr_count = count_linear_regions(&st, m, cfg)?;
    Ok(ProxyScores {
        kappa: kappa.mean,
        kappa_per_repeat: kappa.per_repeat,
        lr_count,
        flops: cost.flops,
        params: cost.params,
        latency_us: cost.latency_us,
    })
}
