use std::collections::HashSet;

use rayon::prelude::*;

use super::ProxyConfig;
use crate::error::Result;
use crate::nn::{ActivationPattern, Network};
use crate::rng::derive_seed;
use crate::space::{supernet_lr_network, MacroConfig, SupernetState};
use crate::tensor::Tensor;

const CHUNK: usize = 64;

/// Activation patterns of every row of `inputs`, in row order.
pub fn activation_patterns(net: &Network, inputs: &Tensor) -> Result<Vec<ActivationPattern>> {
    let n = inputs.batch();
    let chunks: Vec<Vec<usize>> = (0..n)
        .step_by(CHUNK)
        .map(|s| (s..(s + CHUNK).min(n)).collect())
        .collect();
    let per_chunk = chunks
        .par_iter()
        .map(|idx| {
            let (_, tape) = net.forward(&inputs.select(idx))?;
            net.activation_patterns(&tape)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_chunk.into_iter().flatten().collect())
}

/// Number of distinct activation patterns among `inputs`. A network without
/// ReLU units is a single affine region.
pub fn count_distinct_patterns(net: &Network, inputs: &Tensor) -> Result<usize> {
    if net.relu_units() == 0 {
        return Ok(1);
    }
    let patterns = activation_patterns(net, inputs)?;
    Ok(patterns.into_iter().collect::<HashSet<_>>().len())
}

/// Sampled linear-region count of the conv → ReLU variant of the (super)network
/// at the configured reduced resolution.
pub fn count_linear_regions(state: &SupernetState, m: &MacroConfig, cfg: &ProxyConfig) -> Result<usize> {
    cfg.validate()?;
    let lm = m.with_input(cfg.lr_input);
    let net = supernet_lr_network(state, &lm, derive_seed(cfg.seed, "lr-init", 0))?;
    if net.relu_units() == 0 {
        return Ok(1);
    }
    let inputs = cfg.input_source.samples(cfg.lr_input, cfg.lr_samples, cfg.seed)?;
    count_distinct_patterns(&net, &inputs)
}
