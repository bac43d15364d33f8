use rayon::prelude::*;
use serde::Serialize;

use super::eigen::{condition_number, Matrix};
use super::ProxyConfig;
use crate::error::{Error, Result};
use crate::nn::Network;
use crate::rng::derive_seed;
use crate::space::{supernet_network, MacroConfig, SupernetState};
use crate::tensor::Tensor;

/// Gradient of `g(x) = Σ logits(x)` with respect to all parameters, for
/// each sample of `batch` (one Jacobian row per sample).
pub fn jacobian_rows(net: &Network, batch: &Tensor) -> Result<Vec<Vec<f64>>> {
    (0..batch.batch())
        .into_par_iter()
        .map(|i| {
            let (y, tape) = net.forward(&batch.select(&[i]))?;
            net.grad_params(&tape, &Tensor::full(y.shape(), 1.0))
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Empirical NTK `Θ = J·Jᵀ` of the summed logits over one mini-batch.
pub fn ntk_matrix(net: &Network, batch: &Tensor) -> Result<Matrix> {
    let b = batch.batch();
    if b < 2 {
        return Err(Error::BatchTooSmall(b));
    }
    let rows = jacobian_rows(net, batch)?;
    let upper: Vec<(usize, usize, f64)> = (0..b)
        .flat_map(|i| (i..b).map(move |j| (i, j)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(i, j)| (i, j, dot(&rows[i], &rows[j])))
        .collect();
    let mut theta = Matrix::zeros(b);
    for (i, j, v) in upper {
        theta.set(i, j, v);
        theta.set(j, i, v);
    }
    Ok(theta)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaEstimate {
    #[serde(serialize_with = "crate::json::f64_or_inf")]
    pub mean: f64,
    #[serde(serialize_with = "crate::json::vec_f64_or_inf")]
    pub per_repeat: Vec<f64>,
}

/// Arithmetic mean; infinite if any repeat is infinite.
pub fn mean_kappa(per_repeat: &[f64]) -> f64 {
    if per_repeat.iter().any(|k| k.is_infinite()) {
        f64::INFINITY
    } else {
        per_repeat.iter().sum::<f64>() / per_repeat.len() as f64
    }
}

/// NTK condition number of the (super)network averaged over independent
/// initializations.
///
/// Repeat `r` uses parameters seeded by `(seed, "ntk-init", r)` and a batch
/// seeded by `(seed, "ntk-batch", r)`. Neither depends on the architecture,
/// so every candidate sees the same inputs and each layer keeps its weights
/// across candidates that share it.
pub fn ntk_kappa(state: &SupernetState, m: &MacroConfig, cfg: &ProxyConfig) -> Result<KappaEstimate> {
    cfg.validate()?;
    let per_repeat = (0..cfg.ntk_repeats as u64)
        .into_par_iter()
        .map(|r| {
            let net = supernet_network(state, m, derive_seed(cfg.seed, "ntk-init", r))?;
            let batch = cfg.input_source.batch(m.input, cfg.batch_size, cfg.seed, r)?;
            condition_number(&ntk_matrix(&net, &batch)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(KappaEstimate {
        mean: mean_kappa(&per_repeat),
        per_repeat,
    })
}
