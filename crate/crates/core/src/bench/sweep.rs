use rand::seq::index::sample;
use rayon::prelude::*;
use serde::Serialize;

use super::kendall::kendall_tau;
use super::records::BenchRecord;
use crate::error::{Error, Result};
use crate::hardware::{CostModel, LatencyTable};
use crate::proxies::{count_linear_regions, ntk_kappa, ProxyConfig};
use crate::rng::{derive_seed, rng_from};
use crate::search::rank::{competition_ranks, higher, lower};
use crate::search::Weights;
use crate::space::{CellArch, MacroConfig, SupernetState};

/// Indicator correlated against accuracy. Every score is oriented so that
/// higher predicts better accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TauProxy {
    /// `−κ`.
    Kappa,
    /// Linear-region count.
    #[serde(rename = "lr")]
    Regions,
    /// FLOPs of the full network.
    Flops,
    /// Estimated latency.
    Latency,
    /// Negated weighted rank sum using the search's conventions: low κ, many
    /// regions, low FLOPs and low latency rank best.
    Combined,
}

impl std::str::FromStr for TauProxy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "kappa" => TauProxy::Kappa,
            "lr" | "regions" => TauProxy::Regions,
            "flops" => TauProxy::Flops,
            "latency" => TauProxy::Latency,
            "combined" => TauProxy::Combined,
            _ => {
                return Err(Error::Config(format!(
                    "unknown proxy `{s}` (kappa, lr, flops, latency, combined)"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    #[default]
    BatchSize,
    Repeats,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "batch-size" | "batch_size" => Ok(SweepAxis::BatchSize),
            "repeats" => Ok(SweepAxis::Repeats),
            _ => Err(Error::Config(format!("unknown sweep axis `{s}` (batch-size, repeats)"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TauConfig {
    #[serde(rename = "macro")]
    pub macro_config: MacroConfig,
    pub proxy: ProxyConfig,
    /// Records beyond this many are subsampled with the proxy seed.
    pub sample: usize,
    /// Used by [`TauProxy::Combined`] only.
    pub weights: Weights,
}

impl Default for TauConfig {
    fn default() -> Self {
        TauConfig {
            macro_config: MacroConfig::default(),
            proxy: ProxyConfig::default(),
            sample: 500,
            weights: Weights::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauPoint {
    pub axis_value: usize,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauReport {
    pub proxy: TauProxy,
    pub axis: SweepAxis,
    pub points: Vec<TauPoint>,
    pub sample_size: usize,
    pub seed: u64,
}

/// The records a sweep actually scores: all of them, or a seeded subsample
/// kept in file order.
pub fn subsample(records: &[BenchRecord], n: usize, seed: u64) -> Vec<BenchRecord> {
    if records.len() <= n {
        return records.to_vec();
    }
    let mut idx = sample(&mut rng_from(derive_seed(seed, "tau-sample", 0)), records.len(), n).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| records[i]).collect()
}

/// Proxy score of each architecture, higher meaning better predicted
/// accuracy.
pub fn proxy_scores(
    archs: &[CellArch],
    proxy: TauProxy,
    m: &MacroConfig,
    cfg: &ProxyConfig,
    weights: &Weights,
    lut: Option<&LatencyTable>,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let cost = CostModel::new(m, lut)?;
    let needs_latency = proxy == TauProxy::Latency || (proxy == TauProxy::Combined && weights.latency > 0.0);
    if needs_latency && lut.is_none() {
        return Err(Error::MissingLut);
    }
    let want = |p: TauProxy, w: f64| proxy == p || (proxy == TauProxy::Combined && w > 0.0);
    let (want_k, want_r, want_f) = (
        want(TauProxy::Kappa, weights.kappa),
        want(TauProxy::Regions, weights.regions),
        want(TauProxy::Flops, weights.flops),
    );
    let rows = archs
        .par_iter()
        .map(|a| -> Result<[f64; 4]> {
            let st = SupernetState::from(*a);
            let k = if want_k { ntk_kappa(&st, m, cfg)?.mean } else { 0.0 };
            let r = if want_r { count_linear_regions(&st, m, cfg)? as f64 } else { 0.0 };
            let (f, l) = if want_f || needs_latency {
                let b = cost.breakdown(a)?;
                (b.flops as f64, b.latency_us.unwrap_or(0.0))
            } else {
                (0.0, 0.0)
            };
            Ok([k, r, f, l])
        })
        .collect::<Result<Vec<_>>>()?;
    let col = |i: usize| rows.iter().map(|r| r[i]).collect::<Vec<f64>>();
    Ok(match proxy {
        TauProxy::Kappa => col(0).into_iter().map(|k| -k).collect(),
        TauProxy::Regions => col(1),
        TauProxy::Flops => col(2),
        TauProxy::Latency => col(3),
        TauProxy::Combined => {
            let rk = competition_ranks(&col(0), lower);
            let rr = competition_ranks(&col(1), higher);
            let rf = competition_ranks(&col(2), lower);
            let rl = competition_ranks(&col(3), lower);
            (0..rows.len())
                .map(|i| {
                    -(weights.kappa * rk[i] as f64
                        + weights.regions * rr[i] as f64
                        + weights.flops * rf[i] as f64
                        + weights.latency * rl[i] as f64)
                })
                .collect()
        }
    })
}

/// Kendall τ between a proxy and accuracy at each value of `axis`.
pub fn tau_sweep(
    records: &[BenchRecord],
    proxy: TauProxy,
    axis: SweepAxis,
    values: &[usize],
    cfg: &TauConfig,
    lut: Option<&LatencyTable>,
) -> Result<TauReport> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one axis value".into()));
    }
    if cfg.sample < 2 {
        return Err(Error::TooFewObservations(cfg.sample));
    }
    let recs = subsample(records, cfg.sample, cfg.proxy.seed);
    if recs.len() < 2 {
        return Err(Error::TooFewObservations(recs.len()));
    }
    let archs: Vec<CellArch> = recs.iter().map(|r| r.arch).collect();
    let acc: Vec<f64> = recs.iter().map(|r| r.accuracy).collect();
    let points = values
        .iter()
        .map(|&v| {
            let mut pc = cfg.proxy.clone();
            match axis {
                SweepAxis::BatchSize => pc.batch_size = v,
                SweepAxis::Repeats => pc.ntk_repeats = v,
            }
            let scores = proxy_scores(&archs, proxy, &cfg.macro_config, &pc, &cfg.weights, lut)?;
            Ok(TauPoint {
                axis_value: v,
                tau: kendall_tau(&scores, &acc)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TauReport {
        proxy,
        axis,
        points,
        sample_size: recs.len(),
        seed: cfg.proxy.seed,
    })
}
