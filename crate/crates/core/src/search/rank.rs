use std::cmp::Ordering;

use serde::Serialize;

use crate::space::OpKind;

/// Change in each indicator caused by removing `op` from `edge`.
///
/// Lower is better for κ, FLOPs and latency; higher is better for the
/// region count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateDeltas {
    pub edge: usize,
    pub op: OpKind,
    #[serde(serialize_with = "crate::json::f64_or_inf")]
    pub kappa: f64,
    pub regions: f64,
    pub flops: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency: Option<f64>,
}

/// `κ(pruned) − κ(current)` with infinite condition numbers ordered last:
/// a singular pruned kernel gives `+∞`, escaping a singular kernel `−∞`.
pub fn kappa_delta(current: f64, pruned: f64) -> f64 {
    match (current.is_infinite(), pruned.is_infinite()) {
        (_, true) => f64::INFINITY,
        (true, false) => f64::NEG_INFINITY,
        _ => pruned - current,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Weights {
    pub kappa: f64,
    pub regions: f64,
    pub flops: f64,
    pub latency: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            kappa: 1.0,
            regions: 1.0,
            flops: 0.0,
            latency: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Ranks {
    pub kappa: usize,
    pub regions: usize,
    pub flops: usize,
    pub latency: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedCandidate {
    pub deltas: CandidateDeltas,
    pub ranks: Ranks,
    pub score: f64,
}

/// Competition ranks (1 = best, ties share the smaller rank).
pub(crate) fn competition_ranks(values: &[f64], better: impl Fn(f64, f64) -> bool) -> Vec<usize> {
    values
        .iter()
        .map(|&v| 1 + values.iter().filter(|&&o| better(o, v)).count())
        .collect()
}

pub(crate) fn lower(a: f64, b: f64) -> bool {
    a.total_cmp(&b) == Ordering::Less
}

pub(crate) fn higher(a: f64, b: f64) -> bool {
    a.total_cmp(&b) == Ordering::Greater
}

/// Ranks candidates per indicator and orders them by the weighted rank sum,
/// best first; ties fall back to `(edge, op code)`.
pub fn rank_aggregate(candidates: &[CandidateDeltas], w: &Weights) -> Vec<RankedCandidate> {
    let col = |f: fn(&CandidateDeltas) -> f64| candidates.iter().map(f).collect::<Vec<f64>>();
    let rk = competition_ranks(&col(|c| c.kappa), lower);
    let rr = competition_ranks(&col(|c| c.regions), higher);
    let rf = competition_ranks(&col(|c| c.flops), lower);
    let rl = competition_ranks(&col(|c| c.latency.unwrap_or(0.0)), lower);
    let mut out: Vec<RankedCandidate> = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let ranks = Ranks {
                kappa: rk[i],
                regions: rr[i],
                flops: rf[i],
                latency: rl[i],
            };
            let score = w.kappa * ranks.kappa as f64
                + w.regions * ranks.regions as f64
                + w.flops * ranks.flops as f64
                + w.latency * ranks.latency as f64;
            RankedCandidate {
                deltas: c.clone(),
                ranks,
                score,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        a.score
            .total_cmp(&b.score)
            .then(a.deltas.edge.cmp(&b.deltas.edge))
            .then(a.deltas.op.cmp(&b.deltas.op))
    });
    out
}
