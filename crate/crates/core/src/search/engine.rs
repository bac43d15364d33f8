use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::rank::{kappa_delta, rank_aggregate, CandidateDeltas, RankedCandidate, Ranks, Weights};
use crate::error::{Error, Result};
use crate::hardware::{Aggregate, CostModel, LatencyTable, Metric};
use crate::proxies::{count_linear_regions, ntk_kappa, score_arch, ProxyConfig, ProxyScores};
use crate::space::{MacroConfig, OpKind, SupernetState, EDGES};

/// How many operators are removed per scoring pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// Score every candidate once, then remove the best-ranked operator from
    /// every undecided edge.
    #[default]
    PerEdge,
    /// Re-score after every single removal.
    Global,
}

impl std::str::FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-edge" | "per_edge" => Ok(Schedule::PerEdge),
            "global" => Ok(Schedule::Global),
            _ => Err(Error::Config(format!("unknown schedule `{s}` (per-edge, global)"))),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SearchConfig {
    #[serde(rename = "macro")]
    pub macro_config: MacroConfig,
    pub proxy: ProxyConfig,
    pub weights: Weights,
    pub latency_budget_us: Option<f64>,
    pub flops_budget: Option<f64>,
    pub schedule: Schedule,
    pub hardware_aggregate: Aggregate,
}

impl SearchConfig {
    pub fn validate(&self, lut: Option<&LatencyTable>) -> Result<()> {
        let w = &self.weights;
        for (name, v) in [
            ("kappa", w.kappa),
            ("regions", w.regions),
            ("flops", w.flops),
            ("latency", w.latency),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("weight {name} = {v} must be finite and non-negative")));
            }
        }
        if w.kappa == 0.0 && w.regions == 0.0 {
            return Err(Error::Config("at least one of the kappa and regions weights must be positive".into()));
        }
        for (name, b) in [("latency", self.latency_budget_us), ("flops", self.flops_budget)] {
            if b.is_some_and(|b| b.is_nan() || b < 0.0) {
                return Err(Error::Config(format!("{name} budget must be non-negative")));
            }
        }
        if (w.latency > 0.0 || self.latency_budget_us.is_some()) && lut.is_none() {
            return Err(Error::MissingLut);
        }
        self.proxy.validate()?;
        self.macro_config.validate()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PruneRecord {
    pub round: usize,
    pub sweep: usize,
    pub edge: usize,
    pub edge_nodes: (usize, usize),
    pub op: OpKind,
    pub ranks: Ranks,
    pub score: f64,
    pub deltas: CandidateDeltas,
    /// State after the removal.
    pub state: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchReport {
    pub arch: String,
    pub scores: ProxyScores,
    pub prunes: Vec<PruneRecord>,
    /// Proxy evaluations performed (base states, candidates and the final
    /// architecture).
    pub evaluations: usize,
    pub sweeps: usize,
    pub wall_time_s: f64,
}

/// κ and region count of one state; indicators with zero weight are skipped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateScores {
    pub kappa: f64,
    pub regions: f64,
}

pub struct Engine<'a> {
    cfg: &'a SearchConfig,
    cost: CostModel<'a>,
}

impl<'a> Engine<'a> {
    pub fn new(cfg: &'a SearchConfig, lut: Option<&'a LatencyTable>) -> Result<Self> {
        cfg.validate(lut)?;
        Ok(Engine {
            cfg,
            cost: CostModel::new(&cfg.macro_config, lut)?,
        })
    }

    pub fn evaluate(&self, st: &SupernetState) -> Result<StateScores> {
        let w = &self.cfg.weights;
        let m = &self.cfg.macro_config;
        let kappa = if w.kappa > 0.0 {
            ntk_kappa(st, m, &self.cfg.proxy)?.mean
        } else {
            0.0
        };
        let regions = if w.regions > 0.0 {
            count_linear_regions(st, m, &self.cfg.proxy)? as f64
        } else {
            0.0
        };
        Ok(StateScores { kappa, regions })
    }

    fn hardware(&self, st: &SupernetState, metric: Metric) -> Result<f64> {
        self.cost.supernet_cost(st, metric, self.cfg.hardware_aggregate)
    }

    /// Indicator changes caused by removing `op` from `edge` of `st`.
    pub fn score_candidate(
        &self,
        st: &SupernetState,
        base: &StateScores,
        edge: usize,
        op: OpKind,
    ) -> Result<CandidateDeltas> {
        let pruned = st.apply_prune(edge, op)?;
        let after = self.evaluate(&pruned)?;
        let flops = self.hardware(&pruned, Metric::Flops)? - self.hardware(st, Metric::Flops)?;
        let latency = if self.cost.has_latency() {
            Some(self.hardware(&pruned, Metric::Latency)? - self.hardware(st, Metric::Latency)?)
        } else {
            None
        };
        Ok(CandidateDeltas {
            edge,
            op,
            kappa: kappa_delta(base.kappa, after.kappa),
            regions: after.regions - base.regions,
            flops,
            latency,
        })
    }

    /// The first budget the cheapest completion of `st` violates, as
    /// `(metric, bound, budget)`.
    fn violated_budget(&self, st: &SupernetState) -> Result<Option<(&'static str, f64, f64)>> {
        if let Some(budget) = self.cfg.latency_budget_us {
            let bound = self.cost.min_completion(st, Metric::Latency)?;
            if bound > budget {
                return Ok(Some(("latency_us", bound, budget)));
            }
        }
        if let Some(budget) = self.cfg.flops_budget {
            let bound = self.cost.min_completion(st, Metric::Flops)?;
            if bound > budget {
                return Ok(Some(("flops", bound, budget)));
            }
        }
        Ok(None)
    }

    fn infeasible((metric, bound, budget): (&'static str, f64, f64)) -> Error {
        Error::Infeasible { metric, bound, budget }
    }

    /// Prunes `initial` down to a single architecture.
    pub fn run_from(&self, initial: SupernetState) -> Result<SearchReport> {
        let start = Instant::now();
        if let Some(v) = self.violated_budget(&initial)? {
            return Err(Self::infeasible(v));
        }
        let mut st = initial;
        let mut prunes = Vec::new();
        let mut evaluations = 0;
        let mut sweeps = 0;
        while !st.is_resolved() {
            sweeps += 1;
            let mut candidates = Vec::new();
            let mut blocked = None;
            for (e, op) in st.candidate_prunes()? {
                match self.violated_budget(&st.apply_prune(e, op)?)? {
                    None => candidates.push((e, op)),
                    Some(v) => blocked = blocked.or(Some(v)),
                }
            }
            if candidates.is_empty() {
                return Err(Self::infeasible(blocked.expect("an unresolved state has candidates")));
            }
            let base = self.evaluate(&st)?;
            let deltas = candidates
                .par_iter()
                .map(|&(e, op)| self.score_candidate(&st, &base, e, op))
                .collect::<Result<Vec<_>>>()?;
            evaluations += 1 + deltas.len();
            let ranked = rank_aggregate(&deltas, &self.cfg.weights);
            let mut touched = [false; EDGES.len()];
            for cand in ranked {
                let RankedCandidate { deltas, ranks, score } = cand;
                let e = deltas.edge;
                if touched[e] || st.edge(e).len() < 2 {
                    continue;
                }
                let next = st.apply_prune(e, deltas.op)?;
                if self.violated_budget(&next)?.is_some() {
                    continue;
                }
                st = next;
                touched[e] = true;
                prunes.push(PruneRecord {
                    round: prunes.len() + 1,
                    sweep: sweeps,
                    edge: e,
                    edge_nodes: EDGES[e],
                    op: deltas.op,
                    ranks,
                    score,
                    deltas,
                    state: st.to_string(),
                });
                if self.cfg.schedule == Schedule::Global {
                    break;
                }
            }
        }
        let arch = st.to_arch().expect("loop ends resolved");
        let scores = score_arch(&arch, &self.cfg.macro_config, &self.cfg.proxy, self.cost.lut())?;
        evaluations += 1;
        Ok(SearchReport {
            arch: arch.to_string(),
            scores,
            prunes,
            evaluations,
            sweeps,
            wall_time_s: start.elapsed().as_secs_f64(),
        })
    }
}

/// Hardware-aware pruning search from the full supernet.
pub fn run_search(cfg: &SearchConfig, lut: Option<&LatencyTable>) -> Result<SearchReport> {
    Engine::new(cfg, lut)?.run_from(SupernetState::full())
}
