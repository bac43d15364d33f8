//! Analytic FLOPs/parameter counts and lookup-table latency.
//!
//! FLOPs count multiplies and adds separately:
//! conv `2·H_out·W_out·C_out·C_in·K²`, average pool `H_out·W_out·C_out·K²`,
//! linear `2·C_in·C_out`. ReLU, global pooling and additions are free.
//! Every convolution and linear layer carries a bias.
//!
//! Latency is the sum of one table lookup per costed unit plus the device
//! overhead. Units are the cell edge operators (keyed by their operator
//! name), the stem (`stem_conv_3x3`), each reduction block (`resblock`,
//! stride 2) and the classifier head (`classifier`), keyed by their input
//! shape. Cell `skip_connect`/`none` and the fixed skeleton units read as
//! 0 µs when the table has no row for them; cell convolutions and pooling
//! must be present.

use serde::Serialize;

use super::lut::{LatencyKey, LatencyTable};
use crate::error::{Error, Result};
use crate::space::{CellArch, MacroConfig, OpKind, StageShape, SupernetState, NUM_EDGES, EDGES, NUM_STAGES};

pub const STEM_OP: &str = "stem_conv_3x3";
pub const REDUCTION_OP: &str = "resblock";
pub const CLASSIFIER_OP: &str = "classifier";

/// One costed unit of the instantiated model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostRecord {
    pub layer: String,
    pub op: String,
    pub flops: u64,
    pub params: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency_us: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub records: Vec<CostRecord>,
    pub flops: u64,
    pub params: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency_us: Option<f64>,
}

fn conv_cost(c_in: usize, c_out: usize, k: usize, h_out: usize, w_out: usize) -> (u64, u64) {
    let f = 2 * h_out * w_out * c_out * c_in * k * k;
    let p = c_out * (c_in * k * k + 1);
    (f as u64, p as u64)
}

fn pool_cost(c: usize, k: usize, h_out: usize, w_out: usize) -> u64 {
    (h_out * w_out * c * k * k) as u64
}

#[derive(Debug, Clone)]
struct Unit {
    layer: String,
    key: LatencyKey,
    flops: u64,
    params: u64,
    /// Absent table rows read as zero.
    optional: bool,
}

fn key(op: &str, c_in: usize, c_out: usize, h: usize, w: usize, stride: usize) -> LatencyKey {
    LatencyKey {
        op: op.to_string(),
        c_in,
        c_out,
        h,
        w,
        stride,
    }
}

fn cell_unit(layer: String, op: OpKind, s: &StageShape) -> Unit {
    let (c, h, w) = (s.channels, s.h, s.w);
    let (flops, params) = match op {
        OpKind::None | OpKind::SkipConnect => (0, 0),
        OpKind::AvgPool3x3 => (pool_cost(c, 3, h, w), 0),
        OpKind::NorConv1x1 => conv_cost(c, c, 1, h, w),
        OpKind::NorConv3x3 => conv_cost(c, c, 3, h, w),
    };
    Unit {
        layer,
        key: key(op.name(), c, c, h, w, 1),
        flops,
        params,
        optional: matches!(op, OpKind::None | OpKind::SkipConnect),
    }
}

/// Cost model of one macro skeleton, optionally with a latency table.
#[derive(Debug, Clone)]
pub struct CostModel<'a> {
    m: MacroConfig,
    stages: [StageShape; NUM_STAGES],
    lut: Option<&'a LatencyTable>,
}

impl<'a> CostModel<'a> {
    pub fn new(m: &MacroConfig, lut: Option<&'a LatencyTable>) -> Result<Self> {
        Ok(CostModel {
            m: *m,
            stages: m.stages()?,
            lut,
        })
    }

    pub fn has_latency(&self) -> bool {
        self.lut.is_some()
    }

    pub fn lut(&self) -> Option<&'a LatencyTable> {
        self.lut
    }

    fn skeleton_units(&self) -> Vec<Unit> {
        let [c_img, h, w] = self.m.input;
        let s0 = &self.stages[0];
        let (f, p) = conv_cost(c_img, s0.channels, 3, h, w);
        let mut units = vec![Unit {
            layer: "stem".into(),
            key: key(STEM_OP, c_img, s0.channels, h, w, 1),
            flops: f,
            params: p,
            optional: true,
        }];
        for s in 1..NUM_STAGES {
            let (prev, cur) = (&self.stages[s - 1], &self.stages[s]);
            let (fa, pa) = conv_cost(prev.channels, cur.channels, 3, cur.h, cur.w);
            let (fb, pb) = conv_cost(cur.channels, cur.channels, 3, cur.h, cur.w);
            let fp = pool_cost(prev.channels, 2, cur.h, cur.w);
            let (fs, ps) = conv_cost(prev.channels, cur.channels, 1, cur.h, cur.w);
            units.push(Unit {
                layer: format!("r{s}"),
                key: key(REDUCTION_OP, prev.channels, cur.channels, prev.h, prev.w, 2),
                flops: fa + fb + fp + fs,
                params: pa + pb + ps,
                optional: true,
            });
        }
        let last = &self.stages[NUM_STAGES - 1];
        let classes = self.m.num_classes;
        units.push(Unit {
            layer: "classifier".into(),
            key: key(CLASSIFIER_OP, last.channels, classes, last.h, last.w, 1),
            flops: (2 * last.channels * classes) as u64,
            params: (classes * (last.channels + 1)) as u64,
            optional: true,
        });
        units
    }

    /// Every key this skeleton can look up: the skeleton units followed by
    /// each cell operator at each stage.
    pub fn table_keys(&self) -> Vec<LatencyKey> {
        let mut keys: Vec<LatencyKey> = self.skeleton_units().into_iter().map(|u| u.key).collect();
        for s in &self.stages {
            for op in OpKind::ALL {
                keys.push(cell_unit(String::new(), op, s).key);
            }
        }
        keys
    }

    /// Units in network order: stem, stage cells, reductions, classifier.
    fn units(&self, a: &CellArch) -> Vec<Unit> {
        let skeleton = self.skeleton_units();
        let mut units = vec![skeleton[0].clone()];
        for (s, stage) in self.stages.iter().enumerate() {
            if s > 0 {
                units.push(skeleton[s].clone());
            }
            for c in 0..self.m.cells_per_stage {
                for (e, &(from, to)) in EDGES.iter().enumerate() {
                    let op = a.op(e);
                    units.push(cell_unit(format!("s{s}.c{c}.e{from}{to}"), op, stage));
                }
            }
        }
        units.push(skeleton[NUM_STAGES].clone());
        units
    }

    fn lookup(&self, lut: &LatencyTable, u: &Unit) -> Result<f64> {
        match lut.get(&u.key) {
            Some(v) => Ok(v),
            None if u.optional => Ok(0.0),
            None => Err(Error::LutMissing(u.key.to_string())),
        }
    }

    /// Per-unit FLOPs and parameters, plus latency when a table is attached.
    pub fn breakdown(&self, a: &CellArch) -> Result<CostBreakdown> {
        let mut records = Vec::new();
        let mut flops = 0;
        let mut params = 0;
        let mut latency = self.lut.map(|_| 0.0);
        for u in self.units(a) {
            let lat = match self.lut {
                Some(t) => Some(self.lookup(t, &u)?),
                None => None,
            };
            flops += u.flops;
            params += u.params;
            if let (Some(total), Some(v)) = (latency.as_mut(), lat) {
                *total += v;
            }
            records.push(CostRecord {
                layer: u.layer,
                op: u.key.op,
                flops: u.flops,
                params: u.params,
                latency_us: lat,
            });
        }
        if let (Some(total), Some(t)) = (latency.as_mut(), self.lut) {
            *total += t.overhead_us();
            records.push(CostRecord {
                layer: "overhead".into(),
                op: super::lut::OVERHEAD_OP.into(),
                flops: 0,
                params: 0,
                latency_us: Some(t.overhead_us()),
            });
        }
        Ok(CostBreakdown {
            records,
            flops,
            params,
            latency_us: latency,
        })
    }

    /// FLOPs one edge contributes across all cells when it carries `op`.
    pub fn edge_flops(&self, op: OpKind) -> u64 {
        self.stages
            .iter()
            .map(|s| cell_unit(String::new(), op, s).flops * self.m.cells_per_stage as u64)
            .sum()
    }

    /// Latency one edge contributes across all cells when it carries `op`.
    pub fn edge_latency(&self, op: OpKind) -> Result<f64> {
        let lut = self.lut.ok_or(Error::MissingLut)?;
        let mut total = 0.0;
        for s in &self.stages {
            let v = self.lookup(lut, &cell_unit(String::new(), op, s))?;
            total += v * self.m.cells_per_stage as f64;
        }
        Ok(total)
    }

    fn edge_cost(&self, metric: Metric, op: OpKind) -> Result<f64> {
        match metric {
            Metric::Flops => Ok(self.edge_flops(op) as f64),
            Metric::Latency => self.edge_latency(op),
        }
    }

    fn skeleton_cost(&self, metric: Metric) -> Result<f64> {
        let units = self.skeleton_units();
        match metric {
            Metric::Flops => Ok(units.iter().map(|u| u.flops).sum::<u64>() as f64),
            Metric::Latency => {
                let lut = self.lut.ok_or(Error::MissingLut)?;
                let mut total = lut.overhead_us();
                for u in &units {
                    total += self.lookup(lut, u)?;
                }
                Ok(total)
            }
        }
    }

    /// Cheapest completion of `st` under `metric` (per-edge argmin).
    pub fn cheapest_completion(&self, st: &SupernetState, metric: Metric) -> Result<CellArch> {
        let mut ops = [OpKind::None; NUM_EDGES];
        for (e, slot) in ops.iter_mut().enumerate() {
            let mut best: Option<(f64, OpKind)> = None;
            for op in st.edge(e).iter() {
                let c = self.edge_cost(metric, op)?;
                if best.is_none_or(|(b, _)| c < b) {
                    best = Some((c, op));
                }
            }
            *slot = best.expect("edge sets are never empty").1;
        }
        Ok(CellArch::new(ops))
    }

    /// Lower bound of `metric` over every completion of `st`.
    pub fn min_completion(&self, st: &SupernetState, metric: Metric) -> Result<f64> {
        let a = self.cheapest_completion(st, metric)?;
        let b = self.breakdown(&a)?;
        Ok(match metric {
            Metric::Flops => b.flops as f64,
            Metric::Latency => b.latency_us.ok_or(Error::MissingLut)?,
        })
    }

    /// Cost of a supernet state with each edge's cost aggregated over its
    /// surviving operators.
    pub fn supernet_cost(&self, st: &SupernetState, metric: Metric, agg: Aggregate) -> Result<f64> {
        let mut total = self.skeleton_cost(metric)?;
        for e in 0..NUM_EDGES {
            let costs = st
                .edge(e)
                .iter()
                .map(|op| self.edge_cost(metric, op))
                .collect::<Result<Vec<f64>>>()?;
            total += match agg {
                Aggregate::Mean => costs.iter().sum::<f64>() / costs.len() as f64,
                Aggregate::Min => costs.iter().copied().fold(f64::INFINITY, f64::min),
                Aggregate::Max => costs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            };
        }
        Ok(total)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Flops,
    Latency,
}

/// How a multi-operator edge's hardware cost is summarized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    #[default]
    Mean,
    Min,
    Max,
}

impl std::str::FromStr for Aggregate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Aggregate::Mean),
            "min" => Ok(Aggregate::Min),
            "max" => Ok(Aggregate::Max),
            _ => Err(Error::Config(format!("unknown aggregate `{s}` (mean, min, max)"))),
        }
    }
}

/// FLOPs and parameters of the classification network for `a`.
pub fn count_flops(a: &CellArch, m: &MacroConfig) -> Result<CostBreakdown> {
    CostModel::new(m, None)?.breakdown(a)
}

/// FLOPs, parameters and table latency for `a`.
pub fn estimate_latency(a: &CellArch, m: &MacroConfig, t: &LatencyTable) -> Result<CostBreakdown> {
    CostModel::new(m, Some(t))?.breakdown(a)
}

/// Latency of the cheapest architecture still reachable from `st`.
pub fn min_completion_latency(st: &SupernetState, m: &MacroConfig, t: &LatencyTable) -> Result<f64> {
    CostModel::new(m, Some(t))?.min_completion(st, Metric::Latency)
}

pub fn min_completion_flops(st: &SupernetState, m: &MacroConfig) -> Result<f64> {
    CostModel::new(m, None)?.min_completion(st, Metric::Flops)
}
