//! Instantiation of cells and supernets as [`Network`]s.
//!
//! Macro skeleton: a 3×3 stem conv, three stages of `N` cells at `C`, `2C`
//! and `4C` channels, and a fixed residual reduction block (stride 2)
//! between consecutive stages. The classification variant ends in
//! ReLU → global average pool → linear.
//!
//! In the classification network a convolution edge is pre-activated
//! (ReLU → conv). In the linear-region network it is conv → ReLU, and the
//! stem and reduction blocks stay purely affine, so every ReLU unit belongs
//! to a searched convolution.

use serde::{Deserialize, Serialize};

use super::arch::{CellArch, OpKind, EDGES, NUM_NODES};
use super::supernet::SupernetState;
use crate::error::{Error, Result};
use crate::nn::{Network, NetworkBuilder, NodeId};

pub const NUM_STAGES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacroConfig {
    pub stem_channels: usize,
    pub cells_per_stage: usize,
    pub num_classes: usize,
    /// `[C, H, W]`.
    pub input: [usize; 3],
}

impl Default for MacroConfig {
    /// 16/32/64 channels, 5 cells per stage, 10 classes, 3×32×32 input.
    fn default() -> Self {
        MacroConfig {
            stem_channels: 16,
            cells_per_stage: 5,
            num_classes: 10,
            input: [3, 32, 32],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StageShape {
    pub channels: usize,
    pub h: usize,
    pub w: usize,
}

impl MacroConfig {
    /// One cell per stage on 3×8×8 inputs; small enough for quick runs.
    pub fn desk() -> Self {
        MacroConfig {
            cells_per_stage: 1,
            input: [3, 8, 8],
            ..Self::default()
        }
    }

    pub fn with_input(mut self, input: [usize; 3]) -> Self {
        self.input = input;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.stem_channels == 0 || self.cells_per_stage == 0 || self.num_classes == 0 || self.input[0] == 0 {
            return Err(Error::Config("macro settings must all be positive".into()));
        }
        let [_, h, w] = self.input;
        if h < 4 || w < 4 || h % 4 != 0 || w % 4 != 0 {
            return Err(Error::ResolutionTooSmall { h, w });
        }
        Ok(())
    }

    /// Feature-map shape inside each stage.
    pub fn stages(&self) -> Result<[StageShape; NUM_STAGES]> {
        self.validate()?;
        let [_, h, w] = self.input;
        Ok(std::array::from_fn(|s| StageShape {
            channels: self.stem_channels << s,
            h: h >> s,
            w: w >> s,
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Flavor {
    Classifier,
    LinearRegions,
}

struct Assembler<'a> {
    b: NetworkBuilder,
    state: &'a SupernetState,
    flavor: Flavor,
}

impl Assembler<'_> {
    fn cell(&mut self, x: NodeId, stage: usize, cell: usize) -> Result<NodeId> {
        let shape = self.b.shape(x).to_vec();
        let channels = shape[0];
        let mut nodes = [x; NUM_NODES];
        let mut relu_of: [Option<NodeId>; NUM_NODES] = [None; NUM_NODES];
        for to in 1..NUM_NODES {
            let mut terms = Vec::new();
            for (e, &(from, _)) in EDGES.iter().enumerate().filter(|(_, &(_, t))| t == to) {
                let ops = self.state.edge(e);
                let coef = 1.0 / ops.len() as f64;
                for op in ops.iter() {
                    let src = nodes[from];
                    let out = match op {
                        OpKind::None => continue,
                        OpKind::SkipConnect => src,
                        OpKind::AvgPool3x3 => self.b.avg_pool(src, 3, 1, 1)?,
                        OpKind::NorConv1x1 | OpKind::NorConv3x3 => {
                            let k = op.conv_kernel().unwrap();
                            let label = format!("s{stage}.c{cell}.e{from}{to}.{}", op.name());
                            match self.flavor {
                                Flavor::Classifier => {
                                    let r = match relu_of[from] {
                                        Some(r) => r,
                                        None => {
                                            let r = self.b.relu(src)?;
                                            relu_of[from] = Some(r);
                                            r
                                        }
                                    };
                                    self.b.conv2d(r, channels, k, 1, k / 2, label)?
                                }
                                Flavor::LinearRegions => {
                                    let c = self.b.conv2d(src, channels, k, 1, k / 2, label)?;
                                    self.b.relu(c)?
                                }
                            }
                        }
                    };
                    terms.push((out, coef));
                }
            }
            nodes[to] = self.b.weighted_sum(&terms, &shape)?;
        }
        Ok(nodes[NUM_NODES - 1])
    }

    fn reduction(&mut self, x: NodeId, stage: usize, c_out: usize) -> Result<NodeId> {
        let pre = |a: &mut Self, n: NodeId| match a.flavor {
            Flavor::Classifier => a.b.relu(n),
            Flavor::LinearRegions => Ok(n),
        };
        let r = pre(self, x)?;
        let a = self.b.conv2d(r, c_out, 3, 2, 1, format!("r{stage}.conv_a"))?;
        let r = pre(self, a)?;
        let body = self.b.conv2d(r, c_out, 3, 1, 1, format!("r{stage}.conv_b"))?;
        let pooled = self.b.avg_pool(x, 2, 2, 0)?;
        let short = self.b.conv2d(pooled, c_out, 1, 1, 0, format!("r{stage}.shortcut"))?;
        let shape = self.b.shape(body).to_vec();
        self.b.weighted_sum(&[(body, 1.0), (short, 1.0)], &shape)
    }
}

fn assemble(state: &SupernetState, m: &MacroConfig, flavor: Flavor) -> Result<Network> {
    let stages = m.stages()?;
    let mut asm = Assembler {
        b: NetworkBuilder::new(&m.input),
        state,
        flavor,
    };
    let mut x = asm.b.conv2d(0, stages[0].channels, 3, 1, 1, "stem")?;
    for (s, stage) in stages.iter().enumerate() {
        if s > 0 {
            x = asm.reduction(x, s, stage.channels)?;
        }
        for c in 0..m.cells_per_stage {
            x = asm.cell(x, s, c)?;
        }
    }
    if flavor == Flavor::Classifier {
        x = asm.b.relu(x)?;
        x = asm.b.global_avg_pool(x)?;
        asm.b.linear(x, m.num_classes, "classifier")?;
    }
    asm.b.finish()
}

/// Classification network whose edges average their surviving operators.
pub fn supernet_network(state: &SupernetState, m: &MacroConfig, seed: u64) -> Result<Network> {
    Ok(assemble(state, m, Flavor::Classifier)?.init_params(seed))
}

/// Linear-region variant of [`supernet_network`]; no classifier head.
pub fn supernet_lr_network(state: &SupernetState, m: &MacroConfig, seed: u64) -> Result<Network> {
    Ok(assemble(state, m, Flavor::LinearRegions)?.init_params(seed))
}

pub fn build_full_network(a: &CellArch, m: &MacroConfig, seed: u64) -> Result<Network> {
    supernet_network(&SupernetState::from(*a), m, seed)
}

pub fn build_lr_network(a: &CellArch, m: &MacroConfig, seed: u64) -> Result<Network> {
    supernet_lr_network(&SupernetState::from(*a), m, seed)
}
