use std::fmt;

use serde::Serialize;

use super::arch::{edge_index, CellArch, OpKind, NUM_EDGES, NUM_NODES};
use crate::error::{Error, Result};

/// A set of operators, iterated in code order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct OpSet(u8);

impl OpSet {
    pub const FULL: OpSet = OpSet(0b1_1111);

    pub fn single(op: OpKind) -> Self {
        OpSet(1 << op.code())
    }

    pub fn from_ops(ops: &[OpKind]) -> Self {
        OpSet(ops.iter().fold(0, |m, op| m | 1 << op.code()))
    }

    pub fn contains(self, op: OpKind) -> bool {
        self.0 & (1 << op.code()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn without(self, op: OpKind) -> Self {
        OpSet(self.0 & !(1 << op.code()))
    }

    pub fn iter(self) -> impl Iterator<Item = OpKind> {
        OpKind::ALL.into_iter().filter(move |&op| self.contains(op))
    }
}

impl Serialize for OpSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

/// Surviving operators on each edge during pruning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SupernetState {
    edges: [OpSet; NUM_EDGES],
}

impl SupernetState {
    /// Every operator on every edge.
    pub fn full() -> Self {
        SupernetState {
            edges: [OpSet::FULL; NUM_EDGES],
        }
    }

    /// Returns an error if any edge set is empty.
    pub fn new(edges: [OpSet; NUM_EDGES]) -> Result<Self> {
        if let Some(e) = edges.iter().position(|s| s.is_empty()) {
            return Err(Error::Config(format!("edge {e} has no operators")));
        }
        Ok(SupernetState { edges })
    }

    pub fn edges(&self) -> &[OpSet; NUM_EDGES] {
        &self.edges
    }

    pub fn edge(&self, edge: usize) -> OpSet {
        self.edges[edge]
    }

    pub fn total_ops(&self) -> usize {
        self.edges.iter().map(|s| s.len()).sum()
    }

    pub fn is_resolved(&self) -> bool {
        self.edges.iter().all(|s| s.len() == 1)
    }

    /// The single architecture a resolved state denotes.
    pub fn to_arch(&self) -> Option<CellArch> {
        if !self.is_resolved() {
            return None;
        }
        let mut ops = [OpKind::None; NUM_EDGES];
        for (slot, set) in ops.iter_mut().zip(&self.edges) {
            *slot = set.iter().next()?;
        }
        Some(CellArch::new(ops))
    }

    /// Every `(edge, op)` whose removal leaves the edge non-empty, ordered by
    /// edge then op code.
    pub fn candidate_prunes(&self) -> Result<Vec<(usize, OpKind)>> {
        if self.is_resolved() {
            return Err(Error::Resolved);
        }
        Ok(self
            .edges
            .iter()
            .enumerate()
            .filter(|(_, s)| s.len() > 1)
            .flat_map(|(e, s)| s.iter().map(move |op| (e, op)))
            .collect())
    }

    pub fn apply_prune(&self, edge: usize, op: OpKind) -> Result<SupernetState> {
        let set = self.edges[edge];
        if !set.contains(op) {
            return Err(Error::OpAbsent {
                edge,
                op: op.name().into(),
            });
        }
        if set.len() == 1 {
            return Err(Error::WouldEmptyEdge { edge });
        }
        let mut next = *self;
        next.edges[edge] = set.without(op);
        Ok(next)
    }

    /// Every architecture obtainable by resolving this state.
    pub fn completions(&self) -> impl Iterator<Item = CellArch> + '_ {
        let sizes: Vec<usize> = self.edges.iter().map(|s| s.len()).collect();
        let total: usize = sizes.iter().product();
        (0..total).map(move |mut idx| {
            let mut ops = [OpKind::None; NUM_EDGES];
            for e in (0..NUM_EDGES).rev() {
                ops[e] = self.edges[e].iter().nth(idx % sizes[e]).expect("index within set");
                idx /= sizes[e];
            }
            CellArch::new(ops)
        })
    }
}

impl From<CellArch> for SupernetState {
    fn from(a: CellArch) -> Self {
        let mut edges = [OpSet::default(); NUM_EDGES];
        for (slot, &op) in edges.iter_mut().zip(a.ops()) {
            *slot = OpSet::single(op);
        }
        SupernetState { edges }
    }
}

/// Same layout as the architecture string, with `a,b` for multi-op edges.
impl fmt::Display for SupernetState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for to in 1..NUM_NODES {
            if to > 1 {
                f.write_str("+")?;
            }
            f.write_str("|")?;
            for from in 0..to {
                let names: Vec<&str> = self.edges[edge_index(from, to)].iter().map(OpKind::name).collect();
                write!(f, "{}~{}|", names.join(","), from)?;
            }
        }
        Ok(())
    }
}
