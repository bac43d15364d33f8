//! Cell search space: a complete DAG on 4 nodes whose 6 edges each carry one
//! of 5 operators, stacked into a fixed macro skeleton.
//!
//! Node 0 is the cell input, node 3 its output, and every node sums the
//! outputs of its incoming edges. During pruning an edge may hold several
//! operators; it then outputs their mean.

mod arch;
mod build;
mod supernet;

pub use arch::{edge_index, enumerate_space, parse_arch, CellArch, OpKind, EDGES, NUM_EDGES, NUM_NODES};
pub use build::{
    build_full_network, build_lr_network, supernet_lr_network, supernet_network, MacroConfig, StageShape,
    NUM_STAGES,
};
pub use supernet::{OpSet, SupernetState};
