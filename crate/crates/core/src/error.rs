use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// Variants are grouped loosely by the subsystem that raises them; see
/// [`Error::kind`] for the coarse classification used by front ends.
#[derive(Debug, Error)]
pub enum Error {
    // network construction and evaluation
    #[error("shape mismatch at layer {layer} ({label}): {detail}")]
    Shape {
        layer: usize,
        label: String,
        detail: String,
    },
    #[error("input shape {got:?} does not match network input {expected:?}")]
    InputShape {
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("tape was recorded against different parameters; run forward again")]
    StaleTape,
    #[error("seed gradient shape {got:?} does not match output shape {expected:?}")]
    SeedShape {
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("network has no ReLU units")]
    NoRelu,
    #[error("parameter vector has length {got}, network expects {expected}")]
    ParamLength { expected: usize, got: usize },

    // search space
    #[error("syntax error at byte {pos}: {detail}")]
    ArchSyntax { pos: usize, detail: String },
    #[error("unknown operator `{name}` at byte {pos}")]
    UnknownOp { name: String, pos: usize },
    #[error("supernet state is already resolved")]
    Resolved,
    #[error("edge {edge} has a single operator left; it cannot be pruned")]
    WouldEmptyEdge { edge: usize },
    #[error("operator {op} is not present on edge {edge}")]
    OpAbsent { edge: usize, op: String },
    #[error("input resolution {h}x{w} is too small or not divisible by 4 for the reduction pyramid")]
    ResolutionTooSmall { h: usize, w: usize },
    #[error("invalid configuration: {0}")]
    Config(String),

    // proxies
    #[error("batch needs at least 2 samples, got {0}")]
    BatchTooSmall(usize),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("Jacobi eigensolver did not converge in {sweeps} sweeps (off-diagonal norm {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },
    #[error("batch file {path}: {detail}")]
    BatchFile { path: PathBuf, detail: String },

    // hardware model
    #[error("latency table line {line}: {detail}")]
    LutMalformed { line: usize, detail: String },
    #[error("latency table line {line}: duplicate key {key}")]
    LutDuplicate { line: usize, key: String },
    #[error("latency table line {line}: negative latency {value}")]
    LutNegative { line: usize, value: f64 },
    #[error("latency table has no `__overhead__` row")]
    LutNoOverhead,
    #[error("latency table has no entry for {0}")]
    LutMissing(String),

    // search
    #[error("budget infeasible: {metric} lower bound {bound} exceeds budget {budget}")]
    Infeasible {
        metric: &'static str,
        bound: f64,
        budget: f64,
    },
    #[error("a latency table is required when the latency weight or budget is set")]
    MissingLut,

    // bench
    #[error("sequences have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 observations, got {0}")]
    TooFewObservations(usize),
    #[error("all values on one side are tied; Kendall tau is undefined")]
    AllTied,
    #[error("bench file line {line}: {detail}")]
    BenchParse { line: usize, detail: String },
    #[error("bench file line {line}: duplicate architecture {arch}")]
    BenchDuplicate { line: usize, arch: String },
    #[error("bench file line {line}: accuracy {value} outside [0, 100]")]
    AccuracyRange { line: usize, value: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse failure classes; the CLI maps these onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Lut,
    Infeasible,
    Internal,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            LutMalformed { .. } | LutDuplicate { .. } | LutNegative { .. } | LutNoOverhead
            | LutMissing(_) | MissingLut => ErrorKind::Lut,
            Infeasible { .. } => ErrorKind::Infeasible,
            ArchSyntax { .. } | UnknownOp { .. } | ResolutionTooSmall { .. } | Config(_)
            | BatchTooSmall(_) | BatchFile { .. } | LengthMismatch(..) | TooFewObservations(_)
            | AllTied | BenchParse { .. } | BenchDuplicate { .. } | AccuracyRange { .. }
            | Io { .. } | InputShape { .. } => ErrorKind::Input,
            _ => ErrorKind::Internal,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
