use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Candidate operator on a cell edge. The discriminant is the stable code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    None = 0,
    SkipConnect = 1,
    NorConv1x1 = 2,
    NorConv3x3 = 3,
    AvgPool3x3 = 4,
}

impl OpKind {
    pub const ALL: [OpKind; 5] = [
        OpKind::None,
        OpKind::SkipConnect,
        OpKind::NorConv1x1,
        OpKind::NorConv3x3,
        OpKind::AvgPool3x3,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<OpKind> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            OpKind::None => "none",
            OpKind::SkipConnect => "skip_connect",
            OpKind::NorConv1x1 => "nor_conv_1x1",
            OpKind::NorConv3x3 => "nor_conv_3x3",
            OpKind::AvgPool3x3 => "avg_pool_3x3",
        }
    }

    pub fn from_name(name: &str) -> Option<OpKind> {
        Self::ALL.into_iter().find(|op| op.name() == name)
    }

    /// Kernel size for convolutions.
    pub fn conv_kernel(self) -> Option<usize> {
        match self {
            OpKind::NorConv1x1 => Some(1),
            OpKind::NorConv3x3 => Some(3),
            _ => None,
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const NUM_NODES: usize = 4;
pub const NUM_EDGES: usize = 6;

/// Edges as `(from, to)`, in the order they appear in the architecture string.
pub const EDGES: [(usize, usize); NUM_EDGES] = [(0, 1), (0, 2), (1, 2), (0, 3), (1, 3), (2, 3)];

pub fn edge_index(from: usize, to: usize) -> usize {
    EDGES
        .iter()
        .position(|&e| e == (from, to))
        .unwrap_or_else(|| panic!("no edge {from}->{to} in the cell"))
}

/// One operator per edge of the 4-node cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellArch {
    ops: [OpKind; NUM_EDGES],
}

impl CellArch {
    pub const SPACE_SIZE: usize = 15625;

    pub fn new(ops: [OpKind; NUM_EDGES]) -> Self {
        CellArch { ops }
    }

    pub fn uniform(op: OpKind) -> Self {
        CellArch { ops: [op; NUM_EDGES] }
    }

    pub fn ops(&self) -> &[OpKind; NUM_EDGES] {
        &self.ops
    }

    pub fn op(&self, edge: usize) -> OpKind {
        self.ops[edge]
    }

    pub fn with_op(mut self, edge: usize, op: OpKind) -> Self {
        self.ops[edge] = op;
        self
    }

    /// Base-5 index with edge 0 most significant; enumeration order.
    pub fn index(&self) -> usize {
        self.ops.iter().fold(0, |acc, op| acc * 5 + op.code() as usize)
    }

    pub fn from_index(mut index: usize) -> Option<Self> {
        if index >= Self::SPACE_SIZE {
            return None;
        }
        let mut ops = [OpKind::None; NUM_EDGES];
        for slot in ops.iter_mut().rev() {
            *slot = OpKind::from_code((index % 5) as u8)?;
            index /= 5;
        }
        Some(CellArch { ops })
    }
}

/// All 5⁶ cells in lexicographic edge-code order.
pub fn enumerate_space() -> impl Iterator<Item = CellArch> + Clone {
    (0..CellArch::SPACE_SIZE).map(|i| CellArch::from_index(i).expect("index below space size"))
}

impl fmt::Display for CellArch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for to in 1..NUM_NODES {
            if to > 1 {
                f.write_str("+")?;
            }
            f.write_str("|")?;
            for from in 0..to {
                write!(f, "{}~{}|", self.ops[edge_index(from, to)], from)?;
            }
        }
        Ok(())
    }
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl Cursor<'_> {
    fn expect(&mut self, c: char) -> Result<()> {
        match self.src[self.pos..].chars().next() {
            Some(got) if got == c => {
                self.pos += c.len_utf8();
                Ok(())
            }
            Some(got) => Err(Error::ArchSyntax {
                pos: self.pos,
                detail: format!("expected `{c}`, found `{got}`"),
            }),
            None => Err(Error::ArchSyntax {
                pos: self.pos,
                detail: format!("expected `{c}`, found end of input"),
            }),
        }
    }

    fn op(&mut self) -> Result<OpKind> {
        let start = self.pos;
        let len = self.src[start..]
            .find(['~', '|', '+'])
            .unwrap_or(self.src.len() - start);
        let name = &self.src[start..start + len];
        if name.is_empty() {
            return Err(Error::ArchSyntax {
                pos: start,
                detail: "expected an operator name".into(),
            });
        }
        self.pos += len;
        OpKind::from_name(name).ok_or_else(|| Error::UnknownOp {
            name: name.to_string(),
            pos: start,
        })
    }

    fn node(&mut self, expected: usize) -> Result<()> {
        let start = self.pos;
        let len = self.src[start..]
            .find(|c: char| !c.is_ascii_digit())
            .unwrap_or(self.src.len() - start);
        match self.src[start..start + len].parse::<usize>() {
            Ok(k) if k == expected => {
                self.pos += len;
                Ok(())
            }
            _ => Err(Error::ArchSyntax {
                pos: start,
                detail: format!("expected input node {expected}"),
            }),
        }
    }
}

/// Parses `|op~0|+|op~0|op~1|+|op~0|op~1|op~2|`.
pub fn parse_arch(s: &str) -> Result<CellArch> {
    let mut cur = Cursor { src: s, pos: 0 };
    let mut ops = [OpKind::None; NUM_EDGES];
    for to in 1..NUM_NODES {
        if to > 1 {
            cur.expect('+')?;
        }
        cur.expect('|')?;
        for from in 0..to {
            ops[edge_index(from, to)] = cur.op()?;
            cur.expect('~')?;
            cur.node(from)?;
            cur.expect('|')?;
        }
    }
    if cur.pos != s.len() {
        return Err(Error::ArchSyntax {
            pos: cur.pos,
            detail: "trailing characters".into(),
        });
    }
    Ok(CellArch { ops })
}

impl FromStr for CellArch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_arch(s)
    }
}

impl Serialize for CellArch {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CellArch {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_arch(&s).map_err(serde::de::Error::custom)
    }
}
