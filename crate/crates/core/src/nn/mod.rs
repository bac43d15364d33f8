//! Layer graphs evaluated at initialization.
//!
//! A [`Network`] is a topologically ordered list of layers. Node `0` is the
//! network input and layer `k` produces node `k + 1`; the last layer is the
//! output. Besides the five primitives (conv, ReLU, average pool, global
//! average pool, linear) there is a weighted-sum node that joins branches,
//! which is how cell DAG nodes and supernet edges are expressed.
//!
//! All parameters live in one flat vector. Convolution weights are stored
//! `[C_out, C_in, K, K]` followed by `C_out` biases; linear weights are
//! `[out, in]` followed by `out` biases.

mod autodiff;
mod kernels;

use std::collections::HashSet;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng as _;
use rand_distr::StandardNormal;

pub use autodiff::{ActivationPattern, Gradients, Tape};
pub use kernels::out_len;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from};

pub type NodeId = usize;

static PARAM_VERSION: AtomicU64 = AtomicU64::new(1);

fn next_version() -> u64 {
    PARAM_VERSION.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerKind {
    Conv2d {
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        offset: usize,
    },
    Relu,
    /// Padded positions do not count towards the mean.
    AvgPool {
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    GlobalAvgPool,
    /// Flattens its input.
    Linear {
        in_features: usize,
        out_features: usize,
        offset: usize,
    },
    /// `Σ weight_k · input_k`; with no inputs the node is all zeros.
    Sum { weights: Vec<f64> },
}

impl LayerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LayerKind::Conv2d { .. } => "conv2d",
            LayerKind::Relu => "relu",
            LayerKind::AvgPool { .. } => "avgpool",
            LayerKind::GlobalAvgPool => "global_avg_pool",
            LayerKind::Linear { .. } => "linear",
            LayerKind::Sum { .. } => "sum",
        }
    }

    pub fn param_len(&self) -> usize {
        match *self {
            LayerKind::Conv2d {
                c_in, c_out, kernel, ..
            } => c_out * (c_in * kernel * kernel + 1),
            LayerKind::Linear {
                in_features,
                out_features,
                ..
            } => out_features * (in_features + 1),
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub kind: LayerKind,
    pub inputs: Vec<NodeId>,
    /// Per-sample output shape (`[C, H, W]`, or `[F]` after pooling/linear).
    pub out_shape: Vec<usize>,
    pub label: String,
}

#[derive(Debug, Clone)]
pub struct Network {
    input_shape: Vec<usize>,
    layers: Vec<Layer>,
    params: Vec<f64>,
    version: u64,
}

impl Network {
    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Per-sample output shape.
    pub fn output_shape(&self) -> &[usize] {
        self.node_shape(self.layers.len())
    }

    pub fn node_shape(&self, node: NodeId) -> &[usize] {
        if node == 0 {
            &self.input_shape
        } else {
            &self.layers[node - 1].out_shape
        }
    }

    /// Number of ReLU units per sample.
    pub fn relu_units(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| l.kind == LayerKind::Relu)
            .map(|l| l.out_shape.iter().product::<usize>())
            .sum()
    }

    /// Replaces the parameter vector.
    pub fn with_params(&self, params: Vec<f64>) -> Result<Network> {
        if params.len() != self.params.len() {
            return Err(Error::ParamLength {
                expected: self.params.len(),
                got: params.len(),
            });
        }
        Ok(Network {
            input_shape: self.input_shape.clone(),
            layers: self.layers.clone(),
            params,
            version: next_version(),
        })
    }

    /// Kaiming-normal initialization: weights `N(0, 2 / fan_in)`, biases zero.
    ///
    /// Each parameterized layer draws from its own stream derived from
    /// `(seed, label)`, so a layer's weights do not depend on which other
    /// layers the network contains.
    pub fn init_params(&self, seed: u64) -> Network {
        let mut params = vec![0.0; self.params.len()];
        for layer in &self.layers {
            let (offset, weights, fan_in) = match layer.kind {
                LayerKind::Conv2d {
                    c_in,
                    c_out,
                    kernel,
                    offset,
                    ..
                } => (offset, c_out * c_in * kernel * kernel, c_in * kernel * kernel),
                LayerKind::Linear {
                    in_features,
                    out_features,
                    offset,
                } => (offset, out_features * in_features, in_features),
                _ => continue,
            };
            let std = (2.0 / fan_in as f64).sqrt();
            let mut rng = rng_from(derive_seed(seed, &layer.label, 0));
            for p in &mut params[offset..offset + weights] {
                *p = std * rng.sample::<f64, _>(StandardNormal);
            }
        }
        Network {
            input_shape: self.input_shape.clone(),
            layers: self.layers.clone(),
            params,
            version: next_version(),
        }
    }
}

/// Incremental, shape-checked network construction.
#[derive(Debug, Clone)]
pub struct NetworkBuilder {
    input_shape: Vec<usize>,
    layers: Vec<Layer>,
    param_count: usize,
    labels: HashSet<String>,
}

impl NetworkBuilder {
    pub fn new(input_shape: &[usize]) -> Self {
        NetworkBuilder {
            input_shape: input_shape.to_vec(),
            layers: Vec::new(),
            param_count: 0,
            labels: HashSet::new(),
        }
    }

    pub fn input(&self) -> NodeId {
        0
    }

    pub fn shape(&self, node: NodeId) -> &[usize] {
        if node == 0 {
            &self.input_shape
        } else {
            &self.layers[node - 1].out_shape
        }
    }

    fn err(&self, label: &str, detail: impl Into<String>) -> Error {
        Error::Shape {
            layer: self.layers.len(),
            label: label.to_string(),
            detail: detail.into(),
        }
    }

    fn check_node(&self, node: NodeId, label: &str) -> Result<()> {
        if node > self.layers.len() {
            return Err(self.err(label, format!("node {node} does not exist yet")));
        }
        Ok(())
    }

    fn chw(&self, node: NodeId, label: &str) -> Result<(usize, usize, usize)> {
        self.check_node(node, label)?;
        match *self.shape(node) {
            [c, h, w] => Ok((c, h, w)),
            ref s => Err(self.err(label, format!("expected a [C, H, W] feature map, got {s:?}"))),
        }
    }

    fn push(&mut self, kind: LayerKind, inputs: Vec<NodeId>, out_shape: Vec<usize>, label: String) -> NodeId {
        self.param_count += kind.param_len();
        self.layers.push(Layer {
            kind,
            inputs,
            out_shape,
            label,
        });
        self.layers.len()
    }

    fn claim_label(&mut self, label: &str) -> Result<()> {
        if !self.labels.insert(label.to_string()) {
            return Err(self.err(label, "parameterized layer labels must be unique"));
        }
        Ok(())
    }

    pub fn conv2d(
        &mut self,
        x: NodeId,
        c_out: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        label: impl Into<String>,
    ) -> Result<NodeId> {
        let label = label.into();
        let (c_in, h, w) = self.chw(x, &label)?;
        if c_out == 0 || kernel == 0 || stride == 0 {
            return Err(self.err(&label, "channels, kernel and stride must be positive"));
        }
        let (Some(ho), Some(wo)) = (
            out_len(h, kernel, stride, padding),
            out_len(w, kernel, stride, padding),
        ) else {
            return Err(self.err(&label, format!("kernel {kernel} larger than padded {h}x{w} input")));
        };
        self.claim_label(&label)?;
        let kind = LayerKind::Conv2d {
            c_in,
            c_out,
            kernel,
            stride,
            padding,
            offset: self.param_count,
        };
        Ok(self.push(kind, vec![x], vec![c_out, ho, wo], label))
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        self.check_node(x, "relu")?;
        let shape = self.shape(x).to_vec();
        Ok(self.push(LayerKind::Relu, vec![x], shape, "relu".into()))
    }

    pub fn avg_pool(&mut self, x: NodeId, kernel: usize, stride: usize, padding: usize) -> Result<NodeId> {
        let (c, h, w) = self.chw(x, "avgpool")?;
        if kernel == 0 || stride == 0 || padding >= kernel {
            return Err(self.err("avgpool", "kernel and stride must be positive and padding < kernel"));
        }
        let (Some(ho), Some(wo)) = (
            out_len(h, kernel, stride, padding),
            out_len(w, kernel, stride, padding),
        ) else {
            return Err(self.err("avgpool", format!("kernel {kernel} larger than padded {h}x{w} input")));
        };
        let kind = LayerKind::AvgPool {
            kernel,
            stride,
            padding,
        };
        Ok(self.push(kind, vec![x], vec![c, ho, wo], "avgpool".into()))
    }

    pub fn global_avg_pool(&mut self, x: NodeId) -> Result<NodeId> {
        let (c, _, _) = self.chw(x, "global_avg_pool")?;
        Ok(self.push(LayerKind::GlobalAvgPool, vec![x], vec![c], "global_avg_pool".into()))
    }

    pub fn linear(&mut self, x: NodeId, out_features: usize, label: impl Into<String>) -> Result<NodeId> {
        let label = label.into();
        self.check_node(x, &label)?;
        if out_features == 0 {
            return Err(self.err(&label, "output features must be positive"));
        }
        self.claim_label(&label)?;
        let kind = LayerKind::Linear {
            in_features: self.shape(x).iter().product(),
            out_features,
            offset: self.param_count,
        };
        Ok(self.push(kind, vec![x], vec![out_features], label))
    }

    /// Weighted sum of same-shaped nodes. `shape` is required so that an
    /// empty sum (all inputs pruned away) still has a well-defined output.
    pub fn weighted_sum(&mut self, terms: &[(NodeId, f64)], shape: &[usize]) -> Result<NodeId> {
        for &(node, _) in terms {
            self.check_node(node, "sum")?;
            if self.shape(node) != shape {
                return Err(self.err(
                    "sum",
                    format!("term node {node} has shape {:?}, expected {shape:?}", self.shape(node)),
                ));
            }
        }
        let kind = LayerKind::Sum {
            weights: terms.iter().map(|t| t.1).collect(),
        };
        let inputs = terms.iter().map(|t| t.0).collect();
        Ok(self.push(kind, inputs, shape.to_vec(), "sum".into()))
    }

    /// Finishes construction with the last added node as output. Parameters
    /// are zero; call [`Network::init_params`].
    pub fn finish(self) -> Result<Network> {
        if self.layers.is_empty() {
            return Err(Error::Config("network has no layers".into()));
        }
        Ok(Network {
            input_shape: self.input_shape,
            layers: self.layers,
            params: vec![0.0; self.param_count],
            version: next_version(),
        })
    }
}
