use std::hash::{Hash, Hasher};

use super::kernels::{self, Conv2dGeom, PoolGeom};
use super::{LayerKind, Network};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Node values recorded by one forward pass.
///
/// `values[0]` is the input and `values[k + 1]` the output of layer `k`, so
/// the pre-activation of a ReLU layer is the value of its input node.
#[derive(Debug, Clone)]
pub struct Tape {
    values: Vec<Tensor>,
    version: u64,
}

impl Tape {
    pub fn batch(&self) -> usize {
        self.values[0].batch()
    }

    pub fn node(&self, node: usize) -> &Tensor {
        &self.values[node]
    }

    pub fn output(&self) -> &Tensor {
        self.values.last().expect("tape always holds the input")
    }
}

#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: Vec<f64>,
    pub input: Tensor,
}

/// One sample's ReLU on/off bits, layer-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActivationPattern {
    words: Vec<u64>,
    len: usize,
}

impl ActivationPattern {
    pub fn from_bits(bits: impl IntoIterator<Item = bool>) -> Self {
        let mut p = ActivationPattern {
            words: Vec::new(),
            len: 0,
        };
        for b in bits {
            p.push(b);
        }
        p
    }

    fn push(&mut self, bit: bool) {
        if self.len.is_multiple_of(64) {
            self.words.push(0);
        }
        if bit {
            *self.words.last_mut().unwrap() |= 1 << (self.len % 64);
        }
        self.len += 1;
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range");
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(|i| self.get(i))
    }

    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.hash(&mut h);
        h.finish()
    }
}

impl std::fmt::Display for ActivationPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in self.bits() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

fn conv_geom(kind: &LayerKind, in_shape: &[usize]) -> Conv2dGeom {
    match *kind {
        LayerKind::Conv2d {
            c_in,
            c_out,
            kernel,
            stride,
            padding,
            ..
        } => Conv2dGeom {
            c_in,
            c_out,
            kernel,
            stride,
            padding,
            h: in_shape[1],
            w: in_shape[2],
        },
        _ => unreachable!("conv_geom on {}", kind.name()),
    }
}

fn pool_geom(kernel: usize, stride: usize, padding: usize, in_shape: &[usize]) -> PoolGeom {
    PoolGeom {
        c: in_shape[0],
        kernel,
        stride,
        padding,
        h: in_shape[1],
        w: in_shape[2],
    }
}

fn batched(batch: usize, shape: &[usize]) -> Vec<usize> {
    let mut s = Vec::with_capacity(shape.len() + 1);
    s.push(batch);
    s.extend_from_slice(shape);
    s
}

impl Network {
    /// Evaluates the network on a batch `[N, ...input_shape]`.
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, Tape)> {
        if x.shape().len() != self.input_shape.len() + 1 || x.shape()[1..] != self.input_shape[..] {
            return Err(Error::InputShape {
                expected: self.input_shape.clone(),
                got: x.shape().to_vec(),
            });
        }
        let n = x.batch();
        let mut values: Vec<Tensor> = Vec::with_capacity(self.layers.len() + 1);
        values.push(x.clone());
        for layer in &self.layers {
            let mut y = Tensor::zeros(&batched(n, &layer.out_shape));
            let in_shape = self.node_shape(layer.inputs.first().copied().unwrap_or(0));
            match &layer.kind {
                LayerKind::Conv2d {
                    c_out, offset, ..
                } => {
                    let g = conv_geom(&layer.kind, in_shape);
                    let (w, b) = self.params[*offset..].split_at(g.weight_len());
                    let input = &values[layer.inputs[0]];
                    for s in 0..n {
                        kernels::conv2d_forward(&g, w, &b[..*c_out], input.sample(s), y.sample_mut(s));
                    }
                }
                LayerKind::Relu => {
                    let input = &values[layer.inputs[0]];
                    for (o, &v) in y.data_mut().iter_mut().zip(input.data()) {
                        *o = if v > 0.0 { v } else { 0.0 };
                    }
                }
                &LayerKind::AvgPool {
                    kernel,
                    stride,
                    padding,
                } => {
                    let g = pool_geom(kernel, stride, padding, in_shape);
                    let input = &values[layer.inputs[0]];
                    for s in 0..n {
                        kernels::avg_pool_forward(&g, input.sample(s), y.sample_mut(s));
                    }
                }
                LayerKind::GlobalAvgPool => {
                    let input = &values[layer.inputs[0]];
                    let c = in_shape[0];
                    let plane = in_shape[1] * in_shape[2];
                    for s in 0..n {
                        let xs = input.sample(s);
                        let ys = y.sample_mut(s);
                        for ch in 0..c {
                            ys[ch] = xs[ch * plane..(ch + 1) * plane].iter().sum::<f64>() / plane as f64;
                        }
                    }
                }
                &LayerKind::Linear {
                    in_features,
                    out_features,
                    offset,
                } => {
                    let (w, b) = self.params[offset..].split_at(in_features * out_features);
                    let input = &values[layer.inputs[0]];
                    for s in 0..n {
                        kernels::linear_forward(
                            in_features,
                            out_features,
                            w,
                            &b[..out_features],
                            input.sample(s),
                            y.sample_mut(s),
                        );
                    }
                }
                LayerKind::Sum { weights } => {
                    for (&node, &c) in layer.inputs.iter().zip(weights) {
                        for (o, &v) in y.data_mut().iter_mut().zip(values[node].data()) {
                            *o += c * v;
                        }
                    }
                }
            }
            values.push(y);
        }
        let out = values.last().unwrap().clone();
        Ok((
            out,
            Tape {
                values,
                version: self.version,
            },
        ))
    }

    fn check_tape(&self, tape: &Tape) -> Result<()> {
        if tape.version != self.version || tape.values.len() != self.layers.len() + 1 {
            return Err(Error::StaleTape);
        }
        Ok(())
    }

    /// Reverse pass for `L = ⟨seed, y⟩`.
    ///
    /// Samples whose seed gradient is entirely zero are skipped in the
    /// parameter layers, so one-hot sample seeding costs one sample's
    /// backward pass.
    pub fn backward(&self, tape: &Tape, seed: &Tensor) -> Result<Gradients> {
        self.check_tape(tape)?;
        if seed.shape() != tape.output().shape() {
            return Err(Error::SeedShape {
                expected: tape.output().shape().to_vec(),
                got: seed.shape().to_vec(),
            });
        }
        let n = tape.batch();
        let mut gparams = vec![0.0; self.params.len()];
        let mut grads: Vec<Option<Tensor>> = vec![None; self.layers.len() + 1];
        grads[self.layers.len()] = Some(seed.clone());

        for (k, layer) in self.layers.iter().enumerate().rev() {
            let Some(gy) = grads[k + 1].take() else { continue };
            let in_shape = self.node_shape(layer.inputs.first().copied().unwrap_or(0)).to_vec();
            let live: Vec<bool> = (0..n).map(|s| gy.sample(s).iter().any(|&v| v != 0.0)).collect();
            if !live.iter().any(|&l| l) {
                continue;
            }
            if let LayerKind::Sum { weights } = &layer.kind {
                for (&node, &c) in layer.inputs.iter().zip(weights) {
                    let gx = grads[node].get_or_insert_with(|| Tensor::zeros(&batched(n, &in_shape)));
                    for (t, &v) in gx.data_mut().iter_mut().zip(gy.data()) {
                        *t += c * v;
                    }
                }
                continue;
            }
            let src = layer.inputs[0];
            let x = &tape.values[src];
            let gx = grads[src].get_or_insert_with(|| Tensor::zeros(&batched(n, &in_shape)));
            match &layer.kind {
                LayerKind::Conv2d { offset, .. } => {
                    let g = conv_geom(&layer.kind, &in_shape);
                    let wl = g.weight_len();
                    let weight = &self.params[*offset..*offset + wl];
                    let (gw, gb) = gparams[*offset..*offset + wl + g.c_out].split_at_mut(wl);
                    for s in (0..n).filter(|&s| live[s]) {
                        kernels::conv2d_backward(&g, weight, x.sample(s), gy.sample(s), gw, gb, Some(gx.sample_mut(s)));
                    }
                }
                LayerKind::Relu => {
                    for ((t, &v), &gv) in gx.data_mut().iter_mut().zip(x.data()).zip(gy.data()) {
                        if v > 0.0 {
                            *t += gv;
                        }
                    }
                }
                &LayerKind::AvgPool {
                    kernel,
                    stride,
                    padding,
                } => {
                    let g = pool_geom(kernel, stride, padding, &in_shape);
                    for s in (0..n).filter(|&s| live[s]) {
                        kernels::avg_pool_backward(&g, gy.sample(s), gx.sample_mut(s));
                    }
                }
                LayerKind::GlobalAvgPool => {
                    let plane = in_shape[1] * in_shape[2];
                    for s in (0..n).filter(|&s| live[s]) {
                        let gys = gy.sample(s);
                        let gxs = gx.sample_mut(s);
                        for (ch, &gv) in gys.iter().enumerate() {
                            let v = gv / plane as f64;
                            for t in &mut gxs[ch * plane..(ch + 1) * plane] {
                                *t += v;
                            }
                        }
                    }
                }
                &LayerKind::Linear {
                    in_features,
                    out_features,
                    offset,
                } => {
                    let wl = in_features * out_features;
                    let weight = &self.params[offset..offset + wl];
                    let (gw, gb) = gparams[offset..offset + wl + out_features].split_at_mut(wl);
                    for s in (0..n).filter(|&s| live[s]) {
                        kernels::linear_backward(
                            in_features,
                            out_features,
                            weight,
                            x.sample(s),
                            gy.sample(s),
                            gw,
                            gb,
                            Some(gx.sample_mut(s)),
                        );
                    }
                }
                LayerKind::Sum { .. } => unreachable!(),
            }
        }
        let input = grads[0]
            .take()
            .unwrap_or_else(|| Tensor::zeros(tape.values[0].shape()));
        Ok(Gradients {
            params: gparams,
            input,
        })
    }

    /// `dL/dθ` for `L = ⟨seed, y⟩`.
    pub fn grad_params(&self, tape: &Tape, seed: &Tensor) -> Result<Vec<f64>> {
        Ok(self.backward(tape, seed)?.params)
    }

    /// One pattern per sample: bit `i` is set iff the `i`-th ReLU unit
    /// (layer-major, then row-major within the layer) has a strictly
    /// positive pre-activation.
    pub fn activation_patterns(&self, tape: &Tape) -> Result<Vec<ActivationPattern>> {
        self.check_tape(tape)?;
        let relus: Vec<usize> = self
            .layers
            .iter()
            .filter(|l| l.kind == LayerKind::Relu)
            .map(|l| l.inputs[0])
            .collect();
        if relus.is_empty() || self.relu_units() == 0 {
            return Err(Error::NoRelu);
        }
        Ok((0..tape.batch())
            .map(|s| {
                ActivationPattern::from_bits(
                    relus
                        .iter()
                        .flat_map(|&node| tape.values[node].sample(s).iter().map(|&v| v > 0.0)),
                )
            })
            .collect())
    }
}
