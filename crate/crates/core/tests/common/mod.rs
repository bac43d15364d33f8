#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

//! Independent oracles shared by the integration tests and the acceptance
//! target. Every `check_*` function returns `Err(description)` on the first
//! violated property.

#![allow(dead_code)]

use std::collections::HashSet;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use zsnas::bench::kendall_tau;
use zsnas::hardware::{count_flops, estimate_latency, min_completion_latency, CostModel, LatencyKey, LatencyTable};
use zsnas::nn::LayerKind;
use zsnas::proxies::{
    condition_number, count_distinct_patterns, count_linear_regions, ntk_matrix, symmetric_eigenvalues,
    Matrix, ProxyConfig,
};
use zsnas::search::{run_search, SearchConfig, SearchReport, Weights};
use zsnas::space::{supernet_network, OpSet, NUM_EDGES};
use zsnas::{CellArch, Error, MacroConfig, Network, NetworkBuilder, OpKind, SupernetState, Tensor};

pub type Check = Result<String, String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn randn(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.sample(StandardNormal)).collect()
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)*) => {
        if !$cond {
            return Err(format!($($fmt)*));
        }
    };
}

// ---------------------------------------------------------------- gradients

/// `⟨c, f(x; θ)⟩`.
fn loss(net: &Network, x: &Tensor, c: &Tensor) -> f64 {
    let (y, _) = net.forward(x).expect("forward");
    y.data().iter().zip(c.data()).map(|(a, b)| a * b).sum()
}

/// Smallest `|pre-activation|` over every ReLU input in the batch.
fn min_relu_margin(net: &Network, x: &Tensor) -> f64 {
    let (_, tape) = net.forward(x).expect("forward");
    net.layers()
        .iter()
        .filter(|l| l.kind == LayerKind::Relu)
        .flat_map(|l| tape.node(l.inputs[0]).data().iter().map(|v| v.abs()))
        .fold(f64::INFINITY, f64::min)
}

/// `|a − n| / max(|a|, |n|, 1e-6)`, worst entry.
pub fn rel_err(a: &[f64], n: &[f64]) -> f64 {
    a.iter()
        .zip(n)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

pub const FD_STEP: f64 = 1e-5;

/// Worst relative error between backprop and central differences over all
/// parameters and inputs.
pub fn gradient_error(net: &Network, x: &Tensor, c: &Tensor) -> f64 {
    let (_, tape) = net.forward(x).expect("forward");
    let g = net.backward(&tape, c).expect("backward");
    let h = FD_STEP;
    let mut p = net.params().to_vec();
    let mut num_p = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        let v = p[i];
        p[i] = v + h;
        let up = loss(&net.with_params(p.clone()).unwrap(), x, c);
        p[i] = v - h;
        let down = loss(&net.with_params(p.clone()).unwrap(), x, c);
        p[i] = v;
        num_p.push((up - down) / (2.0 * h));
    }
    let mut xs = x.clone();
    let mut num_x = Vec::with_capacity(xs.len());
    for i in 0..xs.len() {
        let v = xs.data()[i];
        xs.data_mut()[i] = v + h;
        let up = loss(net, &xs, c);
        xs.data_mut()[i] = v - h;
        let down = loss(net, &xs, c);
        xs.data_mut()[i] = v;
        num_x.push((up - down) / (2.0 * h));
    }
    rel_err(&g.params, &num_p).max(rel_err(g.input.data(), &num_x))
}

type Builder = fn() -> Network;

fn conv_net(c_in: usize, c_out: usize, k: usize, s: usize, p: usize, h: usize, w: usize) -> Network {
    let mut b = NetworkBuilder::new(&[c_in, h, w]);
    b.conv2d(0, c_out, k, s, p, "conv").unwrap();
    b.finish().unwrap()
}

fn pool_net(k: usize, s: usize, p: usize) -> Network {
    let mut b = NetworkBuilder::new(&[2, 5, 6]);
    b.avg_pool(0, k, s, p).unwrap();
    b.finish().unwrap()
}

/// Small networks, one per primitive plus a mixed graph.
pub fn gradient_cases() -> Vec<(&'static str, Builder)> {
    vec![
        ("conv3x3 s1 p1", || conv_net(2, 3, 3, 1, 1, 5, 5)),
        ("conv1x1 s2 p0", || conv_net(3, 2, 1, 2, 0, 5, 4)),
        ("conv3x3 s2 p1", || conv_net(2, 2, 3, 2, 1, 6, 7)),
        ("relu", || {
            let mut b = NetworkBuilder::new(&[2, 3, 3]);
            b.relu(0).unwrap();
            b.finish().unwrap()
        }),
        ("avgpool 3/1/1", || pool_net(3, 1, 1)),
        ("avgpool 2/2/0", || pool_net(2, 2, 0)),
        ("avgpool 3/2/1", || pool_net(3, 2, 1)),
        ("global avgpool", || {
            let mut b = NetworkBuilder::new(&[3, 4, 3]);
            b.global_avg_pool(0).unwrap();
            b.finish().unwrap()
        }),
        ("linear", || {
            let mut b = NetworkBuilder::new(&[3, 2, 2]);
            b.linear(0, 4, "fc").unwrap();
            b.finish().unwrap()
        }),
        ("weighted sum", || {
            let mut b = NetworkBuilder::new(&[2, 4, 4]);
            let c = b.conv2d(0, 2, 3, 1, 1, "conv").unwrap();
            b.weighted_sum(&[(c, 0.5), (0, -1.25), (c, 0.75)], &[2, 4, 4]).unwrap();
            b.finish().unwrap()
        }),
        ("mixed graph", || {
            let mut b = NetworkBuilder::new(&[2, 6, 6]);
            let a = b.conv2d(0, 3, 3, 1, 1, "a").unwrap();
            let r = b.relu(a).unwrap();
            let p = b.avg_pool(r, 3, 1, 1).unwrap();
            let c = b.conv2d(r, 3, 1, 1, 0, "b").unwrap();
            let s = b.weighted_sum(&[(p, 0.5), (c, 0.5)], &[3, 6, 6]).unwrap();
            let d = b.conv2d(s, 4, 3, 2, 1, "down").unwrap();
            let r2 = b.relu(d).unwrap();
            let g = b.global_avg_pool(r2).unwrap();
            b.linear(g, 3, "fc").unwrap();
            b.finish().unwrap()
        }),
    ]
}

/// Random parameters (biases included), a batch of two inputs kept at
/// least `1e-3` away from every ReLU kink, and a random output weighting.
pub fn gradient_instance(build: Builder, seed: u64) -> (Network, Tensor, Tensor) {
    let net = build();
    let mut r = rng(seed);
    let net = net.with_params(randn(&mut r, net.param_count()).iter().map(|v| 0.5 * v).collect()).unwrap();
    let shape: Vec<usize> = std::iter::once(2).chain(net.input_shape().iter().copied()).collect();
    let n: usize = shape.iter().product();
    let x = loop {
        let x = Tensor::new(shape.clone(), randn(&mut r, n)).unwrap();
        if net.relu_units() == 0 || min_relu_margin(&net, &x) > 1e-3 {
            break x;
        }
    };
    let out: Vec<usize> = std::iter::once(2).chain(net.output_shape().iter().copied()).collect();
    let m: usize = out.iter().product();
    let c = Tensor::new(out, randn(&mut r, m)).unwrap();
    (net, x, c)
}

pub const GRADIENT_TOL: f64 = 1e-4;

pub fn check_gradients(seeds: u64) -> Check {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (name, build) in gradient_cases() {
        for seed in 0..seeds {
            let (net, x, c) = gradient_instance(build, seed);
            let e = gradient_error(&net, &x, &c);
            ensure!(e < GRADIENT_TOL, "{name}, seed {seed}: relative error {e:e}");
            worst = worst.max(e);
        }
    }
    let t = start.elapsed();
    ensure!(t < Duration::from_secs(60), "took {t:?}");
    Ok(format!(
        "{} primitives/graphs x {seeds} seeds, worst rel. err {worst:.1e}, {:.1}s",
        gradient_cases().len(),
        t.as_secs_f64()
    ))
}

// ---------------------------------------------------------------------- NTK

/// Conv(2→3, 3x3) → ReLU → Linear(→2) on 2x4x4 inputs.
pub fn two_layer_net(seed: u64) -> Network {
    let mut b = NetworkBuilder::new(&[2, 4, 4]);
    let c = b.conv2d(0, 3, 3, 1, 1, "conv").unwrap();
    let r = b.relu(c).unwrap();
    b.linear(r, 2, "fc").unwrap();
    let net = b.finish().unwrap();
    let mut g = rng(seed);
    net.with_params(randn(&mut g, net.param_count()).iter().map(|v| 0.5 * v).collect())
        .unwrap()
}

/// `Θ = J Jᵀ` with `J` from central differences of the summed logits.
pub fn fd_ntk(net: &Network, x: &Tensor) -> Vec<Vec<f64>> {
    let b = x.batch();
    let p = net.params().to_vec();
    let per_sample_sum = |params: &[f64]| -> Vec<f64> {
        let (y, _) = net.with_params(params.to_vec()).unwrap().forward(x).unwrap();
        (0..b).map(|s| y.sample(s).iter().sum()).collect()
    };
    let mut jac = vec![vec![0.0; p.len()]; b];
    let mut q = p.clone();
    for i in 0..p.len() {
        q[i] = p[i] + FD_STEP;
        let up = per_sample_sum(&q);
        q[i] = p[i] - FD_STEP;
        let down = per_sample_sum(&q);
        q[i] = p[i];
        for s in 0..b {
            jac[s][i] = (up[s] - down[s]) / (2.0 * FD_STEP);
        }
    }
    (0..b)
        .map(|i| (0..b).map(|j| jac[i].iter().zip(&jac[j]).map(|(a, c)| a * c).sum()).collect())
        .collect()
}

pub fn check_ntk() -> Check {
    // finite-difference oracle on a two-layer network, B = 4
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let net = two_layer_net(seed);
        let mut g = rng(100 + seed);
        let x = loop {
            let x = Tensor::new(vec![4, 2, 4, 4], randn(&mut g, 128)).unwrap();
            if min_relu_margin(&net, &x) > 1e-3 {
                break x;
            }
        };
        let theta = ntk_matrix(&net, &x).map_err(|e| e.to_string())?;
        let oracle = fd_ntk(&net, &x);
        for i in 0..4 {
            let e = rel_err(theta.row(i), &oracle[i]);
            ensure!(e < 1e-3, "seed {seed}, row {i}: rel. err {e:e} vs finite differences");
            worst = worst.max(e);
        }
    }

    // symmetry and positive semi-definiteness on the desk supernet
    let m = MacroConfig::desk();
    let net = supernet_network(&SupernetState::full(), &m, 3).map_err(|e| e.to_string())?;
    let batch = Tensor::randn(&[8, 3, 8, 8], 11);
    let theta = ntk_matrix(&net, &batch).map_err(|e| e.to_string())?;
    let asym = theta.max_asymmetry();
    ensure!(asym < 1e-8, "max |Θ − Θᵀ| = {asym:e}");
    let ev = symmetric_eigenvalues(&theta).map_err(|e| e.to_string())?;
    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
    ensure!(lo >= -1e-8 * hi, "λ_min = {lo:e} with λ_max = {hi:e}");

    // a repeated sample makes Θ singular
    let mut dup = batch.clone();
    let first = dup.sample(0).to_vec();
    dup.sample_mut(1).copy_from_slice(&first);
    let kappa = condition_number(&ntk_matrix(&net, &dup).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure!(kappa == f64::INFINITY, "duplicate sample gave κ = {kappa}");
    Ok(format!(
        "FD oracle worst rel. err {worst:.1e}; asymmetry {asym:.0e}; λ_min/λ_max {:.2e}; duplicate → κ = ∞",
        lo / hi
    ))
}

// ------------------------------------------------------------------ eigen

/// `(λ_max, λ_min)` of a symmetric matrix by shifted power iteration with
/// Rayleigh quotients.
pub fn power_extremes(a: &[Vec<f64>]) -> (f64, f64) {
    let n = a.len();
    let norm: f64 = a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    // A + sI is positive definite, its top eigenvalue is λ_max + s
    let top = dominant(a, norm, n);
    // (λ_max + s)I − (A + sI) has top eigenvalue λ_max − λ_min
    let shifted: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { top - a[i][j] } else { -a[i][j] }).collect())
        .collect();
    let spread = dominant(&shifted, 0.0, n);
    (top, top - spread)
}

fn dominant(a: &[Vec<f64>], shift: f64, n: usize) -> f64 {
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.37).sin()).collect();
    let mut lambda = 0.0;
    for _ in 0..200_000 {
        let w: Vec<f64> = (0..n)
            .map(|i| a[i].iter().zip(&v).map(|(x, y)| x * y).sum::<f64>() + shift * v[i])
            .collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let next: Vec<f64> = w.iter().map(|x| x / norm).collect();
        let aw: Vec<f64> = (0..n)
            .map(|i| a[i].iter().zip(&next).map(|(x, y)| x * y).sum::<f64>() + shift * next[i])
            .collect();
        let rq: f64 = aw.iter().zip(&next).map(|(x, y)| x * y).sum();
        let diff = next.iter().zip(&v).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        v = next;
        let done = (rq - lambda).abs() <= 1e-15 * rq.abs() && diff < 1e-9;
        lambda = rq;
        if done {
            break;
        }
    }
    lambda - shift
}

pub fn random_symmetric(n: usize, seed: u64, spd: bool) -> Vec<Vec<f64>> {
    let mut g = rng(seed);
    let m: Vec<Vec<f64>> = (0..n).map(|_| randn(&mut g, n)).collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if spd {
                        let d: f64 = (0..n).map(|k| m[i][k] * m[j][k]).sum::<f64>() / n as f64;
                        d + if i == j { 0.1 } else { 0.0 }
                    } else {
                        0.5 * (m[i][j] + m[j][i])
                    }
                })
                .collect()
        })
        .collect()
}

pub fn check_eigen() -> Check {
    let k = condition_number(&Matrix::identity(5)).map_err(|e| e.to_string())?;
    ensure!(k == 1.0, "κ(I) = {k}");
    let k = condition_number(&Matrix::from_diagonal(&[9.0, 1.0])).map_err(|e| e.to_string())?;
    ensure!((k - 9.0).abs() < 1e-10, "κ(diag(9,1)) = {k}");
    let mut worst = 0.0f64;
    for seed in 0..6 {
        let a = random_symmetric(32, seed, seed % 2 == 0);
        let ev = symmetric_eigenvalues(&Matrix::from_rows(&a).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let (hi, lo) = power_extremes(&a);
        let e_hi = (ev[31] - hi).abs() / hi.abs();
        let e_lo = (ev[0] - lo).abs() / lo.abs();
        ensure!(e_hi < 1e-6 && e_lo < 1e-6, "seed {seed}: λ_max {} vs {hi}, λ_min {} vs {lo}", ev[31], ev[0]);
        worst = worst.max(e_hi).max(e_lo);
    }
    Ok(format!("κ(I) = 1, κ(diag(9,1)) = 9; 6 random 32x32 vs power iteration, worst rel. err {worst:.1e}"))
}

// ---------------------------------------------------------- linear regions

/// Dense reference forward for `Linear → ReLU → Linear → ReLU` with the
/// crate's `[out, in]` + bias layout; returns the sign pattern.
fn mlp_pattern(params: &[f64], dims: &[usize], x: &[f64]) -> Vec<bool> {
    let mut off = 0;
    let mut act = x.to_vec();
    let mut bits = Vec::new();
    for w in dims.windows(2) {
        let (i, o) = (w[0], w[1]);
        let (wt, rest) = params[off..].split_at(i * o);
        let b = &rest[..o];
        off += i * o + o;
        let pre: Vec<f64> = (0..o)
            .map(|r| b[r] + (0..i).map(|c| wt[r * i + c] * act[c]).sum::<f64>())
            .collect();
        bits.extend(pre.iter().map(|&v| v > 0.0));
        act = pre.iter().map(|&v| v.max(0.0)).collect();
    }
    bits
}

/// Number of the `2^k` sign patterns realized by at least one sample.
fn exhaustive_count(realized: &[Vec<bool>], units: usize) -> usize {
    let set: HashSet<u32> = realized
        .iter()
        .map(|p| p.iter().enumerate().fold(0u32, |acc, (i, &b)| acc | ((b as u32) << i)))
        .collect();
    (0..1u32 << units).filter(|code| set.contains(code)).count()
}

pub fn check_linear_regions() -> Check {
    let mut counts = Vec::new();
    for (seed, dims) in [(0u64, vec![2, 4, 5]), (1, vec![3, 6, 4]), (2, vec![1, 3, 3]), (3, vec![4, 10])] {
        let mut b = NetworkBuilder::new(&[dims[0]]);
        let mut x = 0;
        for (i, &o) in dims[1..].iter().enumerate() {
            let l = b.linear(x, o, format!("fc{i}")).unwrap();
            x = b.relu(l).unwrap();
        }
        let net = b.finish().unwrap().init_params(seed);
        let mut g = rng(50 + seed);
        let net = net.with_params(net.params().iter().zip(randn(&mut g, net.param_count())).map(|(p, r)| p + 0.3 * r).collect()).unwrap();
        let units: usize = dims[1..].iter().sum();
        ensure!(units <= 10, "too many units");
        let inputs = Tensor::randn(&[300, dims[0]], 7 + seed);
        let got = count_distinct_patterns(&net, &inputs).map_err(|e| e.to_string())?;
        let pats: Vec<Vec<bool>> = (0..300).map(|s| mlp_pattern(net.params(), &dims, inputs.sample(s))).collect();
        let want = exhaustive_count(&pats, units);
        ensure!(got == want, "dims {dims:?}: {got} regions, oracle {want}");
        counts.push(got);
    }
    let cfg = ProxyConfig {
        lr_samples: 200,
        ..Default::default()
    };
    let r = count_linear_regions(&SupernetState::from(CellArch::uniform(OpKind::SkipConnect)), &MacroConfig::desk(), &cfg)
        .map_err(|e| e.to_string())?;
    ensure!(r == 1, "all-skip arch gave R = {r}");
    Ok(format!("exhaustive oracle matched on 4 nets (counts {counts:?}); all-skip R = 1"))
}

// -------------------------------------------------------------------- FLOPs

pub fn random_archs(n: usize, seed: u64) -> Vec<CellArch> {
    let mut g = rng(seed);
    (0..n)
        .map(|_| CellArch::from_index(g.random_range(0..CellArch::SPACE_SIZE)).unwrap())
        .collect()
}

pub fn check_flops() -> Check {
    let full = MacroConfig::default();
    let single = count_flops(&CellArch::uniform(OpKind::None).with_op(0, OpKind::NorConv3x3), &full).map_err(|e| e.to_string())?;
    let rec = single.records.iter().find(|r| r.layer == "s0.c0.e01").ok_or("no record s0.c0.e01")?;
    let hand = 2 * 32 * 32 * 16 * 16 * 9;
    ensure!(rec.flops == hand && hand == 4_718_592, "single conv F = {}", rec.flops);

    for m in [MacroConfig::desk(), full] {
        let lo = count_flops(&CellArch::uniform(OpKind::None), &m).unwrap().flops;
        let hi = count_flops(&CellArch::uniform(OpKind::NorConv3x3), &m).unwrap().flops;
        for a in random_archs(100, 5) {
            let f = count_flops(&a, &m).unwrap().flops;
            ensure!(lo <= f && f <= hi, "{a}: {f} outside [{lo}, {hi}]");
        }
    }
    let lo = count_flops(&CellArch::uniform(OpKind::None), &full).unwrap().flops as f64;
    let hi = count_flops(&CellArch::uniform(OpKind::NorConv3x3), &full).unwrap().flops as f64;
    for target in [51.04e6, 188.66e6] {
        ensure!(lo <= target && target <= hi, "{target} outside [{lo}, {hi}]");
    }
    Ok(format!(
        "single conv 4,718,592; 100 random archs inside envelope; full-macro envelope [{:.2}M, {:.2}M] contains 51.04M and 188.66M",
        lo / 1e6,
        hi / 1e6
    ))
}

// ------------------------------------------------------------------ latency

/// Integer-valued random latencies for every key of `m`, so that sums are
/// exact in floating point.
pub fn synthetic_table(m: &MacroConfig, seed: u64, overhead: f64) -> LatencyTable {
    let mut g = rng(seed);
    let mut t = LatencyTable::new("synthetic", overhead).unwrap();
    for k in CostModel::new(m, None).unwrap().table_keys() {
        let v = match k.op.as_str() {
            "none" => 0.0,
            _ => g.random_range(1..1000) as f64,
        };
        t.insert(k, v).unwrap();
    }
    t
}

fn lut(t: &LatencyTable, op: &str, c_in: usize, c_out: usize, h: usize, w: usize, stride: usize) -> f64 {
    let key = LatencyKey {
        op: op.into(),
        c_in,
        c_out,
        h,
        w,
        stride,
    };
    t.get(&key).unwrap_or(0.0)
}

/// Latency assembled by hand from the skeleton description.
pub fn hand_latency(a: &CellArch, m: &MacroConfig, t: &LatencyTable) -> f64 {
    let [c_img, h, w] = m.input;
    let c0 = m.stem_channels;
    let shapes = [(c0, h, w), (2 * c0, h / 2, w / 2), (4 * c0, h / 4, w / 4)];
    let mut total = t.overhead_us() + lut(t, "stem_conv_3x3", c_img, c0, h, w, 1);
    for (s, &(c, hh, ww)) in shapes.iter().enumerate() {
        if s > 0 {
            let (pc, ph, pw) = shapes[s - 1];
            total += lut(t, "resblock", pc, c, ph, pw, 2);
        }
        for _ in 0..m.cells_per_stage {
            for e in 0..NUM_EDGES {
                total += lut(t, a.op(e).name(), c, c, hh, ww, 1);
            }
        }
    }
    total + lut(t, "classifier", 4 * c0, m.num_classes, h / 4, w / 4, 1)
}

/// States with at most three multi-operator edges.
pub fn toy_states(seed: u64, n: usize) -> Vec<SupernetState> {
    let mut g = rng(seed);
    (0..n)
        .map(|_| {
            let base = random_archs(1, g.random())[0];
            let mut edges: [OpSet; NUM_EDGES] = std::array::from_fn(|e| OpSet::single(base.op(e)));
            let k = g.random_range(1..=3);
            let picked: Vec<usize> = (0..NUM_EDGES).collect::<Vec<_>>().choose_multiple(&mut g, k).copied().collect();
            for e in picked {
                let ops: Vec<OpKind> = OpKind::ALL.iter().copied().filter(|_| g.random_bool(0.6)).collect();
                if !ops.is_empty() {
                    edges[e] = OpSet::from_ops(&ops);
                }
            }
            SupernetState::new(edges).unwrap()
        })
        .collect()
}

pub fn check_latency() -> Check {
    let mut n_archs = 0;
    for (m, seed) in [(MacroConfig::desk(), 1), (MacroConfig::default(), 2)] {
        let t = synthetic_table(&m, seed, 37.0);
        for a in random_archs(200, seed) {
            let got = estimate_latency(&a, &m, &t).map_err(|e| e.to_string())?;
            let want = hand_latency(&a, &m, &t);
            let l = got.latency_us.unwrap();
            ensure!(l == want, "{a}: {l} vs hand sum {want}");
            let parts: f64 = got.records.iter().filter_map(|r| r.latency_us).sum();
            ensure!(parts == l, "{a}: records sum {parts} vs total {l}");
            // replacing an edge by `none` removes exactly its entries
            for e in 0..NUM_EDGES {
                let b = a.with_op(e, OpKind::None);
                let diff = l - estimate_latency(&b, &m, &t).unwrap().latency_us.unwrap();
                let stages = m.stages().unwrap();
                let want: f64 = stages
                    .iter()
                    .map(|s| m.cells_per_stage as f64 * lut(&t, a.op(e).name(), s.channels, s.channels, s.h, s.w, 1))
                    .sum();
                ensure!(diff == want, "{a}, edge {e}: removal changed L by {diff}, entries sum {want}");
            }
            n_archs += 1;
        }
    }

    let m = MacroConfig::desk();
    let t = synthetic_table(&m, 3, 12.0);
    let mut g = rng(9);
    let mut states = 0;
    for st in toy_states(4, 60) {
        let brute = st
            .completions()
            .map(|a| estimate_latency(&a, &m, &t).unwrap().latency_us.unwrap())
            .fold(f64::INFINITY, f64::min);
        let bound = min_completion_latency(&st, &m, &t).map_err(|e| e.to_string())?;
        ensure!(bound == brute, "{st}: bound {bound}, brute force {brute}");
        // monotone along a random pruning path
        let (mut cur, mut prev) = (st, bound);
        while !cur.is_resolved() {
            let cands = cur.candidate_prunes().unwrap();
            let &(e, op) = cands.choose(&mut g).unwrap();
            cur = cur.apply_prune(e, op).unwrap();
            let next = min_completion_latency(&cur, &m, &t).unwrap();
            ensure!(next >= prev, "{cur}: bound fell from {prev} to {next}");
            prev = next;
        }
        states += 1;
    }
    Ok(format!(
        "{n_archs} archs reconstructed exactly; {states} toy states match brute force and stay monotone"
    ))
}

// ------------------------------------------------------------------ search

pub fn desk_search_config() -> SearchConfig {
    SearchConfig {
        macro_config: MacroConfig::desk(),
        proxy: ProxyConfig {
            batch_size: 8,
            ntk_repeats: 3,
            ..Default::default()
        },
        ..Default::default()
    }
}

/// Cheaper proxies for properties that do not depend on proxy fidelity.
pub fn quick_search_config() -> SearchConfig {
    SearchConfig {
        macro_config: MacroConfig::desk(),
        proxy: ProxyConfig {
            batch_size: 4,
            ntk_repeats: 1,
            lr_samples: 64,
            ..Default::default()
        },
        ..Default::default()
    }
}

pub fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

/// Report with the wall time zeroed, serialized for comparison.
pub fn comparable(r: &SearchReport) -> String {
    let mut r = r.clone();
    r.wall_time_s = 0.0;
    serde_json::to_string(&r).unwrap()
}

pub fn check_budgets() -> Check {
    let m = MacroConfig::desk();
    let t = synthetic_table(&m, 21, 50.0);
    let cost = CostModel::new(&m, Some(&t)).unwrap();
    let min_l = cost.min_completion(&SupernetState::full(), zsnas::hardware::Metric::Latency).unwrap();
    let max_l = estimate_latency(&CellArch::uniform(OpKind::NorConv3x3), &m, &t).unwrap().latency_us.unwrap();
    let min_f = count_flops(&CellArch::uniform(OpKind::None), &m).unwrap().flops as f64;
    let max_f = count_flops(&CellArch::uniform(OpKind::NorConv3x3), &m).unwrap().flops as f64;
    let mut runs = 0;
    for (i, frac) in [0.1, 0.3, 0.6].into_iter().enumerate() {
        let cfg = SearchConfig {
            latency_budget_us: Some(min_l + frac * (max_l - min_l)),
            flops_budget: Some(min_f + (0.9 - frac) * (max_f - min_f)),
            weights: Weights {
                latency: (i % 2) as f64,
                ..Weights::default()
            },
            ..quick_search_config()
        };
        let r = run_search(&cfg, Some(&t)).map_err(|e| e.to_string())?;
        let a: CellArch = r.arch.parse().unwrap();
        let l = estimate_latency(&a, &m, &t).unwrap().latency_us.unwrap();
        let f = count_flops(&a, &m).unwrap().flops as f64;
        ensure!(l <= cfg.latency_budget_us.unwrap(), "{a}: L = {l} over budget");
        ensure!(f <= cfg.flops_budget.unwrap(), "{a}: F = {f} over budget");
        runs += 1;
    }
    let cfg = SearchConfig {
        latency_budget_us: Some(min_l - 1.0),
        ..quick_search_config()
    };
    match run_search(&cfg, Some(&t)) {
        Err(Error::Infeasible { bound, budget, .. }) if bound == min_l && budget == min_l - 1.0 => {}
        other => return Err(format!("latency budget below the minimum: {other:?}")),
    }
    let cfg = SearchConfig {
        flops_budget: Some(min_f - 1.0),
        ..quick_search_config()
    };
    ensure!(
        matches!(run_search(&cfg, None), Err(Error::Infeasible { metric: "flops", .. })),
        "FLOPs budget below the minimum did not fail"
    );
    Ok(format!("{runs} budgeted searches within budget; infeasible latency and FLOPs budgets rejected"))
}

pub fn check_thread_determinism() -> Check {
    let cfg = quick_search_config();
    let one = in_pool(1, || run_search(&cfg, None)).map_err(|e| e.to_string())?;
    let eight = in_pool(8, || run_search(&cfg, None)).map_err(|e| e.to_string())?;
    ensure!(comparable(&one) == comparable(&eight), "1 vs 8 threads differ: {} vs {}", one.arch, eight.arch);
    Ok(format!("1 and 8 threads agree on {}", one.arch))
}

pub fn check_full_desk_search() -> Check {
    let r = run_search(&desk_search_config(), None).map_err(|e| e.to_string())?;
    let ratio = CellArch::SPACE_SIZE as f64 / r.evaluations as f64;
    ensure!(r.evaluations <= 120, "{} evaluations", r.evaluations);
    ensure!(ratio >= 130.0, "ratio {ratio}");
    ensure!(r.wall_time_s < 600.0, "took {:.1}s", r.wall_time_s);
    ensure!(r.prunes.len() == 24, "{} prunes", r.prunes.len());
    Ok(format!(
        "{} evaluations vs {} exhaustive ({ratio:.0}x), {} prunes, {:.1}s",
        r.evaluations,
        CellArch::SPACE_SIZE,
        r.prunes.len(),
        r.wall_time_s
    ))
}

// ------------------------------------------------------------------ Kendall

/// τ-b by explicit pair enumeration.
pub fn brute_tau(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len();
    let (mut c, mut d, mut ta, mut tb) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let da = a[i] - a[j];
            let db = b[i] - b[j];
            if da == 0.0 && db == 0.0 {
                continue;
            } else if da == 0.0 {
                ta += 1;
            } else if db == 0.0 {
                tb += 1;
            } else if (da > 0.0) == (db > 0.0) {
                c += 1;
            } else {
                d += 1;
            }
        }
    }
    let den = (((c + d + ta) * (c + d + tb)) as f64).sqrt();
    (den > 0.0).then(|| (c - d) as f64 / den)
}

pub fn random_tau_vectors(seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut g = rng(seed);
    let n = g.random_range(2..80);
    let levels_a = g.random_range(2..12) as f64;
    let levels_b = g.random_range(2..12) as f64;
    let tied = g.random_bool(0.5);
    let draw = |g: &mut ChaCha8Rng, levels: f64| -> f64 {
        let v: f64 = g.sample(StandardNormal);
        if tied {
            (v * levels / 3.0).round()
        } else {
            v
        }
    };
    let a: Vec<f64> = (0..n).map(|_| draw(&mut g, levels_a)).collect();
    let b: Vec<f64> = a.iter().map(|&x| 0.4 * x + draw(&mut g, levels_b)).collect();
    (a, b)
}

pub fn check_kendall() -> Check {
    let mut compared = 0;
    let mut undefined = 0;
    for seed in 0..1000 {
        let (a, b) = random_tau_vectors(seed);
        match (kendall_tau(&a, &b), brute_tau(&a, &b)) {
            (Ok(t), Some(o)) => {
                ensure!((t - o).abs() < 1e-12, "seed {seed}: {t} vs brute force {o}");
                compared += 1;
            }
            (Err(Error::AllTied), None) => undefined += 1,
            (got, want) => return Err(format!("seed {seed}: {got:?} vs {want:?}")),
        }
    }
    let up: Vec<f64> = (0..50).map(|i| (i as f64).powi(3)).collect();
    let down: Vec<f64> = (0..50).map(|i| -(i as f64).exp()).collect();
    let ident: Vec<f64> = (0..50).map(|i| i as f64).collect();
    ensure!(kendall_tau(&ident, &up).unwrap() == 1.0, "monotone τ != 1");
    ensure!(kendall_tau(&ident, &down).unwrap() == -1.0, "anti-monotone τ != -1");
    let dup_a = [1.0, 1.0, 2.0, 3.0, 3.0, 4.0];
    let dup_b = [2.0, 1.0, 2.0, 5.0, 5.0, 5.0];
    let want = brute_tau(&dup_a, &dup_b).unwrap();
    ensure!((kendall_tau(&dup_a, &dup_b).unwrap() - want).abs() < 1e-15, "duplicates");
    Ok(format!(
        "{compared} random vectors match pair counting exactly ({undefined} all-tied cases agree); ±1 constructions; duplicate ties"
    ))
}
