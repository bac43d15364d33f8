mod common;

use std::collections::HashSet;

use common::*;
use zsnas::nn::LayerKind;
use zsnas::{NetworkBuilder, Tensor};

#[test]
fn gradients_match_finite_differences_on_100_seeds() {
    check_gradients(100).unwrap();
}

#[test]
fn conv_relu_net_batch_of_two() {
    let build = || {
        let mut b = NetworkBuilder::new(&[2, 5, 5]);
        let c = b.conv2d(0, 3, 3, 1, 1, "c1").unwrap();
        let r = b.relu(c).unwrap();
        b.conv2d(r, 2, 3, 1, 0, "c2").unwrap();
        b.finish().unwrap()
    };
    for seed in 0..10 {
        let (net, x, c) = gradient_instance(build, seed);
        assert_eq!(x.batch(), 2);
        assert!(gradient_error(&net, &x, &c) < GRADIENT_TOL);
    }
}

#[test]
fn init_is_deterministic_with_zero_biases() {
    let mut b = NetworkBuilder::new(&[4]);
    b.linear(0, 1, "fc").unwrap();
    let net = b.finish().unwrap();
    let (p, q) = (net.init_params(7), net.init_params(7));
    assert_eq!(p.params(), q.params());
    assert_eq!(p.params()[4], 0.0);
    assert_ne!(p.params(), net.init_params(8).params());
}

#[test]
fn conv_init_std_matches_kaiming() {
    let mut b = NetworkBuilder::new(&[16, 4, 4]);
    b.conv2d(0, 80, 3, 1, 1, "conv").unwrap();
    let net = b.finish().unwrap().init_params(3);
    let weights = &net.params()[..80 * 16 * 9];
    assert!(weights.len() >= 10_000);
    let mean = weights.iter().sum::<f64>() / weights.len() as f64;
    let var = weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (weights.len() - 1) as f64;
    let want = (2.0f64 / 144.0).sqrt();
    assert!((var.sqrt() - want).abs() < 0.1 * want, "std {} vs {want}", var.sqrt());
    assert!(net.params()[80 * 16 * 9..].iter().all(|&b| b == 0.0));
}

#[test]
fn shared_labels_share_weights_across_networks() {
    let small = {
        let mut b = NetworkBuilder::new(&[2, 4, 4]);
        b.conv2d(0, 3, 3, 1, 1, "a").unwrap();
        b.finish().unwrap().init_params(11)
    };
    let big = {
        let mut b = NetworkBuilder::new(&[2, 4, 4]);
        let x = b.conv2d(0, 3, 1, 1, 0, "z").unwrap();
        b.conv2d(x, 3, 3, 1, 1, "unused").unwrap();
        b.conv2d(0, 3, 3, 1, 1, "a").unwrap();
        b.finish().unwrap().init_params(11)
    };
    let n = small.param_count();
    assert_eq!(small.params(), &big.params()[big.param_count() - n..]);
}

/// Two ReLU units on a 2-D input: the realized patterns over a grid are
/// exactly the sign combinations of the two affine pre-activations.
#[test]
fn two_relu_patterns_over_grid() {
    let mut b = NetworkBuilder::new(&[2]);
    let l = b.linear(0, 2, "fc").unwrap();
    b.relu(l).unwrap();
    // rows (1, -1) and (0.5, 1), biases (0.25, -0.5)
    let net = b.finish().unwrap().with_params(vec![1.0, -1.0, 0.5, 1.0, 0.25, -0.5]).unwrap();
    let mut xs = Vec::new();
    for i in 0..21 {
        for j in 0..21 {
            xs.push(-1.0 + 0.1 * i as f64 + 0.013);
            xs.push(-1.0 + 0.1 * j as f64 + 0.007);
        }
    }
    let x = Tensor::new(vec![441, 2], xs.clone()).unwrap();
    let (_, tape) = net.forward(&x).unwrap();
    let got: HashSet<String> = net.activation_patterns(&tape).unwrap().iter().map(|p| p.to_string()).collect();
    let want: HashSet<String> = xs
        .chunks(2)
        .map(|p| {
            let a = p[0] - p[1] + 0.25 > 0.0;
            let b = 0.5 * p[0] + p[1] - 0.5 > 0.0;
            format!("{}{}", a as u8, b as u8)
        })
        .collect();
    assert_eq!(got, want);
    assert_eq!(got.len(), 4);
    assert!(net.layers().iter().any(|l| l.kind == LayerKind::Relu));
}

#[test]
fn identical_inputs_give_identical_patterns() {
    let net = two_layer_net(4);
    let one = Tensor::randn(&[1, 2, 4, 4], 9);
    let mut data = one.data().to_vec();
    data.extend_from_slice(one.data());
    let x = Tensor::new(vec![2, 2, 4, 4], data).unwrap();
    let (_, tape) = net.forward(&x).unwrap();
    let p = net.activation_patterns(&tape).unwrap();
    assert_eq!(p[0], p[1]);
}
