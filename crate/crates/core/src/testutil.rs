//! Small random networks for unit tests.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::network::{LinearConstraint, NetworkBuilder, NodeId, VerificationProblem};

/// Inputs in [0,1], one ReLU layer, an optional MaxPool, a second ReLU
/// layer and linear outputs. Properties are random output constraints.
pub fn random_problem(seed: u64) -> VerificationProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_inputs = rng.random_range(2..=3);
    let mut b = NetworkBuilder::new();
    let mut prev: Vec<String> = Vec::new();
    for i in 0..n_inputs {
        let name = format!("x{i}");
        b.input(&name);
        prev.push(name);
    }
    let layer = |b: &mut NetworkBuilder, rng: &mut ChaCha8Rng, prev: &[String], tag: &str, width: usize, relu: bool| {
        let mut names = Vec::new();
        for j in 0..width {
            let name = format!("{tag}{j}");
            let weights: Vec<(f64, &str)> = prev.iter().map(|p| (rng.random_range(-1.0..1.0), p.as_str())).collect();
            let bias = rng.random_range(-0.5..0.5);
            if relu {
                b.relu(&name, bias, &weights);
            } else {
                b.linear(&name, bias, &weights);
            }
            names.push(name);
        }
        names
    };
    let w1 = rng.random_range(2..=4);
    let mut h = layer(&mut b, &mut rng, &prev, "a", w1, true);
    if rng.random_bool(0.6) {
        let k = rng.random_range(2..=h.len().min(3));
        let srcs: Vec<&str> = h[..k].iter().map(String::as_str).collect();
        b.maxpool("m0", &srcs);
        h.push("m0".into());
    }
    prev = h;
    let w2 = rng.random_range(1..=3);
    let h2 = layer(&mut b, &mut rng, &prev, "b", w2, true);
    let outs = layer(&mut b, &mut rng, &h2, "y", 2, false);
    let net = b.build().unwrap();

    let mut property = Vec::new();
    for i in 0..n_inputs {
        let id = NodeId(i);
        property.push(LinearConstraint::at_least(vec![(1.0, id)], 0.0));
        property.push(LinearConstraint::at_most(vec![(1.0, id)], 1.0));
    }
    let y0 = net.find(&outs[0]).unwrap();
    let y1 = net.find(&outs[1]).unwrap();
    property.push(LinearConstraint::at_least(vec![(1.0, y0), (-1.0, y1)], rng.random_range(-0.3..0.6)));
    if rng.random_bool(0.5) {
        property.push(LinearConstraint::at_most(vec![(1.0, y1)], rng.random_range(-0.5..0.5)));
    }
    VerificationProblem::new(net, property).unwrap()
}

pub fn sample_inputs(problem: &VerificationProblem, rng: &mut ChaCha8Rng) -> Vec<f64> {
    problem
        .input_box()
        .iter()
        .map(|&(lo, hi)| if hi > lo { rng.random_range(lo..=hi) } else { lo })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
