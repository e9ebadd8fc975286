//! Seeded random `.pnet` generator for fuzzing and benchmarks.
//!
//! A shape spec is a comma-separated list such as
//! `input:3,relu:4,maxpool:2x3,linear:2`. `input:N` (default 2) sets the
//! number of inputs; the remaining entries are layers, each fed by the
//! previous one. `relu:N` and `linear:N` are fully connected, `maxpool:NxK`
//! creates N pools over K distinct random nodes of the previous layer. The
//! last layer is the output layer.

use std::fmt::Write;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::format::parse_problem;

/// Inputs sampled to place each random constraint.
const SAMPLES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Relu(usize),
    Linear(usize),
    MaxPool { pools: usize, fan_in: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shape {
    pub inputs: usize,
    pub layers: Vec<Layer>,
}

impl Shape {
    pub fn parse(spec: &str) -> Result<Shape> {
        let bad = |msg: String| Error::Shape(msg);
        let count = |s: &str| -> Result<usize> {
            s.parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| bad(format!("`{s}` is not a positive count")))
        };
        let mut shape = Shape { inputs: 2, layers: Vec::new() };
        for (i, part) in spec.split(',').map(str::trim).filter(|p| !p.is_empty()).enumerate() {
            let (kind, arg) = part.split_once(':').ok_or_else(|| bad(format!("`{part}` lacks `:`")))?;
            match kind {
                "input" if i == 0 => shape.inputs = count(arg)?,
                "relu" => shape.layers.push(Layer::Relu(count(arg)?)),
                "linear" => shape.layers.push(Layer::Linear(count(arg)?)),
                "maxpool" => {
                    let (p, k) = arg.split_once('x').ok_or_else(|| bad(format!("`{part}` should be maxpool:NxK")))?;
                    shape.layers.push(Layer::MaxPool { pools: count(p)?, fan_in: count(k)? });
                }
                _ => return Err(bad(format!("unknown layer `{part}`"))),
            }
        }
        let mut width = shape.inputs;
        for layer in &shape.layers {
            width = match *layer {
                Layer::Relu(n) | Layer::Linear(n) => n,
                Layer::MaxPool { pools, fan_in } if fan_in <= width => pools,
                Layer::MaxPool { fan_in, .. } => {
                    return Err(bad(format!("maxpool fan-in {fan_in} exceeds previous width {width}")))
                }
            };
        }
        Ok(shape)
    }
}

/// Rounds to four decimals so files stay readable; the value written is the
/// value parsed back.
fn round4(x: f64) -> f64 {
    let r = (x * 1e4).round() / 1e4;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Generates a network of the given shape with inputs boxed to `[0, 1]`,
/// followed by `constraints` random linear constraints over the outputs.
/// Output is a pure function of `seed`, `shape` and `constraints`.
pub fn gen_random_network(seed: u64, shape: &Shape, constraints: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::new();
    let mut prev: Vec<String> = (0..shape.inputs).map(|i| format!("x{i}")).collect();
    for x in &prev {
        let _ = writeln!(text, "Input {x}");
    }
    for (l, layer) in shape.layers.iter().enumerate() {
        let mut next = Vec::new();
        match *layer {
            Layer::Relu(n) | Layer::Linear(n) => {
                let (kw, prefix) = if matches!(layer, Layer::Relu(_)) { ("ReLU", "r") } else { ("Linear", "l") };
                for i in 0..n {
                    let name = format!("{prefix}{}_{i}", l + 1);
                    let _ = write!(text, "{kw} {name} {:?}", round4(rng.random_range(-0.5..=0.5)));
                    for src in &prev {
                        let _ = write!(text, " {:?} {src}", round4(rng.random_range(-1.0..=1.0)));
                    }
                    text.push('\n');
                    next.push(name);
                }
            }
            Layer::MaxPool { pools, fan_in } => {
                for i in 0..pools {
                    let name = format!("m{}_{i}", l + 1);
                    let mut srcs = index::sample(&mut rng, prev.len(), fan_in).into_vec();
                    srcs.sort_unstable();
                    let _ = write!(text, "MaxPool {name}");
                    for s in srcs {
                        let _ = write!(text, " {}", prev[s]);
                    }
                    text.push('\n');
                    next.push(name);
                }
            }
        }
        prev = next;
    }
    for x in (0..shape.inputs).map(|i| format!("x{i}")) {
        let _ = writeln!(text, "Assert <= 0.0 1.0 {x}");
        let _ = writeln!(text, "Assert >= 1.0 1.0 {x}");
    }
    if constraints == 0 {
        return text;
    }

    let problem = parse_problem(&text).expect("generated network is well formed");
    let net = problem.network();
    let outputs: Vec<String> = net.outputs().iter().map(|&o| net.name(o).to_string()).collect();
    for _ in 0..constraints {
        let coeffs: Vec<f64> = outputs.iter().map(|_| round4(rng.random_range(-1.0..=1.0))).collect();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for _ in 0..SAMPLES {
            let x: Vec<f64> = (0..shape.inputs).map(|_| rng.random_range(0.0..=1.0)).collect();
            let val = net.evaluate(&x).expect("arity matches");
            let s: f64 = net.outputs().iter().zip(&coeffs).map(|(&o, c)| c * val.value(o)).sum();
            lo = lo.min(s);
            hi = hi.max(s);
        }
        // The threshold sits near the top (or bottom) of the sampled range,
        // sometimes past it, so both answers occur and few are trivial.
        let spread = (hi - lo).max(1e-3);
        let t = rng.random_range(0.7..=1.1);
        // Σ ≥ c when `<=`, Σ ≤ c when `>=`.
        let (op, c) = if rng.random_bool(0.5) { ("<=", lo + t * spread) } else { (">=", hi - t * spread) };
        let _ = write!(text, "Assert {op} {:?}", round4(c));
        for (c, o) in coeffs.iter().zip(&outputs) {
            let _ = write!(text, " {c:?} {o}");
        }
        text.push('\n');
    }
    text
}
