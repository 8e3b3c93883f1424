#![allow(dead_code)]

use mlpcodes::channel::{sample_source, transmit, tune_threshold};
use mlpcodes::engine::{Problem, Task};
use mlpcodes::network::encode;
use mlpcodes::spin::draw_uniform_spins;
use mlpcodes::{
    ChannelParams, Codebook, NetworkKind, NetworkSpec, SeededStream, SourceModel, SpinVector,
    StreamId,
};

pub fn stream(seed: u64, tag: u64) -> SeededStream {
    SeededStream::new(seed, StreamId::new(tag, 0, 0))
}

pub fn tuned(kind: NetworkKind, hidden: usize, bias: f64) -> NetworkSpec {
    let spec = NetworkSpec::new(kind, hidden, 0.0).unwrap();
    spec.with_threshold(tune_threshold(&spec, bias).unwrap())
        .unwrap()
}

/// Planted decoding instance: message, codebook, noisy codeword.
pub fn ecc_instance(
    spec: NetworkSpec,
    n: usize,
    m: usize,
    ch: ChannelParams,
    seed: u64,
) -> (Problem, SpinVector) {
    let mut st = stream(seed, 100);
    let s0 = draw_uniform_spins(n, &mut st).unwrap();
    let cb = Codebook::random(m, n, spec.hidden(), &mut st).unwrap();
    let y = transmit(&encode(&spec, &s0, &cb).unwrap(), &ch, &mut st);
    (Problem::new(Task::Ecc(ch), spec, cb, y).unwrap(), s0)
}

pub fn lc_instance(spec: NetworkSpec, n: usize, m: usize, bias: f64, seed: u64) -> Problem {
    let mut st = stream(seed, 200);
    let src = SourceModel::new(bias).unwrap();
    let y = sample_source(m, &src, &mut st).unwrap();
    let cb = Codebook::random(m, n, spec.hidden(), &mut st).unwrap();
    Problem::new(Task::Lc(src), spec, cb, y).unwrap()
}

pub fn distortion(problem: &Problem, s: &SpinVector) -> f64 {
    let y = encode(&problem.spec, s, &problem.codebook).unwrap();
    mlpcodes::spin::hamming_distortion(&problem.observed, &y).unwrap()
}
