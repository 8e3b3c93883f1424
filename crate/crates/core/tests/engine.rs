mod common;

use common::*;
use mlpcodes::engine::{init_state, mpm_estimate, BpConfig, Problem, Solver};
use mlpcodes::network::encode;
use mlpcodes::spin::blockwise_abs_overlap;
use mlpcodes::{ChannelParams, NetworkKind, SpinVector};

fn trajectory(
    pr: &Problem,
    s0: &SpinVector,
    cfg: &BpConfig,
    seed: u64,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut solver = Solver::new(pr, cfg).unwrap();
    let mut state = init_state(pr, cfg, &mut stream(seed, 7));
    let mut overlaps = Vec::new();
    for _ in 0..cfg.iterations {
        solver.step(&mut state).unwrap();
        overlaps.push(blockwise_abs_overlap(&mpm_estimate(&state), s0, pr.spec.hidden()).unwrap());
    }
    (state.trace.iter().map(|t| t.q.clone()).collect(), overlaps)
}

#[test]
fn block_gauge_leaves_the_dynamics_unchanged() {
    let ch = ChannelParams::new(0.1, 0.2).unwrap();
    let cfg = BpConfig::ecc().with_iterations(30);
    for kind in [NetworkKind::Pth, NetworkKind::Cth] {
        let spec = tuned(kind, 3, 0.55);
        let (pr, s0) = ecc_instance(spec, 150, 900, ch, 3);
        for l in 0..3 {
            let mut cb = pr.codebook.clone();
            cb.negate_block(l);
            let mut t0 = s0.clone();
            t0.negate_block(3, l).unwrap();
            // same codeword, hence the same channel output
            assert_eq!(
                encode(&spec, &t0, &cb).unwrap(),
                encode(&spec, &s0, &pr.codebook).unwrap()
            );
            let gauged = Problem {
                codebook: cb,
                ..pr.clone()
            };

            let (qa, oa) = trajectory(&pr, &s0, &cfg, 5);
            let (qb, ob) = trajectory(&gauged, &t0, &cfg, 5);
            assert_eq!(oa, ob, "{kind} block {l}");
            for (a, b) in qa.iter().zip(&qb) {
                for (x, y) in a.iter().zip(b) {
                    assert!((x - y).abs() < 1e-9, "{kind} block {l}: {x} vs {y}");
                }
            }
        }
    }
}

#[test]
fn moderate_compression_instance() {
    use mlpcodes::engine::run;
    let spec = tuned(NetworkKind::Pth, 1, 0.5);
    let pr = lc_instance(spec, 500, 1250, 0.5, 9);
    let best = [1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|&beta| {
            let cfg = BpConfig::lc().with_beta(beta).with_gamma(0.45);
            distortion(&pr, &run(&pr, &cfg, &mut stream(9, 1)).unwrap().estimate)
        })
        .fold(f64::INFINITY, f64::min);
    assert!(best <= 0.25, "{best}");
}
