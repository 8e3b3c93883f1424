mod common;

use common::*;
use mlpcodes::engine::{init_state, run, BpConfig};
use mlpcodes::oracle::{
    exact_posterior, exhaustive_lc_encode, full_bp_step, gibbs_marginals, DenseBpState,
    EnumerationBudget,
};
use mlpcodes::{ChannelParams, NetworkKind, SpinVector};

#[test]
fn gibbs_chain_matches_exact_marginals() {
    let spec = tuned(NetworkKind::Pth, 1, 0.6);
    let (pr, _) = ecc_instance(spec, 12, 12, ChannelParams::new(0.2, 0.25).unwrap(), 1);
    let mut st = stream(1, 1);
    let field: Vec<f64> = (0..12).map(|_| st.unit() - 0.5).collect();
    let exact = exact_posterior(&pr, 1.0, Some(&field), EnumerationBudget::default()).unwrap();
    let mc = gibbs_marginals(&pr, 1.0, Some(&field), 100_000, 1_000, &mut stream(1, 2)).unwrap();
    for (i, (a, b)) in exact.marginals.iter().zip(&mc).enumerate() {
        assert!((a - b).abs() < 0.02, "site {i}: exact {a} vs gibbs {b}");
    }
    // the field makes the check non-trivial
    assert!(exact.marginals.iter().any(|m| m.abs() > 0.1));
}

/// Brute-force minimum over all states, independent of the Gray walk.
fn brute_force_min(pr: &mlpcodes::engine::Problem) -> f64 {
    let n = pr.n();
    (0u32..1 << n)
        .map(|bits| {
            let s = SpinVector::new(
                (0..n)
                    .map(|i| if bits >> i & 1 == 1 { -1 } else { 1 })
                    .collect(),
            )
            .unwrap();
            distortion(pr, &s)
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn small_exhaustive_compression_optimum() {
    let spec = tuned(NetworkKind::Pth, 1, 0.5);
    let cfg = BpConfig::lc().with_beta(2.0).with_gamma(0.45);
    let mut total = 0.0;
    for seed in 0..20 {
        let pr = lc_instance(spec, 12, 24, 0.5, seed);
        let best = exhaustive_lc_encode(&pr, EnumerationBudget::default()).unwrap();
        let d = distortion(&pr, &best);
        assert_eq!(d, brute_force_min(&pr), "seed {seed}");
        total += d;
        // no heuristic encoder beats the enumeration
        for restart in 1..=3 {
            let out = run(&pr, &cfg, &mut stream(seed, 10 + restart)).unwrap();
            assert!(distortion(&pr, &out.estimate) >= d);
        }
    }
    let mean = total / 20.0;
    eprintln!("N=12 R=0.5 mean exhaustive distortion {mean:.4}");
    assert!(mean > 0.0 && mean < 0.25, "{mean}");
}

#[test]
fn factor_messages_shrink_as_inverse_root_n() {
    let spec = tuned(NetworkKind::Pth, 1, 0.55);
    let ch = ChannelParams::new(0.1, 0.2).unwrap();
    let cfg = BpConfig::ecc();
    let sizes = [64usize, 128, 256];
    let mut logs = Vec::new();
    for &n in &sizes {
        let mut peak = 0.0f64;
        for seed in 0..3 {
            let (pr, _) = ecc_instance(spec, n, 4 * n, ch, seed);
            let m0 = init_state(&pr, &cfg, &mut stream(seed, 3)).m;
            let mut dense = DenseBpState::from_marginals(&m0, pr.m());
            full_bp_step(&mut dense, &pr, &cfg).unwrap();
            full_bp_step(&mut dense, &pr, &cfg).unwrap();
            peak += dense.hat.iter().fold(0.0f64, |a, h| a.max(h.abs())) / 3.0;
        }
        logs.push(((n as f64).ln(), peak.ln()));
    }
    // least-squares slope of log max|m̂| against log N
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / 3.0;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / 3.0;
    let slope = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / logs.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!(
        (-0.8..=-0.3).contains(&slope),
        "slope {slope}, points {logs:?}"
    );
}
