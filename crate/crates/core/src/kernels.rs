//! Per-factor Gaussian averages used by message passing.
//!
//! For output `μ`, hidden unit `l` sees a Gaussian field with mean `a_l`
//! (the cavity mean) and variance `1 - q_l`. The kernel returns
//!
//! * `V`  — the expected factor weight, shared by all units,
//! * `U`  — its derivative with respect to `a_l`,
//! * `Ũ`  — the curvature companion used by the Onsager gain,
//! * `Ṽ = -U`.
//!
//! Each unit contributes a two-branch mixture: `τ_l = +1` with probability
//! `P⁺_l` and `τ_l = -1` with `P⁻_l`. The network maps `τ` to `F(τ)` and the
//! task weights `F` by `g(y, F)`: the channel likelihood for decoding, or
//! `e^{-β} + (1 - e^{-β})Θ(yF)` for compression.

use crate::channel::{likelihood, ChannelParams};
use crate::error::{Error, Result};
use crate::network::{NetworkKind, NetworkSpec, MAX_HIDDEN};
use crate::special::{gauss_h, gauss_pdf, CompensatedSum};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelTask {
    Ecc(ChannelParams),
    Lc { beta: f64 },
}

/// Cavity statistics for one hidden unit of one factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cavity {
    pub mean: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KernelOutput {
    pub u: f64,
    pub v: f64,
    pub u_tilde: f64,
    pub v_tilde: f64,
}

/// Branch probabilities and their first two derivative factors.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BranchStats {
    pub p_plus: f64,
    pub p_minus: f64,
    pub d: f64,
    pub d_tilde: f64,
}

fn sigma(q: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::OutOfDomain {
            name: "q",
            value: q,
            domain: "[0, 1)",
        });
    }
    Ok((1.0 - q).sqrt())
}

/// `w± = (k ± a)/σ` with `a = λ̄ - λ̂` and `σ = √(1 - q)`.
pub fn cavity_w(threshold: f64, lambda_bar: f64, lambda_hat: f64, q: f64) -> Result<(f64, f64)> {
    let s = sigma(q)?;
    let a = lambda_bar - lambda_hat;
    Ok(((threshold + a) / s, (threshold - a) / s))
}

/// `w = a/σ` for the sign-activated hidden units of CTO.
pub fn cavity_w_cto(lambda_bar: f64, lambda_hat: f64, q: f64) -> Result<f64> {
    Ok((lambda_bar - lambda_hat) / sigma(q)?)
}

/// Branch statistics of one unit. `τ = +1` means `|h| <= k` for PTH/CTH and
/// `h >= 0` for CTO.
pub fn branch_stats(spec: &NetworkSpec, cav: Cavity) -> Result<BranchStats> {
    let s = sigma(cav.q)?;
    if spec.kind() == NetworkKind::Cto {
        let w = cav.mean / s;
        let phi = gauss_pdf(w);
        return Ok(BranchStats {
            p_plus: gauss_h(-w),
            p_minus: gauss_h(w),
            d: phi / s,
            d_tilde: w * phi / (s * s),
        });
    }
    let k = spec.threshold();
    let wp = (k + cav.mean) / s;
    let wm = (k - cav.mean) / s;
    let p_minus = gauss_h(wp) + gauss_h(wm);
    // pick the difference of two small tails when the window sits off-centre
    let p_plus = if wp < 0.0 {
        gauss_h(-wp) - gauss_h(wm)
    } else if wm < 0.0 {
        gauss_h(-wm) - gauss_h(wp)
    } else {
        1.0 - p_minus
    };
    let (fp, fm) = (gauss_pdf(wp), gauss_pdf(wm));
    Ok(BranchStats {
        p_plus: p_plus.max(0.0),
        p_minus,
        d: (fp - fm) / s,
        d_tilde: (wp * fp + wm * fm) / (s * s),
    })
}

/// Smallest channel likelihood used inside the kernels; only reachable when
/// a flip probability is exactly zero.
pub const LIKELIHOOD_FLOOR: f64 = 1e-15;

/// Kernel evaluator for one network and task.
#[derive(Debug, Clone)]
pub struct Kernel {
    spec: NetworkSpec,
    task: KernelTask,
    /// `g(y, F(τ))` indexed by `[y == -1][mask]`; unused for PTH.
    weights: [Vec<f64>; 2],
}

impl Kernel {
    pub fn new(spec: &NetworkSpec, task: KernelTask) -> Result<Self> {
        if let KernelTask::Lc { beta } = task {
            if !(beta >= 0.0) || !beta.is_finite() {
                return Err(Error::OutOfDomain {
                    name: "beta",
                    value: beta,
                    domain: "[0, inf)",
                });
            }
        }
        let mut kernel = Self {
            spec: *spec,
            task,
            weights: [Vec::new(), Vec::new()],
        };
        if spec.kind() != NetworkKind::Pth {
            let kk = spec.hidden();
            let mut tau = vec![0i8; kk];
            for (slot, y) in [(0usize, 1i8), (1, -1)] {
                kernel.weights[slot] = (0..1usize << kk)
                    .map(|mask| {
                        fill_tau(mask, &mut tau);
                        kernel.weight(y, spec.combine(&tau))
                    })
                    .collect();
            }
        }
        Ok(kernel)
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn task(&self) -> KernelTask {
        self.task
    }

    /// `g(y, F)`. Channel likelihoods are floored at [`LIKELIHOOD_FLOOR`]
    /// so that a noiseless channel cannot drive `V` to an exact zero.
    #[inline]
    pub fn weight(&self, y: i8, f: i8) -> f64 {
        match self.task {
            KernelTask::Ecc(ch) => likelihood(y, f, &ch).max(LIKELIHOOD_FLOOR),
            KernelTask::Lc { beta } => {
                let floor = (-beta).exp();
                floor + if y == f { 1.0 - floor } else { 0.0 }
            }
        }
    }

    /// Evaluates all units of one factor. `cavity` and `out` have length `K`.
    pub fn evaluate(&self, y: i8, cavity: &[Cavity], out: &mut [KernelOutput]) -> Result<()> {
        let kk = self.spec.hidden();
        if cavity.len() != kk || out.len() != kk {
            return Err(Error::LengthMismatch {
                left: cavity.len(),
                right: kk,
            });
        }
        let mut br = [BranchStats::default(); MAX_HIDDEN];
        for (b, &c) in br.iter_mut().zip(cavity) {
            *b = branch_stats(&self.spec, c)?;
        }
        let br = &br[..kk];
        let mut sums = [0.0f64; MAX_HIDDEN];
        let v = match self.spec.kind() {
            NetworkKind::Pth => self.parity_sums(y, br, &mut sums[..kk]),
            _ => self.enumerated_sums(y, br, &mut sums[..kk]),
        };
        for ((o, b), s) in out.iter_mut().zip(br).zip(&sums[..kk]) {
            let u = b.d * s;
            *o = KernelOutput {
                u,
                v,
                u_tilde: b.d_tilde * s,
                v_tilde: -u,
            };
        }
        Ok(())
    }

    /// Parity output: `F = Π τ_l` makes every sum factorise.
    fn parity_sums(&self, y: i8, br: &[BranchStats], sums: &mut [f64]) -> f64 {
        let (g_plus, g_minus) = (self.weight(y, 1), self.weight(y, -1));
        // probability that the product of all branches is +1 / -1
        let (mut even, mut odd) = (1.0f64, 0.0f64);
        for b in br {
            (even, odd) = (
                even * b.p_plus + odd * b.p_minus,
                even * b.p_minus + odd * b.p_plus,
            );
        }
        let kk = br.len();
        let mut prefix = [1.0f64; MAX_HIDDEN + 1];
        for l in 0..kk {
            prefix[l + 1] = prefix[l] * (br[l].p_plus - br[l].p_minus);
        }
        let mut suffix = 1.0;
        for l in (0..kk).rev() {
            sums[l] = (g_plus - g_minus) * prefix[l] * suffix;
            suffix *= br[l].p_plus - br[l].p_minus;
        }
        even * g_plus + odd * g_minus
    }

    /// Committee outputs: explicit sum over the `2^K` branch patterns.
    fn enumerated_sums(&self, y: i8, br: &[BranchStats], sums: &mut [f64]) -> f64 {
        let kk = br.len();
        let table = &self.weights[usize::from(y == -1)];
        let mut v = CompensatedSum::new();
        let mut acc = [CompensatedSum::new(); MAX_HIDDEN];
        let mut w = [0.0f64; MAX_HIDDEN];
        let mut prefix = [1.0f64; MAX_HIDDEN + 1];
        for (mask, &g) in table.iter().enumerate() {
            for l in 0..kk {
                w[l] = if mask >> l & 1 == 0 {
                    br[l].p_plus
                } else {
                    br[l].p_minus
                };
                prefix[l + 1] = prefix[l] * w[l];
            }
            v.add(g * prefix[kk]);
            let mut suffix = 1.0;
            for l in (0..kk).rev() {
                let sign = if mask >> l & 1 == 0 { 1.0 } else { -1.0 };
                acc[l].add(sign * g * prefix[l] * suffix);
                suffix *= w[l];
            }
        }
        for (s, a) in sums.iter_mut().zip(&acc) {
            *s = a.value();
        }
        v.value()
    }
}

/// Bit `l` of `mask` clear means `τ_l = +1`.
pub(crate) fn fill_tau(mask: usize, tau: &mut [i8]) {
    for (l, t) in tau.iter_mut().enumerate() {
        *t = if mask >> l & 1 == 0 { 1 } else { -1 };
    }
}

/// Convenience wrapper returning a fresh vector.
pub fn evaluate_kernel(
    spec: &NetworkSpec,
    task: KernelTask,
    y: i8,
    cavity: &[Cavity],
) -> Result<Vec<KernelOutput>> {
    let kernel = Kernel::new(spec, task)?;
    let mut out = vec![KernelOutput::default(); spec.hidden()];
    kernel.evaluate(y, cavity, &mut out)?;
    Ok(out)
}

/// `Φ = U/V` and the factor's Onsager gain term `(ŨV + U²)/V²`.
/// Returns `None` when `V` is at or below `v_floor`.
#[inline]
pub fn phi_and_gain(out: &KernelOutput, v_floor: f64) -> Option<(f64, f64)> {
    if !(out.v > v_floor) {
        return None;
    }
    let phi = out.u / out.v;
    Some((phi, out.u_tilde / out.v + phi * phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ecc() -> KernelTask {
        KernelTask::Ecc(ChannelParams::new(0.1, 0.2).unwrap())
    }

    fn cav(pairs: &[(f64, f64)]) -> Vec<Cavity> {
        pairs.iter().map(|&(mean, q)| Cavity { mean, q }).collect()
    }

    /// Closed forms written directly in terms of tail functions, without the
    /// branch abstraction.
    fn closed_form_pth(k: f64, y: f64, cav: &[Cavity], task: KernelTask) -> Vec<KernelOutput> {
        let (offset, slope) = match task {
            KernelTask::Ecc(ch) => (
                0.5 + 0.5 * y * (ch.r() - ch.p()),
                0.5 * y * (1.0 - ch.r() - ch.p()),
            ),
            KernelTask::Lc { beta } => {
                let e = (-beta).exp();
                (e + (1.0 - e) * 0.5, (1.0 - e) * 0.5 * y)
            }
        };
        let terms: Vec<f64> = cav
            .iter()
            .map(|c| {
                let s = (1.0 - c.q).sqrt();
                1.0 - 2.0 * gauss_h((k + c.mean) / s) - 2.0 * gauss_h((k - c.mean) / s)
            })
            .collect();
        let v = offset + slope * terms.iter().product::<f64>();
        (0..cav.len())
            .map(|l| {
                let s = (1.0 - cav[l].q).sqrt();
                let wp = (k + cav[l].mean) / s;
                let wm = (k - cav[l].mean) / s;
                let ep = (-wp * wp / 2.0).exp();
                let em = (-wm * wm / 2.0).exp();
                let others: f64 = (0..cav.len())
                    .filter(|&j| j != l)
                    .map(|j| terms[j])
                    .product();
                let pre = 2.0 * slope * others / (2.0 * PI).sqrt() / s;
                KernelOutput {
                    u: pre * (ep - em),
                    v,
                    u_tilde: pre * (wp * ep + wm * em) / s,
                    v_tilde: -pre * (ep - em),
                }
            })
            .collect()
    }

    fn assert_close(a: &[KernelOutput], b: &[KernelOutput], tol: f64) {
        for (x, y) in a.iter().zip(b) {
            for (p, q) in [
                (x.u, y.u),
                (x.v, y.v),
                (x.u_tilde, y.u_tilde),
                (x.v_tilde, y.v_tilde),
            ] {
                assert!((p - q).abs() <= tol * (1.0 + q.abs()), "{x:?} vs {y:?}");
            }
        }
    }

    #[test]
    fn cavity_w_examples() {
        let (wp, wm) = cavity_w(1.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!((wp, wm), (1.0, 1.0));
        let (wp, wm) = cavity_w(0.5, 0.3, 0.1, 0.75).unwrap();
        assert!((wp - 1.4).abs() < 1e-12 && (wm - 0.6).abs() < 1e-12);
        assert!(cavity_w(1.0, 0.0, 0.0, 1.0).is_err());
        assert_eq!(cavity_w_cto(0.5, 0.0, 0.75).unwrap(), 1.0);
    }

    #[test]
    fn pth_matches_closed_form() {
        for kk in [1, 2, 3, 5] {
            let spec = NetworkSpec::new(NetworkKind::Pth, kk, 0.8).unwrap();
            let c: Vec<Cavity> = (0..kk)
                .map(|l| Cavity {
                    mean: 0.37 * l as f64 - 0.4,
                    q: 0.1 + 0.15 * l as f64,
                })
                .collect();
            for task in [ecc(), KernelTask::Lc { beta: 1.7 }] {
                for y in [1i8, -1] {
                    let got = evaluate_kernel(&spec, task, y, &c).unwrap();
                    assert_close(&got, &closed_form_pth(0.8, y as f64, &c, task), 1e-12);
                }
            }
        }
    }

    #[test]
    fn v_tilde_is_minus_u() {
        for kind in [NetworkKind::Pth, NetworkKind::Cth, NetworkKind::Cto] {
            let spec = NetworkSpec::new(kind, 3, 0.6).unwrap();
            let c = cav(&[(0.2, 0.3), (-0.5, 0.1), (0.9, 0.6)]);
            let out = evaluate_kernel(&spec, ecc(), 1, &c).unwrap();
            for o in out {
                assert_eq!(o.v_tilde, -o.u);
            }
        }
    }

    #[test]
    fn single_unit_committee_equals_parity() {
        let pth = NetworkSpec::new(NetworkKind::Pth, 1, 0.7).unwrap();
        let cth = NetworkSpec::new(NetworkKind::Cth, 1, 0.7).unwrap();
        for &(mean, q) in &[(0.0, 0.0), (0.4, 0.5), (-1.3, 0.9), (3.0, 0.2)] {
            for task in [ecc(), KernelTask::Lc { beta: 0.9 }] {
                for y in [1, -1] {
                    let a = evaluate_kernel(&pth, task, y, &cav(&[(mean, q)])).unwrap();
                    let b = evaluate_kernel(&cth, task, y, &cav(&[(mean, q)])).unwrap();
                    assert_close(&a, &b, 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_cavity_mean_has_zero_slope() {
        for kind in [NetworkKind::Pth, NetworkKind::Cth] {
            let spec = NetworkSpec::new(kind, 3, 0.69).unwrap();
            let out = evaluate_kernel(&spec, ecc(), 1, &cav(&[(0.0, 0.0); 3])).unwrap();
            assert!(out.iter().all(|o| o.u.abs() < 1e-15));
        }
    }

    #[test]
    fn committee_sum_is_order_independent() {
        // permuting units permutes outputs
        let spec = NetworkSpec::new(NetworkKind::Cth, 5, 0.69).unwrap();
        let c = cav(&[
            (0.2, 0.3),
            (-0.5, 0.1),
            (0.9, 0.6),
            (0.05, 0.0),
            (-1.2, 0.4),
        ]);
        let order = [3, 0, 4, 1, 2];
        let permuted: Vec<Cavity> = order.iter().map(|&i| c[i]).collect();
        let a = evaluate_kernel(&spec, ecc(), -1, &c).unwrap();
        let b = evaluate_kernel(&spec, ecc(), -1, &permuted).unwrap();
        for (j, &i) in order.iter().enumerate() {
            assert!((a[i].u - b[j].u).abs() < 1e-15);
            assert!((a[i].v - b[j].v).abs() < 1e-15);
        }
    }

    #[test]
    fn lc_weights_are_bounded_below() {
        for beta in [0.0, 0.5, 4.0] {
            for kind in [NetworkKind::Pth, NetworkKind::Cth, NetworkKind::Cto] {
                let spec = NetworkSpec::new(kind, 3, 0.69).unwrap();
                let c = cav(&[(2.0, 0.99), (-0.5, 0.1), (0.9, 0.6)]);
                let out = evaluate_kernel(&spec, KernelTask::Lc { beta }, 1, &c).unwrap();
                assert!(out[0].v >= (-beta).exp() - 1e-15);
                if beta == 0.0 {
                    assert!(out
                        .iter()
                        .all(|o| (o.v - 1.0).abs() < 1e-14 && o.u.abs() < 1e-14));
                }
            }
        }
    }

    #[test]
    fn v_is_a_probability_under_the_channel() {
        let spec = NetworkSpec::new(NetworkKind::Cto, 4, 0.9).unwrap();
        let c = cav(&[(0.2, 0.3), (-0.5, 0.1), (0.9, 0.6), (0.0, 0.0)]);
        let plus = evaluate_kernel(&spec, ecc(), 1, &c).unwrap();
        let minus = evaluate_kernel(&spec, ecc(), -1, &c).unwrap();
        assert!((plus[0].v + minus[0].v - 1.0).abs() < 1e-14);
        for (a, b) in plus.iter().zip(&minus) {
            assert!((a.u + b.u).abs() < 1e-14);
        }
    }

    #[test]
    fn branch_probabilities_stay_accurate_off_centre() {
        let spec = NetworkSpec::new(NetworkKind::Pth, 1, 0.5).unwrap();
        let b = branch_stats(&spec, Cavity { mean: 12.0, q: 0.0 }).unwrap();
        // P(11.5 <= z <= 12.5) from the two tails
        let expected = gauss_h(11.5) - gauss_h(12.5);
        assert!(expected > 0.0);
        assert!((b.p_plus / expected - 1.0).abs() < 1e-10);
        assert!((b.p_plus + b.p_minus - 1.0).abs() < 1e-15);
    }

    #[test]
    fn u_is_the_slope_of_v() {
        let h = 1e-6;
        for kind in [NetworkKind::Pth, NetworkKind::Cth, NetworkKind::Cto] {
            let spec = NetworkSpec::new(kind, 3, 0.69).unwrap();
            let base = cav(&[(0.2, 0.3), (-0.5, 0.1), (0.9, 0.6)]);
            let out = evaluate_kernel(&spec, ecc(), 1, &base).unwrap();
            for l in 0..3 {
                let mut up = base.clone();
                let mut down = base.clone();
                up[l].mean += h;
                down[l].mean -= h;
                let vu = evaluate_kernel(&spec, ecc(), 1, &up).unwrap()[0].v;
                let vd = evaluate_kernel(&spec, ecc(), 1, &down).unwrap()[0].v;
                let slope = (vu - vd) / (2.0 * h);
                assert!(
                    (slope - out[l].u).abs() < 1e-7,
                    "{kind} l={l}: {slope} vs {}",
                    out[l].u
                );
            }
        }
    }

    #[test]
    fn phi_and_gain_respects_floor() {
        let o = KernelOutput {
            u: 0.1,
            v: 1e-13,
            u_tilde: 0.0,
            v_tilde: -0.1,
        };
        assert!(phi_and_gain(&o, 1e-12).is_none());
        let o = KernelOutput { v: 0.5, ..o };
        let (phi, gain) = phi_and_gain(&o, 1e-12).unwrap();
        assert!((phi - 0.2).abs() < 1e-15 && (gain - 0.04).abs() < 1e-15);
    }

    mod props {
        use super::*;
        use crate::network::NetworkKind;
        use proptest::prelude::*;

        fn kind() -> impl Strategy<Value = (NetworkKind, usize)> {
            prop_oneof![
                (1usize..=4).prop_map(|k| (NetworkKind::Pth, k)),
                prop_oneof![Just(1usize), Just(3), Just(5)].prop_map(|k| (NetworkKind::Cth, k)),
                (2usize..=5).prop_map(|k| (NetworkKind::Cto, k)),
            ]
        }

        proptest! {
            #[test]
            fn outputs_are_bounded_and_mirrored(
                (kind, kk) in kind(),
                threshold in 0.1f64..2.0,
                lc in any::<bool>(),
                y in prop_oneof![Just(1i8), Just(-1i8)],
                cav in proptest::collection::vec((-3.0f64..3.0, 0.0f64..0.98), 5),
            ) {
                let spec = NetworkSpec::new(kind, kk, threshold).unwrap();
                let task = if lc { KernelTask::Lc { beta: 1.5 } } else { ecc() };
                let cav: Vec<Cavity> = cav[..kk].iter().map(|&(mean, q)| Cavity { mean, q }).collect();
                let out = evaluate_kernel(&spec, task, y, &cav).unwrap();
                // both factor weights lie in (0, 1], so V is a probability-weighted mean of them
                let opposite = evaluate_kernel(&spec, task, -y, &cav).unwrap();
                for (o, p) in out.iter().zip(&opposite) {
                    prop_assert!(o.v > 0.0 && o.v <= 1.0 + 1e-12);
                    prop_assert_eq!(o.v_tilde, -o.u);
                    prop_assert!(o.u.is_finite() && o.u_tilde.is_finite());
                    if !lc {
                        // the two channel outputs exhaust the probability
                        prop_assert!((o.v + p.v - 1.0).abs() < 1e-12);
                        prop_assert!((o.u + p.u).abs() < 1e-12);
                    }
                }
            }
        }
    }
}
