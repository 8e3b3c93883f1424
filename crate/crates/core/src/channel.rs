//! Binary asymmetric channel, biased binary source, the Shannon reference
//! bounds, and threshold tuning against a target output bias.
//!
//! Channel convention: `P(y | y0) = 1/2 + (y/2)[(1 - r - p) y0 + (r - p)]`,
//! so a transmitted `+1` is flipped with probability `p` and a transmitted
//! `-1` with probability `r`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{output_bias, NetworkKind, NetworkSpec};
use crate::spin::{SeededStream, SpinVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    p: f64,
    r: f64,
}

impl ChannelParams {
    pub fn new(p: f64, r: f64) -> Result<Self> {
        let bad = |reason| Err(Error::InvalidChannel { p, r, reason });
        if !(0.0..0.5).contains(&p) {
            return bad("p must lie in [0, 0.5)");
        }
        if !(0.0..0.5).contains(&r) {
            return bad("r must lie in [0, 0.5)");
        }
        if p + r >= 1.0 {
            return bad("p + r must be below 1");
        }
        Ok(Self { p, r })
    }

    pub fn symmetric(p: f64) -> Result<Self> {
        Self::new(p, p)
    }

    /// Flip probability of a transmitted `+1`.
    pub fn p(&self) -> f64 {
        self.p
    }

    /// Flip probability of a transmitted `-1`.
    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn flip_probability(&self, y0: i8) -> f64 {
        1.0 - likelihood(y0, y0, self)
    }
}

/// Biased binary source with `P(+1) = bias`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceModel {
    bias: f64,
}

impl SourceModel {
    /// Accepts the closed interval so that the degenerate all-`+1` and
    /// all-`-1` sources can be sampled.
    pub fn new(bias: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&bias) {
            return Err(Error::InvalidSource(bias));
        }
        Ok(Self { bias })
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn entropy(&self) -> f64 {
        binary_entropy(self.bias).expect("bias validated")
    }
}

/// `P(y | y0)` for the binary asymmetric channel.
#[inline]
pub fn likelihood(y: i8, y0: i8, ch: &ChannelParams) -> f64 {
    let (y, y0) = (y as f64, y0 as f64);
    0.5 + 0.5 * y * ((1.0 - ch.r - ch.p) * y0 + (ch.r - ch.p))
}

pub fn transmit(y0: &SpinVector, ch: &ChannelParams, stream: &mut SeededStream) -> SpinVector {
    let flip_plus = ch.flip_probability(1);
    let flip_minus = ch.flip_probability(-1);
    let out = y0
        .as_slice()
        .iter()
        .map(|&b| {
            let flip = if b == 1 { flip_plus } else { flip_minus };
            if stream.unit() < flip {
                -b
            } else {
                b
            }
        })
        .collect();
    SpinVector::new(out).expect("input is a valid spin vector")
}

pub fn sample_source(m: usize, src: &SourceModel, stream: &mut SeededStream) -> Result<SpinVector> {
    if m == 0 {
        return Err(Error::Empty);
    }
    let values = if src.bias == 0.5 {
        (0..m).map(|_| stream.uniform_spin()).collect()
    } else {
        (0..m)
            .map(|_| if stream.unit() < src.bias { 1 } else { -1 })
            .collect()
    };
    SpinVector::new(values)
}

/// `H₂(q)` in bits, with `0 log 0 = 0`.
pub fn binary_entropy(q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::OutOfDomain {
            name: "q",
            value: q,
            domain: "[0, 1]",
        });
    }
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    Ok(term(q) + term(1.0 - q))
}

fn h2(q: f64) -> f64 {
    binary_entropy(q.clamp(0.0, 1.0)).expect("clamped")
}

/// `I(X; Y)` in bits for input bias `P(X = +1) = input_bias`.
pub fn mutual_information(ch: &ChannelParams, input_bias: f64) -> f64 {
    let b = input_bias;
    let y_plus = b * (1.0 - ch.p) + (1.0 - b) * ch.r;
    h2(y_plus) - b * h2(ch.p) - (1.0 - b) * h2(ch.r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Capacity {
    pub capacity: f64,
    pub input_bias: f64,
}

/// Capacity of the channel by golden-section search over the input bias.
pub fn bac_capacity(ch: &ChannelParams) -> Capacity {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let f = |b: f64| mutual_information(ch, b);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > 1e-10 {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    let input_bias = 0.5 * (lo + hi);
    Capacity {
        capacity: f(input_bias),
        input_bias,
    }
}

/// `R(D) = H₂(p) - H₂(D)` for `D < min(p, 1-p)`, zero beyond.
pub fn rate_distortion(src: &SourceModel, distortion: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&distortion) {
        return Err(Error::OutOfDomain {
            name: "D",
            value: distortion,
            domain: "[0, 1]",
        });
    }
    let dmax = src.bias.min(1.0 - src.bias);
    if distortion >= dmax {
        return Ok(0.0);
    }
    Ok(src.entropy() - h2(distortion))
}

/// Smallest achievable distortion at rate `rate`, the inverse of
/// [`rate_distortion`], by bisection to `1e-10`.
pub fn shannon_distortion(src: &SourceModel, rate: f64) -> Result<f64> {
    let hp = src.entropy();
    if rate.is_nan() || rate <= 0.0 || rate > hp {
        return Err(Error::OutOfDomain {
            name: "R",
            value: rate,
            domain: "(0, H2(p)]",
        });
    }
    if rate == hp {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0f64, src.bias.min(1.0 - src.bias));
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if hp - h2(mid) > rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Upper end of the threshold scan.
pub const K_MAX: f64 = 12.0;

const BIAS_TOL: f64 = 1e-9;

/// Smallest `k >= 0` whose output bias is within `1e-9` of `target_bias`.
///
/// Scans `[0, K_MAX]` for the first bracket in which the bias crosses the
/// target and bisects inside it, so non-monotone families (PTH with even `K`)
/// resolve to their first crossing.
pub fn tune_threshold(spec: &NetworkSpec, target_bias: f64) -> Result<f64> {
    let unattainable = || Error::Unattainable {
        target: target_bias,
        network: format!("{} K={}", spec.kind(), spec.hidden()),
    };
    if !(0.0..=1.0).contains(&target_bias) {
        return Err(unattainable());
    }
    if target_bias >= 1.0 && spec.kind() != NetworkKind::Cto {
        // only reached in the k -> infinity limit
        return Err(unattainable());
    }
    let gap = |k: f64| output_bias(&spec.with_threshold(k).expect("k >= 0")) - target_bias;

    const STEPS: usize = 12_000;
    let mut prev_k = 0.0;
    let mut prev = gap(0.0);
    if prev.abs() <= BIAS_TOL {
        return Ok(0.0);
    }
    for i in 1..=STEPS {
        let k = K_MAX * i as f64 / STEPS as f64;
        let g = gap(k);
        if g.abs() <= BIAS_TOL || g.signum() != prev.signum() {
            let (mut lo, mut hi) = (prev_k, k);
            let lo_sign = prev.signum();
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let gm = gap(mid);
                if gm.signum() == lo_sign && gm.abs() > BIAS_TOL {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-15 {
                    break;
                }
            }
            // hi is the left-most point at or past the crossing
            if gap(hi).abs() <= BIAS_TOL {
                return Ok(hi);
            }
            return Err(unattainable());
        }
        prev_k = k;
        prev = g;
    }
    Err(unattainable())
}

/// Threshold used by the experiment harness.
///
/// PTH and CTH use [`tune_threshold`]. The CTO output bias is piecewise
/// constant in `k`, so every `k` inside one plateau defines the same code;
/// the harness takes the plateau whose bias is nearest the target and
/// returns its midpoint together with the bias actually achieved.
pub fn auto_threshold(spec: &NetworkSpec, target_bias: f64) -> Result<(f64, f64)> {
    if spec.kind() != NetworkKind::Cto {
        let k = tune_threshold(spec, target_bias)?;
        return Ok((k, output_bias(&spec.with_threshold(k)?)));
    }
    let kk = spec.hidden();
    let root = (kk as f64).sqrt();
    let mut edges: Vec<f64> = (0..=kk)
        .map(|j| (2.0 * j as f64 - kk as f64).abs() / root)
        .collect();
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let mut best: Option<(f64, f64)> = None;
    for (i, &lo) in edges.iter().enumerate() {
        let mid = match edges.get(i + 1) {
            Some(&hi) => 0.5 * (lo + hi),
            None => lo + 1.0,
        };
        let b = output_bias(&spec.with_threshold(mid)?);
        let better = match best {
            None => true,
            Some((_, bb)) => (b - target_bias).abs() < (bb - target_bias).abs() - 1e-15,
        };
        if better {
            best = Some((mid, b));
        }
    }
    Ok(best.expect("at least one plateau"))
}
