//! The three tree-like multilayer perceptrons: parity tree with non-monotonic
//! hidden units (PTH), committee tree with non-monotonic hidden units (CTH),
//! and committee tree with a non-monotonic output unit (CTO).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{binomial_pmf, inside_probability};
use crate::spin::{dot_i8, sgn, BlockedSpins, SeededStream, SpinVector};

/// Largest hidden-unit count for which the kernels enumerate all `2^K`
/// hidden configurations.
pub const MAX_HIDDEN: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkKind {
    Pth,
    Cth,
    Cto,
}

impl NetworkKind {
    pub fn name(self) -> &'static str {
        match self {
            NetworkKind::Pth => "pth",
            NetworkKind::Cth => "cth",
            NetworkKind::Cto => "cto",
        }
    }
}

impl fmt::Display for NetworkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NetworkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pth" => Ok(NetworkKind::Pth),
            "cth" => Ok(NetworkKind::Cth),
            "cto" => Ok(NetworkKind::Cto),
            other => Err(Error::InvalidNetwork(format!(
                "unknown network kind {other:?}"
            ))),
        }
    }
}

/// Network kind, hidden-unit count `K` and threshold `k` of the transfer
/// function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    kind: NetworkKind,
    hidden: usize,
    threshold: f64,
}

impl NetworkSpec {
    pub fn new(kind: NetworkKind, hidden: usize, threshold: f64) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::InvalidNetwork("K must be positive".into()));
        }
        if hidden > MAX_HIDDEN {
            return Err(Error::InvalidNetwork(format!(
                "K={hidden} exceeds the enumeration limit {MAX_HIDDEN}"
            )));
        }
        if kind == NetworkKind::Cth && hidden.is_multiple_of(2) {
            return Err(Error::InvalidNetwork("CTH requires an odd K".into()));
        }
        if kind == NetworkKind::Cto && hidden < 2 {
            return Err(Error::InvalidNetwork("CTO requires K >= 2".into()));
        }
        if threshold.is_nan() || threshold < 0.0 {
            return Err(Error::InvalidNetwork(format!(
                "threshold k must be >= 0, got {threshold}"
            )));
        }
        Ok(Self {
            kind,
            hidden,
            threshold,
        })
    }

    pub fn kind(&self) -> NetworkKind {
        self.kind
    }

    /// Number of hidden units `K`.
    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// Threshold `k`.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn with_threshold(&self, threshold: f64) -> Result<Self> {
        Self::new(self.kind, self.hidden, threshold)
    }

    /// Output unit applied to hidden configuration `tau` (spins of the hidden
    /// units: `f_k` outputs for PTH/CTH, signs for CTO).
    pub fn combine(&self, tau: &[i8]) -> i8 {
        match self.kind {
            NetworkKind::Pth => tau.iter().product(),
            NetworkKind::Cth => sgn(tau.iter().map(|&t| t as i32).sum::<i32>() as f64),
            NetworkKind::Cto => {
                let sum = tau.iter().map(|&t| t as i32).sum::<i32>() as f64;
                transfer_fk(sum / (self.hidden as f64).sqrt(), self.threshold)
            }
        }
    }
}

/// Non-monotonic transfer function: `+1` inside `[-k, k]`, `-1` outside.
#[inline]
pub fn transfer_fk(x: f64, k: f64) -> i8 {
    if x.abs() <= k {
        1
    } else {
        -1
    }
}

/// Hidden-unit fields `√(K/N) s_l·x_l`.
pub fn local_fields(s: BlockedSpins<'_>, x: BlockedSpins<'_>) -> Result<Vec<f64>> {
    if s.blocks() != x.blocks() || s.block_len() != x.block_len() {
        return Err(Error::LengthMismatch {
            left: s.len(),
            right: x.len(),
        });
    }
    let scale = (1.0 / s.block_len() as f64).sqrt();
    Ok(s.iter()
        .zip(x.iter())
        .map(|(sl, xl)| scale * dot_i8(sl, xl) as f64)
        .collect())
}

/// Network output given precomputed hidden fields.
pub fn forward_fields(spec: &NetworkSpec, fields: &[f64]) -> i8 {
    let k = spec.threshold;
    match spec.kind {
        NetworkKind::Pth => fields.iter().map(|&h| transfer_fk(h, k)).product(),
        NetworkKind::Cth => {
            let votes: i32 = fields.iter().map(|&h| transfer_fk(h, k) as i32).sum();
            sgn(votes as f64)
        }
        NetworkKind::Cto => {
            let votes: i32 = fields.iter().map(|&h| sgn(h) as i32).sum();
            transfer_fk(votes as f64 / (spec.hidden as f64).sqrt(), k)
        }
    }
}

pub fn forward(spec: &NetworkSpec, s: BlockedSpins<'_>, x: BlockedSpins<'_>) -> Result<i8> {
    if s.blocks() != spec.hidden {
        return Err(Error::BlockMismatch {
            len: s.len(),
            blocks: spec.hidden,
        });
    }
    Ok(forward_fields(spec, &local_fields(s, x)?))
}

/// `M` random `±1` input patterns of length `N`, shared by encoder and
/// decoder. Stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    patterns: Vec<i8>,
    m: usize,
    n: usize,
    blocks: usize,
}

impl Codebook {
    pub fn random(m: usize, n: usize, blocks: usize, stream: &mut SeededStream) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::Empty);
        }
        if blocks == 0 || !n.is_multiple_of(blocks) {
            return Err(Error::BlockMismatch { len: n, blocks });
        }
        let patterns = (0..m * n).map(|_| stream.uniform_spin()).collect();
        Ok(Self {
            patterns,
            m,
            n,
            blocks,
        })
    }

    pub fn from_patterns(patterns: &[SpinVector], blocks: usize) -> Result<Self> {
        let first = patterns.first().ok_or(Error::Empty)?;
        let n = first.len();
        if blocks == 0 || n % blocks != 0 {
            return Err(Error::BlockMismatch { len: n, blocks });
        }
        let mut flat = Vec::with_capacity(n * patterns.len());
        for p in patterns {
            if p.len() != n {
                return Err(Error::LengthMismatch {
                    left: n,
                    right: p.len(),
                });
            }
            flat.extend_from_slice(p.as_slice());
        }
        Ok(Self {
            patterns: flat,
            m: patterns.len(),
            n,
            blocks,
        })
    }

    /// Number of patterns `M`.
    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// Pattern length `N`.
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn block_len(&self) -> usize {
        self.n / self.blocks
    }

    pub fn pattern(&self, mu: usize) -> &[i8] {
        &self.patterns[mu * self.n..(mu + 1) * self.n]
    }

    pub fn blocked(&self, mu: usize) -> BlockedSpins<'_> {
        BlockedSpins::new(self.pattern(mu), self.blocks).expect("validated at construction")
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i8]> + '_ {
        self.patterns.chunks_exact(self.n)
    }

    /// Keeps patterns `0..m`.
    pub fn truncated(&self, m: usize) -> Self {
        let m = m.min(self.m);
        Self {
            patterns: self.patterns[..m * self.n].to_vec(),
            m,
            n: self.n,
            blocks: self.blocks,
        }
    }

    /// Negates block `l` of every pattern.
    pub fn negate_block(&mut self, l: usize) {
        let len = self.block_len();
        for row in self.patterns.chunks_exact_mut(self.n) {
            for v in &mut row[l * len..(l + 1) * len] {
                *v = -*v;
            }
        }
    }

    /// Reorders patterns by `order` (a permutation of `0..M`).
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut patterns = Vec::with_capacity(self.patterns.len());
        for &mu in order {
            patterns.extend_from_slice(self.pattern(mu));
        }
        Self {
            patterns,
            m: order.len(),
            n: self.n,
            blocks: self.blocks,
        }
    }
}

/// Feeds every codebook pattern through the network with couplings `s`.
pub fn encode(spec: &NetworkSpec, s: &SpinVector, codebook: &Codebook) -> Result<SpinVector> {
    if s.len() != codebook.dim() {
        return Err(Error::LengthMismatch {
            left: s.len(),
            right: codebook.dim(),
        });
    }
    if codebook.blocks() != spec.hidden {
        return Err(Error::BlockMismatch {
            len: codebook.dim(),
            blocks: spec.hidden,
        });
    }
    let sb = s.blocked(spec.hidden)?;
    let out = (0..codebook.len())
        .map(|mu| forward(spec, sb, codebook.blocked(mu)))
        .collect::<Result<Vec<_>>>()?;
    SpinVector::new(out)
}

/// Probability of a `+1` output when the hidden fields are iid standard
/// normal, which is their law for random couplings and patterns.
pub fn output_bias(spec: &NetworkSpec) -> f64 {
    bias_from_inside_probability(spec, inside_probability(spec.threshold))
}

/// Output bias when each hidden unit independently falls inside `[-k, k]`
/// with probability `inside` (PTH/CTH) and has a fair sign (CTO).
pub(crate) fn bias_from_inside_probability(spec: &NetworkSpec, inside: f64) -> f64 {
    let kk = spec.hidden;
    match spec.kind {
        NetworkKind::Pth => 0.5 * (1.0 + (2.0 * inside - 1.0).powi(kk as i32)),
        NetworkKind::Cth => (0..=kk)
            .filter(|&j| 2 * j > kk)
            .map(|j| binomial_pmf(kk, j, inside))
            .sum(),
        NetworkKind::Cto => {
            let root = (kk as f64).sqrt();
            (0..=kk)
                .filter(|&j| {
                    let votes = 2.0 * j as f64 - kk as f64;
                    transfer_fk(votes / root, spec.threshold) == 1
                })
                .map(|j| binomial_pmf(kk, j, 0.5))
                .sum()
        }
    }
}
