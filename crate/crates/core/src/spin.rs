//! Ising spin vectors, their block structure, overlap metrics, and the
//! deterministic random streams every trial draws from.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sign with the `sgn(0) = +1` convention used throughout.
#[inline]
pub fn sgn(x: f64) -> i8 {
    if x >= 0.0 {
        1
    } else {
        -1
    }
}

/// A non-empty sequence of `+1` / `-1` symbols.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpinVector(Vec<i8>);

impl SpinVector {
    pub fn new(values: Vec<i8>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty);
        }
        if let Some(&bad) = values.iter().find(|&&v| v != 1 && v != -1) {
            return Err(Error::InvalidSpin(bad as i64));
        }
        Ok(Self(values))
    }

    /// Builds a vector from arbitrary reals by taking signs.
    pub fn from_signs(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| sgn(v)).collect())
    }

    pub fn filled(len: usize, value: i8) -> Result<Self> {
        Self::new(vec![value; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<i8> {
        self.0
    }

    pub fn get(&self, i: usize) -> i8 {
        self.0[i]
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|&v| -v).collect())
    }

    /// Negates block `l` of a `blocks`-way partition in place.
    pub fn negate_block(&mut self, blocks: usize, l: usize) -> Result<()> {
        let len = block_len(self.len(), blocks)?;
        for v in &mut self.0[l * len..(l + 1) * len] {
            *v = -*v;
        }
        Ok(())
    }

    pub fn blocked(&self, blocks: usize) -> Result<BlockedSpins<'_>> {
        BlockedSpins::new(&self.0, blocks)
    }

    pub fn dot(&self, other: &SpinVector) -> Result<i64> {
        check_len(self.len(), other.len())?;
        Ok(dot_i8(&self.0, &other.0))
    }
}

impl AsRef<[i8]> for SpinVector {
    fn as_ref(&self) -> &[i8] {
        &self.0
    }
}

/// A `K`-way partition of a spin slice into equal consecutive blocks.
#[derive(Debug, Clone, Copy)]
pub struct BlockedSpins<'a> {
    values: &'a [i8],
    blocks: usize,
    block_len: usize,
}

impl<'a> BlockedSpins<'a> {
    pub fn new(values: &'a [i8], blocks: usize) -> Result<Self> {
        let block_len = block_len(values.len(), blocks)?;
        Ok(Self {
            values,
            blocks,
            block_len,
        })
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn block(&self, l: usize) -> &'a [i8] {
        &self.values[l * self.block_len..(l + 1) * self.block_len]
    }

    pub fn iter(&self) -> impl Iterator<Item = &'a [i8]> + '_ {
        self.values.chunks_exact(self.block_len)
    }

    pub fn as_slice(&self) -> &'a [i8] {
        self.values
    }
}

fn block_len(len: usize, blocks: usize) -> Result<usize> {
    if blocks == 0 || !len.is_multiple_of(blocks) || len == 0 {
        return Err(Error::BlockMismatch { len, blocks });
    }
    Ok(len / blocks)
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch { left: a, right: b });
    }
    Ok(())
}

#[inline]
pub(crate) fn dot_i8(a: &[i8], b: &[i8]) -> i64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x as i64) * (y as i64))
        .sum()
}

/// `(1/N) a·b`.
pub fn overlap(a: &SpinVector, b: &SpinVector) -> Result<f64> {
    Ok(a.dot(b)? as f64 / a.len() as f64)
}

/// Mean over blocks of the absolute per-block overlap. Invariant under
/// independent negation of any block, which is exactly the sign degeneracy
/// of the tree networks.
pub fn blockwise_abs_overlap(a: &SpinVector, b: &SpinVector, blocks: usize) -> Result<f64> {
    check_len(a.len(), b.len())?;
    let ab = a.blocked(blocks)?;
    let bb = b.blocked(blocks)?;
    let n = ab.block_len() as f64;
    let total: f64 = ab
        .iter()
        .zip(bb.iter())
        .map(|(x, y)| (dot_i8(x, y) as f64 / n).abs())
        .sum();
    Ok(total / blocks as f64)
}

/// Fraction of positions where `y` and `yhat` disagree.
pub fn hamming_distortion(y: &SpinVector, yhat: &SpinVector) -> Result<f64> {
    check_len(y.len(), yhat.len())?;
    let diff = y
        .as_slice()
        .iter()
        .zip(yhat.as_slice())
        .filter(|(a, b)| a != b)
        .count();
    Ok(diff as f64 / y.len() as f64)
}

/// Identifies one random stream inside an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamId {
    pub experiment: u64,
    pub run: u64,
    pub restart: u64,
}

impl StreamId {
    pub const fn new(experiment: u64, run: u64, restart: u64) -> Self {
        Self {
            experiment,
            run,
            restart,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A random stream keyed by `(master_seed, stream_id)`.
///
/// The ChaCha key is derived from the key tuple alone, so the draws of one
/// stream never depend on which other streams were opened before it.
#[derive(Debug, Clone)]
pub struct SeededStream {
    master_seed: u64,
    id: StreamId,
    rng: ChaCha8Rng,
}

impl SeededStream {
    pub fn new(master_seed: u64, id: StreamId) -> Self {
        let mut state = master_seed;
        let mut mix = |v: u64| {
            state ^= v;
            splitmix64(&mut state)
        };
        let words = [
            mix(id.experiment),
            mix(id.run),
            mix(id.restart),
            mix(0x6d6c_7063_6f64_6573),
        ];
        let mut seed = [0u8; 32];
        for (chunk, w) in seed.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        Self {
            master_seed,
            id,
            rng: ChaCha8Rng::from_seed(seed),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn id(&self) -> StreamId {
        self.id
    }

    pub fn uniform_spin(&mut self) -> i8 {
        if self.rng.random::<bool>() {
            1
        } else {
            -1
        }
    }

    /// Uniform draw in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

impl RngCore for SeededStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// IID fair `±1` symbols.
pub fn draw_uniform_spins(n: usize, stream: &mut SeededStream) -> Result<SpinVector> {
    if n == 0 {
        return Err(Error::Empty);
    }
    Ok(SpinVector((0..n).map(|_| stream.uniform_spin()).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sv(v: &[i8]) -> SpinVector {
        SpinVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn rejects_bad_symbols_and_empty() {
        assert_eq!(SpinVector::new(vec![]), Err(Error::Empty));
        assert_eq!(SpinVector::new(vec![1, 0]), Err(Error::InvalidSpin(0)));
    }

    #[test]
    fn overlap_examples() {
        let a = sv(&[1, -1, 1, 1]);
        assert_eq!(overlap(&a, &a).unwrap(), 1.0);
        assert_eq!(overlap(&a, &a.negated()).unwrap(), -1.0);
        let x = sv(&[1, 1, 1, 1]);
        let y = sv(&[1, 1, -1, -1]);
        assert_eq!(overlap(&x, &y).unwrap(), 0.0);
        assert!(matches!(
            overlap(&x, &sv(&[1, 1])),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn blockwise_examples() {
        let a = sv(&[1, -1, 1, 1]);
        assert_eq!(blockwise_abs_overlap(&a, &a, 2).unwrap(), 1.0);
        let mut b = a.clone();
        b.negate_block(2, 0).unwrap();
        assert_eq!(blockwise_abs_overlap(&a, &b, 2).unwrap(), 1.0);
        let c = sv(&[1, 1, -1, 1]);
        assert_eq!(
            blockwise_abs_overlap(&a, &c, 1).unwrap(),
            overlap(&a, &c).unwrap().abs()
        );
        assert!(matches!(
            blockwise_abs_overlap(&a, &c, 3),
            Err(Error::BlockMismatch { .. })
        ));
    }

    #[test]
    fn hamming_examples() {
        let y = sv(&[1, -1, 1, 1]);
        assert_eq!(hamming_distortion(&y, &y).unwrap(), 0.0);
        assert_eq!(hamming_distortion(&y, &y.negated()).unwrap(), 1.0);
        assert_eq!(hamming_distortion(&y, &sv(&[1, -1, 1, -1])).unwrap(), 0.25);
    }

    #[test]
    fn stream_determinism_and_independence() {
        let id = StreamId::new(3, 7, 1);
        let a = draw_uniform_spins(64, &mut SeededStream::new(42, id)).unwrap();
        let b = draw_uniform_spins(64, &mut SeededStream::new(42, id)).unwrap();
        assert_eq!(a, b);
        let c = draw_uniform_spins(64, &mut SeededStream::new(42, StreamId::new(3, 7, 2))).unwrap();
        assert_ne!(a, c);
        assert_eq!(
            draw_uniform_spins(0, &mut SeededStream::new(1, id)),
            Err(Error::Empty)
        );
    }

    #[test]
    fn stream_order_independence() {
        let ids: Vec<_> = (0..8).map(|r| StreamId::new(0, r, 0)).collect();
        let forward: Vec<_> = ids
            .iter()
            .map(|&id| draw_uniform_spins(16, &mut SeededStream::new(5, id)).unwrap())
            .collect();
        let mut backward: Vec<_> = ids
            .iter()
            .rev()
            .map(|&id| draw_uniform_spins(16, &mut SeededStream::new(5, id)).unwrap())
            .collect();
        backward.reverse();
        assert_eq!(forward, backward);
    }

    #[test]
    fn uniform_mean_concentrates() {
        let n = 100_000;
        let s = draw_uniform_spins(n, &mut SeededStream::new(9, StreamId::new(0, 0, 0))).unwrap();
        let mean = s.as_slice().iter().map(|&v| v as f64).sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "mean = {mean}");
    }

    fn spins(n: usize) -> impl Strategy<Value = Vec<i8>> {
        prop::collection::vec(prop::bool::ANY.prop_map(|b| if b { 1i8 } else { -1 }), n)
    }

    proptest! {
        #[test]
        fn overlap_symmetries((a, b) in (1usize..40).prop_flat_map(|n| (spins(n), spins(n)))) {
            let a = SpinVector::new(a).unwrap();
            let b = SpinVector::new(b).unwrap();
            prop_assert_eq!(overlap(&a, &b).unwrap(), overlap(&b, &a).unwrap());
            prop_assert_eq!(overlap(&a, &a).unwrap(), 1.0);
            prop_assert_eq!(overlap(&a, &b.negated()).unwrap(), -overlap(&a, &b).unwrap());
            let d = hamming_distortion(&a, &b).unwrap();
            prop_assert!((d - (1.0 - overlap(&a, &b).unwrap()) / 2.0).abs() < 1e-12);
        }

        #[test]
        fn blockwise_invariant_under_block_flips(
            (a, b, flips) in (1usize..6, 1usize..8).prop_flat_map(|(k, n)| {
                (spins(k * n), spins(k * n), prop::collection::vec(any::<(bool, bool)>(), k))
            })
        ) {
            let k = flips.len();
            let a = SpinVector::new(a).unwrap();
            let b = SpinVector::new(b).unwrap();
            let base = blockwise_abs_overlap(&a, &b, k).unwrap();
            let (mut a2, mut b2) = (a.clone(), b.clone());
            for (l, &(fa, fb)) in flips.iter().enumerate() {
                if fa { a2.negate_block(k, l).unwrap(); }
                if fb { b2.negate_block(k, l).unwrap(); }
            }
            prop_assert_eq!(base, blockwise_abs_overlap(&a2, &b2, k).unwrap());
        }
    }
}
