//! Brute-force references: exact posterior marginals by enumeration,
//! exhaustive compression, a Gibbs sampler, the unreduced message-passing
//! iteration, and Monte Carlo estimates of the kernel integrals.
//!
//! Everything here is meant for small systems and for validating the fast
//! paths in [`crate::kernels`] and [`crate::engine`].

use rand_distr::{Distribution, StandardNormal};

use crate::channel::likelihood;
use crate::engine::{BpConfig, Problem, Task, M_CLAMP};
use crate::error::{Error, Result};
use crate::kernels::{Cavity, Kernel, KernelOutput, KernelTask};
use crate::network::{forward_fields, MAX_HIDDEN};
use crate::special::CompensatedSum;
use crate::spin::{SeededStream, SpinVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationBudget {
    pub max_bits: usize,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        Self { max_bits: 20 }
    }
}

impl EnumerationBudget {
    fn check(&self, bits: usize) -> Result<()> {
        if bits > self.max_bits {
            return Err(Error::BudgetExceeded {
                bits,
                max_bits: self.max_bits,
            });
        }
        Ok(())
    }
}

/// Tracks a spin configuration and its integer local fields under single
/// flips, so each visited state costs `O(M·K)`.
struct FieldTracker<'a> {
    problem: &'a Problem,
    s: Vec<i8>,
    dots: Vec<i32>,
    scale: f64,
    block_len: usize,
}

impl<'a> FieldTracker<'a> {
    fn new(problem: &'a Problem, s: Vec<i8>) -> Self {
        let kk = problem.spec.hidden();
        let nb = problem.n() / kk;
        let mut dots = vec![0i32; problem.m() * kk];
        for (mu, row) in problem.codebook.rows().enumerate() {
            for l in 0..kk {
                dots[mu * kk + l] = row[l * nb..(l + 1) * nb]
                    .iter()
                    .zip(&s[l * nb..(l + 1) * nb])
                    .map(|(&x, &v)| i32::from(x) * i32::from(v))
                    .sum();
            }
        }
        Self {
            problem,
            s,
            dots,
            scale: (kk as f64 / problem.n() as f64).sqrt(),
            block_len: nb,
        }
    }

    fn flip(&mut self, j: usize) {
        let kk = self.problem.spec.hidden();
        let l = j / self.block_len;
        let sj = i32::from(self.s[j]);
        for (mu, row) in self.problem.codebook.rows().enumerate() {
            self.dots[mu * kk + l] -= 2 * sj * i32::from(row[j]);
        }
        self.s[j] = -self.s[j];
    }

    /// Negates every spin of block `l`.
    fn flip_block(&mut self, l: usize) {
        let kk = self.problem.spec.hidden();
        for d in self.dots.iter_mut().skip(l).step_by(kk) {
            *d = -*d;
        }
        for v in &mut self.s[l * self.block_len..(l + 1) * self.block_len] {
            *v = -*v;
        }
    }

    fn output(&self, mu: usize) -> i8 {
        let kk = self.problem.spec.hidden();
        let mut fields = [0.0f64; MAX_HIDDEN];
        for (f, &d) in fields.iter_mut().zip(&self.dots[mu * kk..(mu + 1) * kk]) {
            *f = self.scale * d as f64;
        }
        forward_fields(&self.problem.spec, &fields[..kk])
    }

    /// `ln Π_μ G_μ`, possibly `-inf` on a noiseless channel.
    fn log_weight(&self, beta: f64) -> f64 {
        let y = self.problem.observed.as_slice();
        match self.problem.task {
            Task::Ecc(ch) => (0..self.problem.m())
                .map(|mu| beta * likelihood(y[mu], self.output(mu), &ch).ln())
                .sum(),
            Task::Lc(_) => {
                let misses = (0..self.problem.m())
                    .filter(|&mu| self.output(mu) != y[mu])
                    .count();
                -beta * misses as f64
            }
        }
    }

    fn mismatches(&self) -> usize {
        let y = self.problem.observed.as_slice();
        (0..self.problem.m())
            .filter(|&mu| self.output(mu) != y[mu])
            .count()
    }
}

/// Visits all `2^n` states in reflected Gray-code order starting from all
/// `+1`; the callback sees each state exactly once.
fn gray_walk(problem: &Problem, mut visit: impl FnMut(&FieldTracker<'_>)) {
    let n = problem.n();
    let mut tr = FieldTracker::new(problem, vec![1; n]);
    visit(&tr);
    for idx in 1u64..(1u64 << n) {
        tr.flip(idx.trailing_zeros() as usize);
        visit(&tr);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactPosterior {
    pub marginals: Vec<f64>,
    /// Highest-weight state, first in enumeration order on ties.
    pub mode: SpinVector,
    pub log_partition: f64,
}

/// Exact posterior `∝ Π_μ G_μ(s)^β · exp(Σ_i h_i s_i)` by enumeration.
///
/// For decoding `G` is the channel likelihood raised to `beta`; for
/// compression `G = e^{-β}` on a mismatch and `1` otherwise. `field` is an
/// optional external field, useful for breaking the mirror symmetries.
pub fn exact_posterior(
    problem: &Problem,
    beta: f64,
    field: Option<&[f64]>,
    budget: EnumerationBudget,
) -> Result<ExactPosterior> {
    let n = problem.n();
    budget.check(n)?;
    if let Some(h) = field {
        if h.len() != n {
            return Err(Error::LengthMismatch {
                left: h.len(),
                right: n,
            });
        }
    }
    let mut shift = f64::NEG_INFINITY;
    let mut total = 0.0f64;
    let mut acc = vec![0.0f64; n];
    let mut mode: Option<(f64, Vec<i8>)> = None;
    gray_walk(problem, |tr| {
        let mut lw = tr.log_weight(beta);
        if let Some(h) = field {
            lw += h
                .iter()
                .zip(&tr.s)
                .map(|(&hi, &si)| hi * si as f64)
                .sum::<f64>();
        }
        if lw == f64::NEG_INFINITY {
            return;
        }
        if mode.as_ref().is_none_or(|(best, _)| lw > *best) {
            mode = Some((lw, tr.s.clone()));
        }
        if lw > shift {
            let r = (shift - lw).exp();
            total *= r;
            acc.iter_mut().for_each(|a| *a *= r);
            shift = lw;
        }
        let w = (lw - shift).exp();
        total += w;
        for (a, &si) in acc.iter_mut().zip(&tr.s) {
            *a += w * si as f64;
        }
    });
    let (_, mode) = mode.ok_or(Error::Config("every state has zero weight".into()))?;
    Ok(ExactPosterior {
        marginals: acc.iter().map(|a| a / total).collect(),
        mode: SpinVector::new(mode)?,
        log_partition: shift + total.ln(),
    })
}

pub fn exact_marginals(
    problem: &Problem,
    beta: f64,
    budget: EnumerationBudget,
) -> Result<Vec<f64>> {
    Ok(exact_posterior(problem, beta, None, budget)?.marginals)
}

/// Global minimiser of the compression distortion. Ties go to the state
/// visited first in Gray-code order from all `+1`.
pub fn exhaustive_lc_encode(problem: &Problem, budget: EnumerationBudget) -> Result<SpinVector> {
    budget.check(problem.n())?;
    let mut best: Option<(usize, Vec<i8>)> = None;
    gray_walk(problem, |tr| {
        let d = tr.mismatches();
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, tr.s.clone()));
        }
    });
    SpinVector::new(best.expect("at least one state").1)
}

/// Single-site heat-bath Gibbs estimate of the marginals of
/// [`exact_posterior`], averaging each site's conditional mean at its
/// update. Each sweep ends with Metropolis proposals to flip every block
/// (and, for `K > 1`, all blocks at once).
pub fn gibbs_marginals(
    problem: &Problem,
    beta: f64,
    field: Option<&[f64]>,
    sweeps: usize,
    burn_in: usize,
    stream: &mut SeededStream,
) -> Result<Vec<f64>> {
    let n = problem.n();
    let init: Vec<i8> = (0..n).map(|_| stream.uniform_spin()).collect();
    let mut tr = FieldTracker::new(problem, init);
    let mut acc = vec![0.0f64; n];
    let mut current = tr.log_weight(beta);
    for sweep in 0..burn_in + sweeps {
        for i in 0..n {
            tr.flip(i);
            let flipped = tr.log_weight(beta);
            let hi = field.map_or(0.0, |h| h[i]);
            // log-odds of the flipped state against the current one
            let delta = flipped - current + hi * 2.0 * tr.s[i] as f64;
            let p_flip = if delta.is_nan() {
                0.0
            } else {
                1.0 / (1.0 + (-delta).exp())
            };
            if sweep >= burn_in {
                // conditional mean of site i given the rest (Rao-Blackwellised)
                acc[i] += tr.s[i] as f64 * (2.0 * p_flip - 1.0);
            }
            if stream.unit() < p_flip {
                current = flipped;
            } else {
                tr.flip(i);
            }
        }
        // Metropolis block flips: the slow modes of these mirror-symmetric
        // posteriors are related by exactly these moves
        let kk = problem.spec.hidden();
        let nb = n / kk;
        let blocks: Vec<Vec<usize>> = if kk == 1 {
            vec![vec![0]]
        } else {
            (0..kk)
                .map(|l| vec![l])
                .chain([(0..kk).collect()])
                .collect()
        };
        for set in &blocks {
            for &l in set {
                tr.flip_block(l);
            }
            let flipped = tr.log_weight(beta);
            let dh: f64 = field.map_or(0.0, |h| {
                set.iter()
                    .flat_map(|&l| l * nb..(l + 1) * nb)
                    .map(|i| 2.0 * h[i] * tr.s[i] as f64)
                    .sum()
            });
            let delta = flipped - current + dh;
            if !delta.is_nan() && (delta >= 0.0 || stream.unit() < delta.exp()) {
                current = flipped;
            } else {
                for &l in set {
                    tr.flip_block(l);
                }
            }
        }
    }
    Ok(acc.iter().map(|a| a / sweeps as f64).collect())
}

/// Message planes of the unreduced iteration, all row-major `M × N`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseBpState {
    /// Variable-to-factor magnetisations `m_{μi}`.
    pub msg: Vec<f64>,
    /// Factor-to-variable magnetisations `m̂_{μi}`.
    pub hat: Vec<f64>,
    /// Full marginals.
    pub m: Vec<f64>,
    pub t: usize,
}

impl DenseBpState {
    /// Every outgoing message starts at the variable's marginal.
    pub fn from_marginals(m: &[f64], factors: usize) -> Self {
        let n = m.len();
        let mut msg = Vec::with_capacity(factors * n);
        for _ in 0..factors {
            msg.extend_from_slice(m);
        }
        Self {
            msg,
            hat: vec![0.0; factors * n],
            m: m.to_vec(),
            t: 0,
        }
    }
}

/// One step of message passing without the large-`N` expansion.
///
/// Each factor-to-variable message is computed from the exact Gaussian
/// cavity of that factor with variable `i` held at `±1`:
/// `m̂_{μi} = (V₊ - V₋)/(V₊ + V₋)`.
pub fn full_bp_step(state: &mut DenseBpState, problem: &Problem, cfg: &BpConfig) -> Result<()> {
    let (n, mm, kk) = (problem.n(), problem.m(), problem.spec.hidden());
    let nb = n / kk;
    let scale = kk as f64 / n as f64;
    let c = scale.sqrt();
    let kernel = Kernel::new(&problem.spec, problem.kernel_task(cfg))?;
    let mut out = [KernelOutput::default(); MAX_HIDDEN];
    let mut cav = [Cavity { mean: 0.0, q: 0.0 }; MAX_HIDDEN];
    let mut mean = [0.0f64; MAX_HIDDEN];
    let mut var = [0.0f64; MAX_HIDDEN];

    for (mu, row) in problem.codebook.rows().enumerate() {
        let msg = &state.msg[mu * n..(mu + 1) * n];
        for l in 0..kk {
            let (xs, ms) = (&row[l * nb..(l + 1) * nb], &msg[l * nb..(l + 1) * nb]);
            mean[l] = c * xs.iter().zip(ms).map(|(&x, &m)| x as f64 * m).sum::<f64>();
            var[l] = scale * ms.iter().map(|m| 1.0 - m * m).sum::<f64>();
        }
        let y = problem.observed.get(mu);
        for i in 0..n {
            let l = i / nb;
            let xm = c * row[i] as f64;
            let cav_mean = mean[l] - xm * msg[i];
            let cav_var = (var[l] - scale * (1.0 - msg[i] * msg[i])).max(0.0);
            for j in 0..kk {
                cav[j] = Cavity {
                    mean: mean[j],
                    q: (1.0 - var[j]).clamp(0.0, cfg.q_clamp),
                };
            }
            let q_cav = (1.0 - cav_var).clamp(0.0, cfg.q_clamp);
            let mut v = [0.0f64; 2];
            for (slot, s) in [(0usize, 1.0f64), (1, -1.0)] {
                cav[l] = Cavity {
                    mean: cav_mean + xm * s,
                    q: q_cav,
                };
                kernel.evaluate(y, &cav[..kk], &mut out[..kk])?;
                v[slot] = out[0].v;
            }
            if !(v[0] + v[1] > cfg.v_floor) {
                return Err(Error::NumericalBreakdown {
                    step: state.t,
                    mu,
                    unit: l,
                    v: v[0] + v[1],
                });
            }
            state.hat[mu * n + i] = ((v[0] - v[1]) / (v[0] + v[1])).clamp(-M_CLAMP, M_CLAMP);
        }
    }

    let mut total = vec![0.0f64; n];
    for mu in 0..mm {
        for (t, &h) in total.iter_mut().zip(&state.hat[mu * n..(mu + 1) * n]) {
            *t += h.atanh();
        }
    }
    for i in 0..n {
        total[i] += (cfg.gamma * state.m[i]).atanh();
    }
    for mu in 0..mm {
        for i in 0..n {
            let own = state.hat[mu * n + i].atanh();
            state.msg[mu * n + i] = (total[i] - own).tanh().clamp(-M_CLAMP, M_CLAMP);
        }
    }
    for (m, t) in state.m.iter_mut().zip(&total) {
        *m = t.tanh().clamp(-M_CLAMP, M_CLAMP);
    }
    state.t += 1;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlopeEstimator {
    /// Central difference of the averaged weight with step `1e-3` and common
    /// random numbers across the two shifts.
    CentralDifference,
    /// Gaussian integration by parts, `U = E[g · z_l]/σ_l`, with antithetic
    /// pairs.
    Score,
}

/// Central-difference step of [`SlopeEstimator::CentralDifference`].
pub const FD_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEstimate {
    pub u: f64,
    pub v: f64,
    pub u_se: f64,
    pub v_se: f64,
}

struct Moments {
    sum: CompensatedSum,
    sq: CompensatedSum,
    count: usize,
}

impl Moments {
    fn new() -> Self {
        Self {
            sum: CompensatedSum::new(),
            sq: CompensatedSum::new(),
            count: 0,
        }
    }

    fn push(&mut self, x: f64) {
        self.sum.add(x);
        self.sq.add(x * x);
        self.count += 1;
    }

    fn mean_se(&self) -> (f64, f64) {
        let n = self.count as f64;
        let mean = self.sum.value() / n;
        let var = (self.sq.value() / n - mean * mean).max(0.0) * n / (n - 1.0);
        (mean, (var / n).sqrt())
    }
}

/// Monte Carlo estimate of `(U_l, V)` for one factor by sampling the hidden
/// fields directly and pushing them through the network.
#[allow(clippy::too_many_arguments)]
pub fn mc_kernel_oracle(
    kernel: &Kernel,
    y: i8,
    cavity: &[Cavity],
    unit: usize,
    samples: usize,
    estimator: SlopeEstimator,
    stream: &mut SeededStream,
) -> Result<KernelEstimate> {
    let spec = kernel.spec();
    let kk = spec.hidden();
    if cavity.len() != kk {
        return Err(Error::LengthMismatch {
            left: cavity.len(),
            right: kk,
        });
    }
    if samples < 10_000 {
        return Err(Error::OutOfDomain {
            name: "samples",
            value: samples as f64,
            domain: "[1e4, inf)",
        });
    }
    let mut sigma = [0.0f64; MAX_HIDDEN];
    for (s, c) in sigma.iter_mut().zip(cavity) {
        if !(0.0..1.0).contains(&c.q) {
            return Err(Error::OutOfDomain {
                name: "q",
                value: c.q,
                domain: "[0, 1)",
            });
        }
        *s = (1.0 - c.q).sqrt();
    }
    let weight_at = |z: &[f64], sign: f64, shift: f64| {
        let mut h = [0.0f64; MAX_HIDDEN];
        for l in 0..kk {
            h[l] = cavity[l].mean + sign * sigma[l] * z[l];
        }
        h[unit] += shift;
        kernel.weight(y, forward_fields(spec, &h[..kk]))
    };
    let (mut um, mut vm) = (Moments::new(), Moments::new());
    let mut z = [0.0f64; MAX_HIDDEN];
    match estimator {
        SlopeEstimator::CentralDifference => {
            for _ in 0..samples {
                for zl in z[..kk].iter_mut() {
                    *zl = StandardNormal.sample(stream);
                }
                vm.push(weight_at(&z, 1.0, 0.0));
                um.push(
                    (weight_at(&z, 1.0, FD_STEP) - weight_at(&z, 1.0, -FD_STEP)) / (2.0 * FD_STEP),
                );
            }
        }
        SlopeEstimator::Score => {
            for _ in 0..samples / 2 {
                for zl in z[..kk].iter_mut() {
                    *zl = StandardNormal.sample(stream);
                }
                let (gp, gm) = (weight_at(&z, 1.0, 0.0), weight_at(&z, -1.0, 0.0));
                vm.push(0.5 * (gp + gm));
                um.push(0.5 * (gp - gm) * z[unit] / sigma[unit]);
            }
        }
    }
    let (u, u_se) = um.mean_se();
    let (v, v_se) = vm.mean_se();
    Ok(KernelEstimate { u, v, u_se, v_se })
}

/// Convenience for callers holding a network and task rather than a kernel.
pub fn mc_kernel_estimate(
    spec: &crate::network::NetworkSpec,
    task: KernelTask,
    y: i8,
    cavity: &[Cavity],
    unit: usize,
    samples: usize,
    estimator: SlopeEstimator,
    stream: &mut SeededStream,
) -> Result<KernelEstimate> {
    mc_kernel_oracle(
        &Kernel::new(spec, task)?,
        y,
        cavity,
        unit,
        samples,
        estimator,
        stream,
    )
}
