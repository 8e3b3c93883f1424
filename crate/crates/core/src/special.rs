//! Gaussian special functions and small numeric helpers.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Upper Gaussian tail `H(u) = ∫_u^∞ Dx`, via `erfc` so that large positive
/// arguments keep full relative precision.
#[inline]
pub fn gauss_h(u: f64) -> f64 {
    0.5 * libm::erfc(u * FRAC_1_SQRT_2)
}

/// Standard normal density.
#[inline]
pub fn gauss_pdf(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * PI).sqrt()
}

/// `P(|z| <= k)` for standard normal `z`.
pub fn inside_probability(k: f64) -> f64 {
    1.0 - 2.0 * gauss_h(k)
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Binomial probability mass `P(B = j)` for `B ~ Binomial(n, a)`, evaluated
/// in log space so large `n` does not underflow.
pub fn binomial_pmf(n: usize, j: usize, a: f64) -> f64 {
    if j > n {
        return 0.0;
    }
    if a <= 0.0 || a >= 1.0 {
        let certain = if a <= 0.0 { 0 } else { n };
        return if j == certain { 1.0 } else { 0.0 };
    }
    let (nf, jf) = (n as f64, j as f64);
    let log_coeff = libm::lgamma(nf + 1.0) - libm::lgamma(jf + 1.0) - libm::lgamma(nf - jf + 1.0);
    (log_coeff + jf * a.ln() + (nf - jf) * (1.0 - a).ln()).exp()
}
