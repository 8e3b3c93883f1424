//! Reduced O(N·M) belief propagation with an inertia prior, shared by
//! channel decoding and lossy-compression encoding.
//!
//! Each step keeps one magnetisation per variable and one `Φ` per
//! factor/unit pair. The reaction term collapses to `Φ_prev · (1 - q_l)`
//! because the codebook entries square to one, so no `M × N` message plane is
//! stored.

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelParams, SourceModel};
use crate::error::{Error, Result};
use crate::kernels::{phi_and_gain, Cavity, Kernel, KernelOutput, KernelTask};
use crate::network::{encode, Codebook, NetworkSpec, MAX_HIDDEN};
use crate::spin::{hamming_distortion, sgn, SeededStream, SpinVector};

/// Largest magnetisation magnitude kept after a step.
pub const M_CLAMP: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Task {
    /// Decode a codeword received through a binary asymmetric channel.
    Ecc(ChannelParams),
    /// Encode a source message into a compressed codeword.
    Lc(SourceModel),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpConfig {
    pub iterations: usize,
    /// Inertia amplitude, `0 <= gamma < 1`.
    pub gamma: f64,
    /// Inverse temperature used by the compression task.
    pub beta: f64,
    /// Half-width of the uniform initialisation.
    pub init_scale: f64,
    /// Upper clamp on the per-block self-overlap `q_l`.
    pub q_clamp: f64,
    /// A factor weight at or below this aborts the run. Noiseless channels
    /// legitimately drive `V` into the far Gaussian tail, so the default only
    /// catches underflow.
    pub v_floor: f64,
    /// Fraction of the old magnetisation mixed into each update; `0` is off.
    pub damping: f64,
    /// Stop once `max |Δm|` falls below this.
    pub early_stop: Option<f64>,
    /// Compression only: return the iterate with the lowest distortion
    /// instead of the final one.
    pub best_of_trace: bool,
}

impl BpConfig {
    pub fn ecc() -> Self {
        Self {
            iterations: 100,
            ..Self::lc()
        }
    }

    pub fn lc() -> Self {
        Self {
            iterations: 35,
            gamma: 0.0,
            beta: 1.0,
            init_scale: 0.1,
            q_clamp: 0.99,
            v_floor: 1e-300,
            damping: 0.0,
            early_stop: None,
            best_of_trace: false,
        }
    }

    pub fn for_task(task: &Task) -> Self {
        match task {
            Task::Ecc(_) => Self::ecc(),
            Task::Lc(_) => Self::lc(),
        }
    }

    pub fn with_gamma(self, gamma: f64) -> Self {
        Self { gamma, ..self }
    }

    pub fn with_beta(self, beta: f64) -> Self {
        Self { beta, ..self }
    }

    pub fn with_iterations(self, iterations: usize) -> Self {
        Self { iterations, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, name, value, domain| {
            if ok {
                Ok(())
            } else {
                Err(Error::OutOfDomain {
                    name,
                    value,
                    domain,
                })
            }
        };
        check(
            (0.0..1.0).contains(&self.gamma),
            "gamma",
            self.gamma,
            "[0, 1)",
        )?;
        check(
            self.beta > 0.0 && self.beta.is_finite(),
            "beta",
            self.beta,
            "(0, inf)",
        )?;
        check(
            (0.0..1.0).contains(&self.init_scale),
            "init_scale",
            self.init_scale,
            "[0, 1)",
        )?;
        check(
            self.q_clamp > 0.0 && self.q_clamp < 1.0,
            "q_clamp",
            self.q_clamp,
            "(0, 1)",
        )?;
        check(self.v_floor > 0.0, "v_floor", self.v_floor, "(0, inf)")?;
        check(
            (0.0..1.0).contains(&self.damping),
            "damping",
            self.damping,
            "[0, 1)",
        )?;
        Ok(())
    }
}

impl Default for BpConfig {
    fn default() -> Self {
        Self::ecc()
    }
}

/// One decoding or encoding instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub task: Task,
    pub spec: NetworkSpec,
    pub codebook: Codebook,
    /// Received word for decoding, source message for compression.
    pub observed: SpinVector,
}

impl Problem {
    pub fn new(
        task: Task,
        spec: NetworkSpec,
        codebook: Codebook,
        observed: SpinVector,
    ) -> Result<Self> {
        if codebook.len() != observed.len() {
            return Err(Error::LengthMismatch {
                left: codebook.len(),
                right: observed.len(),
            });
        }
        if codebook.blocks() != spec.hidden() {
            return Err(Error::BlockMismatch {
                len: codebook.dim(),
                blocks: spec.hidden(),
            });
        }
        Ok(Self {
            task,
            spec,
            codebook,
            observed,
        })
    }

    pub fn n(&self) -> usize {
        self.codebook.dim()
    }

    pub fn m(&self) -> usize {
        self.codebook.len()
    }

    pub fn kernel_task(&self, cfg: &BpConfig) -> KernelTask {
        match self.task {
            Task::Ecc(ch) => KernelTask::Ecc(ch),
            Task::Lc(_) => KernelTask::Lc { beta: cfg.beta },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step: usize,
    pub mean_abs_m: f64,
    pub q: Vec<f64>,
    pub max_delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpState {
    pub m: Vec<f64>,
    /// Previous `Φ`, row-major `M × K`.
    pub phi_prev: Vec<f64>,
    pub t: usize,
    pub trace: Vec<StepTrace>,
}

pub fn init_state(problem: &Problem, cfg: &BpConfig, stream: &mut SeededStream) -> BpState {
    let d = cfg.init_scale;
    let m = (0..problem.n())
        .map(|_| d * (2.0 * stream.unit() - 1.0))
        .collect();
    BpState {
        m,
        phi_prev: vec![0.0; problem.m() * problem.spec.hidden()],
        t: 0,
        trace: Vec::new(),
    }
}

/// `sgn(m)` with ties to `+1`.
pub fn mpm_estimate(state: &BpState) -> SpinVector {
    SpinVector::new(state.m.iter().map(|&x| sgn(x)).collect()).expect("signs are spins")
}

/// Reusable evaluator holding the kernel and per-step buffers.
#[derive(Debug, Clone)]
pub struct Solver<'a> {
    problem: &'a Problem,
    cfg: BpConfig,
    kernel: Kernel,
    phi: Vec<f64>,
    field: Vec<f64>,
}

impl<'a> Solver<'a> {
    pub fn new(problem: &'a Problem, cfg: &BpConfig) -> Result<Self> {
        cfg.validate()?;
        let kernel = Kernel::new(&problem.spec, problem.kernel_task(cfg))?;
        Ok(Self {
            problem,
            cfg: *cfg,
            kernel,
            phi: vec![0.0; problem.m() * problem.spec.hidden()],
            field: vec![0.0; problem.n()],
        })
    }

    pub fn step(&mut self, state: &mut BpState) -> Result<()> {
        let pr = self.problem;
        let (n, kk) = (pr.n(), pr.spec.hidden());
        if state.m.len() != n || state.phi_prev.len() != pr.m() * kk {
            return Err(Error::LengthMismatch {
                left: state.m.len(),
                right: n,
            });
        }
        let nb = n / kk;
        let scale = kk as f64 / n as f64;
        let c = scale.sqrt();

        let mut q = [0.0f64; MAX_HIDDEN];
        for (l, ql) in q[..kk].iter_mut().enumerate() {
            let s: f64 = state.m[l * nb..(l + 1) * nb].iter().map(|x| x * x).sum();
            *ql = (scale * s).min(self.cfg.q_clamp);
        }

        let mut gain = [0.0f64; MAX_HIDDEN];
        let mut cav = [Cavity { mean: 0.0, q: 0.0 }; MAX_HIDDEN];
        let mut out = [KernelOutput::default(); MAX_HIDDEN];
        for (mu, row) in pr.codebook.rows().enumerate() {
            for l in 0..kk {
                let xs = &row[l * nb..(l + 1) * nb];
                let ms = &state.m[l * nb..(l + 1) * nb];
                let bar: f64 = xs.iter().zip(ms).map(|(&x, &m)| x as f64 * m).sum::<f64>() * c;
                let hat = state.phi_prev[mu * kk + l] * (1.0 - q[l]);
                cav[l] = Cavity {
                    mean: bar - hat,
                    q: q[l],
                };
            }
            self.kernel
                .evaluate(pr.observed.get(mu), &cav[..kk], &mut out[..kk])?;
            for l in 0..kk {
                let (phi, g) =
                    phi_and_gain(&out[l], self.cfg.v_floor).ok_or(Error::NumericalBreakdown {
                        step: state.t,
                        mu,
                        unit: l,
                        v: out[l].v,
                    })?;
                self.phi[mu * kk + l] = phi;
                gain[l] += g;
            }
        }

        self.field.iter_mut().for_each(|h| *h = 0.0);
        for (mu, row) in pr.codebook.rows().enumerate() {
            for l in 0..kk {
                let phi = self.phi[mu * kk + l];
                let xs = &row[l * nb..(l + 1) * nb];
                for (h, &x) in self.field[l * nb..(l + 1) * nb].iter_mut().zip(xs) {
                    *h += x as f64 * phi;
                }
            }
        }

        let mut max_delta = 0.0f64;
        let mut abs_sum = 0.0;
        for (i, m) in state.m.iter_mut().enumerate() {
            let l = i / nb;
            let h = c * self.field[i] + *m * scale * gain[l] + (self.cfg.gamma * *m).atanh();
            if !h.is_finite() {
                return Err(Error::NumericalBreakdown {
                    step: state.t,
                    mu: usize::MAX,
                    unit: l,
                    v: h,
                });
            }
            let fresh = h.tanh();
            let next =
                ((1.0 - self.cfg.damping) * fresh + self.cfg.damping * *m).clamp(-M_CLAMP, M_CLAMP);
            max_delta = max_delta.max((next - *m).abs());
            abs_sum += next.abs();
            *m = next;
        }
        std::mem::swap(&mut state.phi_prev, &mut self.phi);
        state.trace.push(StepTrace {
            step: state.t,
            mean_abs_m: abs_sum / n as f64,
            q: q[..kk].to_vec(),
            max_delta,
        });
        state.t += 1;
        Ok(())
    }
}

/// One iteration of the reduced update.
pub fn bp_step(state: &mut BpState, problem: &Problem, cfg: &BpConfig) -> Result<()> {
    Solver::new(problem, cfg)?.step(state)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub estimate: SpinVector,
    pub state: BpState,
    /// Step whose iterate was returned when `best_of_trace` is on.
    pub best_step: Option<usize>,
}

impl RunOutcome {
    pub fn trace(&self) -> &[StepTrace] {
        &self.state.trace
    }
}

/// Initialise, iterate, and read out the MPM estimate.
pub fn run(problem: &Problem, cfg: &BpConfig, stream: &mut SeededStream) -> Result<RunOutcome> {
    let mut solver = Solver::new(problem, cfg)?;
    let mut state = init_state(problem, cfg, stream);
    let track = cfg.best_of_trace && matches!(problem.task, Task::Lc(_));
    let mut best: Option<(f64, usize, SpinVector)> = None;
    for _ in 0..cfg.iterations {
        solver.step(&mut state)?;
        if track {
            let est = mpm_estimate(&state);
            let d = hamming_distortion(
                &problem.observed,
                &encode(&problem.spec, &est, &problem.codebook)?,
            )?;
            if best.as_ref().is_none_or(|(bd, _, _)| d < *bd) {
                best = Some((d, state.t, est));
            }
        }
        if let (Some(tol), Some(last)) = (cfg.early_stop, state.trace.last()) {
            if last.max_delta < tol {
                break;
            }
        }
    }
    let (estimate, best_step) = match best {
        Some((_, step, est)) => (est, Some(step)),
        None => (mpm_estimate(&state), None),
    };
    Ok(RunOutcome {
        estimate,
        state,
        best_step,
    })
}
