//! Batch experiments: rate sweeps, restart histograms and reference bounds.
//!
//! Every random draw comes from a [`SeededStream`] keyed by
//! `(experiment, run, restart)`. Restart `0` of a run builds the instance
//! (message, codebook, noise); restarts `1..` initialise message passing.
//! Runs execute on a rayon pool and are gathered in index order, so results
//! do not depend on scheduling.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    auto_threshold, bac_capacity, rate_distortion, sample_source, shannon_distortion, transmit,
    ChannelParams, SourceModel,
};
use crate::engine::{run, BpConfig, Problem, Task};
use crate::error::{Error, Result};
use crate::network::{encode, Codebook, NetworkKind, NetworkSpec};
use crate::spin::{
    blockwise_abs_overlap, draw_uniform_spins, hamming_distortion, overlap, SeededStream,
    SpinVector, StreamId,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    EccSweep,
    EccHist,
    LcSweep,
    LcHist,
    Bounds,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::EccSweep => "ecc-sweep",
            Self::EccHist => "ecc-hist",
            Self::LcSweep => "lc-sweep",
            Self::LcHist => "lc-hist",
            Self::Bounds => "bounds",
        }
    }

    fn stream_tag(self) -> u64 {
        match self {
            Self::EccSweep => 1,
            Self::EccHist => 2,
            Self::LcSweep => 3,
            Self::LcHist => 4,
            Self::Bounds => 5,
        }
    }

    pub fn is_ecc(self) -> bool {
        matches!(self, Self::EccSweep | Self::EccHist)
    }
}

/// Desk-scale run counts.
pub const DESK_RUNS: usize = 20;
pub const DESK_RESTARTS: usize = 10;
pub const DESK_MESSAGES: usize = 5;
/// Run counts of the original study.
pub const PAPER_RUNS: usize = 100;
pub const PAPER_RESTARTS: usize = 30;
pub const PAPER_MESSAGES: usize = 50;

pub const DEFAULT_BETA_GRID: [f64; 4] = [1.0, 2.0, 4.0, 8.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub network: NetworkKind,
    pub hidden: usize,
    pub n: usize,
    pub rates: Vec<f64>,
    /// Flip probability of `+1` for decoding; source bias for compression.
    pub p: f64,
    /// Flip probability of `-1` (decoding only).
    pub r: f64,
    /// Target output bias; defaults to the capacity-achieving input bias for
    /// decoding and the source bias for compression.
    pub bias: Option<f64>,
    /// Explicit threshold, bypassing tuning.
    pub threshold: Option<f64>,
    pub gamma: f64,
    /// Candidate inverse temperatures; the best mean distortion wins.
    pub beta: Vec<f64>,
    pub runs: usize,
    pub restarts: usize,
    pub messages: usize,
    /// Iterations; defaults to 100 for decoding and 35 for compression.
    pub iterations: Option<usize>,
    pub seed: u64,
    pub init_scale: f64,
    pub q_clamp: f64,
    /// Factor weight at or below which a run aborts.
    pub v_floor: f64,
    /// Abort fraction at or above which a run set counts as broken down.
    pub abort_fraction: f64,
}

impl ExperimentConfig {
    pub fn new(command: Command, network: NetworkKind, hidden: usize, n: usize) -> Self {
        let bp = BpConfig::ecc();
        Self {
            command,
            network,
            hidden,
            n,
            rates: vec![0.25],
            p: if command.is_ecc() { 0.1 } else { 0.5 },
            r: if command.is_ecc() { 0.2 } else { 0.0 },
            bias: None,
            threshold: None,
            gamma: 0.0,
            beta: DEFAULT_BETA_GRID.to_vec(),
            runs: DESK_RUNS,
            restarts: DESK_RESTARTS,
            messages: DESK_MESSAGES,
            iterations: None,
            seed: 0,
            init_scale: bp.init_scale,
            q_clamp: bp.q_clamp,
            v_floor: bp.v_floor,
            abort_fraction: 0.5,
        }
    }

    pub fn paper_scale(mut self) -> Self {
        self.runs = PAPER_RUNS;
        self.restarts = PAPER_RESTARTS;
        self.messages = PAPER_MESSAGES;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        NetworkSpec::new(self.network, self.hidden, self.threshold.unwrap_or(0.0))?;
        if self.n == 0 || !self.n.is_multiple_of(self.hidden) {
            return bad(format!(
                "N={} must be a positive multiple of K={}",
                self.n, self.hidden
            ));
        }
        if self.command != Command::Bounds {
            if self.rates.is_empty() {
                return bad("at least one rate is required".into());
            }
            for &rate in &self.rates {
                if !(rate > 0.0 && rate <= 1.0) {
                    return bad(format!("rate {rate} outside (0, 1]"));
                }
            }
        }
        if self.command.is_ecc() {
            ChannelParams::new(self.p, self.r)?;
        } else {
            SourceModel::new(self.p)?;
        }
        if self.beta.is_empty() || self.beta.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
            return bad("beta values must be positive".into());
        }
        for (name, v) in [
            ("runs", self.runs),
            ("restarts", self.restarts),
            ("messages", self.messages),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if matches!(self.command, Command::EccHist | Command::LcHist) && self.restarts < 2 {
            return bad("histograms need at least two restarts".into());
        }
        if !(0.0..=1.0).contains(&self.abort_fraction) {
            return bad("abort fraction must lie in [0, 1]".into());
        }
        self.bp_config(1.0).validate()
    }

    /// `M = round(N / R)`.
    pub fn codeword_len(&self, rate: f64) -> usize {
        (self.n as f64 / rate).round() as usize
    }

    pub fn bp_config(&self, beta: f64) -> BpConfig {
        let base = if self.command.is_ecc() {
            BpConfig::ecc()
        } else {
            BpConfig::lc()
        };
        BpConfig {
            iterations: self.iterations.unwrap_or(base.iterations),
            gamma: self.gamma,
            beta,
            init_scale: self.init_scale,
            q_clamp: self.q_clamp,
            v_floor: self.v_floor,
            ..base
        }
    }

    fn task(&self) -> Result<Task> {
        Ok(if self.command.is_ecc() {
            Task::Ecc(ChannelParams::new(self.p, self.r)?)
        } else {
            Task::Lc(SourceModel::new(self.p)?)
        })
    }

    /// Network with its threshold resolved, plus the bias that threshold
    /// produces.
    pub fn resolve_network(&self) -> Result<(NetworkSpec, f64)> {
        let spec = NetworkSpec::new(self.network, self.hidden, 0.0)?;
        if let Some(k) = self.threshold {
            let spec = spec.with_threshold(k)?;
            return Ok((spec, crate::network::output_bias(&spec)));
        }
        let target = match self.bias {
            Some(b) => b,
            None if self.command.is_ecc() => {
                bac_capacity(&ChannelParams::new(self.p, self.r)?).input_bias
            }
            None => self.p,
        };
        let (k, achieved) = auto_threshold(&spec, target)?;
        Ok((spec.with_threshold(k)?, achieved))
    }
}

/// One aggregated measurement. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub task: String,
    pub network: String,
    #[serde(rename = "K")]
    pub hidden: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub rate: f64,
    pub p: f64,
    pub r: f64,
    pub bias: f64,
    pub gamma: f64,
    pub beta: f64,
    pub k: f64,
    pub iters: usize,
    pub runs: usize,
    pub restarts: usize,
    pub seed: u64,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
    pub aborted: usize,
    pub wall_time_s: f64,
}

impl ResultRow {
    pub const COLUMNS: [&'static str; 22] = [
        "task",
        "network",
        "K",
        "N",
        "M",
        "rate",
        "p",
        "r",
        "bias",
        "gamma",
        "beta",
        "k",
        "iters",
        "runs",
        "restarts",
        "seed",
        "metric",
        "mean",
        "std",
        "count",
        "aborted",
        "wall_time_s",
    ];
}

/// Reference curve point for the `bounds` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub curve: String,
    pub p: f64,
    pub r: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// Signed overlaps between every pair of restarts, pooled over messages.
    pub pairwise: Vec<f64>,
    /// Per-restart signed overlap with the planted message (decoding only).
    pub truth: Vec<f64>,
    /// Per-restart distortion (compression only).
    pub distortion: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub rows: Vec<ResultRow>,
    pub bounds: Vec<BoundRow>,
    pub histogram: Option<Histogram>,
    pub aborts: Vec<String>,
    /// Largest aborted fraction over all measured points.
    pub aborted_fraction: f64,
}

impl Report {
    pub fn broke_down(&self) -> bool {
        self.aborted_fraction > 0.0 && self.aborted_fraction >= self.config.abort_fraction
    }
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// A generated instance together with its ground truth.
#[derive(Debug, Clone)]
pub struct Instance {
    pub problem: Problem,
    /// Planted message for decoding; `None` for compression.
    pub planted: Option<SpinVector>,
}

pub fn make_instance(
    cfg: &ExperimentConfig,
    spec: &NetworkSpec,
    m: usize,
    stream: &mut SeededStream,
) -> Result<Instance> {
    let task = cfg.task()?;
    match task {
        Task::Ecc(ch) => {
            let s0 = draw_uniform_spins(cfg.n, stream)?;
            let cb = Codebook::random(m, cfg.n, cfg.hidden, stream)?;
            let y = transmit(&encode(spec, &s0, &cb)?, &ch, stream);
            Ok(Instance {
                problem: Problem::new(task, *spec, cb, y)?,
                planted: Some(s0),
            })
        }
        Task::Lc(src) => {
            let y = sample_source(m, &src, stream)?;
            let cb = Codebook::random(m, cfg.n, cfg.hidden, stream)?;
            Ok(Instance {
                problem: Problem::new(task, *spec, cb, y)?,
                planted: None,
            })
        }
    }
}

fn stream_for(cfg: &ExperimentConfig, point: usize, run: usize, restart: usize) -> SeededStream {
    let run_id = ((point as u64) << 32) | run as u64;
    SeededStream::new(
        cfg.seed,
        StreamId::new(cfg.command.stream_tag(), run_id, restart as u64),
    )
}

struct Trial {
    estimate: SpinVector,
    distortion: Option<f64>,
}

fn trial(inst: &Instance, bp: &BpConfig, stream: &mut SeededStream) -> Result<Trial> {
    let out = run(&inst.problem, bp, stream)?;
    let distortion = match inst.problem.task {
        Task::Lc(_) => {
            let decoded = encode(&inst.problem.spec, &out.estimate, &inst.problem.codebook)?;
            Some(hamming_distortion(&inst.problem.observed, &decoded)?)
        }
        Task::Ecc(_) => None,
    };
    Ok(Trial {
        estimate: out.estimate,
        distortion,
    })
}

struct Context {
    spec: NetworkSpec,
    bias: f64,
}

impl Context {
    fn row(
        &self,
        cfg: &ExperimentConfig,
        rate: f64,
        beta: f64,
        metric: &str,
        values: &[f64],
        aborted: usize,
        started: Instant,
    ) -> ResultRow {
        let (mean, std) = mean_std(values);
        ResultRow {
            task: cfg.command.name().into(),
            network: cfg.network.name().into(),
            hidden: cfg.hidden,
            n: cfg.n,
            m: cfg.codeword_len(rate),
            rate,
            p: cfg.p,
            r: if cfg.command.is_ecc() {
                cfg.r
            } else {
                f64::NAN
            },
            bias: self.bias,
            gamma: cfg.gamma,
            beta: if cfg.command.is_ecc() { f64::NAN } else { beta },
            k: self.spec.threshold(),
            iters: cfg.bp_config(beta).iterations,
            runs: cfg.runs,
            restarts: if matches!(cfg.command, Command::EccHist | Command::LcHist) {
                cfg.restarts
            } else {
                1
            },
            seed: cfg.seed,
            metric: metric.into(),
            mean,
            std,
            count: values.len(),
            aborted,
            wall_time_s: started.elapsed().as_secs_f64(),
        }
    }
}

/// Runs the configured experiment.
pub fn execute(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    match cfg.command {
        Command::EccSweep => sweep_ecc(cfg),
        Command::LcSweep => sweep_lc(cfg),
        Command::EccHist | Command::LcHist => histogram(cfg),
        Command::Bounds => bounds(cfg),
    }
}

fn empty_report(cfg: &ExperimentConfig) -> Report {
    Report {
        config: cfg.clone(),
        rows: Vec::new(),
        bounds: Vec::new(),
        histogram: None,
        aborts: Vec::new(),
        aborted_fraction: 0.0,
    }
}

fn note_aborts(report: &mut Report, rate: f64, results: &[(usize, Error)], total: usize) {
    for (run, err) in results {
        report.aborts.push(format!("rate={rate} run={run}: {err}"));
    }
    report.aborted_fraction = report
        .aborted_fraction
        .max(results.len() as f64 / total as f64);
}

/// Mean blockwise |overlap| and signed overlap with the planted message
/// against the rate.
pub fn sweep_ecc(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let (spec, bias) = cfg.resolve_network()?;
    let ctx = Context { spec, bias };
    let bp = cfg.bp_config(1.0);
    let mut report = empty_report(cfg);
    for (point, &rate) in cfg.rates.iter().enumerate() {
        let started = Instant::now();
        let m = cfg.codeword_len(rate);
        let results: Vec<Result<(f64, f64)>> = (0..cfg.runs)
            .into_par_iter()
            .map(|run_idx| {
                let inst = make_instance(cfg, &spec, m, &mut stream_for(cfg, point, run_idx, 0))?;
                let t = trial(&inst, &bp, &mut stream_for(cfg, point, run_idx, 1))?;
                let s0 = inst.planted.as_ref().expect("decoding plants a message");
                Ok((
                    blockwise_abs_overlap(&t.estimate, s0, cfg.hidden)?,
                    overlap(&t.estimate, s0)?,
                ))
            })
            .collect();
        let (mut block, mut signed, mut failed) = (Vec::new(), Vec::new(), Vec::new());
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Ok((b, s)) => {
                    block.push(b);
                    signed.push(s);
                }
                Err(e @ Error::NumericalBreakdown { .. }) => failed.push((i, e)),
                Err(e) => return Err(e),
            }
        }
        report.rows.push(ctx.row(
            cfg,
            rate,
            1.0,
            "blockwise_abs_overlap",
            &block,
            failed.len(),
            started,
        ));
        report.rows.push(ctx.row(
            cfg,
            rate,
            1.0,
            "signed_overlap",
            &signed,
            failed.len(),
            started,
        ));
        note_aborts(&mut report, rate, &failed, cfg.runs);
    }
    Ok(report)
}

/// Mean distortion against the rate, with `β` picked per rate from the
/// configured grid. All candidates share instances and initialisations.
pub fn sweep_lc(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let (spec, bias) = cfg.resolve_network()?;
    let ctx = Context { spec, bias };
    let mut report = empty_report(cfg);
    for (point, &rate) in cfg.rates.iter().enumerate() {
        let started = Instant::now();
        let m = cfg.codeword_len(rate);
        let mut best: Option<(f64, f64, Vec<f64>, Vec<(usize, Error)>)> = None;
        for &beta in &cfg.beta {
            let bp = cfg.bp_config(beta);
            let results: Vec<Result<f64>> = (0..cfg.runs)
                .into_par_iter()
                .map(|run_idx| {
                    let inst =
                        make_instance(cfg, &spec, m, &mut stream_for(cfg, point, run_idx, 0))?;
                    let t = trial(&inst, &bp, &mut stream_for(cfg, point, run_idx, 1))?;
                    Ok(t.distortion.expect("compression measures distortion"))
                })
                .collect();
            let (mut d, mut failed) = (Vec::new(), Vec::new());
            for (i, r) in results.into_iter().enumerate() {
                match r {
                    Ok(x) => d.push(x),
                    Err(e @ Error::NumericalBreakdown { .. }) => failed.push((i, e)),
                    Err(e) => return Err(e),
                }
            }
            let (mean, _) = mean_std(&d);
            let score = if mean.is_nan() { f64::INFINITY } else { mean };
            if best.as_ref().is_none_or(|(s, ..)| score < *s) {
                best = Some((score, beta, d, failed));
            }
        }
        let (_, beta, d, failed) = best.expect("beta grid is non-empty");
        report
            .rows
            .push(ctx.row(cfg, rate, beta, "distortion", &d, failed.len(), started));
        note_aborts(&mut report, rate, &failed, cfg.runs);
    }
    Ok(report)
}

fn pairwise_overlaps(estimates: &[SpinVector], out: &mut Vec<f64>) -> Result<()> {
    for i in 0..estimates.len() {
        for j in i + 1..estimates.len() {
            out.push(overlap(&estimates[i], &estimates[j])?);
        }
    }
    Ok(())
}

/// Restarts on fixed instances; histogram samples are the pairwise overlaps
/// of the estimates (decoding) or codewords (compression). The first rate of
/// the grid is used, and `β` is the first grid value.
pub fn histogram(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let (spec, bias) = cfg.resolve_network()?;
    let ctx = Context { spec, bias };
    let rate = cfg.rates[0];
    let beta = cfg.beta[0];
    let bp = cfg.bp_config(beta);
    let m = cfg.codeword_len(rate);
    let started = Instant::now();
    let jobs: Vec<(usize, usize)> = (0..cfg.messages)
        .flat_map(|msg| (1..=cfg.restarts).map(move |rs| (msg, rs)))
        .collect();
    let instances: Vec<Instance> = (0..cfg.messages)
        .into_par_iter()
        .map(|msg| make_instance(cfg, &spec, m, &mut stream_for(cfg, 0, msg, 0)))
        .collect::<Result<_>>()?;
    let trials: Vec<Result<Trial>> = jobs
        .par_iter()
        .map(|&(msg, rs)| trial(&instances[msg], &bp, &mut stream_for(cfg, 0, msg, rs)))
        .collect();

    let mut report = empty_report(cfg);
    let mut hist = Histogram {
        pairwise: Vec::new(),
        truth: Vec::new(),
        distortion: Vec::new(),
    };
    let mut failed = Vec::new();
    let mut per_message: Vec<Vec<SpinVector>> = vec![Vec::new(); cfg.messages];
    for (&(msg, rs), t) in jobs.iter().zip(trials) {
        match t {
            Ok(t) => {
                if let Some(s0) = &instances[msg].planted {
                    hist.truth.push(overlap(&t.estimate, s0)?);
                }
                if let Some(d) = t.distortion {
                    hist.distortion.push(d);
                }
                per_message[msg].push(t.estimate);
            }
            Err(e @ Error::NumericalBreakdown { .. }) => {
                failed.push((msg * cfg.restarts + rs - 1, e))
            }
            Err(e) => return Err(e),
        }
    }
    for est in &per_message {
        pairwise_overlaps(est, &mut hist.pairwise)?;
    }
    let aborted = failed.len();
    report.rows.push(ctx.row(
        cfg,
        rate,
        beta,
        "pairwise_overlap",
        &hist.pairwise,
        aborted,
        started,
    ));
    if cfg.command == Command::EccHist {
        let abs: Vec<f64> = hist.truth.iter().map(|x| x.abs()).collect();
        report
            .rows
            .push(ctx.row(cfg, rate, beta, "truth_abs_overlap", &abs, aborted, started));
    } else {
        report.rows.push(ctx.row(
            cfg,
            rate,
            beta,
            "distortion",
            &hist.distortion,
            aborted,
            started,
        ));
    }
    note_aborts(&mut report, rate, &failed, jobs.len());
    report.histogram = Some(hist);
    Ok(report)
}

/// Reference lines: the channel capacity for `(p, r)` when that pair is a
/// valid channel, and the rate-distortion curve for source bias `p`.
pub fn bounds(cfg: &ExperimentConfig) -> Result<Report> {
    let mut report = empty_report(cfg);
    if let Ok(ch) = ChannelParams::new(cfg.p, cfg.r) {
        let cap = bac_capacity(&ch);
        report.bounds.push(BoundRow {
            curve: "capacity".into(),
            p: cfg.p,
            r: cfg.r,
            x: cap.input_bias,
            y: cap.capacity,
        });
    }
    // the curve is symmetric in the bias
    let src = SourceModel::new(cfg.p.max(1.0 - cfg.p))?;
    let dmax = 1.0 - src.bias();
    let steps = 100;
    for i in 0..=steps {
        let d = dmax * i as f64 / steps as f64;
        report.bounds.push(BoundRow {
            curve: "rate_distortion".into(),
            p: src.bias(),
            r: f64::NAN,
            x: d,
            y: rate_distortion(&src, d)?,
        });
    }
    for &rate in cfg.rates.iter().filter(|&&r| r > 0.0 && r <= src.entropy()) {
        report.bounds.push(BoundRow {
            curve: "shannon_distortion".into(),
            p: src.bias(),
            r: f64::NAN,
            x: rate,
            y: shannon_distortion(&src, rate)?,
        });
    }
    Ok(report)
}
