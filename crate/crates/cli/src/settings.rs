//! Experiment settings from flags and from flat `key = value` files.
//!
//! Keys in a file use the flag names (`network`, `K`, `N`, `rates`, ...),
//! with `-` and `_` interchangeable. Flags win over file values.

use std::path::PathBuf;

use clap::Args;
use mlpcodes::experiment::{Command, ExperimentConfig};
use mlpcodes::NetworkKind;

#[derive(Debug, Clone, Default, Args)]
pub struct Settings {
    /// Flat key=value file; flags given on the command line take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub network: Option<NetworkKind>,
    /// Number of hidden units.
    #[arg(long = "K")]
    pub hidden: Option<usize>,
    /// Message length (codeword length for compression).
    #[arg(long = "N")]
    pub n: Option<usize>,
    /// Comma-separated code rates N/M.
    #[arg(long, value_delimiter = ',')]
    pub rates: Option<Vec<f64>>,
    /// Flip probability of +1 (decoding) or source bias (compression).
    #[arg(long)]
    pub p: Option<f64>,
    /// Flip probability of -1.
    #[arg(long)]
    pub r: Option<f64>,
    /// Target output bias for threshold tuning.
    #[arg(long)]
    pub bias: Option<f64>,
    /// Explicit threshold k, skipping tuning.
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Comma-separated inverse temperatures; the best is kept per rate.
    #[arg(long, value_delimiter = ',')]
    pub beta: Option<Vec<f64>>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub messages: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub init_scale: Option<f64>,
    #[arg(long)]
    pub q_clamp: Option<f64>,
    /// Factor weight at or below which a run aborts.
    #[arg(long)]
    pub v_floor: Option<f64>,
    /// Aborted-run fraction that triggers exit code 3.
    #[arg(long)]
    pub abort_fraction: Option<f64>,
    /// Output path prefix; CSV goes to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Use the original study's run, restart and message counts.
    #[arg(long)]
    pub paper_scale: bool,
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| format!("invalid value {value:?} for {key}: {e}"))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, String> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

impl Settings {
    /// Parses the flat file format: one `key = value` per line, `#` starts a
    /// comment, blank lines are ignored.
    pub fn from_text(text: &str) -> Result<Self, String> {
        let mut s = Self::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", no + 1))?;
            let (key, value) = (key.trim(), value.trim());
            match key.replace('-', "_").as_str() {
                "network" => s.network = Some(parse(key, value)?),
                "K" => s.hidden = Some(parse(key, value)?),
                "N" => s.n = Some(parse(key, value)?),
                "rates" => s.rates = Some(parse_list(key, value)?),
                "p" => s.p = Some(parse(key, value)?),
                "r" => s.r = Some(parse(key, value)?),
                "bias" => s.bias = Some(parse(key, value)?),
                "k" => s.k = Some(parse(key, value)?),
                "gamma" => s.gamma = Some(parse(key, value)?),
                "beta" => s.beta = Some(parse_list(key, value)?),
                "runs" => s.runs = Some(parse(key, value)?),
                "restarts" => s.restarts = Some(parse(key, value)?),
                "messages" => s.messages = Some(parse(key, value)?),
                "iters" => s.iters = Some(parse(key, value)?),
                "seed" => s.seed = Some(parse(key, value)?),
                "init_scale" => s.init_scale = Some(parse(key, value)?),
                "q_clamp" => s.q_clamp = Some(parse(key, value)?),
                "v_floor" => s.v_floor = Some(parse(key, value)?),
                "abort_fraction" => s.abort_fraction = Some(parse(key, value)?),
                "out" => s.out = Some(PathBuf::from(value)),
                "paper_scale" => s.paper_scale = parse(key, value)?,
                other => return Err(format!("line {}: unknown key {other:?}", no + 1)),
            }
        }
        Ok(s)
    }

    /// Fills every unset field of `self` from `fallback`.
    pub fn or(self, fallback: Self) -> Self {
        Self {
            config: self.config.or(fallback.config),
            network: self.network.or(fallback.network),
            hidden: self.hidden.or(fallback.hidden),
            n: self.n.or(fallback.n),
            rates: self.rates.or(fallback.rates),
            p: self.p.or(fallback.p),
            r: self.r.or(fallback.r),
            bias: self.bias.or(fallback.bias),
            k: self.k.or(fallback.k),
            gamma: self.gamma.or(fallback.gamma),
            beta: self.beta.or(fallback.beta),
            runs: self.runs.or(fallback.runs),
            restarts: self.restarts.or(fallback.restarts),
            messages: self.messages.or(fallback.messages),
            iters: self.iters.or(fallback.iters),
            seed: self.seed.or(fallback.seed),
            init_scale: self.init_scale.or(fallback.init_scale),
            q_clamp: self.q_clamp.or(fallback.q_clamp),
            v_floor: self.v_floor.or(fallback.v_floor),
            abort_fraction: self.abort_fraction.or(fallback.abort_fraction),
            out: self.out.or(fallback.out),
            paper_scale: self.paper_scale || fallback.paper_scale,
        }
    }

    /// Resolves defaults and produces a validated configuration.
    pub fn resolve(&self, command: Command) -> Result<ExperimentConfig, String> {
        let seed = match (self.seed, command) {
            (Some(s), _) => s,
            (None, Command::Bounds) => 0,
            (None, _) => return Err("--seed is required".into()),
        };
        let network = self.network.unwrap_or(NetworkKind::Pth);
        let hidden = self.hidden.unwrap_or(1);
        let n = self.n.unwrap_or(1000);
        let mut cfg = ExperimentConfig::new(command, network, hidden, n);
        if self.paper_scale {
            cfg = cfg.paper_scale();
        }
        cfg.seed = seed;
        if let Some(v) = &self.rates {
            cfg.rates = v.clone();
        }
        if let Some(v) = self.p {
            cfg.p = v;
        }
        if let Some(v) = self.r {
            cfg.r = v;
        }
        cfg.bias = self.bias;
        cfg.threshold = self.k;
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = &self.beta {
            cfg.beta = v.clone();
        }
        if let Some(v) = self.runs {
            cfg.runs = v;
        }
        if let Some(v) = self.restarts {
            cfg.restarts = v;
        }
        if let Some(v) = self.messages {
            cfg.messages = v;
        }
        cfg.iterations = self.iters;
        if let Some(v) = self.init_scale {
            cfg.init_scale = v;
        }
        if let Some(v) = self.q_clamp {
            cfg.q_clamp = v;
        }
        if let Some(v) = self.v_floor {
            cfg.v_floor = v;
        }
        if let Some(v) = self.abort_fraction {
            cfg.abort_fraction = v;
        }
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}
