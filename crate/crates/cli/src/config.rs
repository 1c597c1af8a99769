//! Experiment configuration: TOML schema, defaults and validation.
//!
//! ```toml
//! channel = "awgn"            # awgn | optical | peak_awgn
//! noise_variance = 1.0
//! snr_db_list = [2, 20, 40]
//! estimators = ["mine", "smile", { method = "chi_square", batch_size = 12000 }]
//!
//! [train]
//! rounds = 10
//! seed = 7
//!
//! [outputs]
//! dir = "results"
//! ```
//!
//! Unknown keys are rejected. Every default that gets applied is recorded
//! in [`ExperimentConfig::defaults_applied`].

use std::path::PathBuf;

use ncap_core::estimators::ReferenceFamily;
use ncap_core::{ChannelKind, ChannelSpec, EstimatorSpec, Method, TrainConfig};
use serde::{Deserialize, Serialize};

/// Batch size used by the χ² estimator unless overridden per estimator.
pub const CHI_SQUARE_BATCH: usize = 10_000;
pub const DEFAULT_OUT_DIR: &str = "ncap-out";

/// A validation problem, located in the source text when possible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("invalid configuration:\n{}", .0.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n"))]
pub struct ConfigError(pub Vec<ConfigIssue>);

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    channel: Option<String>,
    noise_variance: Option<f64>,
    snr_db_list: Option<Vec<f64>>,
    estimators: Option<Vec<RawEstimator>>,
    train: Option<RawTrain>,
    outputs: Option<RawOutputs>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawEstimator {
    Name(String),
    Table(RawEstimatorTable),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEstimatorTable {
    method: String,
    label: Option<String>,
    tau: Option<f64>,
    alpha: Option<f64>,
    ema_rate: Option<f64>,
    hist_bins: Option<usize>,
    reference: Option<ReferenceFamily>,
    batch_size: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrain {
    batch_size: Option<usize>,
    lr: Option<f64>,
    phase0_iters: Option<usize>,
    max_iters: Option<usize>,
    grad_clip: Option<f64>,
    rounds: Option<usize>,
    convergence_window: Option<usize>,
    convergence_tol: Option<f64>,
    seed: Option<u64>,
    eval_samples: Option<usize>,
    critic_hidden: Option<Vec<usize>>,
    nit_hidden: Option<Vec<usize>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutputs {
    dir: Option<PathBuf>,
    traces: Option<bool>,
    histograms: Option<bool>,
}

/// One estimator column of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorEntry {
    /// Unique name used in file names and the `estimator` column.
    pub label: String,
    pub spec: EstimatorSpec,
    /// Training configuration for this estimator's cells.
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub traces: bool,
    pub histograms: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub channel: ChannelSpec,
    pub snr_db_list: Vec<f64>,
    pub estimators: Vec<EstimatorEntry>,
    /// Shared training configuration (before per-estimator overrides).
    pub train: TrainConfig,
    pub outputs: OutputConfig,
    /// `key = value` for every default that was filled in.
    pub defaults_applied: Vec<String>,
}

impl ExperimentConfig {
    /// Applies command-line overrides to the shared and per-estimator
    /// training configurations.
    pub fn apply_overrides(&mut self, seed: Option<u64>, rounds: Option<usize>, out_dir: Option<PathBuf>) {
        for train in std::iter::once(&mut self.train).chain(self.estimators.iter_mut().map(|e| &mut e.train)) {
            if let Some(s) = seed {
                train.seed = s;
            }
            if let Some(r) = rounds {
                train.rounds = r;
            }
        }
        if let Some(d) = out_dir {
            self.outputs.dir = d;
        }
    }

    /// Number of (SNR, estimator) cells.
    pub fn num_cells(&self) -> usize {
        self.snr_db_list.len() * self.estimators.len()
    }
}

/// 1-based line of the first `key = ...` assignment or `[key]` header in
/// `raw`.
fn line_of(raw: &str, key: &str) -> Option<usize> {
    raw.lines().position(|l| {
        let t = l.trim_start();
        t.strip_prefix(key)
            .map(|rest| rest.trim_start().starts_with('='))
            .unwrap_or(false)
            || t.starts_with(&format!("[{key}]"))
    })
    .map(|i| i + 1)
}

struct Collector<'a> {
    raw: &'a str,
    issues: Vec<ConfigIssue>,
    defaults: Vec<String>,
}

impl Collector<'_> {
    fn issue(&mut self, key: &str, message: impl Into<String>) {
        self.issues.push(ConfigIssue {
            line: line_of(self.raw, key),
            message: message.into(),
        });
    }

    fn or_default<T: std::fmt::Debug>(&mut self, name: &str, value: Option<T>, default: T) -> T {
        value.unwrap_or_else(|| {
            self.defaults.push(format!("{name} = {default:?}"));
            default
        })
    }
}

/// Parses and validates a TOML experiment configuration.
pub fn validate_config(raw: &str) -> Result<ExperimentConfig, ConfigError> {
    let parsed: RawConfig = toml::from_str(raw).map_err(|e| {
        let message = e.message().trim().to_string();
        // unknown keys are reported at their enclosing table; prefer the key itself
        let unknown = message
            .strip_prefix("unknown field `")
            .and_then(|r| r.split('`').next())
            .and_then(|k| line_of(raw, k));
        let line = unknown.or_else(|| e.span().map(|s| raw[..s.start.min(raw.len())].matches('\n').count() + 1));
        ConfigError(vec![ConfigIssue {
            line,
            message,
        }])
    })?;
    let mut c = Collector {
        raw,
        issues: Vec::new(),
        defaults: Vec::new(),
    };

    let kind = match parsed.channel.as_deref() {
        None => {
            c.issue("channel", "missing required field `channel`");
            ChannelKind::Awgn
        }
        Some(s) => s.parse().unwrap_or_else(|e: ncap_core::Error| {
            c.issue("channel", e.to_string());
            ChannelKind::Awgn
        }),
    };
    let noise_variance = c.or_default("noise_variance", parsed.noise_variance, 1.0);
    let channel = ChannelSpec::new(kind, noise_variance).unwrap_or_else(|e| {
        c.issue("noise_variance", e.to_string());
        ChannelSpec {
            kind,
            noise_variance: 1.0,
        }
    });

    let snr_db_list = parsed.snr_db_list.unwrap_or_default();
    if snr_db_list.is_empty() {
        c.issue("snr_db_list", "`snr_db_list` must be a nonempty list");
    }
    if snr_db_list.iter().any(|s| !s.is_finite()) {
        c.issue("snr_db_list", "`snr_db_list` entries must be finite");
    }
    for (i, a) in snr_db_list.iter().enumerate() {
        if snr_db_list[..i].contains(a) {
            c.issue("snr_db_list", format!("duplicate SNR {a} dB"));
        }
    }

    let rt = parsed.train.unwrap_or_default();
    let d = TrainConfig::default();
    let train = TrainConfig {
        batch_size: c.or_default("train.batch_size", rt.batch_size, d.batch_size),
        lr: c.or_default("train.lr", rt.lr, d.lr),
        phase0_iters: c.or_default("train.phase0_iters", rt.phase0_iters, d.phase0_iters),
        max_iters: c.or_default("train.max_iters", rt.max_iters, d.max_iters),
        grad_clip: c.or_default("train.grad_clip", rt.grad_clip, d.grad_clip),
        rounds: c.or_default("train.rounds", rt.rounds, d.rounds),
        convergence_window: c.or_default("train.convergence_window", rt.convergence_window, d.convergence_window),
        convergence_tol: c.or_default("train.convergence_tol", rt.convergence_tol, d.convergence_tol),
        seed: c.or_default("train.seed", rt.seed, d.seed),
        eval_samples: c.or_default("train.eval_samples", rt.eval_samples, d.eval_samples),
        critic_hidden: c.or_default("train.critic_hidden", rt.critic_hidden, d.critic_hidden.clone()),
        nit_hidden: c.or_default("train.nit_hidden", rt.nit_hidden, d.nit_hidden.clone()),
    };
    if let Err(e) = train.validate() {
        c.issue("train", e.to_string());
    }

    let raw_estimators = parsed.estimators.unwrap_or_default();
    if raw_estimators.is_empty() {
        c.issue("estimators", "`estimators` must be a nonempty list");
    }
    let mut estimators: Vec<EstimatorEntry> = Vec::new();
    for (i, re) in raw_estimators.into_iter().enumerate() {
        let table = match re {
            RawEstimator::Name(method) => RawEstimatorTable {
                method,
                label: None,
                tau: None,
                alpha: None,
                ema_rate: None,
                hist_bins: None,
                reference: None,
                batch_size: None,
            },
            RawEstimator::Table(t) => t,
        };
        let method: Method = match table.method.parse() {
            Ok(m) => m,
            Err(e) => {
                c.issue("estimators", format!("estimators[{i}]: {e}"));
                continue;
            }
        };
        let base = EstimatorSpec::new(method);
        let label = table.label.unwrap_or_else(|| method.as_str().to_string());
        let p = format!("estimators[{i}]");
        let spec = EstimatorSpec {
            method,
            tau: c.or_default(&format!("{p}.tau"), table.tau, base.tau),
            alpha: c.or_default(&format!("{p}.alpha"), table.alpha, base.alpha),
            ema_rate: c.or_default(&format!("{p}.ema_rate"), table.ema_rate, base.ema_rate),
            hist_bins: c.or_default(&format!("{p}.hist_bins"), table.hist_bins, base.hist_bins),
            reference: c.or_default(&format!("{p}.reference"), table.reference, base.reference),
        };
        if let Err(e) = spec.validate() {
            c.issue("estimators", format!("{p}: {e}"));
        }
        let mut est_train = train.clone();
        est_train.batch_size = match (table.batch_size, method) {
            (Some(b), _) => b,
            (None, Method::ChiSquare) => {
                c.defaults.push(format!("{p}.batch_size = {CHI_SQUARE_BATCH}"));
                CHI_SQUARE_BATCH
            }
            (None, _) => train.batch_size,
        };
        if est_train.batch_size < 2 {
            c.issue("estimators", format!("{p}: batch_size must be at least 2"));
        }
        if label.is_empty() || !label.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-') {
            c.issue("estimators", format!("{p}: label {label:?} must be nonempty [A-Za-z0-9_-]"));
        }
        if estimators.iter().any(|e| e.label == label) {
            c.issue("estimators", format!("{p}: duplicate estimator {label:?}; set a distinct `label`"));
        }
        estimators.push(EstimatorEntry {
            label,
            spec,
            train: est_train,
        });
    }

    let ro = parsed.outputs.unwrap_or_default();
    let outputs = OutputConfig {
        dir: c.or_default("outputs.dir", ro.dir, PathBuf::from(DEFAULT_OUT_DIR)),
        traces: c.or_default("outputs.traces", ro.traces, true),
        histograms: c.or_default("outputs.histograms", ro.histograms, true),
    };

    if !c.issues.is_empty() {
        return Err(ConfigError(c.issues));
    }
    Ok(ExperimentConfig {
        channel,
        snr_db_list,
        estimators,
        train,
        outputs,
        defaults_applied: c.defaults,
    })
}
