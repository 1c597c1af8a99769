//! Sweep execution and result files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use ncap_core::capacity::{InputMoments, RoundFailure};
use ncap_core::channels::db_to_linear;
use ncap_core::reference::{awgn_capacity, blahut_arimoto, discretize_channel, published_bounds};
use ncap_core::stats::fmt_sig6;
use ncap_core::{estimate_capacity, ChannelKind, ChannelSpec, EstimatorSpec};
use serde::Serialize;

use crate::config::ExperimentConfig;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const PARTIAL: i32 = 3;
    pub const TOTAL: i32 = 4;
}

pub const RESULTS_HEADER: &str =
    "channel,snr_db,estimator,mean_nats,variance,rounds,converged,reference_nats,lower_bound,upper_bound";

/// Grid sizes for the Blahut–Arimoto reference.
pub const BA_INPUTS: usize = 201;
pub const BA_OUTPUTS: usize = 301;
pub const BA_TOL: f64 = 1e-5;
pub const BA_MAX_ITER: usize = 20_000;

/// Reference values for one (channel, SNR) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct References {
    /// `½ ln(1 + SNR)` for the AWGN channel.
    pub closed_form: Option<f64>,
    /// Blahut–Arimoto capacity of the discretized channel.
    pub blahut_arimoto: Option<f64>,
    pub ba_converged: Option<bool>,
    /// Published lower and upper bounds.
    pub bounds: Option<(f64, f64)>,
}

impl References {
    /// The single value reported in the `reference_nats` column.
    pub fn primary(&self) -> Option<f64> {
        self.closed_form.or(self.blahut_arimoto)
    }
}

/// Computes the references for `(channel, snr_db)`. The discretized
/// solver is skipped for AWGN unless `with_ba` is set, since the closed
/// form is exact there.
pub fn references(channel: &ChannelSpec, snr_db: f64, with_ba: bool) -> References {
    let closed_form = match channel.kind {
        ChannelKind::Awgn => awgn_capacity(db_to_linear(snr_db)).ok(),
        _ => None,
    };
    let (ba, conv) = if with_ba || closed_form.is_none() {
        let constraint = channel.constraint_for_snr(snr_db);
        let power = match constraint {
            ncap_core::ConstraintSpec::Peak { .. } => None,
            _ => Some(constraint.amplitude_scale().powi(2)),
        };
        match discretize_channel(channel, &constraint, BA_INPUTS, BA_OUTPUTS)
            .and_then(|dc| blahut_arimoto(&dc, power, BA_TOL, BA_MAX_ITER))
        {
            Ok(r) => (Some(r.capacity), Some(r.converged)),
            Err(_) => (None, None),
        }
    } else {
        (None, None)
    };
    References {
        closed_form,
        blahut_arimoto: ba,
        ba_converged: conv,
        bounds: published_bounds(channel.kind, snr_db).ok(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundSummary {
    pub index: usize,
    pub seed: u64,
    pub estimate: f64,
    pub train_estimate: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_clock_secs: f64,
    pub input_moments: InputMoments,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub name: String,
    pub snr_db: f64,
    pub estimator: String,
    pub spec: EstimatorSpec,
    pub batch_size: usize,
    pub status: CellStatus,
    pub references: References,
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellStatus {
    Completed {
        mean: f64,
        variance: f64,
        per_round: Vec<f64>,
        converged: bool,
        rounds: Vec<RoundSummary>,
        failures: Vec<RoundFailure>,
    },
    Failed {
        error: String,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub started_unix_secs: u64,
    pub exit_code: i32,
    pub config: ExperimentConfig,
    pub cells: Vec<CellResult>,
}

/// File-name stem of a cell, e.g. `awgn_20dB_mine` or `awgn_m40dB_smile`.
pub fn cell_name(channel: ChannelKind, snr_db: f64, label: &str) -> String {
    let snr = format!("{snr_db}");
    format!("{}_{}dB_{label}", channel.as_str(), snr.replace('-', "m").replace('.', "p"))
}

/// Runs every cell, writes the result files and returns the summary.
///
/// Files under `config.outputs.dir`: `results.csv` (completed cells only,
/// fully deterministic), `summary.json` (adds timing and failures),
/// `traces/<cell>.csv` and `histograms/<cell>.csv`.
pub fn run_experiment(config: &ExperimentConfig) -> std::io::Result<Summary> {
    let started_unix_secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let dir = &config.outputs.dir;
    fs::create_dir_all(dir)?;
    if config.outputs.traces {
        fs::create_dir_all(dir.join("traces"))?;
    }
    if config.outputs.histograms {
        fs::create_dir_all(dir.join("histograms"))?;
    }
    let ch = config.channel;
    let mut cells = Vec::new();
    let mut csv = String::from(RESULTS_HEADER);
    csv.push('\n');
    for &snr_db in &config.snr_db_list {
        let refs = references(&ch, snr_db, false);
        let constraint = ch.constraint_for_snr(snr_db);
        for est in &config.estimators {
            let name = cell_name(ch.kind, snr_db, &est.label);
            let start = Instant::now();
            let status = match estimate_capacity(&ch, &constraint, &est.spec, &est.train) {
                Ok(r) => {
                    if config.outputs.traces {
                        write_trace(&dir.join("traces").join(format!("{name}.csv")), &r.trace)?;
                    }
                    if config.outputs.histograms {
                        fs::write(dir.join("histograms").join(format!("{name}.csv")), r.histogram.to_csv())?;
                    }
                    let opt = |v: Option<f64>| v.map(fmt_sig6).unwrap_or_default();
                    let _ = writeln!(
                        csv,
                        "{},{},{},{},{},{},{},{},{},{}",
                        ch.kind.as_str(),
                        snr_db,
                        est.label,
                        fmt_sig6(r.mean),
                        fmt_sig6(r.variance),
                        r.per_round.len(),
                        r.converged,
                        opt(refs.primary()),
                        opt(refs.bounds.map(|b| b.0)),
                        opt(refs.bounds.map(|b| b.1)),
                    );
                    CellStatus::Completed {
                        mean: r.mean,
                        variance: r.variance,
                        converged: r.converged,
                        rounds: r
                            .rounds
                            .iter()
                            .map(|x| RoundSummary {
                                index: x.index,
                                seed: x.seed,
                                estimate: x.estimate,
                                train_estimate: x.train_estimate,
                                iterations: x.iterations,
                                converged: x.converged,
                                wall_clock_secs: x.wall_clock_secs,
                                input_moments: x.input_moments,
                            })
                            .collect(),
                        per_round: r.per_round,
                        failures: r.failures,
                    }
                }
                Err(e) => CellStatus::Failed { error: e.to_string() },
            };
            cells.push(CellResult {
                name,
                snr_db,
                estimator: est.label.clone(),
                spec: est.spec.clone(),
                batch_size: est.train.batch_size,
                status,
                references: refs,
                wall_clock_secs: start.elapsed().as_secs_f64(),
            });
        }
    }
    fs::write(dir.join("results.csv"), csv)?;
    let failed = cells.iter().filter(|c| matches!(c.status, CellStatus::Failed { .. })).count();
    let exit_code = match failed {
        0 => exit::OK,
        n if n == cells.len() => exit::TOTAL,
        _ => exit::PARTIAL,
    };
    let summary = Summary {
        started_unix_secs,
        exit_code,
        config: config.clone(),
        cells,
    };
    let json = serde_json::to_string_pretty(&summary).map_err(std::io::Error::other)?;
    fs::write(dir.join("summary.json"), json)?;
    Ok(summary)
}

fn write_trace(path: &Path, trace: &[f64]) -> std::io::Result<()> {
    let mut s = String::from("iteration,estimate\n");
    for (i, v) in trace.iter().enumerate() {
        let _ = writeln!(s, "{i},{}", fmt_sig6(*v));
    }
    fs::write(path, s)
}

/// Human-readable reference report for `ncap reference`.
pub fn reference_report(channel: &ChannelSpec, snr_db: f64) -> String {
    let r = references(channel, snr_db, true);
    let mut s = format!("channel {} at {snr_db} dB (noise variance {})\n", channel.kind, channel.noise_variance);
    if let Some(c) = r.closed_form {
        let _ = writeln!(s, "closed form       {} nats", fmt_sig6(c));
    }
    if let (Some(c), Some(conv)) = (r.blahut_arimoto, r.ba_converged) {
        let _ = writeln!(
            s,
            "blahut-arimoto    {} nats ({BA_INPUTS}x{BA_OUTPUTS} grid{})",
            fmt_sig6(c),
            if conv { "" } else { ", not converged" }
        );
    }
    match r.bounds {
        Some((lo, hi)) => {
            let _ = writeln!(s, "published bounds  [{}, {}] nats", fmt_sig6(lo), fmt_sig6(hi));
        }
        None => s.push_str("published bounds  none\n"),
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_names() {
        assert_eq!(cell_name(ChannelKind::Awgn, 20.0, "mine"), "awgn_20dB_mine");
        assert_eq!(cell_name(ChannelKind::OpticalIntensity, -40.0, "smile"), "optical_m40dB_smile");
        assert_eq!(cell_name(ChannelKind::PeakAwgn, 2.5, "x"), "peak_awgn_2p5dB_x");
        assert_eq!(cell_name(ChannelKind::Awgn, 0.0, "x"), "awgn_0dB_x");
    }

    #[test]
    fn awgn_references_use_the_closed_form() {
        let ch = ChannelSpec::new(ChannelKind::Awgn, 1.0).unwrap();
        let r = references(&ch, 20.0, false);
        assert!((r.primary().unwrap() - 2.3076).abs() < 1e-4);
        assert!(r.blahut_arimoto.is_none() && r.bounds.is_none());
    }

    #[test]
    fn optical_references_carry_bounds() {
        let ch = ChannelSpec::new(ChannelKind::OpticalIntensity, 1.0).unwrap();
        let r = references(&ch, 10.0, false);
        assert_eq!(r.bounds, Some((0.83, 1.48)));
        let ba = r.blahut_arimoto.unwrap();
        assert!(ba > 0.83 - 0.05 && ba < 1.48 + 0.05, "{ba}");
    }
}
