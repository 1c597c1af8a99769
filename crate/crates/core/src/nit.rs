//! Neural input transformer (NIT): standard Gaussian noise → MLP →
//! constraint layer → channel input.
//!
//! Constraint layers are hard, differentiable maps, so every produced batch
//! is feasible:
//!
//! * average power: `x = raw · √(ε / mean(raw²))` (batch renormalization),
//! * nonnegative average power: `|raw|` followed by the same renormalization,
//! * peak: `x = A · tanh(raw)`.
//!
//! In [`Mode::Eval`] the renormalization factor is the one frozen by
//! [`InputTransformer::calibrate`], making the map sample-wise deterministic.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::channels::ConstraintSpec;
use crate::error::{invalid, numeric, Result};
use crate::nn::{adam_step, clip_gradient_norm, init_network, AdamState, ForwardPass, Gradients, Matrix, Network};
use crate::rng::{sample_gaussian, Rng};

/// Floor on `mean(raw²)` below which power renormalization is refused.
pub const POWER_FLOOR: f64 = 1e-12;
/// Calibration batch size used to freeze the eval-mode scale.
pub const CALIBRATION_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Power scale from the current batch.
    Train,
    /// Power scale frozen by calibration.
    Eval,
}

#[derive(Debug, Clone)]
pub struct InputTransformer {
    net: Network,
    constraint: ConstraintSpec,
    optimizer: AdamState,
    frozen_scale: Option<f64>,
}

/// Cached intermediate values of one transform, for the backward sweep.
#[derive(Debug, Clone)]
pub struct TransformPass {
    net_pass: ForwardPass,
    /// Value fed to the power renormalization (`raw` or `|raw|`).
    pre: Vec<f64>,
    scale: f64,
    scale_from_batch: bool,
    output: Matrix,
}

impl TransformPass {
    pub fn output(&self) -> &Matrix {
        &self.output
    }

    pub fn raw(&self) -> &Matrix {
        self.net_pass.output()
    }
}

impl InputTransformer {
    /// Network `1 → hidden… → 1`, He-initialized.
    pub fn new(constraint: ConstraintSpec, hidden: &[usize], rng: &mut Rng) -> Result<Self> {
        constraint.validate()?;
        let mut dims = vec![1];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let net = init_network(&dims, rng)?;
        Ok(Self::from_network(net, constraint))
    }

    pub fn from_network(net: Network, constraint: ConstraintSpec) -> Self {
        let optimizer = AdamState::new(&net);
        Self {
            net,
            constraint,
            optimizer,
            frozen_scale: None,
        }
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn constraint(&self) -> &ConstraintSpec {
        &self.constraint
    }

    pub fn frozen_scale(&self) -> Option<f64> {
        self.frozen_scale
    }

    pub fn transform(&self, noise: &Matrix, mode: Mode) -> Result<Matrix> {
        Ok(self.forward(noise, mode)?.output)
    }

    pub fn forward(&self, noise: &Matrix, mode: Mode) -> Result<TransformPass> {
        if noise.cols() != 1 || noise.rows() == 0 {
            return Err(invalid(format!("NIT expects a nonempty B x 1 noise batch, got {:?}", noise.shape())));
        }
        let net_pass = self.net.forward_pass(noise)?;
        let raw = net_pass.output().data();
        let (pre, scale, scale_from_batch, out) = match self.constraint {
            ConstraintSpec::Peak { amplitude } => {
                let out: Vec<f64> = raw.iter().map(|r| amplitude * r.tanh()).collect();
                (Vec::new(), amplitude, false, out)
            }
            ConstraintSpec::AveragePower { power } | ConstraintSpec::NonnegAveragePower { power } => {
                let pre: Vec<f64> = if matches!(self.constraint, ConstraintSpec::NonnegAveragePower { .. }) {
                    raw.iter().map(|r| r.abs()).collect()
                } else {
                    raw.to_vec()
                };
                let (scale, from_batch) = match mode {
                    Mode::Train => (power_scale(&pre, power)?, true),
                    Mode::Eval => (
                        self.frozen_scale
                            .ok_or_else(|| invalid("eval mode requires a calibrated transformer"))?,
                        false,
                    ),
                };
                let out = pre.iter().map(|p| p * scale).collect();
                (pre, scale, from_batch, out)
            }
        };
        let output = Matrix::column(out);
        if !output.is_finite() {
            return Err(numeric("non-finite NIT output"));
        }
        Ok(TransformPass {
            net_pass,
            pre,
            scale,
            scale_from_batch,
            output,
        })
    }

    /// Parameter gradient of `Σ grad_x ⊙ x`, back through the constraint
    /// layer (including the batch dependence of the power scale).
    pub fn backward(&self, pass: &TransformPass, grad_x: &[f64]) -> Result<Gradients> {
        let b = pass.output.rows();
        if grad_x.len() != b {
            return Err(invalid("NIT gradient length does not match the batch"));
        }
        let raw = pass.net_pass.output().data();
        let mut g_raw = vec![0.0; b];
        match self.constraint {
            ConstraintSpec::Peak { amplitude } => {
                for i in 0..b {
                    let t = raw[i].tanh();
                    g_raw[i] = grad_x[i] * amplitude * (1.0 - t * t);
                }
            }
            ConstraintSpec::AveragePower { .. } | ConstraintSpec::NonnegAveragePower { .. } => {
                let s = pass.scale;
                let mut g_pre: Vec<f64> = grad_x.iter().map(|g| g * s).collect();
                if pass.scale_from_batch {
                    let m = pass.pre.iter().map(|p| p * p).sum::<f64>() / b as f64;
                    let dot: f64 = grad_x.iter().zip(&pass.pre).map(|(g, p)| g * p).sum();
                    let c = s * dot / (m * b as f64);
                    for (gp, p) in g_pre.iter_mut().zip(&pass.pre) {
                        *gp -= c * p;
                    }
                }
                let nonneg = matches!(self.constraint, ConstraintSpec::NonnegAveragePower { .. });
                for i in 0..b {
                    g_raw[i] = if nonneg { g_pre[i] * sign(raw[i]) } else { g_pre[i] };
                }
            }
        }
        let (grads, _) = self.net.backward_pass(&pass.net_pass, &Matrix::column(g_raw), false)?;
        Ok(grads)
    }

    /// Ascends `grads` (gradient of the objective) with clipping and Adam.
    pub fn apply(&mut self, grads: &Gradients, lr: f64, max_norm: f64) -> Result<()> {
        if !grads.is_finite() {
            return Err(numeric("non-finite NIT gradient"));
        }
        let mut loss = grads.clone();
        loss.scale(-1.0);
        clip_gradient_norm(&mut loss, max_norm);
        adam_step(&mut self.net, &loss, &mut self.optimizer, lr)
    }

    /// Freezes the eval-mode power scale from `n` fresh noise samples.
    pub fn calibrate(&mut self, rng: &mut Rng, n: usize) -> Result<()> {
        let power = match self.constraint {
            ConstraintSpec::Peak { .. } => return Ok(()),
            ConstraintSpec::AveragePower { power } | ConstraintSpec::NonnegAveragePower { power } => power,
        };
        let noise = sample_gaussian(rng, n, 1)?;
        let raw = self.net.forward(&noise)?;
        let pre: Vec<f64> = match self.constraint {
            ConstraintSpec::NonnegAveragePower { .. } => raw.data().iter().map(|r| r.abs()).collect(),
            _ => raw.into_vec(),
        };
        self.frozen_scale = Some(power_scale(&pre, power)?);
        Ok(())
    }

    /// `n` channel inputs from fresh noise. Eval mode falls back to the
    /// sample's own statistics when the transformer is not calibrated.
    pub fn sample(&self, rng: &mut Rng, n: usize, mode: Mode) -> Result<Matrix> {
        let noise = sample_gaussian(rng, n, 1)?;
        let mode = if mode == Mode::Eval && self.frozen_scale.is_none() && !matches!(self.constraint, ConstraintSpec::Peak { .. }) {
            Mode::Train
        } else {
            mode
        };
        self.transform(&noise, mode)
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn power_scale(pre: &[f64], power: f64) -> Result<f64> {
    let m = pre.iter().map(|p| p * p).sum::<f64>() / pre.len() as f64;
    if !(m >= POWER_FLOOR) {
        return Err(numeric(format!(
            "degenerate NIT output (mean square {m:e}) cannot be power-normalized"
        )));
    }
    Ok((power / m).sqrt())
}

/// One histogram bin of learned inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub count: u64,
    /// `count / (n · width)`.
    pub density: f64,
}

/// A contiguous group of histogram bins holding one mass concentration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cluster {
    pub left: f64,
    pub right: f64,
    /// Fraction of samples in the cluster.
    pub mass: f64,
    /// Density-weighted center.
    pub center: f64,
}

/// Equal-width histogram of NIT outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputHistogram {
    pub bins: Vec<HistogramBin>,
    pub n_samples: u64,
}

impl InputHistogram {
    pub fn from_samples(samples: &[f64], bins: usize) -> Result<Self> {
        if bins == 0 || samples.len() < bins {
            return Err(invalid(format!(
                "histogram needs n_samples >= bins >= 1 (got {} samples, {bins} bins)",
                samples.len()
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(numeric("non-finite sample in histogram"));
        }
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let mut hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi <= lo {
            hi = lo + 1e-9_f64.max(lo.abs() * 1e-9);
        }
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0u64; bins];
        for &v in samples {
            let idx = (((v - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        let n = samples.len() as f64;
        let bins = counts
            .iter()
            .enumerate()
            .map(|(k, &count)| HistogramBin {
                left: lo + k as f64 * width,
                right: if k + 1 == bins { hi } else { lo + (k + 1) as f64 * width },
                count,
                density: count as f64 / (n * width),
            })
            .collect();
        Ok(Self {
            bins,
            n_samples: samples.len() as u64,
        })
    }

    pub fn total_count(&self) -> u64 {
        self.bins.iter().map(|b| b.count).sum()
    }

    /// Mass concentrations: maximal runs of bins with density at least 1% of
    /// the peak density that contain a bin at 5% of the peak or more.
    pub fn clusters(&self) -> Vec<Cluster> {
        let peak = self.bins.iter().map(|b| b.density).fold(0.0, f64::max);
        let (gap, strong) = (0.01 * peak, 0.05 * peak);
        let mut out = Vec::new();
        let mut k = 0;
        while k < self.bins.len() {
            if self.bins[k].density < gap || self.bins[k].count == 0 {
                k += 1;
                continue;
            }
            let start = k;
            while k < self.bins.len() && self.bins[k].density >= gap && self.bins[k].count > 0 {
                k += 1;
            }
            let run = &self.bins[start..k];
            if run.iter().any(|b| b.density >= strong) {
                let count: u64 = run.iter().map(|b| b.count).sum();
                let center = run.iter().map(|b| 0.5 * (b.left + b.right) * b.count as f64).sum::<f64>() / count as f64;
                out.push(Cluster {
                    left: run[0].left,
                    right: run[run.len() - 1].right,
                    mass: count as f64 / self.n_samples as f64,
                    center,
                });
            }
        }
        out
    }

    /// CSV with header `bin_left,bin_right,count,density`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_left,bin_right,count,density\n");
        for b in &self.bins {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                crate::stats::fmt_sig6(b.left),
                crate::stats::fmt_sig6(b.right),
                b.count,
                crate::stats::fmt_sig6(b.density)
            );
        }
        s
    }
}

/// Histogram of `n_samples` fresh NIT outputs.
pub fn extract_histogram(nit: &InputTransformer, n_samples: usize, bins: usize, rng: &mut Rng) -> Result<InputHistogram> {
    if n_samples < bins {
        return Err(invalid(format!("n_samples ({n_samples}) must be >= bins ({bins})")));
    }
    let x = nit.sample(rng, n_samples, Mode::Eval)?;
    InputHistogram::from_samples(x.data(), bins)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nit(constraint: ConstraintSpec, seed: u64) -> InputTransformer {
        InputTransformer::new(constraint, &[64, 64, 64, 64], &mut Rng::new(seed)).unwrap()
    }

    #[test]
    fn power_is_exact_in_train_mode() {
        let t = nit(ConstraintSpec::AveragePower { power: 100.0 }, 1);
        let noise = sample_gaussian(&mut Rng::new(2), 256, 1).unwrap();
        let x = t.transform(&noise, Mode::Train).unwrap();
        let p = x.data().iter().map(|v| v * v).sum::<f64>() / 256.0;
        assert!((p - 100.0).abs() < 1e-9, "{p}");
    }

    #[test]
    fn nonneg_outputs_and_power() {
        let t = nit(ConstraintSpec::NonnegAveragePower { power: 10.0 }, 3);
        let noise = sample_gaussian(&mut Rng::new(4), 512, 1).unwrap();
        let x = t.transform(&noise, Mode::Train).unwrap();
        assert!(x.data().iter().all(|&v| v >= 0.0));
        let p = x.data().iter().map(|v| v * v).sum::<f64>() / 512.0;
        assert!((p - 10.0).abs() < 1e-9);
    }

    #[test]
    fn peak_outputs_stay_inside() {
        let t = nit(ConstraintSpec::Peak { amplitude: 10.0 }, 5);
        let noise = sample_gaussian(&mut Rng::new(6), 1000, 1).unwrap().map(|v| v * 50.0);
        let x = t.transform(&noise, Mode::Train).unwrap();
        assert!(x.data().iter().all(|v| v.abs() <= 10.0));
    }

    #[test]
    fn degenerate_raw_batch_is_a_numeric_error() {
        let mut net = init_network(&[1, 4, 1], &mut Rng::new(0)).unwrap();
        net.set_params_flat(&vec![0.0; net.num_params()]).unwrap();
        let t = InputTransformer::from_network(net, ConstraintSpec::AveragePower { power: 1.0 });
        let noise = sample_gaussian(&mut Rng::new(1), 8, 1).unwrap();
        assert!(matches!(t.transform(&noise, Mode::Train), Err(crate::Error::Numeric(_))));
    }

    #[test]
    fn eval_mode_needs_calibration_and_is_deterministic() {
        let mut t = nit(ConstraintSpec::AveragePower { power: 4.0 }, 7);
        let noise = sample_gaussian(&mut Rng::new(8), 16, 1).unwrap();
        assert!(t.transform(&noise, Mode::Eval).is_err());
        t.calibrate(&mut Rng::new(9), CALIBRATION_SAMPLES).unwrap();
        // eval output of one sample does not depend on the rest of the batch
        let full = t.transform(&noise, Mode::Eval).unwrap();
        let single = t.transform(&noise.slice_rows(3, 4), Mode::Eval).unwrap();
        assert_eq!(full.get(3, 0), single.get(0, 0));
        let x = t.sample(&mut Rng::new(10), 100_000, Mode::Eval).unwrap();
        let p = x.data().iter().map(|v| v * v).sum::<f64>() / 1e5;
        assert!((p - 4.0).abs() < 0.1, "{p}");
    }

    /// Finite-difference check of the full transform, power renormalization
    /// included, on a scalar objective `Σ w_i x_i`.
    #[test]
    fn transform_gradient_matches_finite_differences() {
        for constraint in [
            ConstraintSpec::AveragePower { power: 3.0 },
            ConstraintSpec::NonnegAveragePower { power: 3.0 },
            ConstraintSpec::Peak { amplitude: 2.0 },
        ] {
            let t = InputTransformer::new(constraint, &[6, 6], &mut Rng::new(11)).unwrap();
            let noise = sample_gaussian(&mut Rng::new(12), 9, 1).unwrap();
            let w: Vec<f64> = (0..9).map(|i| (i as f64 * 0.7).sin()).collect();
            let objective = |net: &Network| {
                let t = InputTransformer::from_network(net.clone(), constraint);
                let x = t.transform(&noise, Mode::Train).unwrap();
                x.data().iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
            };
            let pass = t.forward(&noise, Mode::Train).unwrap();
            let g = t.backward(&pass, &w).unwrap().flat();
            let flat = t.network().params_flat();
            let h = 1e-6;
            for idx in 0..flat.len() {
                let mut p = flat.clone();
                p[idx] += h;
                let mut up = t.network().clone();
                up.set_params_flat(&p).unwrap();
                p[idx] -= 2.0 * h;
                let mut dn = t.network().clone();
                dn.set_params_flat(&p).unwrap();
                let fd = (objective(&up) - objective(&dn)) / (2.0 * h);
                let tol = 1e-3 * fd.abs().max(g[idx].abs()).max(1e-4);
                assert!((fd - g[idx]).abs() <= tol, "{constraint:?} param {idx}: fd {fd} vs {}", g[idx]);
            }
        }
    }

    #[test]
    fn histogram_conserves_counts() {
        let t = nit(ConstraintSpec::AveragePower { power: 1.0 }, 13);
        let h = extract_histogram(&t, 10_000, 50, &mut Rng::new(14)).unwrap();
        assert_eq!(h.bins.len(), 50);
        assert_eq!(h.total_count(), 10_000);
        assert!(h.bins.iter().all(|b| b.density.is_finite()));
        let area: f64 = h.bins.iter().map(|b| b.density * (b.right - b.left)).sum();
        assert!((area - 1.0).abs() < 1e-9);
        assert!(!h.clusters().is_empty());
        assert!(extract_histogram(&t, 10, 50, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn cluster_rule_separates_mass_points() {
        let mut rng = Rng::new(15);
        let mut v = Vec::new();
        for (center, n) in [(0.0, 4000), (2.0, 3000), (4.5, 2000), (7.0, 1000)] {
            v.extend((0..n).map(|_| center + 0.05 * rng.gaussian()));
        }
        let h = InputHistogram::from_samples(&v, 100).unwrap();
        let c = h.clusters();
        assert_eq!(c.len(), 4, "{c:?}");
        assert!(c[0].left <= 0.0 && c[0].right >= 0.0);
        let gauss: Vec<f64> = (0..10_000).map(|_| rng.gaussian()).collect();
        assert_eq!(InputHistogram::from_samples(&gauss, 100).unwrap().clusters().len(), 1);
    }

    #[test]
    fn csv_layout() {
        let h = InputHistogram::from_samples(&[0.0, 1.0, 1.0, 2.0], 2).unwrap();
        let csv = h.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "bin_left,bin_right,count,density");
        assert_eq!(lines[1], "0,1.00000,1,0.250000");
        assert_eq!(lines[2], "1.00000,2.00000,3,0.750000");
    }
}
