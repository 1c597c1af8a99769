//! Additive Gaussian noise channels `Z = X + N` and their input constraints.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::nn::Matrix;
use crate::rng::Rng;

/// Slack allowed when checking inputs against a hard constraint.
pub const CONSTRAINT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    /// Real AWGN channel under an average power constraint.
    Awgn,
    /// Nonnegative-input (intensity) AWGN channel.
    #[serde(rename = "optical")]
    OpticalIntensity,
    /// AWGN channel under a peak amplitude constraint.
    PeakAwgn,
}

impl ChannelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ChannelKind::Awgn => "awgn",
            ChannelKind::OpticalIntensity => "optical",
            ChannelKind::PeakAwgn => "peak_awgn",
        }
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChannelKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "awgn" => Ok(ChannelKind::Awgn),
            "optical" | "optical_intensity" => Ok(ChannelKind::OpticalIntensity),
            "peak_awgn" => Ok(ChannelKind::PeakAwgn),
            other => Err(invalid(format!(
                "unknown channel '{other}' (expected awgn, optical or peak_awgn)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub kind: ChannelKind,
    pub noise_variance: f64,
}

/// Admissible input set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintSpec {
    /// `E[X²] ≤ power`.
    AveragePower { power: f64 },
    /// `X ≥ 0` and `E[X²] ≤ power`.
    NonnegAveragePower { power: f64 },
    /// `|X| ≤ amplitude`.
    Peak { amplitude: f64 },
}

impl ConstraintSpec {
    pub fn validate(&self) -> Result<()> {
        let v = match *self {
            ConstraintSpec::AveragePower { power } | ConstraintSpec::NonnegAveragePower { power } => power,
            ConstraintSpec::Peak { amplitude } => amplitude,
        };
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(invalid(format!("constraint parameter must be positive, got {v}")))
        }
    }

    /// Natural amplitude scale of admissible inputs: `√ε` or `A`.
    pub fn amplitude_scale(&self) -> f64 {
        match *self {
            ConstraintSpec::AveragePower { power } | ConstraintSpec::NonnegAveragePower { power } => power.sqrt(),
            ConstraintSpec::Peak { amplitude } => amplitude,
        }
    }

    /// Checks every sample against the hard part of the constraint
    /// (nonnegativity or peak amplitude). Power is a batch property and is
    /// not checked here.
    pub fn check_samples(&self, x: &[f64]) -> Result<()> {
        match *self {
            ConstraintSpec::AveragePower { .. } => Ok(()),
            ConstraintSpec::NonnegAveragePower { .. } => match x.iter().find(|&&v| v < -CONSTRAINT_TOLERANCE) {
                Some(v) => Err(invalid(format!("negative input {v} on a nonnegative-input channel"))),
                None => Ok(()),
            },
            ConstraintSpec::Peak { amplitude } => {
                match x.iter().find(|&&v| v.abs() > amplitude + CONSTRAINT_TOLERANCE) {
                    Some(v) => Err(invalid(format!("input {v} exceeds peak amplitude {amplitude}"))),
                    None => Ok(()),
                }
            }
        }
    }
}

impl ChannelSpec {
    pub fn new(kind: ChannelKind, noise_variance: f64) -> Result<Self> {
        if !(noise_variance > 0.0) || !noise_variance.is_finite() {
            return Err(invalid(format!("noise variance must be positive, got {noise_variance}")));
        }
        Ok(Self { kind, noise_variance })
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_variance.sqrt()
    }

    /// The constraint the channel kind is studied under at a given SNR.
    /// For the peak channel the amplitude is tied to the power scale, `A = √ε`.
    pub fn constraint_for_snr(&self, snr_db: f64) -> ConstraintSpec {
        let power = snr_to_power(snr_db, self.noise_variance);
        match self.kind {
            ChannelKind::Awgn => ConstraintSpec::AveragePower { power },
            ChannelKind::OpticalIntensity => ConstraintSpec::NonnegAveragePower { power },
            ChannelKind::PeakAwgn => ConstraintSpec::Peak { amplitude: power.sqrt() },
        }
    }

    /// Whether `constraint` is the kind this channel is defined with.
    pub fn accepts(&self, constraint: &ConstraintSpec) -> bool {
        matches!(
            (self.kind, constraint),
            (ChannelKind::Awgn, ConstraintSpec::AveragePower { .. })
                | (ChannelKind::OpticalIntensity, ConstraintSpec::NonnegAveragePower { .. })
                | (ChannelKind::PeakAwgn, ConstraintSpec::Peak { .. })
        )
    }

    /// Adds i.i.d. `N(0, σ²)` noise to a `B × 1` input batch.
    ///
    /// Inputs violating the hard part of `constraint` are rejected, which
    /// catches broken input mappings early.
    pub fn transmit(&self, constraint: &ConstraintSpec, x: &Matrix, rng: &mut Rng) -> Result<Matrix> {
        if x.cols() != 1 {
            return Err(invalid(format!("scalar channel expects B x 1 input, got {:?}", x.shape())));
        }
        constraint.check_samples(x.data())?;
        let sd = self.noise_std();
        Ok(x.map(|v| v + sd * rng.gaussian()))
    }
}

/// Free-function form of [`ChannelSpec::transmit`].
pub fn transmit(channel: &ChannelSpec, constraint: &ConstraintSpec, x: &Matrix, rng: &mut Rng) -> Result<Matrix> {
    channel.transmit(constraint, x, rng)
}

/// Second-moment budget for a target SNR: `ε = σ² · 10^(snr_db/10)`.
pub fn snr_to_power(snr_db: f64, noise_variance: f64) -> f64 {
    noise_variance * 10f64.powf(snr_db / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_from_snr() {
        assert!((snr_to_power(20.0, 1.0) - 100.0).abs() < 1e-12);
        assert!((snr_to_power(0.0, 1.0) - 1.0).abs() < 1e-15);
        assert!((snr_to_power(2.0, 1.0) - 1.584_893_192_461_113_5).abs() < 1e-12);
    }

    #[test]
    fn noiseless_limit() {
        let ch = ChannelSpec::new(ChannelKind::Awgn, 1e-12).unwrap();
        let x = Matrix::column((0..100).map(|i| i as f64 * 0.1 - 5.0).collect());
        let z = ch
            .transmit(&ConstraintSpec::AveragePower { power: 1.0 }, &x, &mut Rng::new(1))
            .unwrap();
        for (a, b) in x.data().iter().zip(z.data()) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn output_variance_for_zero_input() {
        let ch = ChannelSpec::new(ChannelKind::Awgn, 1.0).unwrap();
        let x = Matrix::zeros(1_000_000, 1);
        let z = ch
            .transmit(&ConstraintSpec::AveragePower { power: 1.0 }, &x, &mut Rng::new(9))
            .unwrap();
        let n = z.rows() as f64;
        let mean = z.data().iter().sum::<f64>() / n;
        let var = z.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn conditional_moments() {
        let ch = ChannelSpec::new(ChannelKind::Awgn, 0.25).unwrap();
        let x = Matrix::column(vec![3.0; 200_000]);
        let z = ch
            .transmit(&ConstraintSpec::AveragePower { power: 9.0 }, &x, &mut Rng::new(2))
            .unwrap();
        let n = z.rows() as f64;
        let mean = z.data().iter().sum::<f64>() / n;
        let var = z.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean - 3.0).abs() < 0.005);
        assert!((var - 0.25).abs() < 0.005);
    }

    #[test]
    fn constraint_violations() {
        let optical = ChannelSpec::new(ChannelKind::OpticalIntensity, 1.0).unwrap();
        let c = ConstraintSpec::NonnegAveragePower { power: 10.0 };
        let bad = Matrix::column(vec![1.0, -0.1, 2.0]);
        assert!(optical.transmit(&c, &bad, &mut Rng::new(0)).is_err());
        let edge = Matrix::column(vec![-1e-12, 0.0]);
        assert!(optical.transmit(&c, &edge, &mut Rng::new(0)).is_ok());

        let peak = ChannelSpec::new(ChannelKind::PeakAwgn, 1.0).unwrap();
        let c = ConstraintSpec::Peak { amplitude: 2.0 };
        assert!(peak.transmit(&c, &Matrix::column(vec![2.0 + 1e-6]), &mut Rng::new(0)).is_err());
        assert!(peak.transmit(&c, &Matrix::column(vec![-2.0]), &mut Rng::new(0)).is_ok());
    }

    #[test]
    fn transmit_is_reproducible() {
        let ch = ChannelSpec::new(ChannelKind::Awgn, 1.0).unwrap();
        let c = ConstraintSpec::AveragePower { power: 1.0 };
        let x = Matrix::column(vec![0.5; 32]);
        let a = ch.transmit(&c, &x, &mut Rng::new(4)).unwrap();
        let b = ch.transmit(&c, &x, &mut Rng::new(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_specs() {
        assert!(ChannelSpec::new(ChannelKind::Awgn, 0.0).is_err());
        assert!(ChannelSpec::new(ChannelKind::Awgn, -1.0).is_err());
        assert!("fading".parse::<ChannelKind>().is_err());
        assert_eq!("optical".parse::<ChannelKind>().unwrap(), ChannelKind::OpticalIntensity);
        assert!(ConstraintSpec::Peak { amplitude: 0.0 }.validate().is_err());
    }

    #[test]
    fn peak_amplitude_tracks_power() {
        let ch = ChannelSpec::new(ChannelKind::PeakAwgn, 1.0).unwrap();
        match ch.constraint_for_snr(20.0) {
            ConstraintSpec::Peak { amplitude } => assert!((amplitude - 10.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }
}
