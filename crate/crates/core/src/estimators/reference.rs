use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::nn::Matrix;
use crate::rng::Rng;

/// Family used when a reference distribution is fitted to a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceFamily {
    #[default]
    Gaussian,
    UniformBox,
}

/// An arbitrary product distribution `Q` that reference samples `X′`, `Y′`
/// are drawn from, independently of the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ReferenceDistribution {
    UniformBox { low: Vec<f64>, high: Vec<f64> },
    Gaussian { mean: Vec<f64>, variance: Vec<f64> },
}

impl ReferenceDistribution {
    pub fn gaussian(mean: Vec<f64>, variance: Vec<f64>) -> Result<Self> {
        if mean.len() != variance.len() || mean.is_empty() {
            return Err(invalid("gaussian reference needs matching nonempty mean/variance"));
        }
        if variance.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(invalid(format!("gaussian reference variance must be positive: {variance:?}")));
        }
        Ok(Self::Gaussian { mean, variance })
    }

    pub fn uniform_box(low: Vec<f64>, high: Vec<f64>) -> Result<Self> {
        if low.len() != high.len() || low.is_empty() {
            return Err(invalid("uniform reference needs matching nonempty bounds"));
        }
        if low.iter().zip(&high).any(|(l, h)| !(h > l)) {
            return Err(invalid("uniform reference needs low < high in every dimension"));
        }
        Ok(Self::UniformBox { low, high })
    }

    /// Fits `family` to the columns of `samples`: moment-matched for the
    /// Gaussian, the observed range widened by 1% per side for the box.
    pub fn fit(family: ReferenceFamily, samples: &Matrix) -> Result<Self> {
        let n = samples.rows() as f64;
        if samples.rows() < 2 {
            return Err(invalid("need at least 2 samples to fit a reference"));
        }
        let cols = samples.cols();
        match family {
            ReferenceFamily::Gaussian => {
                let mut mean = Vec::with_capacity(cols);
                let mut var = Vec::with_capacity(cols);
                for c in 0..cols {
                    let v = samples.col_values(c);
                    let m = v.iter().sum::<f64>() / n;
                    let s = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
                    mean.push(m);
                    var.push(s.max(1e-12));
                }
                Self::gaussian(mean, var)
            }
            ReferenceFamily::UniformBox => {
                let mut low = Vec::with_capacity(cols);
                let mut high = Vec::with_capacity(cols);
                for c in 0..cols {
                    let v = samples.col_values(c);
                    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let pad = 0.01 * (hi - lo).max(1e-9);
                    low.push(lo - pad);
                    high.push(hi + pad);
                }
                Self::uniform_box(low, high)
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::UniformBox { low, .. } => low.len(),
            Self::Gaussian { mean, .. } => mean.len(),
        }
    }

    pub fn sample(&self, rng: &mut Rng, n: usize) -> Matrix {
        let d = self.dim();
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            for c in 0..d {
                data.push(match self {
                    Self::UniformBox { low, high } => low[c] + (high[c] - low[c]) * rng.uniform(),
                    Self::Gaussian { mean, variance } => mean[c] + variance[c].sqrt() * rng.gaussian(),
                });
            }
        }
        Matrix::from_vec(n, d, data).expect("shape by construction")
    }

    /// Fails if any sample lies outside the reference support.
    pub fn check_covers(&self, samples: &Matrix) -> Result<()> {
        if samples.cols() != self.dim() {
            return Err(invalid(format!(
                "reference has dimension {}, samples have {}",
                self.dim(),
                samples.cols()
            )));
        }
        if let Self::UniformBox { low, high } = self {
            for r in 0..samples.rows() {
                for (c, v) in samples.row(r).iter().enumerate() {
                    if *v < low[c] || *v > high[c] {
                        return Err(Error::Estimation(format!(
                            "reference support [{}, {}] in dimension {c} does not cover sample {v} (row {r})",
                            low[c], high[c]
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}
