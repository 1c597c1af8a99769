//! Neural mutual-information estimators.
//!
//! Each estimator turns critic outputs on samples of `(X, Z)` into a scalar
//! MI estimate (nats) plus a *training surrogate*: the quantity whose
//! gradient the critics ascend and, through the inputs, the quantity the
//! input transformer ascends. For MINE the surrogate is the DV bound with an
//! EMA-corrected denominator; for SMILE it is the Jensen–Shannon f-GAN bound
//! while the reported value is the clipped DV bound.
//!
//! The functions in the submodules work on raw critic inputs. [`Nmie`]
//! bundles critics, optimizer state and input scaling for the capacity loop.

mod chi2;
mod dv;
mod entropy;
mod infonce;
mod nmie;
mod reference;

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Result};
use crate::nn::{Gradients, Matrix};
use crate::rng::Rng;

pub use chi2::{chi2_divergences, chi2_up, chi2_upper_bound, chi_square_mi_lower};
pub use dv::{dv_estimate, js_bound, log_mean_exp, mine_objective, smile_estimate, smile_objective, MineEmaState};
pub use entropy::entropy_based_objective;
pub use infonce::{infonce_estimate, infonce_objective};
pub use nmie::{Nmie, NmieStep};
pub use reference::{ReferenceDistribution, ReferenceFamily};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mine,
    Smile,
    #[serde(rename = "infonce")]
    InfoNce,
    ChiSquare,
    EntropyBased,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Mine,
        Method::Smile,
        Method::InfoNce,
        Method::ChiSquare,
        Method::EntropyBased,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mine => "mine",
            Method::Smile => "smile",
            Method::InfoNce => "infonce",
            Method::ChiSquare => "chi_square",
            Method::EntropyBased => "entropy_based",
        }
    }

    /// Number of critic networks the method trains.
    pub fn num_critics(self) -> usize {
        match self {
            Method::EntropyBased => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                invalid(format!(
                    "unknown estimator '{s}' (expected one of mine, smile, infonce, chi_square, entropy_based)"
                ))
            })
    }
}

/// Which MI bound to optimize, with its method-specific constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub method: Method,
    /// SMILE clip half-width on the log density ratio.
    pub tau: f64,
    /// TUBA constant in the χ² lower bound.
    pub alpha: f64,
    /// MINE moving-average rate for the gradient denominator.
    pub ema_rate: f64,
    /// Histogram bins for the χ² correction terms.
    pub hist_bins: usize,
    /// Reference family for the χ² and entropy-based methods.
    pub reference: ReferenceFamily,
}

impl EstimatorSpec {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            tau: 0.2,
            alpha: 1.0,
            ema_rate: 0.99,
            hist_bins: 100,
            reference: ReferenceFamily::Gaussian,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(invalid(format!("tau must be > 0, got {}", self.tau)));
        }
        if !(self.alpha > 0.0) {
            return Err(invalid(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.ema_rate > 0.0 && self.ema_rate < 1.0) {
            return Err(invalid(format!("ema_rate must lie in (0, 1), got {}", self.ema_rate)));
        }
        if self.hist_bins < 2 {
            return Err(invalid(format!("hist_bins must be >= 2, got {}", self.hist_bins)));
        }
        Ok(())
    }
}

/// An estimate together with gradients of the training surrogate.
///
/// `critic_grads` are ascent directions, one per critic network.
/// `input_grads` are gradients with respect to the input matrices the
/// objective function received, in the documented order of that function.
#[derive(Debug, Clone)]
pub struct Objective {
    pub estimate: f64,
    pub critic_grads: Vec<Gradients>,
    pub input_grads: Vec<Matrix>,
}

/// Product-of-marginals pairs `(x_i, z_{π(i)})` for a uniform permutation `π`.
#[derive(Debug, Clone)]
pub struct ShuffledPairs {
    pub x: Matrix,
    pub z: Matrix,
    pub permutation: Vec<usize>,
}

pub fn shuffle_marginals(x: &Matrix, z: &Matrix, rng: &mut Rng) -> Result<ShuffledPairs> {
    if x.rows() != z.rows() {
        return Err(invalid("x and z batches differ in size"));
    }
    if x.rows() < 2 {
        return Err(invalid(format!("shuffling needs at least 2 samples, got {}", x.rows())));
    }
    let permutation = rng.permutation(x.rows());
    Ok(ShuffledPairs {
        x: x.clone(),
        z: z.gather_rows(&permutation),
        permutation,
    })
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub(crate) fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(crate::error::numeric(format!("non-finite {what}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("nwj".parse::<Method>().is_err());
    }

    #[test]
    fn spec_defaults_and_validation() {
        let s = EstimatorSpec::new(Method::Smile);
        assert_eq!((s.tau, s.alpha, s.ema_rate, s.hist_bins), (0.2, 1.0, 0.99, 100));
        s.validate().unwrap();
        let mut bad = s.clone();
        bad.ema_rate = 1.0;
        assert!(bad.validate().is_err());
        let mut bad = s.clone();
        bad.hist_bins = 1;
        assert!(bad.validate().is_err());
        let mut bad = s;
        bad.tau = 0.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn shuffle_preserves_marginals() {
        let x = Matrix::column((0..50).map(f64::from).collect());
        let z = Matrix::column((0..50).map(|i| f64::from(i) * 10.0).collect());
        let s = shuffle_marginals(&x, &z, &mut Rng::new(3)).unwrap();
        assert_eq!(s.x, x);
        let mut zs = s.z.data().to_vec();
        zs.sort_by(f64::total_cmp);
        assert_eq!(zs, z.data());
        for (i, &p) in s.permutation.iter().enumerate() {
            assert_eq!(s.z.get(i, 0), z.get(p, 0));
        }
    }

    #[test]
    fn shuffle_of_two_is_a_fair_coin() {
        let x = Matrix::column(vec![0.0, 1.0]);
        let mut swaps = 0;
        let trials = 4000;
        for seed in 0..trials {
            let s = shuffle_marginals(&x, &x, &mut Rng::new(seed)).unwrap();
            if s.permutation == [1, 0] {
                swaps += 1;
            }
        }
        let freq = swaps as f64 / trials as f64;
        // 4 standard errors of a fair coin at n = 4000.
        assert!((freq - 0.5).abs() < 4.0 * (0.25f64 / trials as f64).sqrt(), "{freq}");
    }

    #[test]
    fn shuffle_needs_two_samples() {
        let x = Matrix::column(vec![1.0]);
        assert!(shuffle_marginals(&x, &x, &mut Rng::new(0)).is_err());
    }
}

/// A critic evaluated on several input sets stacked into one batch.
pub(crate) struct StackedPass {
    pass: crate::nn::ForwardPass,
    sizes: Vec<usize>,
}

impl StackedPass {
    pub(crate) fn new(critic: &crate::nn::Network, parts: &[&Matrix]) -> Result<Self> {
        if critic.output_dim() != 1 {
            return Err(invalid("critic networks must have a scalar output"));
        }
        let stacked = Matrix::vstack(parts)?;
        let pass = critic.forward_pass(&stacked)?;
        check_finite(pass.output().data(), "critic output")?;
        Ok(Self {
            pass,
            sizes: parts.iter().map(|m| m.rows()).collect(),
        })
    }

    /// Critic outputs of input set `k`.
    pub(crate) fn outputs(&self, k: usize) -> &[f64] {
        let start: usize = self.sizes[..k].iter().sum();
        &self.pass.output().data()[start..start + self.sizes[k]]
    }

    /// Backpropagates per-sample output gradients (concatenated in part
    /// order). Returns parameter gradients and per-part input gradients.
    pub(crate) fn backward(
        &self,
        critic: &crate::nn::Network,
        output_grads: Vec<f64>,
    ) -> Result<(Gradients, Vec<Matrix>)> {
        let g = Matrix::column(output_grads);
        let (grads, input) = critic.backward_pass(&self.pass, &g, true)?;
        let input = input.expect("input gradient requested");
        let mut parts = Vec::with_capacity(self.sizes.len());
        let mut start = 0;
        for &n in &self.sizes {
            parts.push(input.slice_rows(start, start + n));
            start += n;
        }
        Ok((grads, parts))
    }
}
