//! Donsker–Varadhan style estimators: MINE and SMILE.

use super::{check_finite, mean, Objective, StackedPass};
use crate::error::{invalid, numeric, Result};
use crate::nn::{Matrix, Network};

/// `ln(mean(exp(v)))`, computed with the max subtracted.
pub fn log_mean_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = v.iter().map(|x| (x - m).exp()).sum();
    m + (s / v.len() as f64).ln()
}

/// DV bound value `mean(T_P) − ln mean(exp(T_Q))`.
pub fn dv_estimate(t_joint: &[f64], t_marginal: &[f64]) -> f64 {
    mean(t_joint) - log_mean_exp(t_marginal)
}

/// Moving average of `mean(exp(T))` over product-of-marginals batches,
/// kept in log space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MineEmaState {
    log_denominator: f64,
    initialized: bool,
}

impl Default for MineEmaState {
    fn default() -> Self {
        Self {
            log_denominator: 0.0,
            initialized: false,
        }
    }
}

impl MineEmaState {
    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    pub fn denominator(&self) -> f64 {
        self.log_denominator.exp()
    }

    pub fn log_denominator(&self) -> f64 {
        self.log_denominator
    }

    /// Folds a batch value `ln mean(exp(T))` into the average.
    pub fn update(&mut self, log_batch_mean: f64, rate: f64) {
        if self.initialized {
            let a = rate.ln() + self.log_denominator;
            let b = (1.0 - rate).ln() + log_batch_mean;
            let m = a.max(b);
            self.log_denominator = m + ((a - m).exp() + (b - m).exp()).ln();
        } else {
            self.log_denominator = log_batch_mean;
            self.initialized = true;
        }
    }
}

fn check_pair(joint: &Matrix, other: &Matrix) -> Result<()> {
    if joint.rows() == 0 || joint.rows() != other.rows() {
        return Err(invalid(format!(
            "joint and marginal batches must be nonempty and equal-sized ({} vs {})",
            joint.rows(),
            other.rows()
        )));
    }
    Ok(())
}

/// Largest allowed gap, in log space, between the MINE moving average and
/// the current batch denominator.
pub const EMA_LOG_BAND: f64 = 0.1;

/// Weight of the `(ln mean exp T)²` penalty in the MINE critic objective.
pub const OFFSET_PENALTY: f64 = 0.1;

/// MINE: DV bound with an EMA-corrected gradient.
///
/// `joint` and `shuffled` are critic inputs (one pair per row). The reported
/// estimate is the plain batch DV value. The critic gradient of the log term
/// uses the moving-average denominator after folding in this batch, held
/// within [`EMA_LOG_BAND`] of the batch value, plus the gradient of a
/// [`OFFSET_PENALTY`] term on the squared batch denominator; input
/// gradients, returned as `[joint, shuffled]`, are the exact gradient of
/// the batch estimate.
pub fn mine_objective(
    critic: &Network,
    joint: &Matrix,
    shuffled: &Matrix,
    state: &mut MineEmaState,
    ema_rate: f64,
) -> Result<Objective> {
    check_pair(joint, shuffled)?;
    let pass = StackedPass::new(critic, &[joint, shuffled])?;
    let (tj, tm) = (pass.outputs(0), pass.outputs(1));
    let lme = log_mean_exp(tm);
    let estimate = mean(tj) - lme;

    state.update(lme, ema_rate);
    // A stale average lets the critic scale run away; keep it near the batch.
    state.log_denominator = state.log_denominator.clamp(lme - EMA_LOG_BAND, lme + EMA_LOG_BAND);
    let b = tj.len() as f64;
    let weights = |log_denominator: f64| -> Vec<f64> { tm.iter().map(|t| (t - log_denominator).exp() / b).collect() };
    let exact = weights(lme);
    // The bound ignores a constant shift of T; a small penalty on the
    // batch denominator pins the offset near zero.
    let anchor = 1.0 + 2.0 * OFFSET_PENALTY * lme;
    let corrected: Vec<f64> = weights(state.log_denominator)
        .iter()
        .zip(&exact)
        .map(|(c, e)| c + (anchor - 1.0) * e)
        .collect();
    let output_grads = |w: &[f64]| -> Result<Vec<f64>> {
        let mut g = vec![1.0 / b; tj.len()];
        g.extend(w.iter().map(|w| -w));
        check_finite(&g, "MINE gradient")?;
        Ok(g)
    };
    let (critic_grads, _) = pass.backward(critic, output_grads(&corrected)?)?;
    // inputs follow the exact gradient of the reported estimate
    let (_, input_grads) = pass.backward(critic, output_grads(&exact)?)?;
    Ok(Objective {
        estimate,
        critic_grads: vec![critic_grads],
        input_grads,
    })
}

/// SMILE estimate: DV bound with `exp(T)` clamped to `[e^{−τ}, e^{τ}]` on the
/// product-of-marginals term.
pub fn smile_estimate(t_joint: &[f64], t_marginal: &[f64], tau: f64) -> f64 {
    let clipped: Vec<f64> = t_marginal.iter().map(|t| t.clamp(-tau, tau)).collect();
    mean(t_joint) - log_mean_exp(&clipped)
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Jensen–Shannon f-GAN bound `mean(−softplus(−T_P)) − mean(softplus(T_Q))`.
pub fn js_bound(t_joint: &[f64], t_marginal: &[f64]) -> f64 {
    -t_joint.iter().map(|&t| softplus(-t)).sum::<f64>() / t_joint.len() as f64
        - t_marginal.iter().map(|&t| softplus(t)).sum::<f64>() / t_marginal.len() as f64
}

/// SMILE: reports the clipped DV value, trains on the JS bound.
///
/// The clipped DV objective has no gradient pushing `T` down once it exceeds
/// `τ` on marginal samples, so ascending it directly diverges. The critic is
/// therefore fitted with the JS surrogate, whose optimum is the log density
/// ratio, and evaluated with the clipped DV form. Input gradients are
/// returned as `[joint, shuffled]`.
pub fn smile_objective(critic: &Network, joint: &Matrix, shuffled: &Matrix, tau: f64) -> Result<Objective> {
    if !(tau > 0.0) {
        return Err(invalid(format!("tau must be > 0, got {tau}")));
    }
    check_pair(joint, shuffled)?;
    let pass = StackedPass::new(critic, &[joint, shuffled])?;
    let (tj, tm) = (pass.outputs(0), pass.outputs(1));
    let estimate = smile_estimate(tj, tm, tau);
    if !estimate.is_finite() {
        return Err(numeric("non-finite SMILE estimate"));
    }
    let (bj, bm) = (tj.len() as f64, tm.len() as f64);
    let mut grads: Vec<f64> = tj.iter().map(|&t| sigmoid(-t) / bj).collect();
    grads.extend(tm.iter().map(|&t| -sigmoid(t) / bm));
    let (critic_grads, input_grads) = pass.backward(critic, grads)?;
    Ok(Objective {
        estimate,
        critic_grads: vec![critic_grads],
        input_grads,
    })
}
