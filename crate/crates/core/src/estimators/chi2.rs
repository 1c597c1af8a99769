//! χ² machinery: histogram χ² divergences, the χ²-based KL upper bound, and
//! the χ² MI lower bound built on the TUBA form.

use super::{check_finite, mean, Objective, StackedPass};
use super::reference::ReferenceDistribution;
use crate::error::{invalid, numeric, Result};
use crate::nn::{Matrix, Network};
use crate::rng::Rng;

fn histogram(samples: &[f64], lo: f64, width: f64, bins: usize) -> Vec<f64> {
    let mut counts = vec![0.0; bins];
    for &v in samples {
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1.0;
    }
    counts
}

/// `χ²(p || q)` for bin probabilities with a floor on empty `q` bins.
fn chi2_binned(p: &[f64], q: &[f64], q_floor: f64) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, &qi)| pi > 0.0 || qi > 0.0)
        .map(|(&pi, &qi)| {
            let qi = if qi > 0.0 { qi } else { q_floor };
            (pi - qi).powi(2) / qi
        })
        .sum()
}

/// Histogram estimates of `(χ²(P‖Q), χ²(Q‖P))` from two 1-D sample sets.
///
/// Both histograms share equal-width bins over the pooled range widened by
/// 1% per side. An empty bin on the divisor side where the other side has
/// mass is floored to `0.5 / n` of that side.
pub fn chi2_divergences(p: &[f64], q: &[f64], bins: usize) -> Result<(f64, f64)> {
    if p.is_empty() || q.is_empty() {
        return Err(invalid("χ² estimation needs nonempty sample sets"));
    }
    if bins < 2 {
        return Err(invalid(format!("χ² estimation needs >= 2 bins, got {bins}")));
    }
    check_finite(p, "χ² sample")?;
    check_finite(q, "χ² sample")?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in p.iter().chain(q) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = (hi - lo).max(1e-12);
    lo -= 0.01 * span;
    hi += 0.01 * span;
    let width = (hi - lo) / bins as f64;
    let (np, nq) = (p.len() as f64, q.len() as f64);
    let hp: Vec<f64> = histogram(p, lo, width, bins).iter().map(|c| c / np).collect();
    let hq: Vec<f64> = histogram(q, lo, width, bins).iter().map(|c| c / nq).collect();
    Ok((chi2_binned(&hp, &hq, 0.5 / nq), chi2_binned(&hq, &hp, 0.5 / np)))
}

/// The χ² upper bound on KL given `a = χ²(P‖Q)` and `b = χ²(Q‖P)`:
/// `ln(1 + a) − 1.5 a² / ((1 + b)(1 + a)² − 1)`, in nats. The correction is
/// taken as 0 when its denominator falls below `1e-12`.
pub fn chi2_up(a: f64, b: f64) -> f64 {
    let denom = (1.0 + b) * (1.0 + a).powi(2) - 1.0;
    let correction = if denom < 1e-12 { 0.0 } else { 1.5 * a * a / denom };
    (1.0 + a).ln() - correction
}

/// Histogram-based upper bound on `D(P‖Q)` from samples of each.
pub fn chi2_upper_bound(p_samples: &[f64], q_samples: &[f64], bins: usize) -> Result<f64> {
    let (a, b) = chi2_divergences(p_samples, q_samples, bins)?;
    Ok(chi2_up(a, b))
}

/// χ² lower bound on `I(X;Z)`:
///
/// `mean T(x, z) − mean exp(T(x′, z′)) / α − ln α + 1 − χ²_UP(X‖X′) − χ²_UP(Z‖Z′)`
///
/// with `x′`, `z′` drawn independently from `reference`. Only the first two
/// terms carry gradients; the histogram corrections are constants per step.
/// `x` and `z` are `B × 1`. Input gradients are returned as `[x, z]`.
#[allow(clippy::too_many_arguments)]
pub fn chi_square_mi_lower(
    critic: &Network,
    x: &Matrix,
    z: &Matrix,
    reference_x: &ReferenceDistribution,
    reference_z: &ReferenceDistribution,
    alpha: f64,
    bins: usize,
    rng: &mut Rng,
) -> Result<Objective> {
    if !(alpha > 0.0) {
        return Err(invalid(format!("alpha must be > 0, got {alpha}")));
    }
    if x.rows() != z.rows() || x.rows() == 0 {
        return Err(invalid("x and z batches must be nonempty and equal-sized"));
    }
    reference_x.check_covers(x)?;
    reference_z.check_covers(z)?;
    let b = x.rows();
    let xr = reference_x.sample(rng, b);
    let zr = reference_z.sample(rng, b);

    let joint = Matrix::hstack(&[x, z])?;
    let refs = Matrix::hstack(&[&xr, &zr])?;
    let pass = StackedPass::new(critic, &[&joint, &refs])?;
    let (tj, tr) = (pass.outputs(0), pass.outputs(1));
    let exp_r: Vec<f64> = tr.iter().map(|t| t.exp()).collect();
    let mean_exp = mean(&exp_r);
    if !mean_exp.is_finite() {
        return Err(numeric("overflow in exp(T) on reference samples"));
    }
    let corr_x = chi2_upper_bound(x.data(), xr.data(), bins)?;
    let corr_z = chi2_upper_bound(z.data(), zr.data(), bins)?;
    let estimate = mean(tj) - mean_exp / alpha - alpha.ln() + 1.0 - corr_x - corr_z;

    let bf = b as f64;
    let mut grads = vec![1.0 / bf; b];
    grads.extend(exp_r.iter().map(|e| -e / (alpha * bf)));
    let (critic_grads, mut parts) = pass.backward(critic, grads)?;
    parts.truncate(1);
    let gj = parts.pop().unwrap();
    let gx = Matrix::column(gj.col_values(0));
    let gz = Matrix::column(gj.col_values(1));
    Ok(Objective {
        estimate,
        critic_grads: vec![critic_grads],
        input_grads: vec![gx, gz],
    })
}
