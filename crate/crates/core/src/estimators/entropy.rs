//! Entropy-based (DINE-style) estimation: `I(X;Z) = h(Z) − h(Z|X)`, with each
//! differential entropy written as a cross-entropy against a reference `Q`
//! minus a KL term. The cross-entropies cancel, leaving
//!
//! `I(X;Z) = D(P_XZ ‖ P_X × Q) − D(P_Z ‖ Q)`,
//!
//! and both divergences are estimated with the DV bound by separate critics.

use super::dv::log_mean_exp;
use super::{mean, Objective, StackedPass};
use super::reference::ReferenceDistribution;
use crate::error::{invalid, Result};
use crate::nn::{Matrix, Network};
use crate::rng::Rng;

/// DV ascent gradient with respect to critic outputs: `1/B` on the `P`
/// samples and `−softmax(T_Q)` on the `Q` samples.
fn dv_output_grads(tp: &[f64], tq: &[f64]) -> Vec<f64> {
    let lse = log_mean_exp(tq) + (tq.len() as f64).ln();
    let mut g = vec![1.0 / tp.len() as f64; tp.len()];
    g.extend(tq.iter().map(|t| -(t - lse).exp()));
    g
}

/// Critics are `[critic_z, critic_xz]` with inputs of width 1 and 2.
///
/// Each critic ascends its own DV bound. `input_grads` (`[x, z]`) are the
/// gradients of the MI estimate itself, with reference samples held fixed.
pub fn entropy_based_objective(
    critic_z: &Network,
    critic_xz: &Network,
    x: &Matrix,
    z: &Matrix,
    reference: &ReferenceDistribution,
    rng: &mut Rng,
) -> Result<Objective> {
    if x.rows() != z.rows() || x.rows() == 0 {
        return Err(invalid("x and z batches must be nonempty and equal-sized"));
    }
    reference.check_covers(z)?;
    let b = x.rows();
    let zr = reference.sample(rng, b);

    let joint = Matrix::hstack(&[x, z])?;
    let negatives = Matrix::hstack(&[x, &zr])?;
    let pass_xz = StackedPass::new(critic_xz, &[&joint, &negatives])?;
    let (tj, tn) = (pass_xz.outputs(0), pass_xz.outputs(1));
    let d_joint = mean(tj) - log_mean_exp(tn);

    let pass_z = StackedPass::new(critic_z, &[z, &zr])?;
    let (tz, tzr) = (pass_z.outputs(0), pass_z.outputs(1));
    let d_marginal = mean(tz) - log_mean_exp(tzr);

    let (g_xz, parts_xz) = pass_xz.backward(critic_xz, dv_output_grads(tj, tn))?;
    let (g_z, parts_z) = pass_z.backward(critic_z, dv_output_grads(tz, tzr))?;

    // d estimate / d inputs: + from the joint divergence, − from the marginal one.
    let mut gx = Matrix::zeros(b, 1);
    let mut gz = Matrix::zeros(b, 1);
    for i in 0..b {
        gx.set(i, 0, parts_xz[0].get(i, 0) + parts_xz[1].get(i, 0));
        gz.set(i, 0, parts_xz[0].get(i, 1) - parts_z[0].get(i, 0));
    }
    Ok(Objective {
        estimate: d_joint - d_marginal,
        critic_grads: vec![g_z, g_xz],
        input_grads: vec![gx, gz],
    })
}
