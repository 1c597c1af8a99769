//! InfoNCE contrastive bound. Structurally capped at `ln K`.

use super::dv::log_mean_exp;
use super::{Objective, StackedPass};
use crate::error::{invalid, Result};
use crate::nn::{Matrix, Network};

/// All `K²` critic inputs `[x_j, z_i]`, row `i * K + j`.
fn all_pairs(x: &Matrix, z: &Matrix) -> Result<Matrix> {
    let k = x.rows();
    let mut rows = Vec::with_capacity(k * k * (x.cols() + z.cols()));
    for i in 0..k {
        for j in 0..k {
            rows.extend_from_slice(x.row(j));
            rows.extend_from_slice(z.row(i));
        }
    }
    Matrix::from_vec(k * k, x.cols() + z.cols(), rows)
}

/// InfoNCE value from a `K × K` score matrix `f[i][j] = f(x_j, z_i)`.
pub fn infonce_estimate(scores: &Matrix) -> f64 {
    let k = scores.rows();
    (0..k)
        .map(|i| scores.get(i, i) - log_mean_exp(scores.row(i)))
        .sum::<f64>()
        / k as f64
}

/// InfoNCE on `K` joint samples. Input gradients are returned as `[x, z]`.
pub fn infonce_objective(critic: &Network, x: &Matrix, z: &Matrix) -> Result<Objective> {
    let k = x.rows();
    if k < 2 {
        return Err(invalid(format!("InfoNCE needs K >= 2 samples, got {k}")));
    }
    if z.rows() != k {
        return Err(invalid("x and z batches differ in size"));
    }
    let pairs = all_pairs(x, z)?;
    let pass = StackedPass::new(critic, &[&pairs])?;
    let scores = Matrix::from_vec(k, k, pass.outputs(0).to_vec())?;
    let estimate = infonce_estimate(&scores);

    // d/d f[i][j] = (δ_ij − softmax_j f[i][·]) / K
    let kf = k as f64;
    let mut grads = Vec::with_capacity(k * k);
    for i in 0..k {
        let row = scores.row(i);
        let lse = log_mean_exp(row) + kf.ln();
        for (j, &f) in row.iter().enumerate() {
            let delta = if i == j { 1.0 } else { 0.0 };
            grads.push((delta - (f - lse).exp()) / kf);
        }
    }
    let (critic_grads, mut parts) = pass.backward(critic, grads)?;
    let pair_grads = parts.pop().unwrap();
    let (dx, dz) = (x.cols(), z.cols());
    let mut gx = Matrix::zeros(k, dx);
    let mut gz = Matrix::zeros(k, dz);
    for i in 0..k {
        for j in 0..k {
            let g = pair_grads.row(i * k + j);
            for c in 0..dx {
                gx.set(j, c, gx.get(j, c) + g[c]);
            }
            for c in 0..dz {
                gz.set(i, c, gz.get(i, c) + g[dx + c]);
            }
        }
    }
    Ok(Objective {
        estimate,
        critic_grads: vec![critic_grads],
        input_grads: vec![gx, gz],
    })
}
