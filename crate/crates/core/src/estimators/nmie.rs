use super::chi2::{chi2_upper_bound, chi_square_mi_lower};
use super::dv::{dv_estimate, mine_objective, smile_estimate, smile_objective, MineEmaState};
use super::entropy::entropy_based_objective;
use super::infonce::infonce_objective;
use super::reference::ReferenceDistribution;
use super::{mean, shuffle_marginals, EstimatorSpec, Method, Objective};
use crate::error::{invalid, numeric, Result};
use crate::nn::{adam_step, clip_gradient_norm, init_network, AdamState, Gradients, Matrix, Network};
use crate::rng::Rng;

const EVAL_CHUNK_ROWS: usize = 8192;
const INFONCE_EVAL_CHUNK: usize = 256;

/// Neural MI estimator: the critic network(s) of one method with their
/// optimizer state.
///
/// Critics see inputs divided by fixed scales (`x / x_scale`, `z / z_scale`)
/// so that their first layer operates on unit-order values whatever the SNR.
/// MI is invariant under this rescaling.
#[derive(Debug, Clone)]
pub struct Nmie {
    spec: EstimatorSpec,
    critics: Vec<Network>,
    optimizers: Vec<AdamState>,
    ema: MineEmaState,
    x_scale: f64,
    z_scale: f64,
}

/// One evaluation of the training surrogate on a batch.
#[derive(Debug, Clone)]
pub struct NmieStep {
    pub estimate: f64,
    /// Ascent directions, one per critic.
    pub critic_grads: Vec<Gradients>,
    /// Gradient of the input-side surrogate with respect to each `x_i`,
    /// holding `z` fixed.
    pub grad_x: Vec<f64>,
    /// Gradient of the input-side surrogate with respect to each `z_i`.
    pub grad_z: Vec<f64>,
}

impl Nmie {
    /// Builds critics with the given hidden widths.
    pub fn new(spec: EstimatorSpec, hidden: &[usize], x_scale: f64, z_scale: f64, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        if !(x_scale > 0.0 && z_scale > 0.0) {
            return Err(invalid("critic input scales must be positive"));
        }
        let input_dims: &[usize] = match spec.method {
            Method::EntropyBased => &[1, 2],
            _ => &[2],
        };
        let mut critics = Vec::new();
        for &d in input_dims {
            let mut dims = vec![d];
            dims.extend_from_slice(hidden);
            dims.push(1);
            critics.push(init_network(&dims, rng)?);
        }
        let optimizers = critics.iter().map(AdamState::new).collect();
        Ok(Self {
            spec,
            critics,
            optimizers,
            ema: MineEmaState::default(),
            x_scale,
            z_scale,
        })
    }

    pub fn spec(&self) -> &EstimatorSpec {
        &self.spec
    }

    pub fn critics(&self) -> &[Network] {
        &self.critics
    }

    pub fn ema_state(&self) -> &MineEmaState {
        &self.ema
    }

    fn scaled(&self, x: &Matrix, z: &Matrix) -> Result<(Matrix, Matrix)> {
        if x.cols() != 1 || z.cols() != 1 || x.rows() != z.rows() {
            return Err(invalid("estimator expects equal-length B x 1 batches"));
        }
        Ok((x.map(|v| v / self.x_scale), z.map(|v| v / self.z_scale)))
    }

    /// Evaluates the surrogate and its gradients on a batch. Updates the
    /// MINE moving average; does not touch critic parameters.
    pub fn step(&mut self, x: &Matrix, z: &Matrix, rng: &mut Rng) -> Result<NmieStep> {
        let (xs, zs) = self.scaled(x, z)?;
        let b = xs.rows();
        let (estimate, critic_grads, gx, gz) = match self.spec.method {
            Method::Mine | Method::Smile => {
                let shuffled = shuffle_marginals(&xs, &zs, rng)?;
                let joint = Matrix::hstack(&[&xs, &zs])?;
                let marg = Matrix::hstack(&[&shuffled.x, &shuffled.z])?;
                let o: Objective = if self.spec.method == Method::Mine {
                    mine_objective(&self.critics[0], &joint, &marg, &mut self.ema, self.spec.ema_rate)?
                } else {
                    smile_objective(&self.critics[0], &joint, &marg, self.spec.tau)?
                };
                let (gj, gm) = (&o.input_grads[0], &o.input_grads[1]);
                let mut gx = vec![0.0; b];
                let mut gz = vec![0.0; b];
                for i in 0..b {
                    gx[i] = gj.get(i, 0) + gm.get(i, 0);
                    gz[i] += gj.get(i, 1);
                    gz[shuffled.permutation[i]] += gm.get(i, 1);
                }
                (o.estimate, o.critic_grads, gx, gz)
            }
            Method::InfoNce => {
                let o = infonce_objective(&self.critics[0], &xs, &zs)?;
                let gx = o.input_grads[0].data().to_vec();
                let gz = o.input_grads[1].data().to_vec();
                (o.estimate, o.critic_grads, gx, gz)
            }
            Method::ChiSquare => {
                let qx = ReferenceDistribution::fit(self.spec.reference, &xs)?;
                let qz = ReferenceDistribution::fit(self.spec.reference, &zs)?;
                let o = chi_square_mi_lower(
                    &self.critics[0],
                    &xs,
                    &zs,
                    &qx,
                    &qz,
                    self.spec.alpha,
                    self.spec.hist_bins,
                    rng,
                )?;
                let gx = o.input_grads[0].data().to_vec();
                let gz = o.input_grads[1].data().to_vec();
                (o.estimate, o.critic_grads, gx, gz)
            }
            Method::EntropyBased => {
                let qz = ReferenceDistribution::fit(self.spec.reference, &zs)?;
                let o = entropy_based_objective(&self.critics[0], &self.critics[1], &xs, &zs, &qz, rng)?;
                let gx = o.input_grads[0].data().to_vec();
                let gz = o.input_grads[1].data().to_vec();
                (o.estimate, o.critic_grads, gx, gz)
            }
        };
        Ok(NmieStep {
            estimate,
            critic_grads,
            grad_x: gx.into_iter().map(|g| g / self.x_scale).collect(),
            grad_z: gz.into_iter().map(|g| g / self.z_scale).collect(),
        })
    }

    /// Descends `−surrogate` on every critic: clip to `max_norm`, then Adam.
    pub fn apply(&mut self, step: &NmieStep, lr: f64, max_norm: f64) -> Result<()> {
        if step.critic_grads.len() != self.critics.len() {
            return Err(invalid("step does not belong to this estimator"));
        }
        let mut losses = Vec::with_capacity(self.critics.len());
        for g in &step.critic_grads {
            if !g.is_finite() {
                return Err(numeric("non-finite critic gradient"));
            }
            let mut loss = g.clone();
            loss.scale(-1.0);
            clip_gradient_norm(&mut loss, max_norm);
            losses.push(loss);
        }
        for ((net, opt), g) in self.critics.iter_mut().zip(&mut self.optimizers).zip(&losses) {
            adam_step(net, g, opt, lr)?;
        }
        Ok(())
    }

    /// MI estimate on an evaluation set, without gradients. Large sets are
    /// pushed through the critics in chunks.
    pub fn estimate(&self, x: &Matrix, z: &Matrix, rng: &mut Rng) -> Result<f64> {
        let (xs, zs) = self.scaled(x, z)?;
        if xs.rows() < 2 {
            return Err(invalid("evaluation needs at least 2 samples"));
        }
        let est = match self.spec.method {
            Method::Mine | Method::Smile => {
                let shuffled = shuffle_marginals(&xs, &zs, rng)?;
                let tj = forward_chunked(&self.critics[0], &Matrix::hstack(&[&xs, &zs])?)?;
                let tm = forward_chunked(&self.critics[0], &Matrix::hstack(&[&shuffled.x, &shuffled.z])?)?;
                if self.spec.method == Method::Mine {
                    dv_estimate(&tj, &tm)
                } else {
                    smile_estimate(&tj, &tm, self.spec.tau)
                }
            }
            Method::InfoNce => {
                let n = xs.rows();
                let mut values = Vec::new();
                let mut start = 0;
                while start + 2 <= n {
                    let end = (start + INFONCE_EVAL_CHUNK).min(n);
                    let o = infonce_objective(&self.critics[0], &xs.slice_rows(start, end), &zs.slice_rows(start, end))?;
                    values.push(o.estimate);
                    start = end;
                }
                mean(&values)
            }
            Method::ChiSquare => {
                let qx = ReferenceDistribution::fit(self.spec.reference, &xs)?;
                let qz = ReferenceDistribution::fit(self.spec.reference, &zs)?;
                qx.check_covers(&xs)?;
                qz.check_covers(&zs)?;
                let n = xs.rows();
                let xr = qx.sample(rng, n);
                let zr = qz.sample(rng, n);
                let tj = forward_chunked(&self.critics[0], &Matrix::hstack(&[&xs, &zs])?)?;
                let tr = forward_chunked(&self.critics[0], &Matrix::hstack(&[&xr, &zr])?)?;
                let alpha = self.spec.alpha;
                let mean_exp = tr.iter().map(|t| t.exp()).sum::<f64>() / n as f64;
                mean(&tj) - mean_exp / alpha - alpha.ln() + 1.0
                    - chi2_upper_bound(xs.data(), xr.data(), self.spec.hist_bins)?
                    - chi2_upper_bound(zs.data(), zr.data(), self.spec.hist_bins)?
            }
            Method::EntropyBased => {
                let qz = ReferenceDistribution::fit(self.spec.reference, &zs)?;
                let zr = qz.sample(rng, zs.rows());
                let tj = forward_chunked(&self.critics[1], &Matrix::hstack(&[&xs, &zs])?)?;
                let tn = forward_chunked(&self.critics[1], &Matrix::hstack(&[&xs, &zr])?)?;
                let tz = forward_chunked(&self.critics[0], &zs)?;
                let tzr = forward_chunked(&self.critics[0], &zr)?;
                dv_estimate(&tj, &tn) - dv_estimate(&tz, &tzr)
            }
        };
        if !est.is_finite() {
            return Err(numeric(format!("non-finite {} estimate", self.spec.method)));
        }
        Ok(est)
    }
}

fn forward_chunked(net: &Network, input: &Matrix) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(input.rows());
    let mut start = 0;
    while start < input.rows() {
        let end = (start + EVAL_CHUNK_ROWS).min(input.rows());
        out.extend_from_slice(net.forward(&input.slice_rows(start, end))?.data());
        start = end;
    }
    Ok(out)
}
