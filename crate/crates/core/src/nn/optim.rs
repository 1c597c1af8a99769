use super::network::{Gradients, Network};
use crate::error::{invalid, numeric, Result};

/// Adam optimizer state for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Gradients,
    pub second_moment: Gradients,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Fresh state with `beta1 = 0.9`, `beta2 = 0.999`, `epsilon = 1e-8`.
    pub fn new(net: &Network) -> Self {
        Self {
            first_moment: Gradients::zeros_like(net),
            second_moment: Gradients::zeros_like(net),
            step_count: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update, in place.
///
/// Non-finite gradients are rejected before anything is modified, so the
/// caller may skip the step and carry on.
pub fn adam_step(net: &mut Network, grads: &Gradients, state: &mut AdamState, lr: f64) -> Result<()> {
    if !(lr >= 0.0) || !lr.is_finite() {
        return Err(invalid(format!("learning rate must be finite and >= 0, got {lr}")));
    }
    if !grads.is_finite() {
        return Err(numeric("non-finite gradient"));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let step = AdamStep {
        b1: state.beta1,
        b2: state.beta2,
        c1: 1.0 - state.beta1.powi(t),
        c2: 1.0 - state.beta2.powi(t),
        eps: state.epsilon,
        lr,
    };
    for k in 0..net.num_layers() {
        step.apply(
            net.weights_mut()[k].data_mut(),
            grads.weights[k].data(),
            state.first_moment.weights[k].data_mut(),
            state.second_moment.weights[k].data_mut(),
        );
        step.apply(
            &mut net.biases_mut()[k],
            &grads.biases[k],
            &mut state.first_moment.biases[k],
            &mut state.second_moment.biases[k],
        );
    }
    Ok(())
}

struct AdamStep {
    b1: f64,
    b2: f64,
    c1: f64,
    c2: f64,
    eps: f64,
    lr: f64,
}

impl AdamStep {
    fn apply(&self, params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64]) {
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = self.b1 * *m + (1.0 - self.b1) * g;
            *v = self.b2 * *v + (1.0 - self.b2) * g * g;
            let m_hat = *m / self.c1;
            let v_hat = *v / self.c2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Rescales `grads` so its global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_gradient_norm(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads.norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_network, Matrix};
    use crate::rng::Rng;

    fn scalar_net(p: f64) -> Network {
        Network::from_parts(vec![Matrix::from_vec(1, 1, vec![p]).unwrap()], vec![vec![0.0]]).unwrap()
    }

    fn scalar_grad(g: f64) -> Gradients {
        Gradients {
            weights: vec![Matrix::from_vec(1, 1, vec![g]).unwrap()],
            biases: vec![vec![0.0]],
        }
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut net = init_network(&[2, 4, 1], &mut Rng::new(0)).unwrap();
        let before = net.clone();
        let mut state = AdamState::new(&net);
        adam_step(&mut net, &Gradients::zeros_like(&before), &mut state, 1e-3).unwrap();
        assert_eq!(net, before);
        assert_eq!(state.step_count, 1);
    }

    #[test]
    fn zero_learning_rate_leaves_parameters() {
        let mut net = scalar_net(1.5);
        let mut state = AdamState::new(&net);
        adam_step(&mut net, &scalar_grad(0.7), &mut state, 0.0).unwrap();
        assert_eq!(net.weights()[0].data(), &[1.5]);
    }

    #[test]
    fn three_step_trace_with_constant_gradient() {
        // Hand trace, g = 0.5, lr = 1e-4, beta = (0.9, 0.999), eps = 1e-8:
        //   t=1: m = 0.05,     v = 2.5e-4,       m_hat = 0.5, v_hat = 0.25
        //   t=2: m = 0.095,    v = 4.9975e-4,    m_hat = 0.5, v_hat = 0.25
        //   t=3: m = 0.1355,   v = 7.49250e-4,   m_hat = 0.5, v_hat = 0.25
        // each step moves the parameter by lr * 0.5 / (0.5 + 1e-8).
        let lr = 1e-4;
        let delta = lr * 0.5 / (0.5 + 1e-8);
        let mut net = scalar_net(1.0);
        let mut state = AdamState::new(&net);
        let expected_m = [0.05, 0.095, 0.1355];
        let expected_v = [2.5e-4, 4.9975e-4, 7.4925025e-4];
        for t in 0..3 {
            adam_step(&mut net, &scalar_grad(0.5), &mut state, lr).unwrap();
            let p = net.weights()[0].get(0, 0);
            assert!((p - (1.0 - (t as f64 + 1.0) * delta)).abs() < 1e-15, "step {t}: {p}");
            assert!((state.first_moment.weights[0].get(0, 0) - expected_m[t]).abs() < 1e-15);
            assert!((state.second_moment.weights[0].get(0, 0) - expected_v[t]).abs() < 1e-15);
        }
        assert_eq!(state.step_count, 3);
    }

    #[test]
    fn non_finite_gradient_is_rejected_untouched() {
        let mut net = scalar_net(1.0);
        let mut state = AdamState::new(&net);
        let err = adam_step(&mut net, &scalar_grad(f64::NAN), &mut state, 1e-3);
        assert!(matches!(err, Err(crate::Error::Numeric(_))));
        assert_eq!(state.step_count, 0);
        assert_eq!(net.weights()[0].data(), &[1.0]);
    }

    #[test]
    fn clipping() {
        let mut g = Gradients {
            weights: vec![Matrix::from_vec(1, 2, vec![0.6, 0.0]).unwrap()],
            biases: vec![vec![0.8]],
        };
        let before = clip_gradient_norm(&mut g, 0.2);
        assert!((before - 1.0).abs() < 1e-15);
        assert!((g.norm() - 0.2).abs() < 1e-15);

        let mut small = g.clone();
        small.scale(0.5); // norm 0.1
        let copy = small.clone();
        clip_gradient_norm(&mut small, 0.2);
        assert_eq!(small, copy);

        let mut zero = g.clone();
        zero.scale(0.0);
        clip_gradient_norm(&mut zero, 0.2);
        assert!(zero.values().all(|&v| v == 0.0));
    }
}
