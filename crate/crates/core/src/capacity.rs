//! Alternating optimization of the MI estimator and the input transformer.
//!
//! Each round runs three stages:
//!
//! 1. phase 0: the estimator is trained alone on inputs produced by the
//!    untrained transformer;
//! 2. main loop: every iteration draws one batch, evaluates the estimator
//!    once, then updates the estimator (phase 1) and the transformer
//!    (phase 2) from that single evaluation, so each update sees the other
//!    network's parameters as they were before the iteration;
//! 3. final evaluation on fresh samples through the frozen networks.
//!
//! Rounds are independent and run in parallel; aggregation is by round
//! index, so results do not depend on scheduling.

use std::collections::VecDeque;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{ChannelSpec, ConstraintSpec};
use crate::error::{invalid, Error, Result};
use crate::estimators::{EstimatorSpec, Method, Nmie, NmieStep};
use crate::nit::{InputHistogram, InputTransformer, Mode, TransformPass, CALIBRATION_SAMPLES};
use crate::nn::Matrix;
use crate::rng::{sample_gaussian, splitmix64, Rng};
use crate::stats;

/// Consecutive bad steps (non-finite or implausibly large estimate) that
/// abort a round.
pub const DIVERGENCE_PATIENCE: usize = 50;
/// Slack beyond `ln(batch_size)`: estimates outside `±(ln B + margin)` count as bad steps.
pub const DIVERGENCE_MARGIN: f64 = 5.0;
const HISTOGRAM_BINS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub phase0_iters: usize,
    pub max_iters: usize,
    pub grad_clip: f64,
    pub rounds: usize,
    pub convergence_window: usize,
    pub convergence_tol: f64,
    pub seed: u64,
    pub eval_samples: usize,
    pub critic_hidden: Vec<usize>,
    pub nit_hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 256,
            lr: 1e-4,
            phase0_iters: 500,
            max_iters: 20_000,
            grad_clip: 0.2,
            rounds: 10,
            convergence_window: 500,
            convergence_tol: 1e-3,
            seed: 0,
            eval_samples: 100_000,
            critic_hidden: vec![64, 64, 64],
            nit_hidden: vec![64, 64, 64, 64],
        }
    }
}

impl TrainConfig {
    /// Default configuration for `method`: the χ² estimator needs large
    /// batches for its histograms.
    pub fn for_method(method: Method) -> Self {
        let mut c = Self::default();
        if method == Method::ChiSquare {
            c.batch_size = 10_000;
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("batch_size", self.batch_size),
            ("max_iters", self.max_iters),
            ("rounds", self.rounds),
            ("convergence_window", self.convergence_window),
            ("eval_samples", self.eval_samples),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(invalid(format!("{name} must be positive")));
            }
        }
        if self.batch_size < 2 {
            return Err(invalid("batch_size must be at least 2"));
        }
        for (name, v) in [("lr", self.lr), ("grad_clip", self.grad_clip), ("convergence_tol", self.convergence_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.convergence_window >= self.max_iters {
            return Err(invalid(format!(
                "convergence_window ({}) must be smaller than max_iters ({})",
                self.convergence_window, self.max_iters
            )));
        }
        if self.critic_hidden.iter().chain(&self.nit_hidden).any(|&w| w == 0) {
            return Err(invalid("hidden layer widths must be positive"));
        }
        Ok(())
    }

    /// Seed of round `index`.
    pub fn round_seed(&self, index: usize) -> u64 {
        splitmix64(self.seed.wrapping_add(index as u64))
    }
}

/// Moments of the learned input distribution on the evaluation samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputMoments {
    pub mean: f64,
    pub second_moment: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

impl InputMoments {
    pub fn from_samples(x: &[f64]) -> Self {
        let n = x.len() as f64;
        Self {
            mean: x.iter().sum::<f64>() / n,
            second_moment: x.iter().map(|v| v * v).sum::<f64>() / n,
            skewness: stats::skewness(x),
            excess_kurtosis: stats::excess_kurtosis(x),
        }
    }
}

/// Stopping rule of the main loop. With `w = convergence_window`, let `M_t`
/// be the mean of the last `w` training estimates. Training has converged
/// once `M_t` moved by less than `convergence_tol` (max minus min) over the
/// last `w` iterations. Non-finite estimates count as 0.
#[derive(Debug, Clone)]
pub struct ConvergenceMonitor {
    window: usize,
    tol: f64,
    recent: VecDeque<f64>,
    sum: f64,
    means: VecDeque<f64>,
}

impl ConvergenceMonitor {
    pub fn new(window: usize, tol: f64) -> Self {
        assert!(window > 0, "convergence window must be positive");
        Self { window, tol, recent: VecDeque::with_capacity(window + 1), sum: 0.0, means: VecDeque::with_capacity(window + 1) }
    }

    /// Record one estimate; true once the rule is met.
    pub fn push(&mut self, estimate: f64) -> bool {
        let v = if estimate.is_finite() { estimate } else { 0.0 };
        self.recent.push_back(v);
        self.sum += v;
        if self.recent.len() > self.window {
            self.sum -= self.recent.pop_front().unwrap_or(0.0);
        }
        if self.recent.len() < self.window {
            return false;
        }
        self.means.push_back(self.sum / self.window as f64);
        if self.means.len() > self.window {
            self.means.pop_front();
        }
        if self.means.len() < self.window {
            return false;
        }
        let (lo, hi) = self.means.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &m| (lo.min(m), hi.max(m)));
        hi - lo < self.tol
    }
}

/// Outcome of one completed round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub index: usize,
    pub seed: u64,
    /// Final-evaluation estimate on fresh samples, nats.
    pub estimate: f64,
    /// Mean of the training trace over the last convergence window.
    pub train_estimate: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_clock_secs: f64,
    pub trace: Vec<f64>,
    pub input_moments: InputMoments,
    pub histogram: InputHistogram,
}

/// A round that hit the divergence guard or a numeric error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundFailure {
    pub index: usize,
    pub seed: u64,
    pub iterations: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityEstimate {
    /// Final estimates of the completed rounds, in round order.
    pub per_round: Vec<f64>,
    pub mean: f64,
    /// Unbiased sample variance of `per_round`.
    pub variance: f64,
    /// Training trace of the last completed round.
    pub trace: Vec<f64>,
    /// Every completed round met the convergence criterion.
    pub converged: bool,
    /// Learned-input histogram of the last completed round.
    pub histogram: InputHistogram,
    pub rounds: Vec<RoundReport>,
    pub failures: Vec<RoundFailure>,
}

impl CapacityEstimate {
    /// Aggregates completed rounds. Fails when more than half of all rounds
    /// aborted.
    pub fn aggregate(mut rounds: Vec<RoundReport>, mut failures: Vec<RoundFailure>) -> Result<Self> {
        rounds.sort_by_key(|r| r.index);
        failures.sort_by_key(|f| f.index);
        let total = rounds.len() + failures.len();
        if rounds.is_empty() || 2 * failures.len() > total {
            let detail: Vec<String> = failures
                .iter()
                .map(|f| format!("round {} (seed {}) after {} iterations: {}", f.index, f.seed, f.iterations, f.reason))
                .collect();
            return Err(Error::EstimationFailure(format!(
                "{} of {total} rounds aborted: {}",
                failures.len(),
                detail.join("; ")
            )));
        }
        let per_round: Vec<f64> = rounds.iter().map(|r| r.estimate).collect();
        let last = rounds.last().expect("nonempty");
        Ok(Self {
            mean: stats::mean(&per_round),
            variance: stats::unbiased_variance(&per_round),
            trace: last.trace.clone(),
            converged: rounds.iter().all(|r| r.converged),
            histogram: last.histogram.clone(),
            per_round,
            rounds,
            failures,
        })
    }
}

/// Everything one round trains.
#[derive(Debug, Clone)]
pub struct Session {
    pub channel: ChannelSpec,
    pub constraint: ConstraintSpec,
    pub nmie: Nmie,
    pub nit: InputTransformer,
    pub config: TrainConfig,
}

/// Critic input scales `(x_scale, z_scale)` for a constraint: the input
/// amplitude scale and the resulting output standard deviation.
pub fn critic_scales(channel: &ChannelSpec, constraint: &ConstraintSpec) -> (f64, f64) {
    let xs = constraint.amplitude_scale();
    (xs, (xs * xs + channel.noise_variance).sqrt())
}

impl Session {
    /// Fresh networks initialized from `rng`.
    pub fn new(
        channel: ChannelSpec,
        constraint: ConstraintSpec,
        spec: EstimatorSpec,
        config: TrainConfig,
        rng: &mut Rng,
    ) -> Result<Self> {
        config.validate()?;
        constraint.validate()?;
        if !channel.accepts(&constraint) {
            return Err(invalid(format!("constraint {constraint:?} does not match channel {}", channel.kind)));
        }
        let (xs, zs) = critic_scales(&channel, &constraint);
        let nmie = Nmie::new(spec, &config.critic_hidden, xs, zs, rng)?;
        let nit = InputTransformer::new(constraint, &config.nit_hidden, rng)?;
        Ok(Self {
            channel,
            constraint,
            nmie,
            nit,
            config,
        })
    }

    /// Draws a batch, passes it through the channel and evaluates the
    /// estimator. Touches no parameters.
    pub fn evaluate_batch(&mut self, rng: &mut Rng) -> Result<(TransformPass, NmieStep)> {
        let noise = sample_gaussian(rng, self.config.batch_size, 1)?;
        let pass = self.nit.forward(&noise, Mode::Train)?;
        let z = self.channel.transmit(&self.constraint, pass.output(), rng)?;
        let step = self.nmie.step(pass.output(), &z, rng)?;
        Ok((pass, step))
    }

    /// Phase 1: ascend the estimator's objective. The transformer is not
    /// accessed.
    pub fn phase1(&mut self, step: &NmieStep) -> Result<()> {
        self.nmie.apply(step, self.config.lr, self.config.grad_clip)
    }

    /// Phase 2: ascend the estimate through the transformer with the
    /// estimator frozen. Since `z = x + n`, `dÎ/dx = ∂Î/∂x + ∂Î/∂z`.
    pub fn phase2(&mut self, pass: &TransformPass, step: &NmieStep) -> Result<()> {
        let g: Vec<f64> = step.grad_x.iter().zip(&step.grad_z).map(|(a, b)| a + b).collect();
        let grads = self.nit.backward(pass, &g)?;
        self.nit.apply(&grads, self.config.lr, self.config.grad_clip)
    }

    fn divergence_bound(&self) -> f64 {
        (self.config.batch_size as f64).ln() + DIVERGENCE_MARGIN
    }

    /// Phase 0: `phase0_iters` estimator updates against the untrained
    /// transformer. Returns the per-step estimates.
    pub fn run_phase0(&mut self, rng: &mut Rng) -> Result<Vec<f64>> {
        let mut trace = Vec::with_capacity(self.config.phase0_iters);
        let mut guard = Guard::new(self.divergence_bound());
        for _ in 0..self.config.phase0_iters {
            let Some((_, step)) = guard.evaluate(self, rng)? else {
                trace.push(f64::NAN);
                continue;
            };
            trace.push(step.estimate);
            if guard.observe(step.estimate, &step)? {
                self.phase1(&step)?;
            }
        }
        Ok(trace)
    }

    /// Main alternating loop, stopped by [`ConvergenceMonitor`] or at
    /// `max_iters`. Returns the trace and the convergence flag.
    pub fn run_main_loop(&mut self, rng: &mut Rng) -> Result<(Vec<f64>, bool)> {
        let mut trace = Vec::with_capacity(self.config.max_iters);
        let mut guard = Guard::new(self.divergence_bound());
        let mut monitor = ConvergenceMonitor::new(self.config.convergence_window, self.config.convergence_tol);
        for _ in 0..self.config.max_iters {
            let estimate = match guard.evaluate(self, rng)? {
                Some((pass, step)) => {
                    if guard.observe(step.estimate, &step)? {
                        self.phase1(&step)?;
                        self.phase2(&pass, &step)?;
                    }
                    step.estimate
                }
                None => f64::NAN,
            };
            trace.push(estimate);
            if monitor.push(estimate) {
                return Ok((trace, true));
            }
        }
        Ok((trace, false))
    }

    /// Final evaluation on `eval_samples` fresh inputs through the frozen
    /// networks. Calibrates the transformer's eval-mode scale first. The
    /// estimate is the mean over consecutive training-size batches, so it is
    /// the same statistic the loop reports; a trailing partial batch is
    /// dropped unless it is the only one.
    pub fn final_evaluation(&mut self, rng: &mut Rng) -> Result<(f64, Matrix)> {
        self.nit.calibrate(rng, CALIBRATION_SAMPLES)?;
        let x = self.nit.sample(rng, self.config.eval_samples, Mode::Eval)?;
        let z = self.channel.transmit(&self.constraint, &x, rng)?;
        let b = self.config.batch_size.min(x.rows());
        let mut sum = 0.0;
        let mut count = 0usize;
        for start in (0..=x.rows() - b).step_by(b) {
            sum += self.nmie.estimate(&x.slice_rows(start, start + b), &z.slice_rows(start, start + b), rng)?;
            count += 1;
        }
        Ok((sum / count as f64, x))
    }
}

/// Consecutive-bad-step counter for the divergence guard.
struct Guard {
    bound: f64,
    bad: usize,
}

impl Guard {
    fn new(bound: f64) -> Self {
        Self { bound, bad: 0 }
    }

    /// Evaluates one batch. A numeric failure inside the step counts as a
    /// bad step and yields `None`.
    fn evaluate(&mut self, session: &mut Session, rng: &mut Rng) -> Result<Option<(TransformPass, NmieStep)>> {
        match session.evaluate_batch(rng) {
            Ok(r) => Ok(Some(r)),
            Err(Error::Numeric(msg)) => {
                self.strike(&msg)?;
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }

    /// Whether the step may be applied; errors after too many consecutive
    /// bad steps.
    fn observe(&mut self, estimate: f64, step: &NmieStep) -> Result<bool> {
        let finite = estimate.is_finite()
            && step.critic_grads.iter().all(|g| g.is_finite())
            && step.grad_x.iter().chain(&step.grad_z).all(|g| g.is_finite());
        if finite && estimate.abs() <= self.bound {
            self.bad = 0;
            return Ok(true);
        }
        self.strike(&format!("estimate {estimate}"))?;
        Ok(finite)
    }

    fn strike(&mut self, last: &str) -> Result<()> {
        self.bad += 1;
        if self.bad >= DIVERGENCE_PATIENCE {
            return Err(Error::Estimation(format!(
                "estimate diverged: {} consecutive steps non-finite or outside ±{:.3} (last: {last})",
                self.bad, self.bound
            )));
        }
        Ok(())
    }
}

/// Runs one complete round with its own seed.
pub fn run_round(
    channel: &ChannelSpec,
    constraint: &ConstraintSpec,
    spec: &EstimatorSpec,
    config: &TrainConfig,
    index: usize,
    seed: u64,
) -> std::result::Result<RoundReport, RoundFailure> {
    let start = Instant::now();
    let root = Rng::new(seed);
    let mut init_rng = root.derive(0);
    let mut train_rng = root.derive(1);
    let mut eval_rng = root.derive(2);
    let mut iterations = 0;
    let fail = |iterations: usize, e: Error| RoundFailure {
        index,
        seed,
        iterations,
        reason: e.to_string(),
    };
    let mut session = Session::new(*channel, *constraint, spec.clone(), config.clone(), &mut init_rng).map_err(|e| fail(0, e))?;
    session.run_phase0(&mut train_rng).map_err(|e| fail(0, e))?;
    let (trace, converged) = session
        .run_main_loop(&mut train_rng)
        .map_err(|e| fail(config.phase0_iters, e))?;
    iterations += trace.len();
    let (estimate, x) = session.final_evaluation(&mut eval_rng).map_err(|e| fail(iterations, e))?;
    if !estimate.is_finite() {
        return Err(fail(iterations, Error::Estimation("non-finite final evaluation".into())));
    }
    let histogram = InputHistogram::from_samples(x.data(), HISTOGRAM_BINS).map_err(|e| fail(iterations, e))?;
    let tail = &trace[trace.len().saturating_sub(config.convergence_window)..];
    Ok(RoundReport {
        index,
        seed,
        estimate,
        train_estimate: tail.iter().sum::<f64>() / tail.len() as f64,
        iterations,
        converged,
        wall_clock_secs: start.elapsed().as_secs_f64(),
        input_moments: InputMoments::from_samples(x.data()),
        histogram,
        trace,
    })
}

/// Runs one round per seed (in parallel) and aggregates in seed order.
pub fn run_rounds(
    channel: &ChannelSpec,
    constraint: &ConstraintSpec,
    spec: &EstimatorSpec,
    config: &TrainConfig,
    seeds: &[u64],
) -> Result<CapacityEstimate> {
    config.validate()?;
    spec.validate()?;
    let outcomes: Vec<_> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &s)| run_round(channel, constraint, spec, config, i, s))
        .collect();
    let mut rounds = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => rounds.push(r),
            Err(f) => failures.push(f),
        }
    }
    CapacityEstimate::aggregate(rounds, failures)
}

/// Capacity estimate over `config.rounds` independent rounds.
pub fn estimate_capacity(
    channel: &ChannelSpec,
    constraint: &ConstraintSpec,
    spec: &EstimatorSpec,
    config: &TrainConfig,
) -> Result<CapacityEstimate> {
    let seeds: Vec<u64> = (0..config.rounds).map(|i| config.round_seed(i)).collect();
    run_rounds(channel, constraint, spec, config, &seeds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::ChannelKind;

    fn small_config() -> TrainConfig {
        TrainConfig {
            batch_size: 64,
            phase0_iters: 20,
            max_iters: 60,
            convergence_window: 20,
            rounds: 3,
            eval_samples: 2000,
            critic_hidden: vec![16, 16],
            nit_hidden: vec![16, 16],
            ..TrainConfig::default()
        }
    }

    fn awgn_session(seed: u64) -> Session {
        let ch = ChannelSpec::new(ChannelKind::Awgn, 1.0).unwrap();
        let c = ch.constraint_for_snr(2.0);
        Session::new(ch, c, EstimatorSpec::new(Method::Mine), small_config(), &mut Rng::new(seed)).unwrap()
    }

    fn nit_bits(s: &Session) -> Vec<u64> {
        s.nit.network().params_flat().iter().map(|v| v.to_bits()).collect()
    }

    fn nmie_bits(s: &Session) -> Vec<u64> {
        s.nmie.critics().iter().flat_map(|c| c.params_flat()).map(|v| v.to_bits()).collect()
    }

    #[test]
    fn convergence_needs_a_flat_window_mean() {
        let mut m = ConvergenceMonitor::new(10, 1e-3);
        let stop = (0..100).position(|_| m.push(2.0));
        // the first window mean exists at 10 samples, the tenth at 19
        assert_eq!(stop, Some(18));

        // a ramp moves the window mean by slope per step
        for (slope, expect) in [(1e-5, true), (2e-4, false)] {
            let mut m = ConvergenceMonitor::new(10, 1e-3);
            assert_eq!((0..200).any(|i| m.push(slope * i as f64)), expect, "slope {slope}");
        }

        // a level shift moves the mean for one window, then a flat window follows
        let mut m = ConvergenceMonitor::new(10, 1e-3);
        let trace: Vec<f64> = (0..60).map(|i| if i < 15 { 1.0 } else { 2.0 }).collect();
        let stop = trace.iter().position(|&v| m.push(v));
        assert_eq!(stop, Some(15 + 9 + 9));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            convergence_window: 30_000,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            lr: 0.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!(TrainConfig::for_method(Method::ChiSquare).batch_size, 10_000);
    }

    #[test]
    fn phases_touch_only_their_network() {
        let mut s = awgn_session(1);
        let mut rng = Rng::new(2);
        for _ in 0..5 {
            let (pass, step) = s.evaluate_batch(&mut rng).unwrap();
            let (nit0, nmie0) = (nit_bits(&s), nmie_bits(&s));
            s.phase1(&step).unwrap();
            assert_eq!(nit_bits(&s), nit0);
            assert_ne!(nmie_bits(&s), nmie0);
            let nmie1 = nmie_bits(&s);
            s.phase2(&pass, &step).unwrap();
            assert_eq!(nmie_bits(&s), nmie1);
            assert_ne!(nit_bits(&s), nit0);
        }
    }

    #[test]
    fn phase0_leaves_transformer_alone() {
        let mut s = awgn_session(3);
        let before = nit_bits(&s);
        let nmie0 = nmie_bits(&s);
        s.run_phase0(&mut Rng::new(4)).unwrap();
        assert_eq!(nit_bits(&s), before);
        assert_ne!(nmie_bits(&s), nmie0);

        let mut s = awgn_session(3);
        s.config.phase0_iters = 0;
        s.run_phase0(&mut Rng::new(4)).unwrap();
        assert_eq!(nmie_bits(&s), nmie0);
    }

    #[test]
    fn phase0_is_deterministic() {
        let mut a = awgn_session(5);
        let mut b = awgn_session(5);
        a.run_phase0(&mut Rng::new(6)).unwrap();
        b.run_phase0(&mut Rng::new(6)).unwrap();
        assert_eq!(nmie_bits(&a), nmie_bits(&b));
    }

    #[test]
    fn estimates_are_reproducible_and_order_free() {
        let ch = ChannelSpec::new(ChannelKind::Awgn, 1.0).unwrap();
        let c = ch.constraint_for_snr(2.0);
        let spec = EstimatorSpec::new(Method::Mine);
        let cfg = small_config();
        let untimed = |mut e: CapacityEstimate| {
            e.rounds.iter_mut().for_each(|r| r.wall_clock_secs = 0.0);
            e
        };
        let a = untimed(estimate_capacity(&ch, &c, &spec, &cfg).unwrap());
        let b = untimed(estimate_capacity(&ch, &c, &spec, &cfg).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.per_round.len(), 3);
        assert_eq!(a.variance.to_bits(), stats::unbiased_variance(&a.per_round).to_bits());

        let seeds: Vec<u64> = (0..3).map(|i| cfg.round_seed(i)).collect();
        let reversed: Vec<u64> = seeds.iter().rev().copied().collect();
        let r = run_rounds(&ch, &c, &spec, &cfg, &reversed).unwrap();
        let mut p = r.per_round.clone();
        p.reverse();
        assert_eq!(p, a.per_round);
        assert_eq!(r.mean.to_bits(), a.mean.to_bits());
        assert_eq!(r.variance.to_bits(), a.variance.to_bits());
    }

    #[test]
    fn too_many_aborted_rounds_fail() {
        let failure = |index| RoundFailure {
            index,
            seed: index as u64,
            iterations: 7,
            reason: "estimate diverged".into(),
        };
        let err = CapacityEstimate::aggregate(vec![], vec![failure(0), failure(1)]).unwrap_err();
        assert!(matches!(err, Error::EstimationFailure(ref m) if m.contains("round 1")));
    }

    #[test]
    fn divergence_guard_counts_consecutive_steps() {
        let step = NmieStep {
            estimate: f64::NAN,
            critic_grads: vec![],
            grad_x: vec![],
            grad_z: vec![],
        };
        let mut g = Guard::new(1.0);
        for _ in 0..DIVERGENCE_PATIENCE - 1 {
            assert!(!g.observe(f64::NAN, &step).unwrap());
        }
        assert!(g.observe(0.5, &step).unwrap());
        for _ in 0..DIVERGENCE_PATIENCE - 1 {
            assert!(g.observe(2.0, &step).is_ok());
        }
        assert!(g.observe(2.0, &step).is_err());
    }

    #[test]
    fn divergence_guard_rejects_large_negative_estimates() {
        let step = NmieStep {
            estimate: 0.0,
            critic_grads: vec![],
            grad_x: vec![],
            grad_z: vec![],
        };
        let mut g = Guard::new(1.0);
        assert!(g.observe(-0.9, &step).unwrap());
        for _ in 0..DIVERGENCE_PATIENCE - 1 {
            assert!(g.observe(-3.0, &step).is_ok());
        }
        assert!(g.observe(-3.0, &step).is_err());
    }
}
