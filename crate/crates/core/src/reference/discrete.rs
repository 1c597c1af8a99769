use crate::channels::{ChannelSpec, ConstraintSpec};
use crate::error::{invalid, Result};

/// Discrete memoryless channel on finite input/output grids.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteChannel {
    pub input_grid: Vec<f64>,
    /// Output bin centers.
    pub output_grid: Vec<f64>,
    /// Row-major `n × m` transition matrix, rows sum to 1.
    pub transition: Vec<f64>,
}

impl DiscreteChannel {
    pub fn new(input_grid: Vec<f64>, output_grid: Vec<f64>, transition: Vec<f64>) -> Result<Self> {
        let (n, m) = (input_grid.len(), output_grid.len());
        if n == 0 || m == 0 || transition.len() != n * m {
            return Err(invalid("transition matrix shape does not match the grids"));
        }
        if transition.iter().any(|&p| !(p >= 0.0)) {
            return Err(invalid("transition probabilities must be nonnegative"));
        }
        for (i, row) in transition.chunks_exact(m).enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(invalid(format!("row {i} sums to {s}, not 1")));
            }
        }
        Ok(Self {
            input_grid,
            output_grid,
            transition,
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.input_grid.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.output_grid.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.n_outputs();
        &self.transition[i * m..(i + 1) * m]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.transition[i * self.n_outputs() + j]
    }
}

/// Half-width of the feasible input grid for power constraints, in units
/// of `√ε`.
pub const SUPPORT_WIDTH: f64 = 4.0;
/// Margin of the output grid beyond the input range, in noise standard
/// deviations.
pub const OUTPUT_MARGIN: f64 = 6.0;

fn std_normal_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t / std::f64::consts::SQRT_2)
}

/// Discretizes `Z = X + N` under `constraint`.
///
/// Inputs: `n_in` evenly spaced points on `[−4√ε, 4√ε]` (average power),
/// `[0, 4√ε]` (nonnegative), or `[−A, A]` (peak). Outputs: `m_out` equal
/// bins spanning the input range plus six noise deviations, the edge bins
/// absorbing the tails. Row `i` holds the Gaussian mass of each bin, as
/// differences of the normal CDF.
pub fn discretize_channel(channel: &ChannelSpec, constraint: &ConstraintSpec, n_in: usize, m_out: usize) -> Result<DiscreteChannel> {
    discretize_with_support(channel, constraint, n_in, m_out, SUPPORT_WIDTH)
}

/// [`discretize_channel`] with a configurable support half-width (in `√ε`
/// units, ignored for peak constraints).
pub fn discretize_with_support(
    channel: &ChannelSpec,
    constraint: &ConstraintSpec,
    n_in: usize,
    m_out: usize,
    support_width: f64,
) -> Result<DiscreteChannel> {
    if n_in < 2 || m_out < 2 {
        return Err(invalid(format!("need n_in, m_out >= 2 (got {n_in}, {m_out})")));
    }
    constraint.validate()?;
    let (lo, hi) = match *constraint {
        ConstraintSpec::AveragePower { power } => (-support_width * power.sqrt(), support_width * power.sqrt()),
        ConstraintSpec::NonnegAveragePower { power } => (0.0, support_width * power.sqrt()),
        ConstraintSpec::Peak { amplitude } => (-amplitude, amplitude),
    };
    let step = (hi - lo) / (n_in - 1) as f64;
    let input_grid: Vec<f64> = (0..n_in).map(|i| lo + i as f64 * step).collect();

    let sd = channel.noise_std();
    let (out_lo, out_hi) = (lo - OUTPUT_MARGIN * sd, hi + OUTPUT_MARGIN * sd);
    let width = (out_hi - out_lo) / m_out as f64;
    let output_grid: Vec<f64> = (0..m_out).map(|j| out_lo + (j as f64 + 0.5) * width).collect();
    // inner edges only; the outer bins extend to ±∞
    let edges: Vec<f64> = (1..m_out).map(|j| out_lo + j as f64 * width).collect();

    let mut transition = Vec::with_capacity(n_in * m_out);
    for &x in &input_grid {
        let mut prev = 0.0;
        for e in &edges {
            let c = std_normal_cdf((e - x) / sd);
            transition.push((c - prev).max(0.0));
            prev = c;
        }
        transition.push((1.0 - prev).max(0.0));
        let row_start = transition.len() - m_out;
        let row = &mut transition[row_start..];
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= s);
    }
    DiscreteChannel::new(input_grid, output_grid, transition)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::ChannelKind;

    fn awgn(var: f64) -> ChannelSpec {
        ChannelSpec::new(ChannelKind::Awgn, var).unwrap()
    }

    #[test]
    fn rows_are_stochastic() {
        let dc = discretize_channel(&awgn(1.0), &ConstraintSpec::AveragePower { power: 10.0 }, 41, 120).unwrap();
        for i in 0..dc.n_inputs() {
            assert!((dc.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(discretize_channel(&awgn(1.0), &ConstraintSpec::AveragePower { power: 1.0 }, 1, 10).is_err());
    }

    #[test]
    fn noiseless_limit_concentrates_mass() {
        let ch = awgn(1e-10);
        let dc = discretize_channel(&ch, &ConstraintSpec::Peak { amplitude: 1.0 }, 11, 101).unwrap();
        let width = dc.output_grid[1] - dc.output_grid[0];
        for i in 0..dc.n_inputs() {
            let x = dc.input_grid[i];
            let j = dc
                .output_grid
                .iter()
                .position(|c| (x - c).abs() <= 0.5 * width + 1e-12)
                .unwrap();
            assert!(dc.get(i, j) >= 0.99, "row {i}: {}", dc.get(i, j));
        }
    }

    #[test]
    fn symmetric_grids_give_symmetric_transitions() {
        let dc = discretize_channel(&awgn(1.0), &ConstraintSpec::AveragePower { power: 2.0 }, 21, 60).unwrap();
        let (n, m) = (dc.n_inputs(), dc.n_outputs());
        for i in 0..n {
            for j in 0..m {
                assert!((dc.get(i, j) - dc.get(n - 1 - i, m - 1 - j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn optical_grid_is_nonnegative() {
        let ch = ChannelSpec::new(ChannelKind::OpticalIntensity, 1.0).unwrap();
        let dc = discretize_channel(&ch, &ConstraintSpec::NonnegAveragePower { power: 10.0 }, 51, 100).unwrap();
        assert_eq!(dc.input_grid[0], 0.0);
        assert!((dc.input_grid[50] - 4.0 * 10f64.sqrt()).abs() < 1e-12);
    }
}
