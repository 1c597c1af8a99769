//! Ground truth for verification: closed-form AWGN capacity, a
//! Blahut–Arimoto solver on discretized channels, and published bounds for
//! the optical intensity channel.

mod blahut;
mod bounds;
mod discrete;

pub use blahut::{blahut_arimoto, mutual_information, BaResult};
pub use bounds::{published_bounds, BoundEntry, BoundTable, OPTICAL_BOUNDS};
pub use discrete::{discretize_channel, DiscreteChannel};

use crate::error::{invalid, Result};

/// `0.5 · ln(1 + snr)` nats per real channel use.
pub fn awgn_capacity(snr_linear: f64) -> Result<f64> {
    if !(snr_linear >= 0.0) {
        return Err(invalid(format!("SNR must be nonnegative, got {snr_linear}")));
    }
    Ok(0.5 * snr_linear.ln_1p())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::db_to_linear;

    #[test]
    fn table_values() {
        assert!((awgn_capacity(db_to_linear(2.0)).unwrap() - 0.474).abs() < 1e-3);
        assert!((awgn_capacity(db_to_linear(20.0)).unwrap() - 2.307).abs() < 1e-3);
        assert!((awgn_capacity(db_to_linear(40.0)).unwrap() - 4.605).abs() < 1e-3);
        assert_eq!(awgn_capacity(0.0).unwrap(), 0.0);
        assert!(awgn_capacity(-1.0).is_err());
    }

    #[test]
    fn increasing_and_concave() {
        let grid: Vec<f64> = (0..200).map(|i| i as f64 * 0.5).collect();
        let c: Vec<f64> = grid.iter().map(|&s| awgn_capacity(s).unwrap()).collect();
        for w in c.windows(3) {
            assert!(w[1] > w[0]);
            assert!(w[2] - w[1] < w[1] - w[0]);
        }
    }
}
