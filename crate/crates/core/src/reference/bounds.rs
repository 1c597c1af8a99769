use std::fmt::Write as _;

use crate::channels::ChannelKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundEntry {
    pub channel: ChannelKind,
    pub snr_db: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Published lower/upper capacity bounds (nats) for the optical intensity
/// channel with `σ² = 1`.
///
/// The source bounds constrain the mean of the input rather than its second
/// moment, so they serve as plausibility windows, not exact ground truth.
pub const OPTICAL_BOUNDS: [BoundEntry; 4] = [
    BoundEntry { channel: ChannelKind::OpticalIntensity, snr_db: 5.0, lower: 0.42, upper: 0.99 },
    BoundEntry { channel: ChannelKind::OpticalIntensity, snr_db: 10.0, lower: 0.83, upper: 1.480 },
    BoundEntry { channel: ChannelKind::OpticalIntensity, snr_db: 15.0, lower: 1.34, upper: 1.77 },
    BoundEntry { channel: ChannelKind::OpticalIntensity, snr_db: 20.0, lower: 1.78, upper: 2.22 },
];

/// Embedded bound table.
#[derive(Debug, Clone, Copy)]
pub struct BoundTable;

impl BoundTable {
    pub fn entries() -> &'static [BoundEntry] {
        &OPTICAL_BOUNDS
    }

    pub fn lookup(channel: ChannelKind, snr_db: f64) -> Result<(f64, f64)> {
        Self::entries()
            .iter()
            .find(|e| e.channel == channel && (e.snr_db - snr_db).abs() < 1e-9)
            .map(|e| (e.lower, e.upper))
            .ok_or_else(|| Error::NotFound(format!("no published bounds for {channel} at {snr_db} dB")))
    }

    /// CSV with header `channel,snr_db,lower_nats,upper_nats`.
    pub fn to_csv() -> String {
        let mut s = String::from("channel,snr_db,lower_nats,upper_nats\n");
        for e in Self::entries() {
            let _ = writeln!(s, "{},{},{},{}", e.channel, e.snr_db, e.lower, e.upper);
        }
        s
    }
}

/// `(lower, upper)` published bounds for `(channel, snr_db)`.
pub fn published_bounds(channel: ChannelKind, snr_db: f64) -> Result<(f64, f64)> {
    BoundTable::lookup(channel, snr_db)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookups() {
        assert_eq!(published_bounds(ChannelKind::OpticalIntensity, 5.0).unwrap(), (0.42, 0.99));
        assert_eq!(published_bounds(ChannelKind::OpticalIntensity, 20.0).unwrap(), (1.78, 2.22));
        assert!(matches!(
            published_bounds(ChannelKind::OpticalIntensity, 7.0),
            Err(Error::NotFound(_))
        ));
        assert!(published_bounds(ChannelKind::Awgn, 5.0).is_err());
    }

    #[test]
    fn lower_never_exceeds_upper() {
        assert!(BoundTable::entries().iter().all(|e| e.lower <= e.upper));
        assert_eq!(BoundTable::to_csv().lines().count(), 5);
    }
}
