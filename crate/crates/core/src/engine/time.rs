use std::fmt;

use crate::error::{Error, Result};

const NANOS_PER_SEC: f64 = 1e9;

/// Simulation clock value in integer nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    /// Rounds `secs` half-up to the nearest nanosecond.
    pub fn from_secs(secs: f64) -> Result<SimTime> {
        let ns = (secs * NANOS_PER_SEC).round();
        if !(ns.is_finite() && ns >= 0.0) {
            return Err(Error::config(format!("time {secs}s is not a non-negative number")));
        }
        // u64::MAX as f64 rounds up to 2^64, so `>=` rejects it as well.
        if ns >= u64::MAX as f64 {
            return Err(Error::TimeOverflow {
                context: format!("{secs}s does not fit in nanoseconds"),
            });
        }
        Ok(SimTime(ns as u64))
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 / NANOS_PER_SEC
    }

    pub fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn checked_add(self, rhs: SimTime) -> Result<SimTime> {
        self.0
            .checked_add(rhs.0)
            .map(SimTime)
            .ok_or_else(|| Error::TimeOverflow {
                context: format!("{}ns + {}ns", self.0, rhs.0),
            })
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_secs())
    }
}

/// Service time `demand / speed` rounded half-up to whole nanoseconds.
///
/// The result is never below 1 ns, so every task occupies its server for a
/// positive interval.
pub fn service_time(cpu_demand: f64, speed: f64) -> Result<SimTime> {
    if !(speed.is_finite() && speed > 0.0) {
        return Err(Error::config(format!("server speed must be positive, got {speed}")));
    }
    let t = SimTime::from_secs(cpu_demand / speed)?;
    Ok(SimTime(t.0.max(1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn service_time_examples() {
        assert_eq!(service_time(2.0, 1.0).unwrap(), SimTime(2_000_000_000));
        assert_eq!(service_time(2.0, 4.0).unwrap(), SimTime(500_000_000));
        assert_eq!(service_time(1e-9 * 1.5, 1.0).unwrap(), SimTime(2));
        assert_eq!(service_time(1e-9 * 1.4, 1.0).unwrap(), SimTime(1));
        assert_eq!(service_time(1e-12, 1.0).unwrap(), SimTime(1));
        assert!(service_time(1.0, 0.0).is_err());
    }

    #[test]
    fn overflow_is_reported() {
        assert!(matches!(SimTime::from_secs(1e11), Err(Error::TimeOverflow { .. })));
        assert!(matches!(
            SimTime(u64::MAX).checked_add(SimTime(1)),
            Err(Error::TimeOverflow { .. })
        ));
        assert!(SimTime::from_secs(-1.0).is_err());
    }

    #[test]
    fn round_half_up() {
        assert_eq!(SimTime::from_secs(2.5e-9).unwrap(), SimTime(3));
        assert_eq!(SimTime::from_secs(0.25).unwrap().as_secs(), 0.25);
    }
}
