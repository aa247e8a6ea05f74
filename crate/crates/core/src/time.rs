//! Integer-microsecond simulation clock.

use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

/// A point in simulated time, in whole microseconds since the start of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(pub u64);

/// A span of simulated time in microseconds.
pub type Micros = u64;

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    /// Rounds seconds to the nearest microsecond. Negative inputs clamp to zero.
    pub fn from_secs_f64(secs: f64) -> Self {
        if secs <= 0.0 || !secs.is_finite() {
            return SimTime(0);
        }
        SimTime((secs * 1e6).round() as u64)
    }

    pub fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn saturating_sub(self, other: SimTime) -> Micros {
        self.0.saturating_sub(other.0)
    }
}

impl Add<Micros> for SimTime {
    type Output = SimTime;
    fn add(self, rhs: Micros) -> SimTime {
        SimTime(self.0 + rhs)
    }
}

impl AddAssign<Micros> for SimTime {
    fn add_assign(&mut self, rhs: Micros) {
        self.0 += rhs;
    }
}

impl Sub for SimTime {
    type Output = Micros;
    fn sub(self, rhs: SimTime) -> Micros {
        self.0 - rhs.0
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}us", self.0)
    }
}

/// Airtime of `bytes` at `rate_bps`, rounded up to the next microsecond.
pub fn airtime_us(bytes: u32, rate_bps: u64) -> Micros {
    let bits = u64::from(bytes) * 8 * 1_000_000;
    bits.div_ceil(rate_bps)
}
