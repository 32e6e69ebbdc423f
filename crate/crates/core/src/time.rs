use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

/// A point on the simulation clock, in milliseconds since run start.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VirtualTime(f64);

impl VirtualTime {
    pub const ZERO: VirtualTime = VirtualTime(0.0);

    pub fn from_ms(ms: f64) -> Self {
        debug_assert!(ms.is_finite() && ms >= 0.0, "bad time {ms}");
        VirtualTime(ms)
    }

    pub fn as_ms(self) -> f64 {
        self.0
    }
}

impl Eq for VirtualTime {}

impl PartialOrd for VirtualTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for VirtualTime {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Add<f64> for VirtualTime {
    type Output = VirtualTime;

    fn add(self, ms: f64) -> VirtualTime {
        VirtualTime(self.0 + ms)
    }
}

impl Sub for VirtualTime {
    type Output = f64;

    fn sub(self, rhs: VirtualTime) -> f64 {
        self.0 - rhs.0
    }
}

impl fmt::Display for VirtualTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ms", self.0)
    }
}
