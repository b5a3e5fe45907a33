use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A probability in the open unit interval stored together with its
/// complement.
///
/// Whichever of `p` and `1 - p` is smaller is the authoritative value, so
/// upper-tail percentiles such as `1 - 1e-12` keep full relative precision in
/// their distance to one. Quantile and basis evaluations read the tail they
/// need through [`Percentile::value`] or [`Percentile::complement`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Percentile {
    lower: f64,
    upper: f64,
}

impl Percentile {
    pub fn new(p: f64) -> Result<Self> {
        if p > 0.0 && p < 1.0 {
            Ok(Self::from_lower_unchecked(p))
        } else {
            Err(Error::domain(format!("percentile {p} is outside (0, 1)")))
        }
    }

    /// Builds a percentile from its upper-tail probability `1 - p`.
    pub fn from_upper(s: f64) -> Result<Self> {
        if s > 0.0 && s < 1.0 {
            Ok(Self::from_upper_unchecked(s))
        } else {
            Err(Error::domain(format!("upper-tail probability {s} is outside (0, 1)")))
        }
    }

    /// Builds a percentile from independently computed tail probabilities,
    /// e.g. a cdf and survival function evaluated at the same point. The
    /// smaller one wins.
    pub fn from_tails(lower: f64, upper: f64) -> Result<Self> {
        if lower <= upper {
            Self::new(lower)
        } else {
            Self::from_upper(upper)
        }
    }

    pub(crate) fn from_lower_unchecked(p: f64) -> Self {
        Self { lower: p, upper: 1.0 - p }
    }

    pub(crate) fn from_upper_unchecked(s: f64) -> Self {
        Self { lower: 1.0 - s, upper: s }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.lower
    }

    /// `1 - p`, accurate even when `p` is within a few ulps of one.
    #[inline]
    pub fn complement(self) -> f64 {
        self.upper
    }

    #[inline]
    pub fn is_upper_half(self) -> bool {
        self.lower > 0.5
    }

    /// Moves the percentile by `delta` in probability, working on the
    /// authoritative tail. Returns `None` if the result leaves (0, 1).
    pub fn shifted(self, delta: f64) -> Option<Self> {
        if self.is_upper_half() {
            let s = self.upper - delta;
            if !(s > 0.0 && s < 1.0) {
                return None;
            }
            Some(if s < 0.5 {
                Self::from_upper_unchecked(s)
            } else {
                Self::from_lower_unchecked(self.lower + delta)
            })
        } else {
            let p = self.lower + delta;
            if !(p > 0.0 && p < 1.0) {
                return None;
            }
            Some(if p <= 0.5 {
                Self::from_lower_unchecked(p)
            } else {
                Self::from_upper_unchecked(self.upper - delta)
            })
        }
    }

    /// Midpoint in probability between two percentiles.
    pub fn midpoint(a: Self, b: Self) -> Self {
        if a.is_upper_half() && b.is_upper_half() {
            Self::from_upper_unchecked(0.5 * (a.upper + b.upper))
        } else {
            let m = 0.5 * (a.lower + b.lower);
            if m > 0.5 {
                Self::from_upper_unchecked(0.5 * (a.upper + b.upper))
            } else {
                Self::from_lower_unchecked(m)
            }
        }
    }

    /// Restricts the percentile to `[eps, 1 - eps]`.
    pub fn clamped(self, eps: f64) -> Self {
        if self.lower < eps {
            Self::from_lower_unchecked(eps)
        } else if self.upper < eps {
            Self::from_upper_unchecked(eps)
        } else {
            self
        }
    }
}

impl PartialOrd for Percentile {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        if self.is_upper_half() && other.is_upper_half() {
            other.upper.partial_cmp(&self.upper)
        } else {
            self.lower.partial_cmp(&other.lower)
        }
    }
}

impl TryFrom<f64> for Percentile {
    type Error = Error;

    fn try_from(p: f64) -> Result<Self> {
        Self::new(p)
    }
}

/// An ordered set of evaluation percentiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PercentGrid {
    points: Vec<f64>,
}

impl PercentGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::input("percentile grid is empty"));
        }
        if let Some(bad) = points.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(Error::domain(format!("grid point {bad} is outside (0, 1)")));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::input("percentile grid must be strictly increasing"));
        }
        Ok(Self { points })
    }

    /// `count` evenly spaced points from `first` to `last` inclusive.
    pub fn equispaced(first: f64, last: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::input("percentile grid is empty"));
        }
        if count == 1 {
            return Self::new(vec![first]);
        }
        let step = (last - first) / (count - 1) as f64;
        Self::new((0..count).map(|i| first + step * i as f64).collect())
    }

    /// Plotting positions `i / (n + 1)`, `i = 1..=n`.
    pub fn plotting_positions(n: usize) -> Result<Self> {
        Self::new(plotting_positions(n))
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl Default for PercentGrid {
    /// 0.01, 0.02, ..., 0.99.
    fn default() -> Self {
        Self {
            points: (1..=99).map(|i| i as f64 / 100.0).collect(),
        }
    }
}

impl TryFrom<Vec<f64>> for PercentGrid {
    type Error = Error;

    fn try_from(points: Vec<f64>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<PercentGrid> for Vec<f64> {
    fn from(grid: PercentGrid) -> Self {
        grid.points
    }
}

pub fn plotting_positions(n: usize) -> Vec<f64> {
    let denom = (n + 1) as f64;
    (1..=n).map(|i| i as f64 / denom).collect()
}
