use serde::{Deserialize, Serialize};

/// Monotone transform applied to the quantile ratio Q₁/Q₂.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkFunction {
    Identity,
    Log,
}

impl LinkFunction {
    /// h(x)
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            LinkFunction::Identity => x,
            LinkFunction::Log => x.ln(),
        }
    }

    /// h⁻¹(v)
    #[inline]
    pub fn inverse(self, v: f64) -> f64 {
        match self {
            LinkFunction::Identity => v,
            LinkFunction::Log => v.exp(),
        }
    }

    /// d h⁻¹(v) / dv
    #[inline]
    pub fn inverse_derivative(self, v: f64) -> f64 {
        match self {
            LinkFunction::Identity => 1.0,
            LinkFunction::Log => v.exp(),
        }
    }

    /// Whether `v = Xβ` maps to a positive quantile ratio.
    #[inline]
    pub fn admits(self, v: f64) -> bool {
        match self {
            LinkFunction::Identity => v > 0.0 && v.is_finite(),
            LinkFunction::Log => v.is_finite() && v.exp() > 0.0 && v.exp().is_finite(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LinkFunction::Identity => "identity",
            LinkFunction::Log => "log",
        }
    }
}

impl std::str::FromStr for LinkFunction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" | "id" => Ok(LinkFunction::Identity),
            "log" => Ok(LinkFunction::Log),
            other => Err(format!("unknown link '{other}' (expected identity or log)")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trip() {
        for v in [-3.0, -0.5, 0.0, 0.7, 2.5] {
            let log = LinkFunction::Log;
            assert!((log.apply(log.inverse(v)) - v).abs() < 1e-12);
        }
        for v in [0.1, 1.0, 7.5] {
            let id = LinkFunction::Identity;
            assert!((id.apply(id.inverse(v)) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_matches_central_difference() {
        let h = 1e-6;
        for link in [LinkFunction::Identity, LinkFunction::Log] {
            for i in 0..21 {
                let v = -2.0 + 0.2 * i as f64;
                let fd = (link.inverse(v + h) - link.inverse(v - h)) / (2.0 * h);
                assert!((fd - link.inverse_derivative(v)).abs() < 1e-6, "{link:?} at {v}");
            }
        }
    }

    #[test]
    fn identity_requires_positive_ratio() {
        assert!(!LinkFunction::Identity.admits(0.0));
        assert!(!LinkFunction::Identity.admits(-1.0));
        assert!(LinkFunction::Log.admits(-1.0));
    }
}
