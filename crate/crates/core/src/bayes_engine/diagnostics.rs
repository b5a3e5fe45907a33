use std::fmt;

use serde::{Deserialize, Serialize};

use super::{AcceptanceRecord, PosteriorDraws};
use crate::error::{Error, Result};
use crate::stats;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordinateSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub ess: f64,
    pub lo95: f64,
    pub hi95: f64,
}

impl CoordinateSummary {
    pub fn from_chain(name: impl Into<String>, chain: &[f64]) -> Self {
        let mut sorted = chain.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            name: name.into(),
            mean: stats::mean(chain),
            sd: stats::std_dev(chain),
            ess: stats::effective_sample_size(chain),
            lo95: stats::quantile_sorted(&sorted, 0.025),
            hi95: stats::quantile_sorted(&sorted, 0.975),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub draws: usize,
    pub acceptance: Vec<AcceptanceRecord>,
    pub coordinates: Vec<CoordinateSummary>,
    pub warnings: Vec<String>,
}

pub const MIN_DRAWS: usize = 10;

/// Acceptance rates and per-coordinate posterior summaries.
pub fn diagnostics(draws: &PosteriorDraws) -> Result<Diagnostics> {
    let m = draws.len();
    if m < MIN_DRAWS {
        return Err(Error::input(format!(
            "diagnostics need at least {MIN_DRAWS} retained draws, have {m}"
        )));
    }
    let mut coordinates = Vec::new();
    for (j, name) in draws.beta_names.iter().enumerate() {
        coordinates.push(CoordinateSummary::from_chain(name.clone(), &draws.beta_column(j)));
    }
    for (j, name) in draws.eta_names.iter().enumerate() {
        coordinates.push(CoordinateSummary::from_chain(name.clone(), &draws.eta_column(j)));
    }
    Ok(Diagnostics {
        draws: m,
        acceptance: draws.acceptance.clone(),
        coordinates,
        warnings: draws.warnings.clone(),
    })
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "retained draws: {}", self.draws)?;
        for a in &self.acceptance {
            writeln!(
                f,
                "acceptance {:<10} {:>8}/{:<8} {:.4}",
                a.block,
                a.accepted,
                a.proposed,
                a.rate()
            )?;
        }
        writeln!(
            f,
            "{:<12} {:>14} {:>12} {:>9} {:>14} {:>14}",
            "param", "mean", "sd", "ess", "lo95", "hi95"
        )?;
        for c in &self.coordinates {
            writeln!(
                f,
                "{:<12} {:>14.6} {:>12.6} {:>9.1} {:>14.6} {:>14.6}",
                c.name, c.mean, c.sd, c.ess, c.lo95, c.hi95
            )?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}
