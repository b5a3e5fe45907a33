//! Parametric families for the case sample, their priors and ML fits, and
//! the kernel density estimate used for degrees-of-freedom selection.

mod family;
mod fit;
mod kde;
mod prior;

pub use family::{CaseDensity, FamilyKind, GsmPriorDefaults};
pub(crate) use family::std_normal;
pub use fit::fit_mle;
pub use kde::{silverman_bandwidth, KernelDensityEstimate};
pub use prior::EtaPrior;
