pub mod bayes_engine;
pub mod cli_io;
pub mod density_families;
pub mod df_selection;
pub mod error;
pub mod functionals;
pub mod induced_density;
pub mod pipeline;
pub mod quantile_core;
pub mod sim_study;
pub mod stats;

pub use error::{Error, Result};
