//! Scenario runner for the cascade simulator: temperature sweeps, decay
//! panels, concurrence curves, delay-bin matrix sweeps and a tomography
//! round trip, written as CSV/JSON with a digest manifest.

pub mod compute;
pub mod config;
pub mod output;
pub mod run;

use thiserror::Error;

pub use config::{load_scenario, scenario_from_str, Kind, Scenario};
pub use output::{FileEntry, RunManifest};
pub use run::run_scenario;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Numerical(_) => 3,
            HarnessError::Io(_) => 1,
        }
    }
}

macro_rules! numerical_from {
    ($($t:ty),*) => {$(
        impl From<$t> for HarnessError {
            fn from(e: $t) -> Self {
                HarnessError::Numerical(e.to_string())
            }
        }
    )*};
}

numerical_from!(
    qdcascade::levels::LevelsError,
    qdcascade::kinetics::KineticsError,
    qdcascade::qdynamics::DynamicsError,
    qdcascade::pairstate::PairStateError,
    qdcascade::tomography::TomographyError
);
