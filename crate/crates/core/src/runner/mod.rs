//! Configuration-driven experiments: strict TOML schema, single runs,
//! parameter sweeps and deterministic CSV output.

mod config;
mod run;
mod sweep;

pub use config::{
    config_from_table, parse_config, ConfigErrors, ConfigIssue, ControlConfig, ControlMode, EnsembleConfig,
    ExperimentConfig, FidelityMethod, MatrixForm, Method, ModelConfig, Observable, OutputConfig, PulseShape,
    SchemeChoice, SolverConfig,
};
pub use run::{run_experiment, run_experiment_seeded, RunMeta, RunResult};
pub use sweep::{parse_sweep_values, run_sweep, SweepAxis, SweepResult};

use thiserror::Error;

/// Environment variable holding the worker count for ensembles and sweeps.
pub const WORKERS_ENV: &str = "LEAKFREE_WORKERS";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error:\n{0}")]
    Config(#[from] ConfigErrors),
    #[error("numerical failure in {context}: {source}")]
    Numerical {
        context: String,
        #[source]
        source: crate::Error,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    pub(crate) fn numerical(context: impl Into<String>) -> impl FnOnce(crate::Error) -> Self {
        let context = context.into();
        move |source| Self::Numerical { context, source }
    }

    /// Process exit code: 2 for configuration problems, 3 for numerical
    /// failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical { .. } => 3,
            Self::Io { .. } => 1,
        }
    }
}
