//! The `finsler` command-line tool: spec files, classification reports,
//! identity suites, point evaluations and geodesic traces.
//!
//! Exit codes: 0 when every requested check passes, 2 after a
//! classification run, 3 when an identity fails, 4 on bad input.

pub mod app;
pub mod classify;
pub mod commands;
pub mod report;
pub mod spec;
pub mod suites;

use spec::SpecError;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Spec(#[from] SpecError),

    #[error(transparent)]
    Core(#[from] finsler_core::Error),

    #[error("suite `{suite}` does not apply: {reason}")]
    InapplicableSuite { suite: String, reason: String },

    #[error("{0}")]
    Usage(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        app::EXIT_INPUT
    }
}
