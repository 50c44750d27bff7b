//! Experiment runner for feedback-alignment studies: TOML configs in, CSV and
//! JSON-lines metrics out. Each subcommand of the `fa-lab` binary maps to one
//! `run_*` function here.

pub mod config;
pub mod deep;
pub mod error;
pub mod linear;
pub mod metrics;
pub mod pool;
pub mod shallow;
pub mod sweeps;

pub use config::RunOptions;
pub use error::{LabError, Result};

// The guide's code blocks run as doc-tests of this crate.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/learning-rules.md")]
    mod learning_rules {}
    #[doc = include_str!("../../../book/src/alignment.md")]
    mod alignment {}
    #[doc = include_str!("../../../book/src/teacher-student.md")]
    mod teacher_student {}
    #[doc = include_str!("../../../book/src/datasets.md")]
    mod datasets {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
