pub mod assign;
pub mod categories;
pub mod cli;
pub mod error;
pub mod eval;
pub mod json;
pub mod mask;
pub mod msn;
pub mod pipeline;
pub mod postproc;
pub mod synth;

pub use error::{Error, Result};
