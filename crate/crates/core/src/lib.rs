//! Case-robust named entity recognition with a character-level truecaser.

pub mod cli;
pub mod config;
pub mod crf;
pub mod error;
pub mod metrics;
pub mod ner;
pub mod nn;
pub mod prep;
pub mod synth;
pub mod text;
pub mod truecaser;

pub use error::{Error, Result};
