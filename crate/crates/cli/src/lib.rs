//! File-based pipeline stages, a deterministic synthetic handwriting corpus
//! and the driver that runs the augmented-versus-non-augmented comparison end
//! to end.

pub mod access;
pub mod config;
pub mod experiment;
pub mod labels;
pub mod pipeline;
pub mod stages;
pub mod synth;
