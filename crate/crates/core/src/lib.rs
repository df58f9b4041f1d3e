//! Style-based dating of handwritten manuscripts.
//!
//! The crate covers the whole feature pipeline: binarization and contour
//! extraction ([`imgcore`]), elastic rubber-sheet augmentation ([`augment`]),
//! textural contour histograms ([`features`]), junction descriptors
//! ([`junclets`]), temporal SOM codebooks ([`codebook`]) and linear
//! one-vs-all classification with cross-validated model selection ([`learn`]).

pub mod augment;
pub mod codebook;
pub mod error;
pub mod features;
pub mod imgcore;
pub mod junclets;
pub mod learn;
pub mod manifest;
pub mod store;

pub use error::{Error, Result};
