//! Neural motor decoding with cascaded classification-based regression (CCBR).
//!
//! The crate covers the full offline pipeline: loading or synthesizing
//! recordings, feature extraction, PCA, probabilistic classifiers, the CCBR
//! cascade, and the Wiener filter baselines it is compared against.

pub mod classify;
pub mod data;
pub mod decode;
pub mod error;
pub mod features;
pub mod linalg;
pub mod optim;
pub mod persist;
pub mod reduce;
pub mod serde_matrix;

pub use error::{Error, Result};
