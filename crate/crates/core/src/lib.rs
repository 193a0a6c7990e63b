//! Sample- and class-level hardness estimation from training dynamics and
//! feature geometry, with hardness-driven resampling, pruning and denoising.

pub mod cli;
pub mod denoise;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod pruning;
pub mod rank;
pub mod resampling;
pub mod stability;
pub mod synthlab;

pub use error::{HlabError, Result};
