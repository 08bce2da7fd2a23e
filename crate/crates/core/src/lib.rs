//! Saliency-aware token merging for video transformers.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: dense `f32` matrices, row softmax/entropy, cosine similarity and a
//!   seeded RNG.
//! - [`model`]: a toy spatio-temporal transformer (tube embedding, pre-norm attention with
//!   optional proportional attention, GELU MLP) that exposes per-layer attention maps.
//! - [`saliency`]: attentiveness, attention rollout, sharpness saliency, background-drop
//!   masking, masked saliency and per-frame score ratios.
//! - [`merging`]: bipartite soft matching, ToMe merging, saliency-aware merging, score-based
//!   pruning and the [`model::Reducer`] implementations built on them.
//! - [`costmodel`]: analytical FLOPs accounting for any per-layer token trajectory.

pub mod costmodel;
pub mod error;
pub mod merging;
pub mod model;
pub mod numerics;
pub mod saliency;

pub use error::{Error, Result};

/// Lower bound applied to token masses before `log` and before normalisation.
///
/// Shared by proportional attention and the saliency-aware mass update.
pub const MASS_FLOOR: f64 = 1e-6;
