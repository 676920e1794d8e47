//! Static background extraction and foreground segmentation for video.
//!
//! A sequence is loaded as a `(height, width, channel, frame)` tensor. A
//! small set of discriminative frames is chosen by sparse
//! self-representation, the background is recovered from those frames by
//! alternating an ℓ1-regularized mean estimate with worst-outlier
//! replacement, and each frame is segmented against the background with a
//! graph-cut Ising model.

pub mod engine;
pub mod error;
pub mod eval;
pub mod io;
pub mod maxflow;
pub mod mrf;
pub mod pipeline;
pub mod selection;
pub mod synth;
pub mod tensor;

pub use engine::{extract_background, BackgroundFrame, BackgroundResult, EngineConfig};
pub use error::{Error, Result};
pub use eval::{confusion, distance_ratio, f_measure, ConfusionCounts, DistanceRatioPoint};
pub use mrf::{segment, ForegroundMask, MrfParams, MrfSettings};
pub use pipeline::{detect_all, extract, PipelineConfig};
pub use selection::{select, SelectionConfig, SelectionResult};
pub use tensor::{DenseTensor, Matrix};
