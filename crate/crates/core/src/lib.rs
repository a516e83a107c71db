//! Synthesis of partially blurred images with exact ground-truth blur masks,
//! and evaluation of blur-segmentation predictions.
//!
//! The generation pipeline takes sharp images plus either semantic label
//! maps or scored object proposals, extracts a blur mask, applies randomized
//! defocus or non-linear motion blur behind an inpainting step that prevents
//! halo artifacts, and emits augmented image/mask training pairs. The
//! evaluation side scores predicted blur maps with per-image ROC AUC and
//! average precision, with the flattened all-pixels protocol available for
//! comparison.

pub mod augment;
pub mod baseline;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod kernel;
pub mod maskops;
pub mod pipeline;
pub mod raster;
pub mod seed;
pub mod synthesis;

pub use config::{AugmentConfig, BlurConfig, GeneratorConfig, MaskMode, CONFIG_SCHEMA_VERSION};
pub use error::{Error, Result};
pub use kernel::{BlurKernel, BlurSpec, DisplacementField, ElasticSpec};
pub use maskops::{Connectivity, LabelMap, ScoredProposalSet};
pub use pipeline::{Manifest, ManifestRecord, SampleMeta, SamplePair};
pub use raster::{BinaryMask, Image};
