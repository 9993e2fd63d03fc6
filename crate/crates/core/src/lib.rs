//! Cluster-based patch masking for contrastive image-text pre-training.
//!
//! The pipeline runs image → [`patch_grid`] → [`similarity`] → [`masker`] →
//! [`batch`] → [`contrastive`]. [`calibration`] searches the similarity
//! threshold ahead of time so that masks hit a target mean ratio, and
//! [`io`] / [`cli`] provide portable-pixmap IO, renders, stats and the
//! `patchmask` command line.

pub mod batch;
pub mod calibration;
pub mod cli;
pub mod contrastive;
pub mod error;
pub mod io;
pub mod masker;
pub mod patch_grid;
pub mod rng;
pub mod similarity;
pub mod synth;

pub use batch::{shape_batch, ShapedBatch};
pub use calibration::{calibrate_threshold, CalibrationReport};
pub use error::{Error, Result};
pub use masker::{cluster_mask, kmeans_mask, mask_ratio, random_mask, Mask, MaskerConfig, Strategy};
pub use patch_grid::{patchify, pixel_normalize, Image, PatchGrid};
pub use similarity::{blend, cosine_matrix, toy_patch_embedding, FeatureGrid, SimilarityMatrix};
