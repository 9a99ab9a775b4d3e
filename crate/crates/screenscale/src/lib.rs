//! Content-adaptive scaling for screen images.
//!
//! Screen content mixes text and pictures, whose spectra want different
//! interpolators. This crate classifies 16x16 blocks into text and pictorial
//! regions, scales with shift-linear interpolation whose offset follows the
//! content type, and trains optimal offsets offline by minimizing a
//! frequency-domain error functional over sample block corpora.
//!
//! - [`raster`]: image buffers, PNM I/O, luma, block partitioning
//! - [`classify`]: two-step text/pictorial block classification
//! - [`sli`]: shift-linear pre-filter, interpolation, adaptive scaler
//! - [`spectral`]: energy densities, error kernel, offset training
//! - [`baseline`]: bilinear and Keys bicubic reference scalers
//! - [`metrics`]: PSNR and exact operation counting
//! - [`synth`]: seeded synthetic fixtures and corpora

pub mod baseline;
pub mod classify;
pub mod metrics;
pub mod raster;
pub mod sli;
pub mod spectral;
pub mod synth;

pub use baseline::{scale_bicubic, scale_bilinear};
pub use classify::{classify_image, ClassifierParams, ContentMap, ContentType};
pub use metrics::{psnr, OpCounts, Psnr, QualityReport};
pub use raster::{load_image, round_to_raster, save_image, Plane, Raster};
pub use sli::{
    classify_and_scale, scale_adaptive, scale_fixed_sli, Direction, OffsetTable, ScaleError,
    ScaleJob, GENERIC_OPTIMAL_TAU,
};
pub use spectral::{train_offsets, CorpusManifest, EnergyDensity, TrainingParams};
