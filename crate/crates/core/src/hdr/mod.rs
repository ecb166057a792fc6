//! Highest density regions: level estimation, PCA-based bounding boxes,
//! uniform acceptance–rejection sampling and a radial uniformity test.

mod ks;
mod level;
mod region;
mod sampler;

pub use ks::{ks_uniform_statistic, ks_uniform_test, ks_uniformity, radial_coordinates, KsResult};
pub use level::{
    estimate_level, estimate_level_with, gaussian_level, gaussian_ln_level, random_gaussian_vector, LevelEstimate,
    LevelOptions,
};
pub use region::{fit_bounding_box, principal_rotation, HdrRegion, RegionDocument, DEFAULT_BOX_SAMPLES, DEFAULT_INFLATION};
pub use sampler::{ball_volume, initial_batch_size, sample_hdr, sample_hdr_with, SamplerOptions};

use crate::error::Result;
use crate::randvec::RandomVector;

/// Level estimation followed by the bounding-box fit, with default box
/// settings. Returns the region together with the level estimate.
pub fn build_region(rv: &RandomVector, alpha: f64, cov_target: f64, seed: u64) -> Result<(HdrRegion, LevelEstimate)> {
    let est = estimate_level(rv, alpha, cov_target, seed)?;
    let region = fit_bounding_box(
        rv,
        alpha,
        est.level,
        DEFAULT_BOX_SAMPLES,
        DEFAULT_INFLATION,
        crate::rng::derive_seed(seed, "box"),
    )?;
    Ok((region, est))
}
