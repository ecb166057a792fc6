use serde::{Deserialize, Serialize};

use super::region::HdrRegion;
use crate::error::{Error, Result};
use crate::points::PointSet;
use crate::special::kolmogorov_sf;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample KS distance between `values` and the uniform law on `[0, 1]`.
pub fn ks_uniform_statistic(values: &[f64]) -> f64 {
    let mut z = values.to_vec();
    z.sort_by(f64::total_cmp);
    let n = z.len() as f64;
    z.iter()
        .enumerate()
        .map(|(i, &v)| {
            let lo = v - i as f64 / n;
            let hi = (i + 1) as f64 / n - v;
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}

/// KS test of `values` against `U(0, 1)` with the asymptotic Kolmogorov
/// p-value.
pub fn ks_uniform_test(values: &[f64]) -> KsResult {
    let statistic = ks_uniform_statistic(values);
    let p_value = kolmogorov_sf((values.len() as f64).sqrt() * statistic);
    KsResult { statistic, p_value }
}

/// Radial uniformity test for points in the highest density region of a
/// Gaussian vector.
///
/// With `C = L Lᵀ`, each point maps to `z = (‖L⁻¹(x - μ)‖ / r)^d`, where `r`
/// is the Mahalanobis radius of the region boundary; `z` is uniform on
/// `[0, 1]` exactly when the points are uniform in the region.
pub fn ks_uniformity(region: &HdrRegion, samples: &PointSet) -> Result<KsResult> {
    let z = radial_coordinates(region, samples)?;
    Ok(ks_uniform_test(&z))
}

pub fn radial_coordinates(region: &HdrRegion, samples: &PointSet) -> Result<Vec<f64>> {
    let rv = region.rv();
    if !rv.is_gaussian() {
        return Err(Error::Precondition("radial uniformity test needs a Gaussian random vector".into()));
    }
    let level = region
        .level()
        .ok_or_else(|| Error::Precondition("region has no density level".into()))?;
    let d = rv.dim();
    if samples.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: samples.dim() });
    }
    let chol = rv
        .covariance()
        .cholesky()
        .ok_or_else(|| Error::Decomposition("covariance is not positive definite".into()))?;
    let l = chol.l();
    let ln_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let r2 = -2.0 * (level.ln() + 0.5 * d as f64 * LN_2PI + 0.5 * ln_det);
    if !(r2 > 0.0) {
        return Err(Error::Precondition(format!("level {level} is above the density maximum")));
    }
    let mu = rv.mean();
    let mut w = vec![0.0; d];
    samples
        .rows()
        .enumerate()
        .map(|(k, x)| {
            for i in 0..d {
                let mut s = x[i] - mu[i];
                for j in 0..i {
                    s -= l[(i, j)] * w[j];
                }
                w[i] = s / l[(i, i)];
            }
            let q: f64 = w.iter().map(|v| v * v).sum();
            let z = (q / r2).powf(0.5 * d as f64);
            if z > 1.0 + 1e-9 {
                return Err(Error::Precondition(format!("sample {k} lies outside the region (z = {z})")));
            }
            Ok(z.min(1.0))
        })
        .collect()
}
