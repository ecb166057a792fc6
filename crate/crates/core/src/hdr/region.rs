use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::randvec::RandomVector;

/// Default relative inflation of each half-extent of the bounding box.
pub const DEFAULT_INFLATION: f64 = 0.02;
/// Default number of draws used to locate the box extremes.
pub const DEFAULT_BOX_SAMPLES: usize = 100_000;

/// PCA-based bounding box of a highest density region and the affine map
/// `T(u) = Rᵀ[S(u - ½) + o] + E[X]` from the unit cube onto it.
///
/// Rows of `rotation` are the principal directions of the covariance, in
/// order of decreasing variance, so `v = R(x - E[X])` are principal
/// coordinates.
#[derive(Clone, Debug)]
pub struct HdrRegion {
    alpha: f64,
    level: Option<f64>,
    rotation: DMatrix<f64>,
    scale: Vec<f64>,
    offset: Vec<f64>,
    mean: Vec<f64>,
    rv: RandomVector,
}

/// Serialized form of a region.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegionDocument {
    pub alpha: f64,
    pub level: Option<f64>,
    pub rotation: Vec<Vec<f64>>,
    pub scale: Vec<f64>,
    pub offset: Vec<f64>,
    pub mean: Vec<f64>,
    pub rv: RandomVector,
}

impl HdrRegion {
    pub fn from_parts(
        rv: RandomVector,
        alpha: f64,
        level: Option<f64>,
        rotation: DMatrix<f64>,
        scale: Vec<f64>,
        offset: Vec<f64>,
        mean: Vec<f64>,
    ) -> Result<Self> {
        let d = rv.dim();
        if rotation.nrows() != d || rotation.ncols() != d || scale.len() != d || offset.len() != d || mean.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: scale.len() });
        }
        if scale.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument("box edge lengths must be positive".into()));
        }
        let orth = (&rotation * rotation.transpose() - DMatrix::identity(d, d)).abs().max();
        if orth > 1e-8 || (rotation.determinant() - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidArgument("rotation must be orthogonal with determinant +1".into()));
        }
        if let Some(l) = level {
            if !(l >= 0.0) {
                return Err(Error::InvalidArgument(format!("level {l} must be non-negative")));
            }
        }
        Ok(Self { alpha, level, rotation, scale, offset, mean, rv })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn level(&self) -> Option<f64> {
        self.level
    }

    pub fn ln_level(&self) -> f64 {
        self.level.map_or(f64::NEG_INFINITY, f64::ln)
    }

    pub fn rotation(&self) -> &DMatrix<f64> {
        &self.rotation
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn rv(&self) -> &RandomVector {
        &self.rv
    }

    pub fn dim(&self) -> usize {
        self.rv.dim()
    }

    /// Whether `x` lies in the region (strictly above the level).
    pub fn contains(&self, x: &[f64]) -> bool {
        let lf = self.rv.ln_pdf_unchecked(x);
        match self.level {
            Some(l) => lf > l.ln(),
            None => lf > f64::NEG_INFINITY,
        }
    }

    /// Affine map from the unit cube onto the bounding box.
    pub fn apply_t(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.apply_t_into(u, &mut out);
        out
    }

    pub fn apply_t_into(&self, u: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let v: Vec<f64> = (0..d).map(|j| self.scale[j] * (u[j] - 0.5) + self.offset[j]).collect();
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = self.mean[i];
            for (j, vj) in v.iter().enumerate() {
                s += self.rotation[(j, i)] * vj;
            }
            *o = s;
        }
    }

    /// Inverse of [`HdrRegion::apply_t`]: `S⁻¹(R(x - E[X]) - o) + ½`.
    pub fn inverse_t(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let c: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        (0..d)
            .map(|j| {
                let v: f64 = (0..d).map(|i| self.rotation[(j, i)] * c[i]).sum();
                (v - self.offset[j]) / self.scale[j] + 0.5
            })
            .collect()
    }

    pub fn to_document(&self) -> RegionDocument {
        let d = self.dim();
        RegionDocument {
            alpha: self.alpha,
            level: self.level,
            rotation: (0..d).map(|i| (0..d).map(|j| self.rotation[(i, j)]).collect()).collect(),
            scale: self.scale.clone(),
            offset: self.offset.clone(),
            mean: self.mean.clone(),
            rv: self.rv.clone(),
        }
    }

    pub fn from_document(doc: RegionDocument) -> Result<Self> {
        let d = doc.rotation.len();
        if doc.rotation.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidArgument("rotation must be square".into()));
        }
        let rot = DMatrix::from_fn(d, d, |i, j| doc.rotation[i][j]);
        Self::from_parts(doc.rv, doc.alpha, doc.level, rot, doc.scale, doc.offset, doc.mean)
    }
}

/// Principal directions of `c` as rows of a rotation matrix, ordered by
/// decreasing eigenvalue. Each direction has its largest-magnitude component
/// positive; the last row is negated if needed to make the determinant +1.
pub fn principal_rotation(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = c.nrows();
    if c.ncols() != d {
        return Err(Error::InvalidArgument("covariance must be square".into()));
    }
    let eig = c.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    if eig.eigenvalues.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Decomposition("covariance is not positive definite".into()));
    }
    let mut r = DMatrix::zeros(d, d);
    for (row, &k) in order.iter().enumerate() {
        let mut v: DVector<f64> = eig.eigenvectors.column(k).into_owned();
        let imax = v.iamax();
        if v[imax] < 0.0 {
            v.neg_mut();
        }
        r.row_mut(row).copy_from(&v.transpose());
    }
    if r.determinant() < 0.0 {
        let last = d - 1;
        let neg = -r.row(last).into_owned();
        r.row_mut(last).copy_from(&neg);
    }
    Ok(r)
}

/// Fits the PCA-based bounding box of the superlevel set `{f_X > level}`.
///
/// Box extremes are the per-axis extrema of `n_box` draws above the level,
/// expressed in principal coordinates; each half-extent is then multiplied
/// by `1 + inflation`. Without a level (constant density) the box is the
/// support of the marginals.
pub fn fit_bounding_box(
    rv: &RandomVector,
    alpha: f64,
    level: Option<f64>,
    n_box: usize,
    inflation: f64,
    seed: u64,
) -> Result<HdrRegion> {
    let d = rv.dim();
    let mean = rv.mean();
    let Some(level) = level else {
        let (lo, hi) = rv
            .support_box()
            .filter(|_| rv.is_constant_density())
            .ok_or_else(|| Error::InvalidArgument("a level is required unless the density is constant".into()))?;
        let scale: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| b - a).collect();
        let offset: Vec<f64> = (0..d).map(|j| 0.5 * (lo[j] + hi[j]) - mean[j]).collect();
        return HdrRegion::from_parts(rv.clone(), alpha, None, DMatrix::identity(d, d), scale, offset, mean);
    };
    if n_box < 10_000 {
        return Err(Error::InvalidArgument(format!("n_box = {n_box} must be at least 10⁴")));
    }
    if !(inflation >= 0.0) {
        return Err(Error::InvalidArgument("inflation must be non-negative".into()));
    }
    let rotation = principal_rotation(&rv.covariance())?;
    let ln_level = level.ln();
    let draws = rv.sample(n_box, seed)?;
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    let mut accepted = 0usize;
    let mut c = vec![0.0; d];
    for x in draws.rows() {
        if rv.ln_pdf_unchecked(x) <= ln_level {
            continue;
        }
        accepted += 1;
        for k in 0..d {
            c[k] = x[k] - mean[k];
        }
        for j in 0..d {
            let v: f64 = (0..d).map(|i| rotation[(j, i)] * c[i]).sum();
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    if accepted < d + 1 {
        return Err(Error::InsufficientCoverage { accepted, required: d + 1 });
    }
    let offset: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let scale: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| (b - a) * (1.0 + inflation)).collect();
    HdrRegion::from_parts(rv.clone(), alpha, Some(level), rotation, scale, offset, mean)
}
