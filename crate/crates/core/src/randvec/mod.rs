//! Random vectors built from marginal laws coupled by a Gaussian copula.
//!
//! Three spaces are involved: the unit hypercube `(0,1)^d`, the independent
//! standard-normal space and the physical space. A unit point `u` maps to
//! `x_i = F_i⁻¹(Φ(z'_i))` with `z' = L z`, `z_i = Φ⁻¹(u_i)` and `L` the lower
//! Cholesky factor of the copula correlation.

mod copula;
mod marginal;

pub use copula::GaussianCopula;
pub use marginal::Marginal;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::PointSet;
use crate::rng;
use crate::special::{norm_cdf, norm_ppf};

/// Sample size used when a covariance has no closed form.
pub const COVARIANCE_MC_SIZE: usize = 400_000;
const COVARIANCE_MC_SEED: u64 = 0x00c0_7a41_a9ce;

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RandomVectorSpec {
    marginals: Vec<Marginal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    correlation: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "RandomVectorSpec", into = "RandomVectorSpec")]
pub struct RandomVector {
    marginals: Vec<Marginal>,
    copula: GaussianCopula,
}

impl TryFrom<RandomVectorSpec> for RandomVector {
    type Error = Error;

    fn try_from(spec: RandomVectorSpec) -> Result<Self> {
        let marginals = spec.marginals.into_iter().map(Marginal::validated).collect::<Result<Vec<_>>>()?;
        let copula = match spec.correlation {
            Some(rows) => GaussianCopula::from_rows(&rows)?,
            None => GaussianCopula::independent(marginals.len()),
        };
        RandomVector::new(marginals, copula)
    }
}

impl From<RandomVector> for RandomVectorSpec {
    fn from(rv: RandomVector) -> Self {
        let correlation = if rv.copula.is_independent() { None } else { Some(rv.copula.to_rows()) };
        Self { marginals: rv.marginals, correlation }
    }
}

impl RandomVector {
    pub fn new(marginals: Vec<Marginal>, copula: GaussianCopula) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::InvalidArgument("a random vector needs at least one marginal".into()));
        }
        if copula.dim() != marginals.len() {
            return Err(Error::DimensionMismatch { expected: marginals.len(), got: copula.dim() });
        }
        Ok(Self { marginals, copula })
    }

    pub fn independent(marginals: Vec<Marginal>) -> Result<Self> {
        let d = marginals.len();
        Self::new(marginals, GaussianCopula::independent(d))
    }

    /// `d` independent standard normal components.
    pub fn standard_normal(d: usize) -> Self {
        Self::independent(vec![Marginal::Normal { mu: 0.0, sigma: 1.0 }; d]).expect("valid")
    }

    /// Gaussian vector with the given means, standard deviations and correlation.
    pub fn gaussian(mean: &[f64], std_dev: &[f64], correlation: DMatrix<f64>) -> Result<Self> {
        if mean.len() != std_dev.len() {
            return Err(Error::DimensionMismatch { expected: mean.len(), got: std_dev.len() });
        }
        let marginals = mean.iter().zip(std_dev).map(|(&m, &s)| Marginal::normal(m, s)).collect::<Result<Vec<_>>>()?;
        Self::new(marginals, GaussianCopula::new(correlation)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    pub fn copula(&self) -> &GaussianCopula {
        &self.copula
    }

    pub fn is_gaussian(&self) -> bool {
        self.marginals.iter().all(|m| matches!(m, Marginal::Normal { .. }))
    }

    /// True when the joint density is constant on its support (independent
    /// uniform marginals).
    pub fn is_constant_density(&self) -> bool {
        self.copula.is_independent() && self.marginals.iter().all(|m| matches!(m, Marginal::Uniform { .. }))
    }

    /// Bounds of the support when every marginal is bounded.
    pub fn support_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        self.marginals
            .iter()
            .map(|m| match *m {
                Marginal::Uniform { lower, upper } => Some((lower, upper)),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(|v| v.into_iter().unzip())
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len == self.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.dim(), got: len })
        }
    }

    /// Log joint density; `-inf` outside the support, error on non-finite input.
    pub fn ln_pdf(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite point {x:?}")));
        }
        Ok(self.ln_pdf_unchecked(x))
    }

    pub fn pdf(&self, x: &[f64]) -> Result<f64> {
        self.ln_pdf(x).map(f64::exp)
    }

    /// Log joint density without argument validation, for hot loops.
    pub fn ln_pdf_unchecked(&self, x: &[f64]) -> f64 {
        let mut ln_marg = 0.0;
        for (m, &xi) in self.marginals.iter().zip(x) {
            if !m.in_support(xi) {
                return f64::NEG_INFINITY;
            }
            ln_marg += m.ln_pdf(xi);
        }
        if self.copula.is_independent() {
            return ln_marg;
        }
        let scores: Vec<f64> = self.marginals.iter().zip(x).map(|(m, &xi)| m.to_standard_normal(xi)).collect();
        if scores.iter().any(|s| !s.is_finite()) {
            return f64::NEG_INFINITY;
        }
        ln_marg + self.copula.ln_density_scores(&scores)
    }

    /// Maps an independent standard-normal point to physical space.
    pub fn from_standard_into(&self, z: &[f64], out: &mut [f64]) {
        let mut zc = vec![0.0; z.len()];
        self.copula.correlate(z, &mut zc);
        for ((o, m), &s) in out.iter_mut().zip(&self.marginals).zip(&zc) {
            *o = m.from_standard_normal(s);
        }
    }

    pub fn from_standard(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(z.len())?;
        let mut out = vec![0.0; z.len()];
        self.from_standard_into(z, &mut out);
        Ok(out)
    }

    /// Isoprobabilistic map from the open unit hypercube to physical space.
    pub fn from_unit(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(u.len())?;
        if let Some(bad) = u.iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
            return Err(Error::Domain(format!("unit coordinate {bad} must lie strictly inside (0, 1)")));
        }
        let z: Vec<f64> = u.iter().map(|&v| norm_ppf(v)).collect();
        let mut out = vec![0.0; u.len()];
        self.from_standard_into(&z, &mut out);
        Ok(out)
    }

    pub fn to_standard_into(&self, x: &[f64], out: &mut [f64]) {
        let zc: Vec<f64> = self.marginals.iter().zip(x).map(|(m, &xi)| m.to_standard_normal(xi)).collect();
        self.copula.decorrelate(&zc, out);
    }

    /// Inverse of [`RandomVector::from_standard`].
    pub fn to_standard_normal(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        let mut out = vec![0.0; x.len()];
        self.to_standard_into(x, &mut out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("point {x:?} lies on or outside the support boundary")));
        }
        Ok(out)
    }

    pub fn to_unit(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.to_standard_normal(x)?.into_iter().map(norm_cdf).collect())
    }

    /// Maps a whole point set to the independent standard-normal space.
    pub fn to_standard_set(&self, x: &PointSet) -> Result<PointSet> {
        self.check_dim(x.dim())?;
        let mut out = PointSet::with_capacity(x.dim(), x.len());
        for r in x.rows() {
            out.push(&self.to_standard_normal(r)?)?;
        }
        Ok(out)
    }

    /// `n` i.i.d. draws, generated as clipped uniforms pushed through the
    /// isoprobabilistic map. Deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<PointSet> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample size must be at least 1".into()));
        }
        let d = self.dim();
        let chunks = n.div_ceil(rng::CHUNK);
        let parts: Vec<Vec<f64>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let len = rng::CHUNK.min(n - c * rng::CHUNK);
                let mut r = rng::stream(seed, c as u64);
                let mut buf = vec![0.0; len * d];
                let mut z = vec![0.0; d];
                for row in buf.chunks_exact_mut(d) {
                    for zi in z.iter_mut() {
                        *zi = norm_ppf(rng::unit(&mut r));
                    }
                    self.from_standard_into(&z, row);
                }
                buf
            })
            .collect();
        PointSet::from_flat(d, parts.concat())
    }

    /// Draws one point using a caller-owned generator.
    pub fn sample_one<R: Rng + ?Sized>(&self, r: &mut R, out: &mut [f64]) {
        let z: Vec<f64> = (0..self.dim()).map(|_| norm_ppf(rng::unit(r))).collect();
        self.from_standard_into(&z, out);
    }

    /// Analytic mean of each component.
    pub fn mean(&self) -> Vec<f64> {
        self.marginals.iter().map(Marginal::mean).collect()
    }

    /// Sample covariance (unbiased) of `n` draws.
    pub fn covariance_estimate(&self, n: usize, seed: u64) -> Result<DMatrix<f64>> {
        let d = self.dim();
        if n < 10 * d {
            return Err(Error::InvalidArgument(format!("covariance estimate needs n ≥ {} draws", 10 * d)));
        }
        let x = self.sample(n, seed)?;
        Ok(sample_covariance(&x))
    }

    /// Covariance matrix: closed form for independent or all-Gaussian inputs
    /// (`C = A Σ A`), Monte-Carlo estimate otherwise.
    pub fn covariance(&self) -> DMatrix<f64> {
        let d = self.dim();
        let sd: Vec<f64> = self.marginals.iter().map(Marginal::std_dev).collect();
        if self.copula.is_independent() || self.is_gaussian() {
            let s = self.copula.sigma();
            DMatrix::from_fn(d, d, |i, j| sd[i] * s[(i, j)] * sd[j])
        } else {
            self.covariance_estimate(COVARIANCE_MC_SIZE.max(10 * d), COVARIANCE_MC_SEED)
                .expect("sample size is valid")
        }
    }
}

/// Unbiased sample covariance of a point set.
pub fn sample_covariance(x: &PointSet) -> DMatrix<f64> {
    let d = x.dim();
    let n = x.len();
    let mean = x.mean();
    let mut c = DMatrix::zeros(d, d);
    let mut dev = vec![0.0; d];
    for r in x.rows() {
        for k in 0..d {
            dev[k] = r[k] - mean[k];
        }
        for i in 0..d {
            for j in 0..=i {
                c[(i, j)] += dev[i] * dev[j];
            }
        }
    }
    let denom = (n.max(2) - 1) as f64;
    for i in 0..d {
        for j in 0..=i {
            c[(i, j)] /= denom;
            c[(j, i)] = c[(i, j)];
        }
    }
    c
}
