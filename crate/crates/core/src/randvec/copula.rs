use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Gaussian copula given by its latent-normal correlation matrix Σ.
#[derive(Clone, Debug)]
pub struct GaussianCopula {
    sigma: DMatrix<f64>,
    chol: DMatrix<f64>,
    ln_det: f64,
    independent: bool,
}

impl GaussianCopula {
    pub fn independent(d: usize) -> Self {
        Self {
            sigma: DMatrix::identity(d, d),
            chol: DMatrix::identity(d, d),
            ln_det: 0.0,
            independent: true,
        }
    }

    pub fn new(sigma: DMatrix<f64>) -> Result<Self> {
        let d = sigma.nrows();
        if sigma.ncols() != d || d == 0 {
            return Err(Error::InvalidArgument("correlation matrix must be square and non-empty".into()));
        }
        for i in 0..d {
            if (sigma[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!("correlation diagonal entry {i} is {}", sigma[(i, i)])));
            }
            for j in 0..i {
                let (a, b) = (sigma[(i, j)], sigma[(j, i)]);
                if !a.is_finite() || (a - b).abs() > 1e-12 {
                    return Err(Error::InvalidArgument(format!("correlation matrix not symmetric at ({i},{j})")));
                }
                if a.abs() >= 1.0 {
                    return Err(Error::InvalidArgument(format!("|Σ[{i},{j}]| = {} must be < 1", a.abs())));
                }
            }
        }
        let chol = sigma
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Decomposition("correlation matrix is not positive definite".into()))?
            .l();
        let ln_det = 2.0 * chol.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let independent = sigma.iter().enumerate().all(|(k, &v)| if k % (d + 1) == 0 { true } else { v == 0.0 });
        Ok(Self { sigma, chol, ln_det, independent })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidArgument("correlation matrix must be square".into()));
        }
        Self::new(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// Lower Cholesky factor of Σ.
    pub fn cholesky(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn is_independent(&self) -> bool {
        self.independent
    }

    /// `z' = L z`, mapping independent standard normals to correlated ones.
    pub fn correlate(&self, z: &[f64], out: &mut [f64]) {
        if self.independent {
            out.copy_from_slice(z);
            return;
        }
        let d = z.len();
        for i in 0..d {
            let mut s = 0.0;
            for j in 0..=i {
                s += self.chol[(i, j)] * z[j];
            }
            out[i] = s;
        }
    }

    /// `z = L⁻¹ z'` by forward substitution.
    pub fn decorrelate(&self, zc: &[f64], out: &mut [f64]) {
        if self.independent {
            out.copy_from_slice(zc);
            return;
        }
        let d = zc.len();
        for i in 0..d {
            let mut s = zc[i];
            for j in 0..i {
                s -= self.chol[(i, j)] * out[j];
            }
            out[i] = s / self.chol[(i, i)];
        }
    }

    /// Log copula density at correlated normal scores `z'`:
    /// `-½ ln det Σ - ½ z'ᵀ(Σ⁻¹ - I)z'`.
    pub fn ln_density_scores(&self, zc: &[f64]) -> f64 {
        if self.independent {
            return 0.0;
        }
        let mut w = vec![0.0; zc.len()];
        self.decorrelate(zc, &mut w);
        let q_inv: f64 = w.iter().map(|v| v * v).sum();
        let q: f64 = zc.iter().map(|v| v * v).sum();
        -0.5 * self.ln_det - 0.5 * (q_inv - q)
    }

    pub fn ln_det(&self) -> f64 {
        self.ln_det
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..d).map(|i| (0..d).map(|j| self.sigma[(i, j)]).collect()).collect()
    }
}
