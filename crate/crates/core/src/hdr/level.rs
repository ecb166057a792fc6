use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::randvec::RandomVector;
use crate::rng;
use crate::special::chi2_quantile;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Density threshold estimated by Monte Carlo.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelEstimate {
    /// `None` when the input has constant density.
    pub level: Option<f64>,
    pub cov: f64,
    pub n_used: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct LevelOptions {
    pub initial_n: usize,
    pub max_n: usize,
    pub sub_batches: usize,
}

impl Default for LevelOptions {
    fn default() -> Self {
        Self { initial_n: 1 << 15, max_n: 1 << 24, sub_batches: 10 }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha = {alpha} must lie in (0, 1)")))
    }
}

/// Log of the closed-form Gaussian level.
pub fn gaussian_ln_level(covariance: &DMatrix<f64>, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let d = covariance.nrows();
    if covariance.ncols() != d || d == 0 {
        return Err(Error::InvalidArgument("covariance must be square and non-empty".into()));
    }
    let chol = covariance
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Decomposition("covariance is not positive definite".into()))?;
    let ln_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let q = chi2_quantile(d, 1.0 - alpha);
    Ok(-0.5 * d as f64 * LN_2PI - 0.5 * ln_det - 0.5 * q)
}

/// Density level `ℓ` of the `(1 - alpha)` highest density region of
/// `N(μ, C)`: `(2π)^{-d/2} det(C)^{-1/2} exp(-χ²_{d,1-α}/2)`.
pub fn gaussian_level(covariance: &DMatrix<f64>, alpha: f64) -> Result<f64> {
    gaussian_ln_level(covariance, alpha).map(f64::exp)
}

/// Empirical `alpha`-quantile of the log-density values (type-1 quantile).
fn ln_quantile(values: &mut [f64], alpha: f64) -> f64 {
    let n = values.len();
    let k = ((alpha * n as f64).ceil() as usize).clamp(1, n) - 1;
    let (_, v, _) = values.select_nth_unstable_by(k, |a, b| a.total_cmp(b));
    *v
}

/// Estimates the level `ℓ` with `P(f_X(X) < ℓ) = alpha` as the empirical
/// `alpha`-quantile of `f_X` over draws of `X`.
///
/// The sample grows by doubling until the coefficient of variation of the
/// estimate, measured over independent sub-batches, is at most `cov_target`.
pub fn estimate_level(rv: &RandomVector, alpha: f64, cov_target: f64, seed: u64) -> Result<LevelEstimate> {
    estimate_level_with(rv, alpha, cov_target, seed, &LevelOptions::default())
}

pub fn estimate_level_with(
    rv: &RandomVector,
    alpha: f64,
    cov_target: f64,
    seed: u64,
    opts: &LevelOptions,
) -> Result<LevelEstimate> {
    check_alpha(alpha)?;
    if !(cov_target > 0.0 && cov_target <= 0.2) {
        return Err(Error::InvalidArgument(format!("cov_target = {cov_target} must lie in (0, 0.2]")));
    }
    if rv.is_constant_density() {
        return Ok(LevelEstimate { level: None, cov: 0.0, n_used: 0 });
    }
    let batches = opts.sub_batches.max(2);
    let mut ln_f: Vec<f64> = Vec::new();
    let mut next_chunk = 0u64;
    let mut target_n = opts.initial_n.max(batches * 100);
    let d = rv.dim();
    loop {
        let missing = target_n.saturating_sub(ln_f.len());
        let chunks = missing.div_ceil(rng::CHUNK);
        let fresh: Vec<Vec<f64>> = (0..chunks as u64)
            .into_par_iter()
            .map(|c| {
                let mut r = rng::stream(seed, next_chunk + c);
                let mut x = vec![0.0; d];
                (0..rng::CHUNK)
                    .map(|_| {
                        rv.sample_one(&mut r, &mut x);
                        rv.ln_pdf_unchecked(&x)
                    })
                    .collect()
            })
            .collect();
        next_chunk += chunks as u64;
        for f in fresh {
            ln_f.extend(f);
        }

        let n = ln_f.len();
        let per = n / batches;
        let mut sub: Vec<f64> = ln_f
            .chunks_exact(per)
            .take(batches)
            .map(|b| ln_quantile(&mut b.to_vec(), alpha).exp())
            .collect();
        let mean = sub.iter().sum::<f64>() / batches as f64;
        let var = sub.iter_mut().map(|v| (*v - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
        let cov = (var / batches as f64).sqrt() / mean;
        let level = ln_quantile(&mut ln_f.clone(), alpha).exp();

        if cov <= cov_target {
            return Ok(LevelEstimate { level: Some(level), cov, n_used: n });
        }
        if n >= opts.max_n {
            return Err(Error::BudgetExhausted { estimate: level, cov, n_used: n });
        }
        target_n = (2 * n).min(opts.max_n);
    }
}

/// Random Gaussian vector for validating the level estimator: zero means,
/// standard deviations uniform on `(0, 20)`, off-diagonal correlations
/// uniform on `(0, 1)`.
///
/// Uniform correlation draws are rarely positive definite beyond `d ≈ 5`;
/// such draws are projected onto the correlation matrices by clipping the
/// spectrum at `min_eigenvalue` and rescaling to a unit diagonal.
pub fn random_gaussian_vector<R: Rng + ?Sized>(d: usize, rng: &mut R, min_eigenvalue: f64) -> Result<RandomVector> {
    let std_dev: Vec<f64> = (0..d).map(|_| 20.0 * (1.0 - rng.random::<f64>())).collect();
    let mut s = DMatrix::identity(d, d);
    for i in 0..d {
        for j in 0..i {
            let v = rng.random::<f64>();
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    let corr = nearest_correlation(s, min_eigenvalue);
    RandomVector::gaussian(&vec![0.0; d], &std_dev, corr)
}

fn nearest_correlation(s: DMatrix<f64>, min_eigenvalue: f64) -> DMatrix<f64> {
    let d = s.nrows();
    if s.clone().cholesky().is_some() && s.clone().symmetric_eigenvalues().min() >= min_eigenvalue {
        return s;
    }
    let eig = s.symmetric_eigen();
    let lam = eig.eigenvalues.map(|v| v.max(min_eigenvalue));
    let v = &eig.eigenvectors;
    let m = v * DMatrix::from_diagonal(&lam) * v.transpose();
    let mut out = DMatrix::from_fn(d, d, |i, j| m[(i, j)] / (m[(i, i)] * m[(j, j)]).sqrt());
    for i in 0..d {
        out[(i, i)] = 1.0;
        for j in 0..i {
            let v = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}
