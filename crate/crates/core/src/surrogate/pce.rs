use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::basis::{total_degree_cardinality, MultiIndexSet};
use super::design::{sample_variance, ExperimentalDesign};
use super::lars::{lars_path, ols_path, PathModel};
use crate::error::{Error, Result};
use crate::points::PointSet;
use crate::randvec::RandomVector;

pub const MAX_DEGREE: usize = 12;
const EARLY_STOP_DEGREES: usize = 2;
const HYPERBOLIC_CAP: u64 = 5000;
const HYPERBOLIC_Q: f64 = 0.75;

/// Sparse polynomial chaos expansion in independent standard-normal space.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PceModel {
    basis: MultiIndexSet,
    coefficients: Vec<f64>,
    loo: f64,
    rv: RandomVector,
}

impl PceModel {
    pub fn new(basis: MultiIndexSet, coefficients: Vec<f64>, loo: f64, rv: RandomVector) -> Result<Self> {
        if basis.len() != coefficients.len() {
            return Err(Error::DimensionMismatch { expected: basis.len(), got: coefficients.len() });
        }
        if basis.dim() != rv.dim() {
            return Err(Error::DimensionMismatch { expected: rv.dim(), got: basis.dim() });
        }
        if !(loo >= 0.0) {
            return Err(Error::InvalidArgument("loo must be non-negative".into()));
        }
        Ok(Self { basis, coefficients, loo, rv })
    }

    pub fn basis(&self) -> &MultiIndexSet {
        &self.basis
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn loo(&self) -> f64 {
        self.loo
    }

    pub fn rv(&self) -> &RandomVector {
        &self.rv
    }

    pub fn dim(&self) -> usize {
        self.rv.dim()
    }

    /// Mean response, the coefficient of the constant term.
    pub fn mean(&self) -> f64 {
        self.basis
            .indices()
            .iter()
            .zip(&self.coefficients)
            .filter(|(i, _)| i.iter().all(|&k| k == 0))
            .map(|(_, a)| *a)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        self.basis
            .indices()
            .iter()
            .zip(&self.coefficients)
            .filter(|(i, _)| i.iter().any(|&k| k > 0))
            .map(|(_, a)| a * a)
            .sum()
    }

    /// Evaluates the expansion at standard-normal-space points.
    pub fn predict_standard(&self, z: &PointSet) -> Result<Vec<f64>> {
        if z.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: z.dim() });
        }
        let mut buf = vec![0.0; self.basis.len()];
        Ok(z
            .rows()
            .map(|zi| {
                self.basis.eval(zi, &mut buf);
                buf.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum()
            })
            .collect())
    }

    pub fn predict(&self, x: &PointSet) -> Result<Vec<f64>> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.dim() });
        }
        self.predict_standard(&self.rv.to_standard_set(x)?)
    }
}

/// Largest total degree whose full basis stays below `3n` terms, capped at 12.
pub fn default_max_degree(d: usize, n: usize) -> usize {
    let mut nu = 1;
    while nu < MAX_DEGREE && total_degree_cardinality(d, nu + 1) < 3 * n as u64 {
        nu += 1;
    }
    nu
}

/// Candidate basis of degree `nu`; hyperbolic truncation kicks in only for
/// very large sets in more than ten dimensions.
pub fn candidate_basis(d: usize, nu: usize) -> MultiIndexSet {
    if d > 10 && total_degree_cardinality(d, nu) > HYPERBOLIC_CAP {
        MultiIndexSet::hyperbolic(d, nu, HYPERBOLIC_Q)
    } else {
        MultiIndexSet::total_degree(d, nu)
    }
}

/// Degree-adaptive sparse PCE: LARS basis selection with OLS refits scored by
/// the corrected LOO error. `nu_max = None` uses [`default_max_degree`].
pub fn train_pce(ed: &ExperimentalDesign, nu_max: Option<usize>) -> Result<PceModel> {
    let n = ed.len();
    let d = ed.dim();
    if n < 3 {
        return Err(Error::Precondition(format!("need at least 3 training points, got {n}")));
    }
    let nu_max = nu_max.unwrap_or_else(|| default_max_degree(d, n));
    if nu_max < 1 {
        return Err(Error::InvalidArgument("nu_max must be at least 1".into()));
    }
    let y = ed.y();
    if sample_variance(y) <= 0.0 {
        return Err(Error::Precondition("responses are constant".into()));
    }
    let z = ed.standard_inputs()?;

    let mut best: Option<(MultiIndexSet, PathModel)> = None;
    let mut stale = 0;
    for nu in 1..=nu_max {
        let basis = candidate_basis(d, nu);
        let psi = basis.design_matrix(&z);
        let max_steps = (basis.len() - 1).min(n.saturating_sub(2));
        let mut order = vec![0];
        order.extend(lars_path(&psi, y, max_steps));
        let candidate = ols_path(&psi, y, &order)
            .into_iter()
            .filter(|m| m.corrected_loo.is_finite())
            .min_by(|a, b| a.corrected_loo.total_cmp(&b.corrected_loo));
        let improved = match (&candidate, &best) {
            (Some(c), Some((_, b))) => c.corrected_loo < b.corrected_loo,
            (Some(_), None) => true,
            _ => false,
        };
        if improved {
            best = candidate.map(|c| (basis, c));
            stale = 0;
        } else {
            stale += 1;
            if stale >= EARLY_STOP_DEGREES {
                break;
            }
        }
    }
    let (basis, m) = best.ok_or_else(|| Error::Training("regression is rank deficient for every degree".into()))?;
    let selected = basis.subset(&m.columns);
    PceModel::new(selected, m.coefficients, m.corrected_loo.max(0.0), ed.rv().clone())
}

/// Relative LOO error of a PCE on its design: `(raw, corrected)`.
pub fn pce_loo_parts(model: &PceModel, ed: &ExperimentalDesign) -> Result<(f64, f64)> {
    let z = ed.standard_inputs()?;
    let psi = model.basis.design_matrix(&z);
    let (n, p) = psi.shape();
    if p >= n {
        return Err(Error::Precondition(format!("{p} basis terms for {n} points")));
    }
    let gram = psi.tr_mul(&psi);
    let inv = gram
        .cholesky()
        .ok_or_else(|| Error::Training("information matrix is singular".into()))?
        .inverse();
    let a = nalgebra::DVector::from_column_slice(&model.coefficients);
    let yhat = &psi * a;
    let hw: DMatrix<f64> = &psi * &inv;
    let y = ed.y();
    let mut acc = 0.0;
    for i in 0..n {
        let h = hw.row(i).dot(&psi.row(i));
        if h >= 1.0 - 1e-12 {
            return Err(Error::LeverageDegenerate { index: i, leverage: h });
        }
        acc += ((y[i] - yhat[i]) / (1.0 - h)).powi(2);
    }
    let raw = acc / n as f64 / sample_variance(y);
    let nf = n as f64;
    let corr = nf / (nf - p as f64) * (1.0 + inv.trace());
    Ok((raw, raw * corr))
}

/// Corrected relative LOO error of a PCE on its design.
pub fn pce_loo(model: &PceModel, ed: &ExperimentalDesign) -> Result<f64> {
    pce_loo_parts(model, ed).map(|(_, c)| c)
}
