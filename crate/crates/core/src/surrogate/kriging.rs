use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::basis::MultiIndexSet;
use super::design::{sample_variance, ExperimentalDesign};
use super::pce::{default_max_degree, train_pce, PceModel};
use crate::error::{Error, Result};
use crate::points::PointSet;
use crate::randvec::RandomVector;
use crate::rng;

pub const NUGGET_START: f64 = 1e-10;
pub const NUGGET_MAX: f64 = 1e-6;
pub const N_STARTS: usize = 10;
const THETA_LO: f64 = 1e-2;
const THETA_HI: f64 = 1e2;
const SIGMA2_FLOOR: f64 = 1e-300;

/// Matérn 5/2 correlation of the scaled distance `r`.
#[inline]
pub fn matern52(r: f64) -> f64 {
    let s = 5f64.sqrt() * r;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

fn scaled_distance(a: &[f64], b: &[f64], theta: &[f64]) -> f64 {
    a.iter().zip(b).zip(theta).map(|((x, y), t)| ((x - y) / t).powi(2)).sum::<f64>().sqrt()
}

fn correlation_matrix(z: &PointSet, theta: &[f64], nugget: f64) -> DMatrix<f64> {
    let n = z.len();
    let mut r = DMatrix::identity(n, n);
    for i in 0..n {
        for j in 0..i {
            let v = matern52(scaled_distance(z.row(i), z.row(j), theta));
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
        r[(i, i)] = 1.0 + nugget;
    }
    r
}

/// Generalised least-squares solution for fixed correlation parameters.
struct GlsFit {
    chol: Cholesky<f64, Dyn>,
    beta: DVector<f64>,
    weights: DVector<f64>,
    sigma2: f64,
    ln_det: f64,
    nugget: f64,
}

impl GlsFit {
    fn objective(&self, n: usize) -> f64 {
        n as f64 * self.sigma2.ln() + self.ln_det
    }
}

fn gls(z: &PointSet, y: &DVector<f64>, f: &DMatrix<f64>, theta: &[f64], nugget: f64) -> Option<GlsFit> {
    let n = z.len();
    let chol = correlation_matrix(z, theta, nugget).cholesky()?;
    let ln_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let rinv_f = chol.solve(f);
    let a = f.tr_mul(&rinv_f);
    let beta = a.cholesky()?.solve(&rinv_f.tr_mul(y));
    let resid = y - f * &beta;
    let weights = chol.solve(&resid);
    let sigma2 = (resid.dot(&weights) / n as f64).max(SIGMA2_FLOOR);
    if !sigma2.is_finite() || !beta.iter().all(|v| v.is_finite()) {
        return None;
    }
    Some(GlsFit { chol, beta, weights, sigma2, ln_det, nugget })
}

/// Tries the nugget ladder `1e-10, 1e-9, …, 1e-6` and returns the first fit
/// whose correlation matrix factorises.
fn gls_ladder(z: &PointSet, y: &DVector<f64>, f: &DMatrix<f64>, theta: &[f64]) -> Option<GlsFit> {
    let mut nugget = NUGGET_START;
    while nugget <= NUGGET_MAX * (1.0 + 1e-9) {
        if let Some(fit) = gls(z, y, f, theta, nugget) {
            return Some(fit);
        }
        nugget *= 10.0;
    }
    None
}

/// Concentrated objective `n ln σ̂² + ln det R` (twice the negative profile
/// log-likelihood up to constants) at length scales `theta` and a fixed nugget.
pub fn profile_objective(z: &PointSet, y: &[f64], trend: &MultiIndexSet, theta: &[f64], nugget: f64) -> Result<f64> {
    let f = trend.design_matrix(z);
    let yv = DVector::from_column_slice(y);
    gls(z, &yv, &f, theta, nugget)
        .map(|g| g.objective(y.len()))
        .ok_or(Error::Conditioning { nugget })
}

/// Analytic gradient of [`profile_objective`] with respect to `ln θ`.
pub fn profile_objective_gradient(
    z: &PointSet,
    y: &[f64],
    trend: &MultiIndexSet,
    theta: &[f64],
    nugget: f64,
) -> Result<Vec<f64>> {
    let f = trend.design_matrix(z);
    let yv = DVector::from_column_slice(y);
    let g = gls(z, &yv, &f, theta, nugget).ok_or(Error::Conditioning { nugget })?;
    let rinv = g.chol.inverse();
    let n = z.len();
    let d = z.dim();
    let mut grad = vec![0.0; d];
    let s5 = 5f64.sqrt();
    for i in 0..n {
        for j in 0..i {
            let (zi, zj) = (z.row(i), z.row(j));
            let r = scaled_distance(zi, zj, theta);
            let common = 5.0 / 3.0 * (1.0 + s5 * r) * (-s5 * r).exp();
            let pair = 2.0 * (rinv[(i, j)] - g.weights[i] * g.weights[j] / g.sigma2);
            for k in 0..d {
                let u = (zi[k] - zj[k]) / theta[k];
                grad[k] += pair * common * u * u;
            }
        }
    }
    Ok(grad)
}

/// Universal Kriging with Matérn 5/2 ellipsoidal correlation, fitted in
/// standard-normal space.
#[derive(Clone, Debug)]
pub struct KrigingModel {
    trend: MultiIndexSet,
    beta: Vec<f64>,
    sigma2: f64,
    theta: Vec<f64>,
    nugget: f64,
    z: PointSet,
    y: Vec<f64>,
    rv: RandomVector,
    chol: Cholesky<f64, Dyn>,
    weights: DVector<f64>,
}

#[derive(Serialize, Deserialize)]
struct KrigingDocument {
    trend: MultiIndexSet,
    beta: Vec<f64>,
    process_variance: f64,
    length_scales: Vec<f64>,
    nugget: f64,
    correlation: String,
    training_inputs: Vec<Vec<f64>>,
    training_responses: Vec<f64>,
    rv: RandomVector,
}

impl Serialize for KrigingModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        KrigingDocument {
            trend: self.trend.clone(),
            beta: self.beta.clone(),
            process_variance: self.sigma2,
            length_scales: self.theta.clone(),
            nugget: self.nugget,
            correlation: "matern-5/2".into(),
            training_inputs: self.z.to_rows(),
            training_responses: self.y.clone(),
            rv: self.rv.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for KrigingModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = KrigingDocument::deserialize(d)?;
        if doc.correlation != "matern-5/2" {
            return Err(serde::de::Error::custom(format!("unsupported correlation '{}'", doc.correlation)));
        }
        let z = PointSet::from_rows(&doc.training_inputs).map_err(serde::de::Error::custom)?;
        KrigingModel::from_parts(
            doc.trend,
            doc.beta,
            doc.process_variance,
            doc.length_scales,
            doc.nugget,
            z,
            doc.training_responses,
            doc.rv,
        )
        .map_err(serde::de::Error::custom)
    }
}

impl KrigingModel {
    /// Rebuilds a model from its stored parameters, refactorising `R`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        trend: MultiIndexSet,
        beta: Vec<f64>,
        sigma2: f64,
        theta: Vec<f64>,
        nugget: f64,
        z: PointSet,
        y: Vec<f64>,
        rv: RandomVector,
    ) -> Result<Self> {
        let d = rv.dim();
        if z.dim() != d || theta.len() != d || trend.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: theta.len() });
        }
        if beta.len() != trend.len() || y.len() != z.len() {
            return Err(Error::InvalidArgument("inconsistent Kriging parameters".into()));
        }
        if !theta.iter().all(|t| *t > 0.0) || !(sigma2 > 0.0) || !(nugget >= 0.0) {
            return Err(Error::InvalidArgument("length scales and variance must be positive".into()));
        }
        let chol = correlation_matrix(&z, &theta, nugget).cholesky().ok_or(Error::Conditioning { nugget })?;
        let f = trend.design_matrix(&z);
        let resid = DVector::from_column_slice(&y) - f * DVector::from_column_slice(&beta);
        let weights = chol.solve(&resid);
        Ok(Self { trend, beta, sigma2, theta, nugget, z, y, rv, chol, weights })
    }

    fn from_fit(trend: MultiIndexSet, theta: Vec<f64>, fit: GlsFit, z: PointSet, y: Vec<f64>, rv: RandomVector) -> Self {
        Self {
            trend,
            beta: fit.beta.iter().copied().collect(),
            sigma2: fit.sigma2,
            theta,
            nugget: fit.nugget,
            z,
            y,
            rv,
            chol: fit.chol,
            weights: fit.weights,
        }
    }

    pub fn trend(&self) -> &MultiIndexSet {
        &self.trend
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn process_variance(&self) -> f64 {
        self.sigma2
    }

    pub fn length_scales(&self) -> &[f64] {
        &self.theta
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn rv(&self) -> &RandomVector {
        &self.rv
    }

    pub fn dim(&self) -> usize {
        self.rv.dim()
    }

    pub fn training_inputs(&self) -> &PointSet {
        &self.z
    }

    pub fn cholesky(&self) -> &Cholesky<f64, Dyn> {
        &self.chol
    }

    /// Mean prediction at standard-normal-space points.
    pub fn predict_standard(&self, z: &PointSet) -> Result<Vec<f64>> {
        if z.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: z.dim() });
        }
        let mut fb = vec![0.0; self.trend.len()];
        Ok(z
            .rows()
            .map(|zi| {
                self.trend.eval(zi, &mut fb);
                let trend: f64 = fb.iter().zip(&self.beta).map(|(a, b)| a * b).sum();
                let corr: f64 = self
                    .z
                    .rows()
                    .zip(self.weights.iter())
                    .map(|(zj, w)| matern52(scaled_distance(zi, zj, &self.theta)) * w)
                    .sum();
                trend + corr
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

/// Bounds of `ln θ`: `[1e-2, 1e2]` times the range of each standard-normal input.
fn log_theta_bounds(z: &PointSet) -> Vec<(f64, f64)> {
    (0..z.dim())
        .map(|k| {
            let (lo, hi) = z.rows().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r[k]), b.max(r[k])));
            let range = (hi - lo).max(1e-12);
            ((THETA_LO * range).ln(), (THETA_HI * range).ln())
        })
        .collect()
}

struct Likelihood<'a> {
    z: &'a PointSet,
    y: &'a DVector<f64>,
    f: &'a DMatrix<f64>,
    bounds: &'a [(f64, f64)],
}

impl Likelihood<'_> {
    fn eval(&self, log_theta: &[f64]) -> f64 {
        let mut excess = 0.0;
        let theta: Vec<f64> = log_theta
            .iter()
            .zip(self.bounds)
            .map(|(v, (lo, hi))| {
                let c = v.clamp(*lo, *hi);
                excess += (v - c).powi(2);
                c.exp()
            })
            .collect();
        match gls_ladder(self.z, self.y, self.f, &theta) {
            Some(fit) => fit.objective(self.z.len()) + 1e3 * excess,
            None => f64::INFINITY,
        }
    }
}

impl CostFunction for Likelihood<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.eval(p))
    }
}

/// Fits Kriging with the given trend at fixed length scales.
pub fn fit_kriging_fixed(ed: &ExperimentalDesign, trend: &MultiIndexSet, theta: &[f64]) -> Result<KrigingModel> {
    let z = ed.standard_inputs()?;
    let yv = DVector::from_column_slice(ed.y());
    let f = trend.design_matrix(&z);
    let fit = gls_ladder(&z, &yv, &f, theta).ok_or(Error::Conditioning { nugget: NUGGET_MAX })?;
    Ok(KrigingModel::from_fit(trend.clone(), theta.to_vec(), fit, z, ed.y().to_vec(), ed.rv().clone()))
}

/// Universal Kriging with length scales chosen by maximum profile likelihood
/// over ten seeded Nelder-Mead starts.
pub fn train_kriging(ed: &ExperimentalDesign, trend: &MultiIndexSet, seed: u64) -> Result<KrigingModel> {
    let d = ed.dim();
    let n = ed.len();
    if n < d + 2 {
        return Err(Error::Precondition(format!("need at least {} points, got {n}", d + 2)));
    }
    if trend.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: trend.dim() });
    }
    if trend.len() >= n {
        return Err(Error::Precondition(format!("{} trend terms for {n} points", trend.len())));
    }
    let z = ed.standard_inputs()?;
    let yv = DVector::from_column_slice(ed.y());
    let f = trend.design_matrix(&z);
    let bounds = log_theta_bounds(&z);
    let mut rng = rng::stream(rng::derive_seed(seed, "kriging-starts"), 0);
    let max_iters = (40 * (d as u64 + 1)).min(400);

    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..N_STARTS {
        let start: Vec<f64> = bounds.iter().map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect();
        let mut simplex = vec![start.clone()];
        for k in 0..d {
            let mut v = start.clone();
            let step = 0.25 * (bounds[k].1 - bounds[k].0);
            v[k] = if v[k] + step <= bounds[k].1 { v[k] + step } else { v[k] - step };
            simplex.push(v);
        }
        let problem = Likelihood { z: &z, y: &yv, f: &f, bounds: &bounds };
        let solver = NelderMead::new(simplex)
            .with_sd_tolerance(1e-6)
            .map_err(|e| Error::Training(e.to_string()))?;
        let res = Executor::new(problem, solver)
            .configure(|s| s.max_iters(max_iters))
            .run()
            .map_err(|e| Error::Training(e.to_string()))?;
        let state = res.state();
        if let Some(p) = state.best_param.clone() {
            if state.best_cost.is_finite() && best.as_ref().is_none_or(|(c, _)| state.best_cost < *c) {
                best = Some((state.best_cost, p));
            }
        }
    }
    let (_, log_theta) = best.ok_or(Error::Conditioning { nugget: NUGGET_MAX })?;
    let theta: Vec<f64> = log_theta.iter().zip(&bounds).map(|(v, (lo, hi))| v.clamp(*lo, *hi).exp()).collect();
    let fit = gls_ladder(&z, &yv, &f, &theta).ok_or(Error::Conditioning { nugget: NUGGET_MAX })?;
    Ok(KrigingModel::from_fit(trend.clone(), theta, fit, z, ed.y().to_vec(), ed.rv().clone()))
}

/// Polynomial-chaos Kriging: the LAR-selected PCE basis is the Kriging trend.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PckModel {
    pub kriging: KrigingModel,
    pub pce: PceModel,
}

impl PckModel {
    pub fn predict(&self, x: &PointSet) -> Result<Vec<f64>> {
        self.kriging.predict(x)
    }
}

/// Default cap on the trend degree of a PC-Kriging model.
pub const PCK_MAX_DEGREE: usize = 3;

/// `nu_max = None` caps the trend degree at [`PCK_MAX_DEGREE`].
pub fn train_pck(ed: &ExperimentalDesign, nu_max: Option<usize>, seed: u64) -> Result<PckModel> {
    let nu = nu_max.unwrap_or_else(|| default_max_degree(ed.dim(), ed.len()).min(PCK_MAX_DEGREE));
    let pce = train_pce(ed, Some(nu))?;
    let kriging = train_kriging(ed, pce.basis(), seed)?;
    Ok(PckModel { kriging, pce })
}

/// Analytic leave-one-out residuals of universal Kriging at fixed
/// correlation parameters, with the trend re-estimated in every fold.
pub fn kriging_loo_residuals(model: &KrigingModel) -> Result<Vec<f64>> {
    let f = model.trend.design_matrix(&model.z);
    let rinv = model.chol.inverse();
    let rinv_f = &rinv * &f;
    let a = f.tr_mul(&rinv_f);
    let a_inv = a.cholesky().ok_or(Error::Conditioning { nugget: model.nugget })?.inverse();
    let b = &rinv - &rinv_f * a_inv * rinv_f.transpose();
    let yv = DVector::from_column_slice(&model.y);
    let by = &b * yv;
    Ok((0..model.y.len()).map(|i| by[i] / b[(i, i)]).collect())
}

/// Relative LOO error of a Kriging model on its training design.
pub fn kriging_loo(model: &KrigingModel, ed: &ExperimentalDesign) -> Result<f64> {
    if ed.len() != model.y.len() {
        return Err(Error::Precondition("model was not trained on this design".into()));
    }
    let e = kriging_loo_residuals(model)?;
    Ok(e.iter().map(|v| v * v).sum::<f64>() / e.len() as f64 / sample_variance(ed.y()))
}
