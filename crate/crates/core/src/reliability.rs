//! Failure-probability estimation by crude Monte Carlo and importance sampling.

use std::sync::Arc;

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::PointSet;
use crate::randvec::RandomVector;
use crate::rng;
use crate::special::norm_ppf;

type BatchFn = dyn Fn(&PointSet) -> Result<Vec<f64>> + Send + Sync;

/// A limit-state function `g` on physical space; failure is `g(x) ≤ 0`.
#[derive(Clone)]
pub struct LimitState {
    rv: RandomVector,
    eval: Arc<BatchFn>,
    description: String,
}

impl std::fmt::Debug for LimitState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LimitState").field("description", &self.description).field("dim", &self.rv.dim()).finish()
    }
}

impl LimitState {
    /// Wraps a pointwise function.
    pub fn new(rv: RandomVector, description: impl Into<String>, g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            rv,
            eval: Arc::new(move |x: &PointSet| Ok(x.rows().map(&g).collect())),
            description: description.into(),
        }
    }

    /// Wraps a function that evaluates a whole batch at once.
    pub fn from_batch(
        rv: RandomVector,
        description: impl Into<String>,
        g: impl Fn(&PointSet) -> Result<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        Self { rv, eval: Arc::new(g), description: description.into() }
    }

    pub fn rv(&self) -> &RandomVector {
        &self.rv
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn dim(&self) -> usize {
        self.rv.dim()
    }

    pub fn evaluate(&self, x: &PointSet) -> Result<Vec<f64>> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.dim() });
        }
        let out = (self.eval)(x)?;
        if out.len() != x.len() {
            return Err(Error::External(format!("limit state returned {} values for {} points", out.len(), x.len())));
        }
        Ok(out)
    }

    /// Evaluates `g` at standard-normal-space points.
    pub fn evaluate_standard(&self, z: &PointSet) -> Result<Vec<f64>> {
        let d = self.dim();
        let mut x = PointSet::from_flat(d, vec![0.0; z.len() * d])?;
        for (i, zi) in z.rows().enumerate() {
            self.rv.from_standard_into(zi, x.row_mut(i));
        }
        self.evaluate(&x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mc,
    Is,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mc" => Ok(Method::Mc),
            "is" => Ok(Method::Is),
            _ => Err(Error::InvalidArgument(format!("unknown method '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityEstimate {
    pub pf: f64,
    pub beta: f64,
    pub cov: f64,
    pub n_evals: u64,
    pub method: Method,
}

impl ReliabilityEstimate {
    pub fn new(pf: f64, cov: f64, n_evals: u64, method: Method) -> Self {
        Self { pf, beta: -norm_ppf(pf), cov, n_evals, method }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SimulationOptions {
    pub cov_target: f64,
    /// Draws per batch; rounded up to a whole number of generator chunks.
    pub batch: usize,
    pub max_n: u64,
    pub seed: u64,
}

impl SimulationOptions {
    pub fn new(cov_target: f64, seed: u64) -> Self {
        Self { cov_target, batch: 1 << 17, max_n: 100_000_000, seed }
    }
}

#[derive(Clone, Copy, Default)]
struct Sums {
    n: u64,
    hits: u64,
    w: f64,
    w2: f64,
}

impl Sums {
    fn add(&mut self, o: &Sums) {
        self.n += o.n;
        self.hits += o.hits;
        self.w += o.w;
        self.w2 += o.w2;
    }
}

fn run_chunk(ls: &LimitState, center: &[f64], seed: u64, chunk: u64) -> Result<Sums> {
    let d = ls.dim();
    let mut r = rng::stream(seed, chunk);
    let mut z = PointSet::from_flat(d, vec![0.0; rng::CHUNK * d])?;
    for i in 0..rng::CHUNK {
        for (k, zk) in z.row_mut(i).iter_mut().enumerate() {
            *zk = center[k] + norm_ppf(rng::unit(&mut r));
        }
    }
    let g = ls.evaluate_standard(&z)?;
    let half_c2 = 0.5 * center.iter().map(|c| c * c).sum::<f64>();
    let shifted = half_c2 > 0.0;
    let mut s = Sums { n: rng::CHUNK as u64, ..Default::default() };
    for (zi, gi) in z.rows().zip(g) {
        if gi.is_nan() {
            return Err(Error::External("limit state returned NaN".into()));
        }
        if gi <= 0.0 {
            let w = if shifted { (half_c2 - zi.iter().zip(center).map(|(a, b)| a * b).sum::<f64>()).exp() } else { 1.0 };
            s.hits += 1;
            s.w += w;
            s.w2 += w * w;
        }
    }
    Ok(s)
}

fn simulate(ls: &LimitState, center: &[f64], opts: &SimulationOptions, method: Method) -> Result<ReliabilityEstimate> {
    if !(opts.cov_target > 0.0) {
        return Err(Error::InvalidArgument("cov_target must be positive".into()));
    }
    if center.len() != ls.dim() {
        return Err(Error::DimensionMismatch { expected: ls.dim(), got: center.len() });
    }
    let per_batch = opts.batch.div_ceil(rng::CHUNK).max(1) as u64;
    let mut total = Sums::default();
    let mut next_chunk = 0u64;
    loop {
        let parts: Vec<Result<Sums>> = (next_chunk..next_chunk + per_batch)
            .into_par_iter()
            .map(|c| run_chunk(ls, center, opts.seed, c))
            .collect();
        for p in parts {
            total.add(&p?);
        }
        next_chunk += per_batch;
        let n = total.n as f64;
        let pf = total.w / n;
        let cov = match method {
            Method::Mc => ((1.0 - pf) / (n * pf)).sqrt(),
            Method::Is => {
                let var = (total.w2 / n - pf * pf).max(0.0) * n / (n - 1.0);
                (var / n).sqrt() / pf
            }
        };
        let done = total.hits > 0 && cov <= opts.cov_target;
        if done || total.n >= opts.max_n {
            if total.hits == 0 {
                return Err(Error::NoFailures { n_used: total.n as usize });
            }
            if method == Method::Is {
                let ess = total.w * total.w / total.w2;
                if ess < 10.0 {
                    return Err(Error::DegenerateProposal { ess });
                }
            }
            if !done {
                return Err(Error::BudgetExhausted { estimate: pf, cov, n_used: total.n as usize });
            }
            return Ok(ReliabilityEstimate::new(pf, cov, total.n, method));
        }
    }
}

/// Crude Monte Carlo with the binomial coefficient of variation.
pub fn monte_carlo_pf(ls: &LimitState, opts: &SimulationOptions) -> Result<ReliabilityEstimate> {
    simulate(ls, &vec![0.0; ls.dim()], opts, Method::Mc)
}

/// Importance sampling with a unit-variance normal proposal centred at
/// `center` in standard-normal space.
pub fn importance_sampling_pf(ls: &LimitState, center: &[f64], opts: &SimulationOptions) -> Result<ReliabilityEstimate> {
    simulate(ls, center, opts, Method::Is)
}

const RAY_MAX: f64 = 12.0;
const RAY_STEP: f64 = 0.25;

/// Distance from the origin to the first failure point along direction `u`,
/// or `RAY_MAX` plus a penalty growing with the smallest safe margin seen.
fn ray_distance(ls: &LimitState, u: &[f64], g0: f64) -> f64 {
    let d = u.len();
    let steps = (RAY_MAX / RAY_STEP) as usize;
    let mut pts = PointSet::from_flat(d, vec![0.0; steps * d]).expect("dims");
    for s in 0..steps {
        let t = (s + 1) as f64 * RAY_STEP;
        for (k, v) in pts.row_mut(s).iter_mut().enumerate() {
            *v = t * u[k];
        }
    }
    let g = match ls.evaluate_standard(&pts) {
        Ok(g) => g,
        Err(_) => return f64::INFINITY,
    };
    let Some(first) = g.iter().position(|v| *v <= 0.0) else {
        let margin = g.iter().copied().fold(f64::INFINITY, f64::min);
        return RAY_MAX + (margin / g0).max(0.0);
    };
    let (mut lo, mut hi) = (first as f64 * RAY_STEP, (first + 1) as f64 * RAY_STEP);
    let mut one = PointSet::from_flat(d, vec![0.0; d]).expect("dims");
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        for (k, v) in one.row_mut(0).iter_mut().enumerate() {
            *v = mid * u[k];
        }
        match ls.evaluate_standard(&one) {
            Ok(g) if g[0] <= 0.0 => hi = mid,
            Ok(_) => lo = mid,
            Err(_) => return f64::INFINITY,
        }
        if hi - lo < 1e-10 {
            break;
        }
    }
    hi
}

struct RayProblem<'a> {
    ls: &'a LimitState,
    g0: f64,
}

impl CostFunction for RayProblem<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, v: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let nrm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if nrm < 1e-12 {
            return Ok(f64::INFINITY);
        }
        let u: Vec<f64> = v.iter().map(|a| a / nrm).collect();
        Ok(ray_distance(self.ls, &u, self.g0))
    }
}

const SEARCH_DRAWS: usize = 4096;
const SEARCH_SCALES: [f64; 4] = [1.0, 2.0, 3.0, 4.5];
const LOCAL_STARTS: usize = 5;

/// Approximate most probable failure point in standard-normal space.
/// Falls back to the origin when no failure is found.
pub fn find_proposal_center(ls: &LimitState, seed: u64) -> Result<Vec<f64>> {
    let d = ls.dim();
    let origin = vec![0.0; d];
    let g0 = ls.evaluate_standard(&PointSet::from_flat(d, origin.clone())?)?[0];
    if g0 <= 0.0 {
        return Ok(origin);
    }
    let mut r = rng::stream(rng::derive_seed(seed, "design-point"), 0);
    let mut failing: Vec<Vec<f64>> = Vec::new();
    for &s in &SEARCH_SCALES {
        let mut z = PointSet::from_flat(d, vec![0.0; SEARCH_DRAWS * d])?;
        for i in 0..SEARCH_DRAWS {
            for v in z.row_mut(i) {
                *v = s * norm_ppf(rng::unit(&mut r));
            }
        }
        let g = ls.evaluate_standard(&z)?;
        failing.extend(z.rows().zip(&g).filter(|(_, gi)| **gi <= 0.0).map(|(zi, _)| zi.to_vec()));
        if failing.len() >= 4 * LOCAL_STARTS {
            break;
        }
    }
    if failing.is_empty() {
        return Ok(origin);
    }
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut starts: Vec<(f64, Vec<f64>)> = failing
        .iter()
        .map(|z| {
            let u: Vec<f64> = z.iter().map(|a| a / norm(z)).collect();
            (ray_distance(ls, &u, g0), u)
        })
        .collect();
    starts.sort_by(|a, b| a.0.total_cmp(&b.0));
    starts.truncate(LOCAL_STARTS);

    let mut best = starts[0].clone();
    for (_, u) in &starts {
        let mut simplex = vec![u.clone()];
        for k in 0..d {
            let mut v = u.clone();
            v[k] += if v[k] >= 0.0 { 0.2 } else { -0.2 };
            simplex.push(v);
        }
        let solver = NelderMead::new(simplex).with_sd_tolerance(1e-10).map_err(|e| Error::Training(e.to_string()))?;
        let res = Executor::new(RayProblem { ls, g0 }, solver)
            .configure(|s| s.max_iters(200 * d as u64))
            .run()
            .map_err(|e| Error::Training(e.to_string()))?;
        let st = res.state();
        if let Some(p) = st.best_param.clone() {
            if st.best_cost < best.0 {
                let n = norm(&p);
                best = (st.best_cost, p.iter().map(|a| a / n).collect());
            }
        }
    }
    if best.0 > RAY_MAX {
        return Ok(origin);
    }
    Ok(best.1.iter().map(|u| u * best.0).collect())
}

/// Picks the proposal centre and runs importance sampling.
pub fn importance_sampling_auto(ls: &LimitState, opts: &SimulationOptions) -> Result<ReliabilityEstimate> {
    let center = find_proposal_center(ls, rng::derive_seed(opts.seed, "center"))?;
    importance_sampling_pf(ls, &center, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_matches_pf() {
        let e = ReliabilityEstimate::new(1e-3, 0.1, 10, Method::Mc);
        assert!((e.beta - 3.090_232_306_167_813_5).abs() < 1e-12);
        assert_eq!(ReliabilityEstimate::new(0.5, 0.1, 10, Method::Mc).beta, 0.0);
    }
}
