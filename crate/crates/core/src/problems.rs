//! Benchmark problems: Franke, strip foundation, the d-dimensional function
//! with prescribed failure probability, and externally evaluated plug-ins.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::PointSet;
use crate::randvec::{GaussianCopula, Marginal, RandomVector};
use crate::reliability::LimitState;
use crate::special::norm_ppf;

type ModelFn = dyn Fn(&PointSet) -> Result<Vec<f64>> + Send + Sync;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub beta: f64,
    pub pf: f64,
    pub source: String,
}

/// A model on a random input with limit state `g = model - threshold`.
#[derive(Clone)]
pub struct Problem {
    name: String,
    rv: RandomVector,
    model: Arc<ModelFn>,
    threshold: f64,
    reference: Option<Reference>,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem").field("name", &self.name).field("dim", &self.dim()).finish()
    }
}

impl Problem {
    /// `dim` is the number of inputs the model expects and must match `rv`.
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        rv: RandomVector,
        threshold: f64,
        reference: Option<Reference>,
        model: impl Fn(&PointSet) -> Result<Vec<f64>> + Send + Sync + 'static,
    ) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::InvalidArgument("problem name is empty".into()));
        }
        if rv.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: rv.dim() });
        }
        Ok(Self { name, rv, model: Arc::new(model), threshold, reference })
    }

    /// Same as [`Problem::new`] for a pointwise model.
    pub fn pointwise(
        name: impl Into<String>,
        dim: usize,
        rv: RandomVector,
        threshold: f64,
        reference: Option<Reference>,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::new(name, dim, rv, threshold, reference, move |x: &PointSet| Ok(x.rows().map(&f).collect()))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rv(&self) -> &RandomVector {
        &self.rv
    }

    pub fn dim(&self) -> usize {
        self.rv.dim()
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn reference(&self) -> Option<&Reference> {
        self.reference.as_ref()
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn evaluate(&self, x: &PointSet) -> Result<Vec<f64>> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.dim() });
        }
        let y = (self.model)(x)?;
        if y.len() != x.len() {
            return Err(Error::External(format!("{} returned {} values for {} points", self.name, y.len(), x.len())));
        }
        Ok(y)
    }

    pub fn limit_state(&self) -> LimitState {
        let model = self.model.clone();
        let t = self.threshold;
        LimitState::from_batch(self.rv.clone(), self.name.clone(), move |x: &PointSet| {
            Ok(model(x)?.into_iter().map(|v| v - t).collect())
        })
    }
}

pub fn franke(x: &[f64]) -> f64 {
    let (a, b) = (9.0 * x[0], 9.0 * x[1]);
    0.75 * (-(a - 2.0).powi(2) / 4.0 - (b - 2.0).powi(2) / 4.0).exp()
        + 0.75 * (-(a + 1.0).powi(2) / 49.0 - (b + 1.0) / 10.0).exp()
        + 0.5 * (-(a - 7.0).powi(2) / 4.0 - (b - 3.0).powi(2) / 4.0).exp()
        - 0.2 * (-(a - 4.0).powi(2) - (b - 7.0).powi(2)).exp()
}

pub const STRIP_WIDTH: f64 = 2.7;
pub const STRIP_DEPTH: f64 = 0.5;

/// Bearing capacity factors `(N_c, N_q, N_γ)` for a friction angle in degrees.
pub fn bearing_factors(phi_deg: f64) -> Result<(f64, f64, f64)> {
    if !(phi_deg > 0.0 && phi_deg < 90.0) {
        return Err(Error::Domain(format!("friction angle {phi_deg} outside (0, 90) degrees")));
    }
    let phi = phi_deg.to_radians();
    let t = phi.tan();
    let nq = (std::f64::consts::PI * t).exp() * (std::f64::consts::FRAC_PI_4 + phi / 2.0).tan().powi(2);
    Ok(((nq - 1.0) / t, nq, 1.5 * (nq - 1.0) * t))
}

/// Safety factor `Q_p / F` for `x = (φ [deg], c, γ, F)`.
pub fn strip_foundation(x: &[f64]) -> Result<f64> {
    let (phi, c, gamma, f) = (x[0], x[1], x[2], x[3]);
    let (nc, nq, ng) = bearing_factors(phi)?;
    let b = STRIP_WIDTH;
    Ok(b * (c * nc + STRIP_DEPTH * gamma * nq + 0.5 * b * gamma * ng) / f)
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// `h(Σx) - h(√d Φ⁻¹(pf))` with the logistic `h`.
pub fn d_dimensional(x: &[f64], pf: f64) -> f64 {
    let d = x.len() as f64;
    sigmoid(x.iter().sum()) - sigmoid(d.sqrt() * norm_ppf(pf))
}

pub fn franke_problem() -> Problem {
    let m = Marginal::normal(0.5, 0.2).expect("valid marginal");
    let rv = RandomVector::independent(vec![m.clone(), m]).expect("valid rv");
    let reference = Reference { beta: 1.58, pf: 5.74e-2, source: "published".into() };
    Problem::pointwise("franke", 2, rv, 0.1, Some(reference), franke).expect("valid problem")
}

pub fn strip_foundation_rv() -> RandomVector {
    let marginals = vec![
        Marginal::lognormal(26.9, 1.3).expect("valid"),
        Marginal::lognormal(19.7, 4.9).expect("valid"),
        Marginal::lognormal(21.0, 1.7).expect("valid"),
        Marginal::gumbel(1400.0, 140.0).expect("valid"),
    ];
    let mut s = DMatrix::identity(4, 4);
    s[(0, 1)] = -0.92;
    s[(1, 0)] = -0.92;
    RandomVector::new(marginals, GaussianCopula::new(s).expect("valid copula")).expect("valid rv")
}

pub fn strip_foundation_problem() -> Problem {
    let reference = Reference { beta: 3.47, pf: 2.57e-4, source: "published".into() };
    Problem::new("strip_foundation", 4, strip_foundation_rv(), 1.0, Some(reference), |x: &PointSet| {
        x.rows().map(strip_foundation).collect()
    })
    .expect("valid problem")
}

pub fn d_dimensional_problem(d: usize, pf: f64) -> Result<Problem> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    if !(pf > 0.0 && pf < 1.0) {
        return Err(Error::InvalidArgument(format!("pf must lie in (0, 1), got {pf}")));
    }
    let reference = Reference { beta: -norm_ppf(pf), pf, source: "exact".into() };
    Problem::pointwise(format!("ddim:{d}:{pf}"), d, RandomVector::standard_normal(d), 0.0, Some(reference), move |x| {
        d_dimensional(x, pf)
    })
}

/// Problems whose models must be supplied as plug-ins, with their published
/// dimension and reference reliability `(name, d, β, P_f)`.
pub const PLUGIN_SLOTS: [(&str, usize, f64, f64); 5] = [
    ("short_column", 3, 2.51, 5.97e-3),
    ("bracket", 5, 2.00, 2.29e-2),
    ("infinite_slope", 6, 1.58, 5.76e-2),
    ("steel_column", 9, 4.11, 1.94e-5),
    ("truss", 10, 2.96, 1.52e-3),
];

fn parse_ddim(name: &str) -> Option<Result<Problem>> {
    let rest = name.strip_prefix("ddim:")?;
    let mut it = rest.splitn(2, ':');
    let d = it.next()?.parse::<usize>().ok();
    let pf = it.next().and_then(|s| s.parse::<f64>().ok());
    Some(match (d, pf) {
        (Some(d), Some(pf)) => d_dimensional_problem(d, pf),
        _ => Err(Error::InvalidArgument(format!("expected ddim:<d>:<pf>, got '{name}'"))),
    })
}

/// Name-addressable problems: the built-ins plus anything registered.
#[derive(Clone, Debug, Default)]
pub struct Registry {
    problems: BTreeMap<String, Problem>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::new();
        r.register(franke_problem()).expect("fresh registry");
        r.register(strip_foundation_problem()).expect("fresh registry");
        r
    }

    pub fn register(&mut self, problem: Problem) -> Result<()> {
        let name = problem.name().to_string();
        if self.problems.contains_key(&name) || name.starts_with("ddim:") {
            return Err(Error::DuplicateProblem(name));
        }
        self.problems.insert(name, problem);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<Problem> {
        if let Some(p) = self.problems.get(name) {
            return Ok(p.clone());
        }
        if let Some(p) = parse_ddim(name) {
            return p;
        }
        if let Some((_, d, ..)) = PLUGIN_SLOTS.iter().find(|s| s.0 == name) {
            return Err(Error::UnknownProblem(format!("{name} ({d} inputs) needs a plug-in model")));
        }
        Err(Error::UnknownProblem(name.to_string()))
    }

    pub fn names(&self) -> Vec<String> {
        self.problems.keys().cloned().collect()
    }
}

/// JSON description of an externally evaluated model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PluginSpec {
    pub name: String,
    pub command: PathBuf,
    #[serde(default)]
    pub args: Vec<String>,
    pub dim: usize,
    pub rv: RandomVector,
    #[serde(default)]
    pub threshold: f64,
    #[serde(default)]
    pub reference: Option<Reference>,
}

impl PluginSpec {
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut spec: PluginSpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if spec.command.is_relative() && spec.command.components().count() > 1 {
            if let Some(dir) = path.parent() {
                spec.command = dir.join(&spec.command);
            }
        }
        Ok(spec)
    }

    pub fn into_problem(self) -> Result<Problem> {
        let PluginSpec { name, command, args, dim, rv, threshold, reference } = self;
        Problem::new(name, dim, rv, threshold, reference, move |x: &PointSet| run_external(&command, &args, x))
    }
}

/// Feeds `x` as headerless CSV on stdin and reads one response per line.
pub fn run_external(command: &Path, args: &[String], x: &PointSet) -> Result<Vec<f64>> {
    let mut child = Command::new(command)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .map_err(|e| Error::External(format!("cannot start {}: {e}", command.display())))?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    let mut buf = Vec::new();
    x.write_csv(&mut buf)?;
    let writer = std::thread::spawn(move || stdin.write_all(&buf));
    let stdout = child.stdout.take().expect("piped stdout");
    let mut out = Vec::with_capacity(x.len());
    for line in BufReader::new(stdout).lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        out.push(t.parse::<f64>().map_err(|_| Error::External(format!("bad response line '{t}'")))?);
    }
    let status = child.wait()?;
    match writer.join() {
        Ok(Ok(())) => {}
        Ok(Err(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
        Ok(Err(e)) => return Err(e.into()),
        Err(_) => return Err(Error::External("stdin writer panicked".into())),
    }
    if !status.success() {
        return Err(Error::External(format!("{} exited with {status}", command.display())));
    }
    if out.len() != x.len() {
        return Err(Error::External(format!("{} returned {} responses for {} rows", command.display(), out.len(), x.len())));
    }
    Ok(out)
}
