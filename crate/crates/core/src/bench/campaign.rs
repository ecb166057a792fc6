use std::collections::{BTreeMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::{noise_tolerance, rmse, rrie};
use crate::error::{Error, Result};
use crate::hdr::{build_region, sample_hdr, HdrRegion};
use crate::points::PointSet;
use crate::problems::{PluginSpec, Problem, Registry};
use crate::reliability::{importance_sampling_auto, LimitState, SimulationOptions};
use crate::rng::derive_seed;
use crate::surrogate::{ExperimentalDesign, SamplerTag, Surrogate, SurrogateKind};

pub const RECORDS_FILE: &str = "records.csv";
pub const HEADER_FILE: &str = "campaign.json";
pub const TIMINGS_FILE: &str = "timings.csv";

fn default_sizes() -> Vec<usize> {
    vec![50, 100, 150, 200, 250]
}
fn default_alphas() -> Vec<f64> {
    vec![0.01]
}
fn default_surrogates() -> Vec<SurrogateKind> {
    vec![SurrogateKind::Pce, SurrogateKind::Pck]
}
fn default_replications() -> usize {
    20
}
fn default_validation() -> usize {
    100_000
}
fn default_cov() -> f64 {
    1e-3
}
fn default_level_cov() -> f64 {
    0.01
}
fn default_gamma() -> f64 {
    0.01
}

/// Where the reference reliability index of a problem comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceSource {
    /// Exact value when the problem has one, otherwise importance sampling on
    /// the true model at `reference_cov`.
    #[default]
    Computed,
    /// The problem's published value.
    Published,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub problems: Vec<String>,
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_surrogates")]
    pub surrogates: Vec<SurrogateKind>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_validation")]
    pub validation_size: usize,
    /// Coefficient of variation of the reliability estimate on each surrogate.
    #[serde(default = "default_cov")]
    pub cov_target: f64,
    /// Coefficient of variation of computed reference indices.
    #[serde(default = "default_cov")]
    pub reference_cov: f64,
    #[serde(default)]
    pub reference: ReferenceSource,
    /// Coefficient of variation of the HDR level estimate.
    #[serde(default = "default_level_cov")]
    pub level_cov: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    #[serde(default)]
    pub workers: usize,
    /// Plug-in problem specs, resolved relative to the config file.
    #[serde(default)]
    pub plugins: Vec<PathBuf>,
}

impl CampaignConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg: CampaignConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if let Some(dir) = path.parent() {
            for p in cfg.plugins.iter_mut() {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn samplers(&self) -> Vec<SamplerTag> {
        std::iter::once(SamplerTag::Natural).chain(self.alphas.iter().map(|a| SamplerTag::Hdr(*a))).collect()
    }

    fn registry(&self) -> Result<Registry> {
        let mut reg = Registry::with_builtins();
        for p in &self.plugins {
            reg.register(PluginSpec::from_file(p)?.into_problem()?)?;
        }
        Ok(reg)
    }

    pub fn validate(&self, registry: &Registry) -> Result<Vec<Problem>> {
        if self.problems.is_empty() || self.sizes.is_empty() || self.surrogates.is_empty() {
            return Err(Error::InvalidArgument("problems, sizes and surrogates must be non-empty".into()));
        }
        if self.replications < 1 {
            return Err(Error::InvalidArgument("replications must be at least 1".into()));
        }
        if self.validation_size < 2 {
            return Err(Error::InvalidArgument("validation_size must be at least 2".into()));
        }
        if self.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(Error::InvalidArgument("alphas must lie in (0, 1)".into()));
        }
        if !(self.cov_target > 0.0 && self.reference_cov > 0.0 && self.level_cov > 0.0) {
            return Err(Error::InvalidArgument("coefficients of variation must be positive".into()));
        }
        let mut seen = HashSet::new();
        let problems = self
            .problems
            .iter()
            .map(|name| {
                if !seen.insert(name) {
                    return Err(Error::DuplicateProblem(name.clone()));
                }
                let p = registry.get(name)?;
                if let Some(&n) = self.sizes.iter().find(|&&n| n < p.dim() + 2) {
                    return Err(Error::InvalidArgument(format!("size {n} is below d + 2 for {name}")));
                }
                Ok(p)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(problems)
    }
}

/// One replication of one (problem, sampler, surrogate, size) combination.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub problem: String,
    pub sampler: SamplerTag,
    pub surrogate: SurrogateKind,
    pub n: usize,
    pub replication: usize,
    pub rloo: f64,
    pub rmse: f64,
    pub rrie: f64,
    pub beta_hat: f64,
    pub tolerance: f64,
    pub disqualified: bool,
    pub basis_size: usize,
    pub validation_hash: String,
    pub error: String,
}

impl BenchmarkRecord {
    pub fn key(&self) -> RecordKey {
        RecordKey {
            problem: self.problem.clone(),
            n: self.n,
            sampler: self.sampler.to_string(),
            surrogate: self.surrogate.to_string(),
            replication: self.replication,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_empty()
    }

    fn failed(problem: &str, sampler: SamplerTag, surrogate: SurrogateKind, n: usize, rep: usize, hash: &str, e: &Error) -> Self {
        Self {
            problem: problem.into(),
            sampler,
            surrogate,
            n,
            replication: rep,
            rloo: f64::NAN,
            rmse: f64::NAN,
            rrie: f64::NAN,
            beta_hat: f64::NAN,
            tolerance: f64::NAN,
            disqualified: false,
            basis_size: 0,
            validation_hash: hash.into(),
            error: e.to_string().replace(['\n', '\r'], " "),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RecordKey {
    pub problem: String,
    pub n: usize,
    pub sampler: String,
    pub surrogate: String,
    pub replication: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceValue {
    pub beta: f64,
    pub pf: f64,
    pub source: String,
}

/// JSON sidecar written next to the record file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignHeader {
    pub config: CampaignConfig,
    pub validation_hashes: BTreeMap<String, String>,
    pub references: BTreeMap<String, ReferenceValue>,
}

pub struct CampaignOutcome {
    pub records: Vec<BenchmarkRecord>,
    pub computed: usize,
    pub resumed: usize,
}

impl CampaignOutcome {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| !r.is_ok()).count()
    }
}

struct ProblemContext {
    problem: Problem,
    validation_x: PointSet,
    validation_y: Vec<f64>,
    validation_rows: HashSet<Vec<u64>>,
    hash: String,
    reference: ReferenceValue,
    regions: Vec<(f64, HdrRegion)>,
}

fn row_bits(r: &[f64]) -> Vec<u64> {
    r.iter().map(|v| v.to_bits()).collect()
}

fn hash_validation(x: &PointSet, y: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in x.as_flat().iter().chain(y) {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn reference_for(problem: &Problem, cfg: &CampaignConfig) -> Result<ReferenceValue> {
    if let Some(r) = problem.reference() {
        if r.source == "exact" || cfg.reference == ReferenceSource::Published {
            return Ok(ReferenceValue { beta: r.beta, pf: r.pf, source: r.source.clone() });
        }
    }
    let opts = SimulationOptions::new(cfg.reference_cov, derive_seed(cfg.seed, &format!("reference|{}", problem.name())));
    let e = importance_sampling_auto(&problem.limit_state(), &opts)?;
    Ok(ReferenceValue { beta: e.beta, pf: e.pf, source: format!("is(cov={})", e.cov) })
}

fn prepare(problem: Problem, cfg: &CampaignConfig) -> Result<ProblemContext> {
    let name = problem.name().to_string();
    let validation_x = problem.rv().sample(cfg.validation_size, derive_seed(cfg.seed, &format!("validation|{name}")))?;
    let validation_y = problem.evaluate(&validation_x)?;
    let hash = hash_validation(&validation_x, &validation_y);
    let validation_rows = validation_x.rows().map(row_bits).collect();
    let reference = reference_for(&problem, cfg)?;
    let regions = cfg
        .alphas
        .iter()
        .map(|&a| {
            let seed = derive_seed(cfg.seed, &format!("hdr|{name}|{a}"));
            build_region(problem.rv(), a, cfg.level_cov, seed).map(|(r, _)| (a, r))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProblemContext { problem, validation_x, validation_y, validation_rows, hash, reference, regions })
}

#[derive(Clone)]
struct Task {
    problem: usize,
    n: usize,
    sampler: SamplerTag,
    replication: usize,
    kinds: Vec<SurrogateKind>,
}

fn task_key(ctx: &ProblemContext, t: &Task) -> String {
    format!("{}|{}|{}|{}", ctx.problem.name(), t.n, t.sampler, t.replication)
}

fn draw_design(ctx: &ProblemContext, t: &Task, seed: u64) -> Result<ExperimentalDesign> {
    let rv = ctx.problem.rv();
    let x = match t.sampler {
        SamplerTag::Natural => rv.sample(t.n, seed)?,
        SamplerTag::Hdr(a) => {
            let region = ctx
                .regions
                .iter()
                .find(|(b, _)| *b == a)
                .map(|(_, r)| r)
                .ok_or_else(|| Error::InvalidArgument(format!("no region for alpha {a}")))?;
            sample_hdr(region, t.n, seed)?
        }
    };
    if x.rows().any(|r| ctx.validation_rows.contains(&row_bits(r))) {
        return Err(Error::Precondition("training design intersects the validation set".into()));
    }
    let y = ctx.problem.evaluate(&x)?;
    ExperimentalDesign::new(x, y, rv.clone(), t.sampler)
}

fn evaluate_surrogate(
    ctx: &ProblemContext,
    ed: &ExperimentalDesign,
    kind: SurrogateKind,
    cfg: &CampaignConfig,
    key: &str,
) -> Result<BenchmarkRecord> {
    let model = Surrogate::train(kind, ed, derive_seed(cfg.seed, &format!("fit|{key}|{kind}")))?;
    let rloo = model.loo(ed)?;
    let pred = model.predict(&ctx.validation_x)?;
    let rmse = rmse(&pred, &ctx.validation_y)?;
    let threshold = ctx.problem.threshold();
    let surrogate = model.clone();
    let ls = LimitState::from_batch(ed.rv().clone(), format!("{kind} surrogate"), move |x: &PointSet| {
        Ok(surrogate.predict(x)?.into_iter().map(|v| v - threshold).collect())
    });
    let opts = SimulationOptions::new(cfg.cov_target, derive_seed(cfg.seed, &format!("is|{key}|{kind}")));
    let est = importance_sampling_auto(&ls, &opts)?;
    let beta_ref = ctx.reference.beta;
    let rrie = rrie(est.beta, beta_ref)?;
    let tolerance = noise_tolerance(beta_ref, cfg.cov_target, cfg.gamma)?;
    let basis_size = match &model {
        Surrogate::Pce(m) => m.basis().len(),
        Surrogate::Kriging(m) => m.trend().len(),
        Surrogate::Pck(m) => m.kriging.trend().len(),
    };
    Ok(BenchmarkRecord {
        problem: ctx.problem.name().into(),
        sampler: ed.sampler(),
        surrogate: kind,
        n: ed.len(),
        replication: 0,
        rloo,
        rmse,
        rrie,
        beta_hat: est.beta,
        tolerance,
        disqualified: rrie < tolerance,
        basis_size,
        validation_hash: ctx.hash.clone(),
        error: String::new(),
    })
}

fn run_task(ctx: &ProblemContext, t: &Task, cfg: &CampaignConfig) -> Vec<(BenchmarkRecord, f64)> {
    let key = task_key(ctx, t);
    let name = ctx.problem.name();
    let ed = draw_design(ctx, t, derive_seed(cfg.seed, &format!("ed|{key}")));
    t.kinds
        .iter()
        .map(|&kind| {
            let start = Instant::now();
            let rec = ed
                .as_ref()
                .map_err(|e| Error::Training(e.to_string()))
                .and_then(|ed| evaluate_surrogate(ctx, ed, kind, cfg, &key))
                .map(|r| BenchmarkRecord { replication: t.replication, ..r })
                .unwrap_or_else(|e| BenchmarkRecord::failed(name, t.sampler, kind, t.n, t.replication, &ctx.hash, &e));
            (rec, start.elapsed().as_secs_f64())
        })
        .collect()
}

pub fn read_records(path: &Path) -> Result<Vec<BenchmarkRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|rec| rec.map_err(Error::from)).collect()
}

/// Loads `records.csv` from a results directory.
pub fn load_results(dir: &Path) -> Result<Vec<BenchmarkRecord>> {
    read_records(&dir.join(RECORDS_FILE))
}

fn write_sorted(path: &Path, records: &[BenchmarkRecord]) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    {
        let mut w = csv::Writer::from_path(&tmp)?;
        for r in records {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Runs (or resumes) a campaign, writing `records.csv`, `campaign.json` and
/// `timings.csv` under `out`. Records already present are not recomputed; on
/// completion the record file is rewritten in canonical key order.
pub fn run_campaign(cfg: &CampaignConfig, out: &Path) -> Result<CampaignOutcome> {
    let registry = cfg.registry()?;
    run_campaign_with(cfg, &registry, out)
}

pub fn run_campaign_with(cfg: &CampaignConfig, registry: &Registry, out: &Path) -> Result<CampaignOutcome> {
    let problems = cfg.validate(registry)?;
    std::fs::create_dir_all(out)?;
    let header_path = out.join(HEADER_FILE);
    let records_path = out.join(RECORDS_FILE);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    pool.install(|| {
        let contexts = problems.into_iter().map(|p| prepare(p, cfg)).collect::<Result<Vec<_>>>()?;
        let header = CampaignHeader {
            config: cfg.clone(),
            validation_hashes: contexts.iter().map(|c| (c.problem.name().to_string(), c.hash.clone())).collect(),
            references: contexts.iter().map(|c| (c.problem.name().to_string(), c.reference.clone())).collect(),
        };
        if header_path.exists() {
            let old: CampaignHeader = serde_json::from_str(&std::fs::read_to_string(&header_path)?)?;
            if old != header {
                return Err(Error::Precondition(format!(
                    "{} belongs to a different campaign; use a fresh output directory",
                    out.display()
                )));
            }
        } else {
            std::fs::write(&header_path, serde_json::to_string_pretty(&header)? + "\n")?;
        }

        let mut existing: BTreeMap<RecordKey, BenchmarkRecord> = BTreeMap::new();
        if records_path.exists() {
            for r in read_records(&records_path)? {
                existing.insert(r.key(), r);
            }
        }
        let resumed = existing.len();

        let mut tasks = Vec::new();
        for (pi, ctx) in contexts.iter().enumerate() {
            for &n in &cfg.sizes {
                for sampler in cfg.samplers() {
                    for rep in 0..cfg.replications {
                        let kinds: Vec<SurrogateKind> = cfg
                            .surrogates
                            .iter()
                            .copied()
                            .filter(|k| {
                                !existing.contains_key(&RecordKey {
                                    problem: ctx.problem.name().into(),
                                    n,
                                    sampler: sampler.to_string(),
                                    surrogate: k.to_string(),
                                    replication: rep,
                                })
                            })
                            .collect();
                        if !kinds.is_empty() {
                            tasks.push(Task { problem: pi, n, sampler, replication: rep, kinds });
                        }
                    }
                }
            }
        }

        let need_header = !records_path.exists() || std::fs::metadata(&records_path)?.len() == 0;
        let sink = Mutex::new(
            csv::WriterBuilder::new()
                .has_headers(need_header)
                .from_writer(OpenOptions::new().create(true).append(true).open(&records_path)?),
        );
        let timings = Mutex::new(OpenOptions::new().create(true).append(true).open(out.join(TIMINGS_FILE))?);
        let computed: Vec<BenchmarkRecord> = tasks
            .par_iter()
            .map(|t| -> Result<Vec<BenchmarkRecord>> {
                let ctx = &contexts[t.problem];
                let recs = run_task(ctx, t, cfg);
                let mut w = sink.lock().map_err(|_| Error::Precondition("record writer poisoned".into()))?;
                let mut tf: std::sync::MutexGuard<'_, File> =
                    timings.lock().map_err(|_| Error::Precondition("timing writer poisoned".into()))?;
                for (r, secs) in &recs {
                    w.serialize(r)?;
                    writeln!(tf, "{},{},{},{},{},{secs:.3}", r.problem, r.sampler, r.surrogate, r.n, r.replication)?;
                }
                w.flush()?;
                Ok(recs.into_iter().map(|(r, _)| r).collect())
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        drop(sink);

        let n_computed = computed.len();
        for r in computed {
            existing.insert(r.key(), r);
        }
        let records: Vec<BenchmarkRecord> = existing.into_values().collect();
        write_sorted(&records_path, &records)?;
        Ok(CampaignOutcome { records, computed: n_computed, resumed })
    })
}
