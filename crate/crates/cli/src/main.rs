use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hdrsample::bench::{self, CampaignConfig, Metric, SummaryFormat};
use hdrsample::hdr::{build_region, sample_hdr, HdrRegion, RegionDocument};
use hdrsample::problems::Registry;
use hdrsample::reliability::{importance_sampling_auto, monte_carlo_pf, LimitState, Method, SimulationOptions};
use hdrsample::surrogate::{ExperimentalDesign, SamplerTag, Surrogate, SurrogateKind};
use hdrsample::{PointSet, RandomVector};

#[derive(Parser)]
#[command(name = "hdrsample", version, about = "HDR sampling, surrogates and reliability benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Highest-density-region estimation and sampling
    #[command(subcommand)]
    Hdr(HdrCommand),
    /// Surrogate model training
    #[command(subcommand)]
    Surrogate(SurrogateCommand),
    /// Failure probability estimation
    #[command(subcommand)]
    Reliability(ReliabilityCommand),
    /// Benchmark campaigns
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Subcommand)]
enum HdrCommand {
    /// Estimate the HDR level and bounding box; prints the region as JSON
    Estimate {
        #[arg(long)]
        rv: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
        #[arg(long, default_value_t = 0.01)]
        cov: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the region here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw uniform samples from an estimated region
    Sample {
        #[arg(long)]
        region: PathBuf,
        #[arg(short, long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SurrogateCommand {
    /// Train a surrogate on a design CSV whose last column is the response
    Train {
        #[arg(long)]
        ed: PathBuf,
        #[arg(long)]
        rv: PathBuf,
        #[arg(long, default_value = "pce")]
        kind: SurrogateKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Target {
    /// Serialized surrogate; failure when prediction <= threshold
    #[arg(long)]
    model: Option<PathBuf>,
    /// Registered problem name
    #[arg(long)]
    problem: Option<String>,
}

#[derive(Subcommand)]
enum ReliabilityCommand {
    Run {
        #[command(flatten)]
        target: Target,
        #[arg(long, default_value_t = 0.0)]
        threshold: f64,
        #[arg(long, default_value = "mc")]
        method: Method,
        #[arg(long, default_value_t = 0.01)]
        cov: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        max_n: Option<u64>,
        /// Plug-in problem specs to register
        #[arg(long)]
        plugin: Vec<PathBuf>,
    },
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Run or resume a campaign
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the worker count from the config
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Heat-based ranking of a finished campaign
    Rank {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "rmse")]
        metric: Metric,
    },
    /// Percentile tables per problem, sampler, surrogate and size
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "csv")]
        format: SummaryFormat,
    },
}

#[derive(Serialize)]
struct EstimateOutput {
    #[serde(flatten)]
    region: RegionDocument,
    cov: f64,
    n_used: usize,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn read_rv(path: &Path) -> Result<RandomVector> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(RandomVector::from_json(&text)?)
}

fn hdr(cmd: HdrCommand) -> Result<ExitCode> {
    match cmd {
        HdrCommand::Estimate { rv, alpha, cov, seed, out } => {
            let rv = read_rv(&rv)?;
            let (region, est) = build_region(&rv, alpha, cov, seed)?;
            let doc = EstimateOutput { region: region.to_document(), cov: est.cov, n_used: est.n_used };
            let mut w = output(out.as_deref())?;
            serde_json::to_writer_pretty(&mut w, &doc)?;
            writeln!(w)?;
        }
        HdrCommand::Sample { region, n, seed, out } => {
            let text = std::fs::read_to_string(&region).with_context(|| format!("reading {}", region.display()))?;
            let region = HdrRegion::from_document(serde_json::from_str(&text)?)?;
            sample_hdr(&region, n, seed)?.write_csv(output(out.as_deref())?)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn surrogate(cmd: SurrogateCommand) -> Result<ExitCode> {
    let SurrogateCommand::Train { ed, rv, kind, seed, out } = cmd;
    let ed = ExperimentalDesign::from_csv(&ed, read_rv(&rv)?, SamplerTag::Natural)?;
    let model = Surrogate::train(kind, &ed, seed)?;
    std::fs::write(&out, model.to_json()? + "\n")?;
    eprintln!("trained {kind} on {} points, LOO error {:.4e}", ed.len(), model.loo(&ed)?);
    Ok(ExitCode::SUCCESS)
}

fn reliability(cmd: ReliabilityCommand) -> Result<ExitCode> {
    let ReliabilityCommand::Run { target, threshold, method, cov, seed, max_n, plugin } = cmd;
    let ls = match (target.model, target.problem) {
        (Some(path), None) => {
            let model = Surrogate::from_json(&std::fs::read_to_string(&path)?)?;
            let rv = model.rv().clone();
            LimitState::from_batch(rv, path.display().to_string(), move |x: &PointSet| {
                Ok(model.predict(x)?.into_iter().map(|v| v - threshold).collect())
            })
        }
        (None, Some(name)) => {
            let mut reg = Registry::with_builtins();
            for p in &plugin {
                reg.register(hdrsample::problems::PluginSpec::from_file(p)?.into_problem()?)?;
            }
            reg.get(&name)?.limit_state()
        }
        _ => bail!("exactly one of --model and --problem is required"),
    };
    let mut opts = SimulationOptions::new(cov, seed);
    if let Some(m) = max_n {
        opts.max_n = m;
    }
    let est = match method {
        Method::Mc => monte_carlo_pf(&ls, &opts)?,
        Method::Is => importance_sampling_auto(&ls, &opts)?,
    };
    println!("{}", serde_json::to_string_pretty(&est)?);
    Ok(ExitCode::SUCCESS)
}

fn bench_cmd(cmd: BenchCommand) -> Result<ExitCode> {
    match cmd {
        BenchCommand::Run { config, out, workers } => {
            let mut cfg = CampaignConfig::from_file(&config)?;
            if let Some(w) = workers {
                cfg.workers = w;
            }
            let outcome = bench::run_campaign(&cfg, &out)?;
            let failed = outcome.failures();
            eprintln!(
                "{} records ({} computed, {} resumed), {failed} failed",
                outcome.records.len(),
                outcome.computed,
                outcome.resumed
            );
            for r in outcome.records.iter().filter(|r| !r.is_ok()) {
                eprintln!("  {} n={} {} {} rep {}: {}", r.problem, r.n, r.sampler, r.surrogate, r.replication, r.error);
            }
            return Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(2) });
        }
        BenchCommand::Rank { input, metric } => {
            let ranking = bench::rank_heats(&bench::load_results(&input)?, metric)?;
            println!("{}", serde_json::to_string_pretty(&ranking)?);
        }
        BenchCommand::Summarize { input, format } => {
            let rows = bench::summarize(&bench::load_results(&input)?);
            bench::write_summary(&rows, format, std::io::stdout().lock())?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Hdr(c) => hdr(c),
        Command::Surrogate(c) => surrogate(c),
        Command::Reliability(c) => reliability(c),
        Command::Bench(c) => bench_cmd(c),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
