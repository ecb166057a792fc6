use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::campaign::BenchmarkRecord;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Rloo,
    Rmse,
    Rrie,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Rloo, Metric::Rmse, Metric::Rrie];

    pub fn value(self, r: &BenchmarkRecord) -> f64 {
        match self {
            Metric::Rloo => r.rloo,
            Metric::Rmse => r.rmse,
            Metric::Rrie => r.rrie,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Rloo => "rloo",
            Metric::Rmse => "rmse",
            Metric::Rrie => "rrie",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rloo" => Ok(Metric::Rloo),
            "rmse" => Ok(Metric::Rmse),
            "rrie" => Ok(Metric::Rrie),
            _ => Err(Error::InvalidArgument(format!("unknown metric `{s}`"))),
        }
    }
}

/// Position bins of a participant within its heat.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RankBin {
    Best,
    Top5,
    Top10,
    Top25,
    Top50,
    Rest,
}

impl RankBin {
    pub const ALL: [RankBin; 6] = [RankBin::Best, RankBin::Top5, RankBin::Top10, RankBin::Top25, RankBin::Top50, RankBin::Rest];

    /// Bin of a participant with `better` strictly better competitors among `total`.
    pub fn classify(better: usize, total: usize) -> Self {
        if better == 0 {
            return RankBin::Best;
        }
        let q = better as f64 / total as f64;
        if q <= 0.05 {
            RankBin::Top5
        } else if q <= 0.10 {
            RankBin::Top10
        } else if q <= 0.25 {
            RankBin::Top25
        } else if q <= 0.50 {
            RankBin::Top50
        } else {
            RankBin::Rest
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Heat {
    pub problem: String,
    pub n: usize,
    pub surrogate: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatResult {
    pub heat: Heat,
    pub participants: usize,
    pub excluded: usize,
    /// sampler → bin → count
    pub bins: BTreeMap<String, BTreeMap<RankBin, usize>>,
    /// Samplers holding the best value (several on ties).
    pub winners: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatRanking {
    pub metric: Metric,
    pub heats: Vec<HeatResult>,
    /// surrogate → sampler → bin → count, summed over heats
    pub totals: BTreeMap<String, BTreeMap<String, BTreeMap<RankBin, usize>>>,
    /// surrogate → sampler → heats won
    pub wins: BTreeMap<String, BTreeMap<String, usize>>,
}

/// Ranks every replication of every sampler within each (problem, n, surrogate)
/// heat; lower metric values are better. Failed records and, for RRIE, records
/// below the noise tolerance are excluded.
pub fn rank_heats(records: &[BenchmarkRecord], metric: Metric) -> Result<HeatRanking> {
    if records.is_empty() {
        return Err(Error::EmptyHeat("no records".into()));
    }
    let mut groups: BTreeMap<Heat, Vec<&BenchmarkRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry(Heat { problem: r.problem.clone(), n: r.n, surrogate: r.surrogate.to_string() })
            .or_default()
            .push(r);
    }
    let mut heats = Vec::new();
    let mut totals: BTreeMap<String, BTreeMap<String, BTreeMap<RankBin, usize>>> = BTreeMap::new();
    let mut wins: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for (heat, members) in groups {
        let (valid, excluded): (Vec<_>, Vec<_>) = members.into_iter().partition(|r| {
            r.is_ok() && metric.value(r).is_finite() && !(metric == Metric::Rrie && r.disqualified)
        });
        let mut values: Vec<f64> = valid.iter().map(|r| metric.value(r)).collect();
        values.sort_by(f64::total_cmp);
        let total = valid.len();
        let mut bins: BTreeMap<String, BTreeMap<RankBin, usize>> = BTreeMap::new();
        let mut winners = Vec::new();
        for r in &valid {
            let v = metric.value(r);
            let better = values.partition_point(|x| *x < v);
            let bin = RankBin::classify(better, total);
            let s = r.sampler.to_string();
            *bins.entry(s.clone()).or_default().entry(bin).or_default() += 1;
            *totals.entry(heat.surrogate.clone()).or_default().entry(s.clone()).or_default().entry(bin).or_default() += 1;
            if bin == RankBin::Best && !winners.contains(&s) {
                winners.push(s);
            }
        }
        winners.sort();
        for w in &winners {
            *wins.entry(heat.surrogate.clone()).or_default().entry(w.clone()).or_default() += 1;
        }
        heats.push(HeatResult { heat, participants: total, excluded: excluded.len(), bins, winners });
    }
    Ok(HeatRanking { metric, heats, totals, wins })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub problem: String,
    pub sampler: String,
    pub surrogate: String,
    pub n: usize,
    pub metric: Metric,
    pub count: usize,
    pub failed: usize,
    pub min: f64,
    pub p10: f64,
    pub median: f64,
    pub p90: f64,
    pub max: f64,
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Per (problem, sampler, surrogate, n) percentiles of each metric over
/// replications. Failed records are counted but not summarised.
pub fn summarize(records: &[BenchmarkRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, usize, String, String), Vec<&BenchmarkRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.problem.clone(), r.n, r.sampler.to_string(), r.surrogate.to_string()))
            .or_default()
            .push(r);
    }
    let mut out = Vec::new();
    for ((problem, n, sampler, surrogate), members) in groups {
        for metric in Metric::ALL {
            let mut v: Vec<f64> =
                members.iter().filter(|r| r.is_ok()).map(|r| metric.value(r)).filter(|x| x.is_finite()).collect();
            v.sort_by(f64::total_cmp);
            out.push(SummaryRow {
                problem: problem.clone(),
                sampler: sampler.clone(),
                surrogate: surrogate.clone(),
                n,
                metric,
                count: v.len(),
                failed: members.iter().filter(|r| !r.is_ok()).count(),
                min: percentile(&v, 0.0),
                p10: percentile(&v, 0.1),
                median: percentile(&v, 0.5),
                p90: percentile(&v, 0.9),
                max: percentile(&v, 1.0),
            });
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SummaryFormat {
    Csv,
    Json,
}

impl FromStr for SummaryFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(SummaryFormat::Csv),
            "json" => Ok(SummaryFormat::Json),
            _ => Err(Error::InvalidArgument(format!("unknown format `{s}`"))),
        }
    }
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], format: SummaryFormat, mut w: W) -> Result<()> {
    match format {
        SummaryFormat::Csv => {
            let mut c = csv::Writer::from_writer(w);
            for r in rows {
                c.serialize(r)?;
            }
            c.flush()?;
        }
        SummaryFormat::Json => {
            serde_json::to_writer_pretty(&mut w, rows)?;
            writeln!(w)?;
        }
    }
    Ok(())
}
