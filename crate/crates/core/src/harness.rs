//! Replica execution, parameter sweeps and CSV export.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::crypto::{
    open, seal, ExpandedKey, SealContext, SecretKey, DEFAULT_ROUNDS, MAX_SEALED_PAYLOAD,
};
use crate::metrics::{mean, std_dev, RunReport, Summary};
use crate::scenario::{ConfigError, Scenario};
use crate::sim::replica_seed;
use crate::world::{World, WorldError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("thread pool: {0}")]
    Pool(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Runs every replica of `scenario`. Replica `i` uses
/// `replica_seed(scenario.seed, i)`; results come back in replica order
/// whatever `jobs` is. `jobs <= 1` runs serially on the calling thread.
pub fn run_replicas(scenario: &Scenario, jobs: usize) -> Result<Vec<RunReport>, HarnessError> {
    let one = |i: u32| -> Result<RunReport, HarnessError> {
        Ok(World::new(scenario, replica_seed(scenario.seed, i))?.run())
    };
    if jobs <= 1 {
        return (0..scenario.replicas).map(one).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    pool.install(|| (0..scenario.replicas).into_par_iter().map(one).collect())
}

/// Reports for one value of a swept parameter.
#[derive(Debug)]
pub struct SweepPoint {
    pub value: toml::Value,
    pub reports: Vec<RunReport>,
}

/// Runs `scenario` once per value with the parameter at `path` replaced.
/// Points come back in value order.
pub fn sweep(
    scenario: &Scenario,
    path: &str,
    values: &[toml::Value],
    replicas: Option<u32>,
    jobs: usize,
) -> Result<Vec<SweepPoint>, HarnessError> {
    if values.len() < 2 {
        return Err(ConfigError::Invalid {
            key: "sweep.values".into(),
            reason: "needs at least two values".into(),
        }
        .into());
    }
    let variants = values
        .iter()
        .map(|v| {
            let mut s = scenario.with_param(path, v.clone())?;
            if let Some(r) = replicas {
                s.replicas = r;
            }
            s.sweep = None;
            Ok((v.clone(), s))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    variants
        .into_iter()
        .map(|(value, s)| {
            Ok(SweepPoint {
                value,
                reports: run_replicas(&s, jobs)?,
            })
        })
        .collect()
}

/// Column names of summary rows, in CSV order.
pub const SUMMARY_COLUMNS: [&str; 15] = [
    "detection_rate",
    "false_positive_rate",
    "mean_time_to_isolation",
    "delivery_ratio",
    "control_overhead",
    "disagreement",
    "steady_trust",
    "readings_originated",
    "readings_delivered",
    "routing_voids",
    "alerts",
    "votes",
    "isolations",
    "bytes_total",
    "bytes_control",
];

pub fn summary_values(s: &Summary) -> [Option<f64>; SUMMARY_COLUMNS.len()] {
    let c = &s.counters;
    [
        s.detection_rate,
        Some(s.false_positive_rate),
        s.mean_time_to_isolation,
        s.delivery_ratio,
        s.control_overhead,
        s.disagreement,
        s.steady_trust,
        Some(c.readings_originated as f64),
        Some(c.readings_delivered as f64),
        Some(c.routing_voids as f64),
        Some(c.alerts as f64),
        Some(c.votes as f64),
        Some(c.isolations as f64),
        Some(c.bytes_total as f64),
        Some(c.bytes_control as f64),
    ]
}

/// Per-column mean and population standard deviation over the replicas
/// where the value is defined.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub mean: [Option<f64>; SUMMARY_COLUMNS.len()],
    pub std: [Option<f64>; SUMMARY_COLUMNS.len()],
}

pub fn aggregate(reports: &[RunReport]) -> Aggregate {
    let rows: Vec<_> = reports.iter().map(|r| summary_values(&r.summary)).collect();
    let mut agg = Aggregate {
        mean: [None; SUMMARY_COLUMNS.len()],
        std: [None; SUMMARY_COLUMNS.len()],
    };
    for col in 0..SUMMARY_COLUMNS.len() {
        let xs: Vec<f64> = rows.iter().filter_map(|r| r[col]).collect();
        agg.mean[col] = mean(&xs);
        agg.std[col] = std_dev(&xs);
    }
    agg
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn row(out: &mut String, lead: &[&str], values: &[Option<f64>]) {
    let cells: Vec<String> = lead
        .iter()
        .map(|s| s.to_string())
        .chain(values.iter().map(|&v| cell(v)))
        .collect();
    out.push_str(&cells.join(","));
    out.push('\n');
}

/// `summary.csv`: one row per replica followed by `mean` and `std` rows.
/// Undefined metrics are written as `NA`.
pub fn summary_csv(reports: &[RunReport]) -> String {
    let mut out = format!("replica,seed,{}\n", SUMMARY_COLUMNS.join(","));
    for (i, r) in reports.iter().enumerate() {
        row(
            &mut out,
            &[&i.to_string(), &r.seed.to_string()],
            &summary_values(&r.summary),
        );
    }
    let agg = aggregate(reports);
    row(&mut out, &["mean", ""], &agg.mean);
    row(&mut out, &["std", ""], &agg.std);
    out
}

pub fn trajectories_csv(reports: &[RunReport]) -> String {
    let mut out = String::from("replica,epoch,observer,subject,p,n,trust,status\n");
    for (i, r) in reports.iter().enumerate() {
        for t in &r.trajectories {
            let _ = writeln!(
                out,
                "{i},{},{},{},{},{},{},{}",
                t.epoch,
                t.observer.0,
                t.subject.0,
                t.p,
                t.n,
                t.trust,
                t.status.label()
            );
        }
    }
    out
}

pub fn rule_events_csv(reports: &[RunReport]) -> String {
    let mut out = String::from("replica,tick,observer,subject,rule,polarity,weight\n");
    for (i, r) in reports.iter().enumerate() {
        for e in &r.rule_events {
            let subject = e
                .subject
                .map_or_else(|| "SELF".to_string(), |s| s.0.to_string());
            let _ = writeln!(
                out,
                "{i},{},{},{subject},{},{},{}",
                e.tick,
                e.observer.0,
                e.rule.label(),
                e.polarity.label(),
                e.weight
            );
        }
    }
    out
}

/// `sweep.csv`: one aggregated row per swept value, in value order.
pub fn sweep_csv(param: &str, points: &[SweepPoint]) -> String {
    let mut out = format!("{param},replicas");
    for c in SUMMARY_COLUMNS {
        let _ = write!(out, ",{c}_mean,{c}_std");
    }
    out.push('\n');
    for p in points {
        let agg = aggregate(&p.reports);
        let value = match &p.value {
            toml::Value::String(s) => s.clone(),
            v => v.to_string(),
        };
        let mut cells = vec![value, p.reports.len().to_string()];
        for col in 0..SUMMARY_COLUMNS.len() {
            cells.push(cell(agg.mean[col]));
            cells.push(cell(agg.std[col]));
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Writes every file under temporary names first and renames them only once
/// all writes succeeded, so a failed export never leaves a partial set.
fn write_all(dir: &Path, files: &[(String, String)]) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut staged = Vec::with_capacity(files.len());
    for (name, body) in files {
        let tmp = dir.join(format!(".{name}.partial"));
        if let Err(e) = fs::write(&tmp, body) {
            for (t, _) in &staged {
                let _ = fs::remove_file(t);
            }
            return Err(io_err(&tmp)(e));
        }
        staged.push((tmp, dir.join(name)));
    }
    let mut written = Vec::with_capacity(staged.len());
    for (tmp, dst) in staged {
        fs::rename(&tmp, &dst).map_err(io_err(&dst))?;
        written.push(dst);
    }
    Ok(written)
}

fn run_files(reports: &[RunReport]) -> Vec<(String, String)> {
    let mut files = vec![
        ("summary.csv".to_string(), summary_csv(reports)),
        (
            "trust_trajectories.csv".to_string(),
            trajectories_csv(reports),
        ),
    ];
    if reports.iter().any(|r| !r.rule_events.is_empty()) {
        files.push(("rule_events.csv".to_string(), rule_events_csv(reports)));
    }
    let single = reports.len() == 1;
    for (i, r) in reports.iter().enumerate() {
        if let Some(text) = &r.trace_text {
            let name = if single {
                "event_trace.txt".to_string()
            } else {
                format!("event_trace_{i}.txt")
            };
            files.push((name, text.clone()));
        }
    }
    files
}

/// Exports the reports of one run into `dir`. Returns the written paths.
pub fn export_run(reports: &[RunReport], dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    write_all(dir, &run_files(reports))
}

/// Exports a sweep: `sweep.csv` in `dir` plus a full run export for each
/// value under `dir/value_<i>/`.
pub fn export_sweep(
    param: &str,
    points: &[SweepPoint],
    dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    let mut written = Vec::new();
    for (i, p) in points.iter().enumerate() {
        written.extend(export_run(&p.reports, &dir.join(format!("value_{i}")))?);
    }
    written.extend(write_all(
        dir,
        &[("sweep.csv".to_string(), sweep_csv(param, points))],
    )?);
    Ok(written)
}

#[derive(Debug, Clone, Copy)]
pub struct CryptoBench {
    pub packets: u64,
    pub elapsed: Duration,
}

impl CryptoBench {
    pub fn packets_per_second(&self) -> f64 {
        self.packets as f64 / self.elapsed.as_secs_f64().max(f64::MIN_POSITIVE)
    }
}

/// Seals and opens `packets` full-size payloads under one key.
pub fn bench_crypto(packets: u64) -> Result<CryptoBench, HarnessError> {
    let key = SecretKey([0x5A; 16]);
    let ek = ExpandedKey::new(&key, DEFAULT_ROUNDS.into()).map_err(WorldError::from)?;
    let mut payload = [0u8; MAX_SEALED_PAYLOAD];
    let start = Instant::now();
    for i in 0..packets {
        let ctx = SealContext {
            src: (i % 50) as u16,
            handler: 0,
            seq: i as u16,
        };
        payload[..8].copy_from_slice(&i.to_be_bytes());
        let sealed = seal(&ek, &ctx, &payload).map_err(WorldError::from)?;
        let opened = open(&ek, &ctx, &sealed.payload, &sealed.mac);
        debug_assert_eq!(opened.as_deref(), Ok(&payload[..]));
        std::hint::black_box(opened).ok();
    }
    Ok(CryptoBench {
        packets,
        elapsed: start.elapsed(),
    })
}
