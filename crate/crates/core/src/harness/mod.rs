//! Seeded Monte Carlo sweeps over schemes, and their CSV outputs.

pub mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

pub use config::{dbm_to_watts, parse_power, watts_to_dbm, ExperimentConfig, Sweep, SweepVar};

use crate::baselines::{run_scheme, SchemeId};
use crate::channel;
use crate::error::{Error, Result};
use crate::ia::IterationTrace;

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

#[derive(Clone, Debug, PartialEq)]
pub enum RowStatus {
    Ok,
    Failed(String),
}

#[derive(Clone, Debug)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub scheme: SchemeId,
    pub trial: usize,
    pub seed: u64,
    pub status: RowStatus,
    pub rate_nats: f64,
    pub iterations: usize,
    pub feasibility_iterations: usize,
    pub converged: bool,
    pub lemma_active: Option<bool>,
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
    pub wall_ms: f64,
    pub trace: IterationTrace,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.status == RowStatus::Ok
    }

    pub fn rate_bits(&self) -> f64 {
        nats_to_bits(self.rate_nats)
    }
}

#[derive(Clone, Debug)]
pub struct ResultTable {
    pub sweep_variable: SweepVar,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.is_ok()).count()
    }

    pub fn select(&self, scheme: SchemeId, sweep_value: f64) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(move |r| r.scheme == scheme && r.sweep_value == sweep_value)
    }

    /// Mean rate over the successful rows of one scheme at one sweep point.
    pub fn mean_rate(&self, scheme: SchemeId, sweep_value: f64) -> Option<f64> {
        let rates: Vec<f64> = self.select(scheme, sweep_value).filter(|r| r.is_ok()).map(|r| r.rate_nats).collect();
        (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64)
    }

    pub fn sweep_values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !v.contains(&r.sweep_value) {
                v.push(r.sweep_value);
            }
        }
        v
    }

    pub fn schemes(&self) -> Vec<SchemeId> {
        let mut v: Vec<SchemeId> = Vec::new();
        for r in &self.rows {
            if !v.contains(&r.scheme) {
                v.push(r.scheme);
            }
        }
        v
    }
}

fn failed_row(value: f64, scheme: SchemeId, trial: usize, seed: u64, msg: String, wall_ms: f64) -> ResultRow {
    ResultRow {
        sweep_value: value,
        scheme,
        trial,
        seed,
        status: RowStatus::Failed(msg),
        rate_nats: f64::NAN,
        iterations: 0,
        feasibility_iterations: 0,
        converged: false,
        lemma_active: None,
        tau: f64::NAN,
        alpha: f64::NAN,
        beta: f64::NAN,
        wall_ms,
        trace: IterationTrace::default(),
    }
}

fn run_trial(cfg: &ExperimentConfig, value: f64, trial: usize) -> Vec<ResultRow> {
    let params = cfg.params_at(value);
    let chan = match channel::generate(cfg.seed, trial as u64, &cfg.geometry, params.n) {
        Ok(c) => c,
        Err(e) => {
            return cfg
                .schemes
                .iter()
                .map(|s| failed_row(value, s.id, trial, cfg.seed, e.to_string(), 0.0))
                .collect()
        }
    };
    cfg.schemes
        .iter()
        .map(|spec| {
            let started = Instant::now();
            let out = run_scheme(spec, &chan, &params, &cfg.eh, &cfg.options);
            let wall_ms = started.elapsed().as_secs_f64() * 1e3;
            match out {
                Ok(run) => ResultRow {
                    sweep_value: value,
                    scheme: spec.id,
                    trial,
                    seed: cfg.seed,
                    status: RowStatus::Ok,
                    rate_nats: run.min_rate(),
                    iterations: run.refinement_iterations,
                    feasibility_iterations: run.feasibility_iterations,
                    converged: run.converged,
                    lemma_active: run.lemma_active,
                    tau: run.alloc.tau,
                    alpha: run.alloc.alpha,
                    beta: run.alloc.beta,
                    wall_ms,
                    trace: run.trace,
                },
                Err(e) => failed_row(value, spec.id, trial, cfg.seed, e.to_string(), wall_ms),
            }
        })
        .collect()
}

/// Runs every scheme on every (sweep point, trial) pair. All schemes in a
/// trial see the same channel realization, and the same trial index gives
/// the same realization at every sweep point. Rows come back in
/// (sweep point, trial, scheme) order whatever the worker count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let tasks: Vec<(f64, usize)> =
        cfg.sweep.values.iter().flat_map(|&v| (0..cfg.trials).map(move |t| (v, t))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallel)
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    let rows: Vec<Vec<ResultRow>> = pool.install(|| tasks.par_iter().map(|&(v, t)| run_trial(cfg, v, t)).collect());
    Ok(ResultTable { sweep_variable: cfg.sweep.variable, rows: rows.into_iter().flatten().collect() })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CdfPoint {
    pub rate: f64,
    pub prob: f64,
}

/// Empirical CDF of the successful rates of one scheme at one sweep point.
/// Tied rates collapse to a single point at the upper step.
pub fn emit_cdf(table: &ResultTable, scheme: SchemeId, sweep_value: f64) -> Result<Vec<CdfPoint>> {
    let mut rates: Vec<f64> = table.select(scheme, sweep_value).filter(|r| r.is_ok()).map(|r| r.rate_nats).collect();
    if rates.is_empty() {
        return Err(Error::InvalidInput(format!("no successful {scheme} rows at sweep value {sweep_value}")));
    }
    rates.sort_by(f64::total_cmp);
    let n = rates.len() as f64;
    let mut out: Vec<CdfPoint> = Vec::with_capacity(rates.len());
    for (i, &rate) in rates.iter().enumerate() {
        let prob = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.rate == rate => last.prob = prob,
            _ => out.push(CdfPoint { rate, prob }),
        }
    }
    Ok(out)
}

/// Per-iteration objectives as CSV with header `iter,phase,objective`.
pub fn emit_convergence(trace: &IterationTrace) -> String {
    let mut s = String::from("iter,phase,objective\n");
    for r in &trace.records {
        s.push_str(&format!("{},{},{:.12e}\n", r.iteration, r.phase.as_str(), r.objective));
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Emit {
    Table,
    Cdf,
    Trace,
    All,
}

impl std::str::FromStr for Emit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "table" => Emit::Table,
            "cdf" => Emit::Cdf,
            "trace" => Emit::Trace,
            "all" => Emit::All,
            _ => return Err(Error::InvalidInput(format!("unknown output kind '{s}'"))),
        })
    }
}

fn fmt_f(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.9}")
    } else {
        String::new()
    }
}

fn fmt_sweep(v: f64) -> String {
    format!("{v}")
}

fn write_table(table: &ResultTable, dir: &Path) -> Result<Vec<PathBuf>> {
    let results = dir.join("results.csv");
    let mut w = csv::Writer::from_path(&results)?;
    w.write_record([
        "sweep_variable",
        "sweep_value",
        "scheme",
        "trial",
        "seed",
        "status",
        "rate_nats",
        "rate_bits",
        "iterations",
        "feasibility_iterations",
        "converged",
        "lemma_active",
        "tau",
        "alpha",
        "beta",
        "message",
    ])?;
    for r in &table.rows {
        let (status, msg) = match &r.status {
            RowStatus::Ok => ("ok", ""),
            RowStatus::Failed(m) => ("failed", m.as_str()),
        };
        w.write_record([
            table.sweep_variable.name().to_string(),
            fmt_sweep(r.sweep_value),
            r.scheme.name().to_string(),
            r.trial.to_string(),
            r.seed.to_string(),
            status.to_string(),
            fmt_f(r.rate_nats),
            fmt_f(r.rate_bits()),
            r.iterations.to_string(),
            r.feasibility_iterations.to_string(),
            r.converged.to_string(),
            r.lemma_active.map_or(String::new(), |b| b.to_string()),
            fmt_f(r.tau),
            fmt_f(r.alpha),
            fmt_f(r.beta),
            msg.to_string(),
        ])?;
    }
    w.flush()?;

    let timings = dir.join("timings.csv");
    let mut w = csv::Writer::from_path(&timings)?;
    w.write_record(["sweep_variable", "sweep_value", "scheme", "trial", "wall_ms"])?;
    for r in &table.rows {
        w.write_record([
            table.sweep_variable.name().to_string(),
            fmt_sweep(r.sweep_value),
            r.scheme.name().to_string(),
            r.trial.to_string(),
            format!("{:.3}", r.wall_ms),
        ])?;
    }
    w.flush()?;
    Ok(vec![results, timings])
}

fn write_cdfs(table: &ResultTable, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for scheme in table.schemes() {
        let path = dir.join(format!("cdf_{}.csv", scheme.name()));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["sweep_variable", "sweep_value", "rate_nats", "cdf"])?;
        for v in table.sweep_values() {
            let Ok(points) = emit_cdf(table, scheme, v) else { continue };
            for p in points {
                w.write_record([table.sweep_variable.name().to_string(), fmt_sweep(v), fmt_f(p.rate), fmt_f(p.prob)])?;
            }
        }
        w.flush()?;
        paths.push(path);
    }
    Ok(paths)
}

fn write_traces(table: &ResultTable, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut trials: Vec<usize> = table.rows.iter().map(|r| r.trial).collect();
    trials.sort_unstable();
    trials.dedup();
    let mut paths = Vec::new();
    for t in trials {
        let path = dir.join(format!("trace_{t}.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["sweep_variable", "sweep_value", "scheme", "iter", "phase", "objective"])?;
        for r in table.rows.iter().filter(|r| r.trial == t) {
            for rec in &r.trace.records {
                w.write_record([
                    table.sweep_variable.name().to_string(),
                    fmt_sweep(r.sweep_value),
                    r.scheme.name().to_string(),
                    rec.iteration.to_string(),
                    rec.phase.as_str().to_string(),
                    format!("{:.12e}", rec.objective),
                ])?;
            }
        }
        w.flush()?;
        paths.push(path);
    }
    Ok(paths)
}

/// Writes the requested outputs into `dir` (created if missing) and returns their paths.
pub fn write_outputs(table: &ResultTable, dir: &Path, emit: Emit) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    if matches!(emit, Emit::Table | Emit::All) {
        paths.extend(write_table(table, dir)?);
    }
    if matches!(emit, Emit::Cdf | Emit::All) {
        paths.extend(write_cdfs(table, dir)?);
    }
    if matches!(emit, Emit::Trace | Emit::All) {
        paths.extend(write_traces(table, dir)?);
    }
    Ok(paths)
}
