//! Seeded multi-run experiments and result tables.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dp::{plan, Algorithm, PlannerConfig};
use crate::error::{Error, Result};
use crate::model::DecPomdp;
use crate::policy::{evaluate, policy_from_json, rollout, value_at, TreePool};

/// Aggregate of `runs` independent planner runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub algorithm: Algorithm,
    pub width: usize,
    pub horizon: usize,
    pub runs: usize,
    /// Exact value at the initial belief, per run.
    pub values: Vec<f64>,
    /// Wall time per run in seconds, sampling included.
    pub times: Vec<f64>,
    pub aev: f64,
    pub sigma: f64,
    pub mean_time: f64,
    pub total_time: f64,
}

impl ExperimentResult {
    pub fn from_runs(config: &PlannerConfig, values: Vec<f64>, times: Vec<f64>) -> Self {
        let (aev, sigma) = mean_and_sd(&values);
        let total_time: f64 = times.iter().sum();
        ExperimentResult {
            algorithm: config.algorithm,
            width: config.width,
            horizon: config.horizon,
            runs: values.len(),
            mean_time: total_time / times.len().max(1) as f64,
            total_time,
            values,
            times,
            aev,
            sigma,
        }
    }
}

/// Mean and sample standard deviation; the deviation is 0 for one value.
pub fn mean_and_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs `plan` with seeds `base_seed + k` for `k in 0..runs`.
pub fn run_experiment(
    model: &DecPomdp,
    config: &PlannerConfig,
    runs: usize,
    base_seed: u64,
) -> Result<ExperimentResult> {
    run_experiment_with(model, config, runs, base_seed, &mut |_, _| {})
}

/// Like [`run_experiment`], calling `progress(k, value)` after each run.
pub fn run_experiment_with(
    model: &DecPomdp,
    config: &PlannerConfig,
    runs: usize,
    base_seed: u64,
    progress: &mut dyn FnMut(usize, f64),
) -> Result<ExperimentResult> {
    if runs == 0 {
        return Err(Error::InvalidConfig("runs must be at least 1".into()));
    }
    let mut values = Vec::with_capacity(runs);
    let mut times = Vec::with_capacity(runs);
    for k in 0..runs {
        let mut cfg = config.clone();
        cfg.seed = base_seed.wrapping_add(k as u64);
        let start = Instant::now();
        let outcome = plan(model, &cfg)?;
        times.push(start.elapsed().as_secs_f64());
        values.push(outcome.value);
        progress(k, outcome.value);
    }
    Ok(ExperimentResult::from_runs(config, values, times))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
    Table,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "table" => Ok(OutputFormat::Table),
            _ => Err(Error::InvalidConfig(format!("unknown output format `{s}`"))),
        }
    }
}

pub const CSV_HEADER: &str = "algorithm,W,H,runs,AEV,sigma,mean_time_s";

/// Renders results sorted by algorithm name, then width.
pub fn emit_results(results: &[ExperimentResult], format: OutputFormat) -> String {
    let mut rows: Vec<&ExperimentResult> = results.iter().collect();
    rows.sort_by(|a, b| {
        (a.algorithm.name(), a.width, a.horizon).cmp(&(b.algorithm.name(), b.width, b.horizon))
    });
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(CSV_HEADER.split(','))
                .expect("in-memory write");
            for r in rows {
                w.write_record([
                    r.algorithm.name().to_string(),
                    r.width.to_string(),
                    r.horizon.to_string(),
                    r.runs.to_string(),
                    r.aev.to_string(),
                    r.sigma.to_string(),
                    r.mean_time.to_string(),
                ])
                .expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
        }
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&rows).expect("plain data serializes");
            s.push('\n');
            s
        }
        OutputFormat::Table => {
            let mut s = String::new();
            writeln!(
                s,
                "{:<12} {:>4} {:>5} {:>5} {:>12} {:>10} {:>12} {:>12}",
                "algorithm", "W", "H", "runs", "AEV", "sigma", "T/run (s)", "T total (s)"
            )
            .unwrap();
            for r in rows {
                writeln!(
                    s,
                    "{:<12} {:>4} {:>5} {:>5} {:>12.2} {:>10.2} {:>12.3} {:>12.3}",
                    r.algorithm.name(),
                    r.width,
                    r.horizon,
                    r.runs,
                    r.aev,
                    r.sigma,
                    r.mean_time,
                    r.total_time
                )
                .unwrap();
            }
            s
        }
    }
}

/// Exact and simulated value of a stored policy at the initial belief.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolicyEvaluation {
    pub exact: f64,
    pub mean: f64,
    pub stderr: f64,
}

impl PolicyEvaluation {
    /// True when simulation and exact value differ by more than 4 standard errors.
    pub fn discrepant(&self) -> bool {
        let gap = (self.exact - self.mean).abs();
        if self.stderr > 0.0 {
            gap > 4.0 * self.stderr
        } else {
            gap > 1e-9 * (1.0 + self.exact.abs())
        }
    }
}

pub fn evaluate_policy(
    model: &DecPomdp,
    policy_json: &str,
    episodes: usize,
    seed: u64,
) -> Result<PolicyEvaluation> {
    let policy = policy_from_json(model, policy_json)?;
    let alpha = evaluate(model, &policy, &mut TreePool::new())?;
    let exact = value_at(&alpha, model.initial_belief());
    let (mean, stderr) = rollout(model, &policy, model.initial_belief(), episodes, seed)?;
    let eval = PolicyEvaluation {
        exact,
        mean,
        stderr,
    };
    if eval.discrepant() {
        log::warn!(
            "simulated value {mean:.4} (se {stderr:.4}) disagrees with exact value {exact:.4}"
        );
    }
    Ok(eval)
}
