//! Batch experiments: phase-diagram sweeps over `(p, q)` and noise curves
//! over `sigma`, with CSV output.
//!
//! Every trial is an independent task on a rayon pool of configurable
//! width. Results are collected in task order, so the output does not depend
//! on the number of workers or on scheduling.
//!
//! The instance of trial `t` in grid cell `(a, b)` is drawn with seed
//! `base_seed ^ hash64([a, b, t])`, so any cell can be regenerated on its
//! own. The algorithm is not part of the hash: every algorithm is run on the
//! same instances.

use std::io::Write;

use rayon::prelude::*;

use crate::admm::AdmmConfig;
use crate::error::{Error, Result};
use crate::metrics::{summarize, Aggregate, TrialSummary};
use crate::model::{ProblemInstance, SolveReport};
use crate::rng::hash64;
use crate::solvers::{solve_lud, solve_shapefit, solve_shapekick, Algo, KickConfig};
use crate::synth::{generate, GenConfig};

/// Solver configurations used by batch runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub shapefit: AdmmConfig,
    pub lud: AdmmConfig,
    pub kick: KickConfig,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { shapefit: AdmmConfig::default(), lud: AdmmConfig::lud(), kick: KickConfig::default() }
    }
}

impl SolverSettings {
    pub fn solve(&self, algo: Algo, inst: &ProblemInstance) -> Result<SolveReport> {
        match algo {
            Algo::ShapeFit => solve_shapefit(inst, &self.shapefit),
            Algo::ShapeKick => solve_shapekick(inst, &self.kick),
            Algo::Lud => solve_lud(inst, &self.lud),
        }
    }
}

pub fn trial_seed(base_seed: u64, a: usize, b: usize, trial: usize) -> u64 {
    base_seed ^ hash64(&[a as u64, b as u64, trial as u64])
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub n: usize,
    pub p_grid: Vec<f64>,
    pub q_grid: Vec<f64>,
    pub sigma: f64,
    pub trials: usize,
    pub base_seed: u64,
    pub algos: Vec<Algo>,
}

impl SweepSpec {
    /// An 8 x 8 grid at `n = 200`: `p` in `{0.125, ..., 1}`, `q` in
    /// `{0, 0.1, ..., 0.7}`, ShapeFit and LUD, 10 trials per cell.
    pub fn phase_diagram(base_seed: u64) -> Self {
        Self {
            n: 200,
            p_grid: (1..=8).map(|k| k as f64 / 8.0).collect(),
            q_grid: (0..8).map(|k| k as f64 / 10.0).collect(),
            sigma: 0.0,
            trials: 10,
            base_seed,
            algos: vec![Algo::ShapeFit, Algo::Lud],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_grid.is_empty() || self.q_grid.is_empty() {
            return Err(Error::InvalidArgument("p and q grids must be nonempty".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.algos.is_empty() {
            return Err(Error::InvalidArgument("no algorithms selected".into()));
        }
        for &p in &self.p_grid {
            for &q in &self.q_grid {
                GenConfig::new(self.n, p, q, self.sigma, 0).validate()?;
            }
        }
        Ok(())
    }
}

/// One solved trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub summary: TrialSummary,
    /// Seed the generator was called with.
    pub seed: u64,
}

/// Aggregated results of one `(algo, p, q)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub algo: Algo,
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub sigma: f64,
    pub trials: Vec<TrialRecord>,
    /// `Err` holds the first failure; the cell is then reported with NaN
    /// statistics.
    pub outcome: std::result::Result<Aggregate, String>,
}

fn run_trial(algo: Algo, cfg: &GenConfig, settings: &SolverSettings) -> Result<TrialRecord> {
    let inst = generate(cfg)?;
    let report = settings.solve(algo, &inst)?;
    let rfe = report.rfe.ok_or_else(|| Error::InvalidArgument("generated instance lacks ground truth".into()))?;
    let gen = inst.gen_params.expect("generated instances record their parameters");
    Ok(TrialRecord {
        summary: TrialSummary::new(algo.as_str(), cfg.n, gen, rfe, report.iterations, report.wall_seconds),
        seed: cfg.seed,
    })
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(Error::InvalidArgument("workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))
}

/// A trial task: algorithm, grid coordinates and generator config.
type Task = (Algo, usize, usize, GenConfig);

/// Runs `tasks` in parallel and groups consecutive runs of `per_cell`
/// results into cells.
fn execute(
    tasks: Vec<Task>,
    per_cell: usize,
    settings: &SolverSettings,
    workers: usize,
) -> Result<Vec<(Task, Vec<Result<TrialRecord>>)>> {
    let results: Vec<Result<TrialRecord>> =
        pool(workers)?.install(|| tasks.par_iter().map(|(algo, _, _, cfg)| run_trial(*algo, cfg, settings)).collect());
    let mut cells = Vec::with_capacity(tasks.len() / per_cell);
    let mut results = results.into_iter();
    for chunk in tasks.chunks(per_cell) {
        cells.push((chunk[0], results.by_ref().take(per_cell).collect()));
    }
    Ok(cells)
}

fn into_cell(task: Task, results: Vec<Result<TrialRecord>>, p: f64, q: f64, sigma: f64) -> Cell {
    let (algo, _, _, cfg) = task;
    let mut trials = Vec::with_capacity(results.len());
    let mut failure = None;
    for r in results {
        match r {
            Ok(t) => trials.push(t),
            Err(e) => {
                failure.get_or_insert_with(|| e.to_string());
            }
        }
    }
    let outcome = match failure {
        Some(msg) => Err(msg),
        None => summarize(&trials.iter().map(|t| t.summary.clone()).collect::<Vec<_>>()).map_err(|e| e.to_string()),
    };
    Cell { algo, n: cfg.n, p, q, sigma, trials, outcome }
}

/// Runs every cell of `spec`. Cells come back sorted by algorithm, then
/// `p`, then `q` (in grid order).
pub fn sweep(spec: &SweepSpec, settings: &SolverSettings, workers: usize) -> Result<Vec<Cell>> {
    spec.validate()?;
    let mut algos = spec.algos.clone();
    algos.sort_by_key(|a| a.as_str());
    algos.dedup();
    let mut tasks = Vec::new();
    for &algo in &algos {
        for (a, &p) in spec.p_grid.iter().enumerate() {
            for (b, &q) in spec.q_grid.iter().enumerate() {
                for t in 0..spec.trials {
                    let seed = trial_seed(spec.base_seed, a, b, t);
                    tasks.push((algo, a, b, GenConfig::new(spec.n, p, q, spec.sigma, seed)));
                }
            }
        }
    }
    Ok(execute(tasks, spec.trials, settings, workers)?
        .into_iter()
        .map(|(task, results)| into_cell(task, results, spec.p_grid[task.1], spec.q_grid[task.2], spec.sigma))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub sigmas: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    pub algos: Vec<Algo>,
}

impl NoiseSpec {
    /// `count` log-spaced noise levels from `lo` to `hi` inclusive.
    pub fn log_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
        if !(lo > 0.0 && hi >= lo) || count == 0 {
            return Err(Error::InvalidArgument("need 0 < lo <= hi and at least one level".into()));
        }
        if count == 1 {
            return Ok(vec![lo]);
        }
        let step = (hi / lo).ln() / (count - 1) as f64;
        Ok((0..count).map(|k| if k + 1 == count { hi } else { lo * (step * k as f64).exp() }).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigmas.is_empty() || self.trials == 0 || self.algos.is_empty() {
            return Err(Error::InvalidArgument("noise curve needs noise levels, trials and algorithms".into()));
        }
        for &s in &self.sigmas {
            GenConfig::new(self.n, self.p, self.q, s, 0).validate()?;
        }
        Ok(())
    }
}

/// Noise curve: one cell per `(algo, sigma)`, sorted by algorithm then by
/// noise level in the order given.
pub fn noise_curve(spec: &NoiseSpec, settings: &SolverSettings, workers: usize) -> Result<Vec<Cell>> {
    spec.validate()?;
    let mut algos = spec.algos.clone();
    algos.sort_by_key(|a| a.as_str());
    algos.dedup();
    let mut tasks = Vec::new();
    for &algo in &algos {
        for (s, &sigma) in spec.sigmas.iter().enumerate() {
            for t in 0..spec.trials {
                let seed = trial_seed(spec.base_seed, 0, s, t);
                tasks.push((algo, 0, s, GenConfig::new(spec.n, spec.p, spec.q, sigma, seed)));
            }
        }
    }
    Ok(execute(tasks, spec.trials, settings, workers)?
        .into_iter()
        .map(|(task, results)| into_cell(task, results, spec.p, spec.q, spec.sigmas[task.2]))
        .collect())
}

/// Shortest of the plain and exponent renderings; both round-trip.
fn num(x: f64) -> String {
    let plain = format!("{x}");
    let exp = format!("{x:e}");
    if exp.len() < plain.len() {
        exp
    } else {
        plain
    }
}

/// Keeps a message inside one CSV field.
fn csv_field(msg: &str) -> String {
    msg.replace([',', '\n', '\r'], ";")
}

pub const SWEEP_HEADER: &str = "algo,n,p,q,sigma,mean_rfe,median_rfe,exact_frac,mean_seconds,error";
pub const NOISE_HEADER: &str = "algo,sigma,mean_rfe";
pub const TRIAL_HEADER: &str = "algo,n,p,q,sigma,seed,rfe,exact,iters,seconds";

pub fn write_sweep_csv<W: Write>(mut out: W, cells: &[Cell]) -> Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for c in cells {
        let head = format!("{},{},{},{},{}", c.algo, c.n, num(c.p), num(c.q), num(c.sigma));
        match &c.outcome {
            Ok(a) => writeln!(
                out,
                "{head},{},{},{},{},",
                num(a.mean_rfe),
                num(a.median_rfe),
                num(a.exact_fraction),
                num(a.mean_seconds)
            )?,
            Err(msg) => writeln!(out, "{head},NaN,NaN,NaN,NaN,{}", csv_field(msg))?,
        }
    }
    Ok(())
}

pub fn write_noise_csv<W: Write>(mut out: W, cells: &[Cell]) -> Result<()> {
    writeln!(out, "{NOISE_HEADER}")?;
    for c in cells {
        let mean = c.outcome.as_ref().map_or(f64::NAN, |a| a.mean_rfe);
        writeln!(out, "{},{},{}", c.algo, num(c.sigma), num(mean))?;
    }
    Ok(())
}

pub fn write_trial_csv<W: Write>(mut out: W, cells: &[Cell]) -> Result<()> {
    writeln!(out, "{TRIAL_HEADER}")?;
    for c in cells {
        for t in &c.trials {
            let s = &t.summary;
            writeln!(
                out,
                "{},{},{},{},{},{},{:.16e},{},{},{:.16e}",
                c.algo,
                s.n,
                num(s.gen.p),
                num(s.gen.q),
                num(s.gen.sigma),
                t.seed,
                s.rfe,
                s.exact,
                s.iterations,
                s.wall_seconds
            )?;
        }
    }
    Ok(())
}
