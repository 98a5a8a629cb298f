//! Command-line front end for the shapefit library.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use shapefit::harness::{
    noise_curve, sweep, write_noise_csv, write_sweep_csv, write_trial_csv, Cell, NoiseSpec, SolverSettings, SweepSpec,
};
use shapefit::io::{read_instance, write_instance, write_result};
use shapefit::metrics::rfe;
use shapefit::model::SolveReport;
use shapefit::oracle::{solve as oracle_solve, OracleConfig, Program};
use shapefit::solvers::Algo;
use shapefit::synth::{generate, GenConfig};

#[derive(Parser, Debug)]
#[command(name = "shapefit", version, about = "Location recovery from pairwise directions")]
#[command(args_override_self = true)]
struct Cli {
    /// Random seed (instance seed for gen, base seed for sweeps).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads for sweeps [default: available cores].
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Output path.
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,

    /// key=value file of default flags; flags on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a synthetic instance and write it to --out.
    Gen(GenArgs),
    /// Solve an instance file.
    Solve(SolveArgs),
    /// Phase-diagram sweep over (p, q); writes one CSV row per cell.
    Sweep(SweepArgs),
    /// Mean RFE as a function of the noise level.
    NoiseCurve(NoiseArgs),
    /// Solve a small instance with the slow reference minimiser.
    Oracle(OracleArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(short)]
    n: usize,
    /// Edge probability (cross-edge probability with --cameras).
    #[arg(short)]
    p: f64,
    /// Corruption probability.
    #[arg(short, default_value_t = 0.0)]
    q: f64,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(short, long = "dim", default_value_t = 3)]
    d: usize,
    /// Make the first K vertices cameras and draw only camera/structure edges.
    #[arg(long, value_name = "K")]
    cameras: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    /// Initial penalty, applied to every selected algorithm.
    #[arg(long)]
    rho: Option<f64>,
    /// Iteration cap of plain ADMM runs.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Per-entry residual tolerance.
    #[arg(long)]
    eps: Option<f64>,
    /// Over-relaxation factor in (0, 2).
    #[arg(long)]
    relaxation: Option<f64>,
    #[arg(long)]
    kick_factor: Option<f64>,
    #[arg(long)]
    max_kicks: Option<usize>,
    #[arg(long)]
    phase_iters: Option<usize>,
}

impl SolverArgs {
    fn settings(&self) -> SolverSettings {
        let mut s = SolverSettings::default();
        for cfg in [&mut s.shapefit, &mut s.lud] {
            if let Some(r) = self.rho {
                cfg.rho0 = r;
            }
            if let Some(k) = self.max_iters {
                cfg.max_iters = k;
            }
            if let Some(e) = self.eps {
                cfg.eps_primal = e;
                cfg.eps_dual = e;
            }
            if let Some(a) = self.relaxation {
                cfg.relaxation = a;
            }
        }
        let k = &mut s.kick;
        if let Some(r) = self.rho {
            k.rho0 = r;
        }
        if let Some(e) = self.eps {
            k.eps_primal = e;
            k.eps_dual = e;
        }
        if let Some(a) = self.relaxation {
            k.relaxation = a;
        }
        if let Some(f) = self.kick_factor {
            k.kick_factor = f;
        }
        if let Some(m) = self.max_kicks {
            k.max_kicks = m;
        }
        if let Some(p) = self.phase_iters {
            k.phase_iters = p;
        }
        s
    }
}

fn parse_algo(s: &str) -> Result<Algo, String> {
    s.parse().map_err(|e: shapefit::Error| e.to_string())
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Instance file.
    input: PathBuf,
    #[arg(long, default_value = "shapefit", value_parser = parse_algo)]
    algo: Algo,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(short, default_value_t = 200)]
    n: usize,
    /// Comma-separated edge probabilities [default: 0.125, 0.25, ..., 1].
    #[arg(long, value_delimiter = ',')]
    p_grid: Option<Vec<f64>>,
    /// Comma-separated corruption probabilities [default: 0, 0.1, ..., 0.7].
    #[arg(long, value_delimiter = ',')]
    q_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, value_delimiter = ',', value_parser = parse_algo, default_value = "shapefit,lud")]
    algos: Vec<Algo>,
    /// Also write one row per trial to this file.
    #[arg(long)]
    trial_log: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct NoiseArgs {
    #[arg(short, default_value_t = 200)]
    n: usize,
    #[arg(short, default_value_t = 0.5)]
    p: f64,
    #[arg(short, default_value_t = 0.3)]
    q: f64,
    /// Explicit comma-separated noise levels; overrides the log grid.
    #[arg(long, value_delimiter = ',')]
    sigmas: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1e-4)]
    sigma_min: f64,
    #[arg(long, default_value_t = 1e-1)]
    sigma_max: f64,
    #[arg(long, default_value_t = 7)]
    levels: usize,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, value_delimiter = ',', value_parser = parse_algo, default_value = "shapefit,lud")]
    algos: Vec<Algo>,
    #[arg(long)]
    trial_log: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

fn parse_program(s: &str) -> Result<Program, String> {
    match s {
        "shapefit" => Ok(Program::ShapeFit),
        "lud" => Ok(Program::Lud),
        other => Err(format!("unknown program '{other}' (expected shapefit or lud)")),
    }
}

#[derive(Args, Debug)]
struct OracleArgs {
    input: PathBuf,
    #[arg(long, default_value = "shapefit", value_parser = parse_program)]
    program: Program,
}

const SUBCOMMANDS: [&str; 5] = ["gen", "solve", "sweep", "noise-curve", "oracle"];

/// Splices `--key value` pairs from the `--config` file into the argument
/// list. Keys also given on the command line are skipped.
fn with_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let strs: Vec<Option<&str>> = args.iter().map(|a| a.to_str()).collect();
    let mut path = None;
    for (k, a) in strs.iter().enumerate() {
        match a {
            Some("--config") => path = strs.get(k + 1).copied().flatten().map(PathBuf::from),
            Some(s) if s.starts_with("--config=") => path = Some(PathBuf::from(&s["--config=".len()..])),
            _ => {}
        }
    }
    let Some(path) = path else { return Ok(args) };
    let Some(at) = strs.iter().position(|a| a.is_some_and(|s| SUBCOMMANDS.contains(&s))) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
    let mut extra = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected key=value", path.display(), ln + 1);
        };
        let key = key.trim().replace('_', "-");
        if key == "config" {
            bail!("{}:{}: config files cannot include other config files", path.display(), ln + 1);
        }
        let flag = if key.len() == 1 { format!("-{key}") } else { format!("--{key}") };
        let alias = match key.as_str() {
            "out" => "-o",
            "dim" => "-d",
            "d" => "--dim",
            _ => "",
        };
        let given = |a: &Option<&str>| {
            a.is_some_and(|a| {
                [flag.as_str(), alias].iter().any(|f| !f.is_empty() && (a == *f || a.starts_with(&format!("{f}="))))
            })
        };
        if strs.iter().any(given) {
            continue;
        }
        extra.push(OsString::from(flag));
        extra.push(OsString::from(value.trim()));
    }
    let mut out = args;
    out.splice(at + 1..at + 1, extra);
    Ok(out)
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn workers(cli: &Cli) -> usize {
    cli.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn summary_line(r: &SolveReport) -> String {
    let rfe = r.rfe.map_or_else(|| "NA".to_string(), |x| format!("{x:e}"));
    format!("algo={} iters={} obj={:e} rfe={} seconds={:.3}", r.algo, r.iterations, r.objective, rfe, r.wall_seconds)
}

fn write_trials(path: Option<&Path>, cells: &[Cell]) -> Result<()> {
    if let Some(p) = path {
        let mut out = open_out(Some(p))?;
        write_trial_csv(&mut out, cells)?;
        out.flush()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Gen(a) => {
            let Some(out) = &cli.out else { bail!("gen needs --out") };
            let cfg = match a.cameras {
                Some(k) if k == 0 || k >= a.n => bail!("--cameras must be between 1 and n - 1"),
                Some(k) => GenConfig::bipartite(k, a.n - k, a.p, a.q, a.sigma, cli.seed),
                None => GenConfig::new(a.n, a.p, a.q, a.sigma, cli.seed),
            }
            .with_dimension(a.d);
            let inst = generate(&cfg)?;
            write_instance(out, &inst).with_context(|| format!("writing {}", out.display()))?;
            let bad = inst.corrupted_edges.as_ref().map_or(0, |b| b.len());
            println!("n={} m={} bad={}", inst.graph.vertex_count(), inst.graph.edge_count(), bad);
        }
        Command::Solve(a) => {
            let inst = read_instance(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
            let report = a.solver.settings().solve(a.algo, &inst)?;
            if let Some(out) = &cli.out {
                write_result(out, &report).with_context(|| format!("writing {}", out.display()))?;
            }
            println!("{}", summary_line(&report));
        }
        Command::Sweep(a) => {
            let mut spec = SweepSpec::phase_diagram(cli.seed);
            spec.n = a.n;
            if let Some(p) = &a.p_grid {
                spec.p_grid = p.clone();
            }
            if let Some(q) = &a.q_grid {
                spec.q_grid = q.clone();
            }
            spec.sigma = a.sigma;
            spec.trials = a.trials;
            spec.algos = a.algos.clone();
            let cells = sweep(&spec, &a.solver.settings(), workers(&cli))?;
            let mut out = open_out(cli.out.as_deref())?;
            write_sweep_csv(&mut out, &cells)?;
            out.flush()?;
            write_trials(a.trial_log.as_deref(), &cells)?;
        }
        Command::NoiseCurve(a) => {
            let sigmas = match &a.sigmas {
                Some(s) => s.clone(),
                None => NoiseSpec::log_grid(a.sigma_min, a.sigma_max, a.levels)?,
            };
            let spec = NoiseSpec {
                n: a.n,
                p: a.p,
                q: a.q,
                sigmas,
                trials: a.trials,
                base_seed: cli.seed,
                algos: a.algos.clone(),
            };
            let cells = noise_curve(&spec, &a.solver.settings(), workers(&cli))?;
            let mut out = open_out(cli.out.as_deref())?;
            write_noise_csv(&mut out, &cells)?;
            out.flush()?;
            write_trials(a.trial_log.as_deref(), &cells)?;
        }
        Command::Oracle(a) => {
            let inst = read_instance(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
            inst.ensure_valid()?;
            let sol = oracle_solve(&inst, a.program, &OracleConfig::default())?;
            let err = match &inst.truth {
                Some(t) => format!("{:e}", rfe(t, &sol.locations)?),
                None => "NA".into(),
            };
            let name = match a.program {
                Program::ShapeFit => "shapefit",
                Program::Lud => "lud",
            };
            if let Some(out) = &cli.out {
                let report = SolveReport {
                    algo: format!("oracle-{name}"),
                    locations: sol.locations.clone(),
                    iterations: sol.trace.iter().map(|s| s.values.len() - 1).sum(),
                    converged: true,
                    final_primal_residual: 0.0,
                    final_dual_residual: 0.0,
                    objective: sol.objective,
                    wall_seconds: 0.0,
                    rfe: inst.truth.as_ref().map(|t| rfe(t, &sol.locations)).transpose()?,
                };
                write_result(out, &report).with_context(|| format!("writing {}", out.display()))?;
            }
            println!("program={name} obj={:e} rfe={err}", sol.objective);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match with_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
