//! Plain-text instance and result files.
//!
//! Instance file:
//!
//! ```text
//! shapefit-instance v1 d=<d> n=<n> m=<m>
//! e <i> <j> <v_1> ... <v_d>          m lines
//! t <i> <x_1> ... <x_d>              optional, n lines of ground truth
//! bad <k> <k> ...                    optional, corrupted edge indices
//! gen p=<p> q=<q> sigma=<s> seed=<u64>   optional
//! cameras <i> <i> ...                optional, camera vertices of a bipartite graph
//! ```
//!
//! Reals are written with 17 significant digits so files round-trip
//! exactly. Result file:
//!
//! ```text
//! shapefit-result v1
//! t <i> <x_1> ... <x_d>              n lines
//! meta algo=<a> iterations=<k> converged=<bool> primal_residual=<r> dual_residual=<r> objective=<o> wall_seconds=<s> rfe=<r|NA>
//! ```

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{DirectionGraph, GenParams, Partition, PointCloud, ProblemInstance, SolveReport};

const INSTANCE_MAGIC: &str = "shapefit-instance";
const RESULT_MAGIC: &str = "shapefit-result";
const VERSION: &str = "v1";

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_coords(out: &mut String, xs: impl IntoIterator<Item = f64>) {
    for x in xs {
        out.push(' ');
        out.push_str(&real(x));
    }
}

/// Serialises an instance.
pub fn instance_to_string(inst: &ProblemInstance) -> String {
    let g = &inst.graph;
    let mut out = String::new();
    let _ = writeln!(out, "{INSTANCE_MAGIC} {VERSION} d={} n={} m={}", g.dimension(), g.vertex_count(), g.edge_count());
    for (k, &(i, j)) in g.edges().iter().enumerate() {
        let _ = write!(out, "e {i} {j}");
        push_coords(&mut out, g.directions().row(k).iter().copied());
        out.push('\n');
    }
    if let Some(truth) = &inst.truth {
        for (i, row) in truth.as_matrix().row_iter().enumerate() {
            let _ = write!(out, "t {i}");
            push_coords(&mut out, row.iter().copied());
            out.push('\n');
        }
    }
    if let Some(bad) = &inst.corrupted_edges {
        out.push_str("bad");
        for k in bad {
            let _ = write!(out, " {k}");
        }
        out.push('\n');
    }
    if let Some(gp) = &inst.gen_params {
        let _ = writeln!(out, "gen p={} q={} sigma={} seed={}", gp.p, gp.q, gp.sigma, gp.seed);
    }
    if let Some(part) = g.partition() {
        out.push_str("cameras");
        for i in part.cameras() {
            let _ = write!(out, " {i}");
        }
        out.push('\n');
    }
    out
}

pub fn write_instance(path: impl AsRef<Path>, inst: &ProblemInstance) -> Result<()> {
    fs::write(path, instance_to_string(inst))?;
    Ok(())
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<ProblemInstance> {
    parse_instance(BufReader::new(fs::File::open(path)?))
}

pub fn parse_instance_str(s: &str) -> Result<ProblemInstance> {
    parse_instance(s.as_bytes())
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn number<T: FromStr>(line: usize, tok: &str, what: &str) -> Result<T> {
    tok.parse().map_err(|_| parse_err(line, format!("bad {what} '{tok}'")))
}

/// Parses `key=value` and checks the key.
fn keyed<T: FromStr>(line: usize, tok: Option<&str>, key: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {key}=")))?;
    let value = tok
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| parse_err(line, format!("expected {key}=..., found '{tok}'")))?;
    number(line, value, key)
}

fn coords(line: usize, toks: &[&str], d: usize) -> Result<Vec<f64>> {
    if toks.len() != d {
        return Err(parse_err(line, format!("expected {d} coordinates, found {}", toks.len())));
    }
    toks.iter().map(|t| number(line, t, "coordinate")).collect()
}

/// Non-blank lines with their 1-based line numbers.
fn lines<R: BufRead>(reader: R) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push((k + 1, line));
        }
    }
    Ok(out)
}

/// Collects `n` indexed point lines into a cloud.
fn cloud_from_rows(rows: Vec<Option<Vec<f64>>>, d: usize, last_line: usize) -> Result<PointCloud> {
    let mut pts = Vec::with_capacity(rows.len());
    for (i, r) in rows.into_iter().enumerate() {
        pts.push(r.ok_or_else(|| parse_err(last_line, format!("missing t line for point {i}")))?);
    }
    PointCloud::new(d, &pts)
}

pub fn parse_instance<R: BufRead>(reader: R) -> Result<ProblemInstance> {
    let lines = lines(reader)?;
    let (hline, header) = lines.first().ok_or_else(|| parse_err(1, "empty file"))?;
    let mut h = header.split_whitespace();
    if h.next() != Some(INSTANCE_MAGIC) || h.next() != Some(VERSION) {
        return Err(parse_err(*hline, format!("expected '{INSTANCE_MAGIC} {VERSION}' header")));
    }
    let d: usize = keyed(*hline, h.next(), "d")?;
    let n: usize = keyed(*hline, h.next(), "n")?;
    let m: usize = keyed(*hline, h.next(), "m")?;

    let mut edges = Vec::with_capacity(m);
    let mut dirs = Vec::with_capacity(m);
    let mut truth: Vec<Option<Vec<f64>>> = vec![None; n];
    let mut any_truth = false;
    let mut bad = None;
    let mut gen = None;
    let mut cameras = None;
    let last = lines.last().map_or(1, |l| l.0);

    for (ln, line) in &lines[1..] {
        let ln = *ln;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks[0] {
            "e" => {
                if toks.len() < 3 {
                    return Err(parse_err(ln, "edge line needs two endpoints"));
                }
                if edges.len() == m {
                    return Err(parse_err(ln, format!("more than m={m} edge lines")));
                }
                edges.push((number(ln, toks[1], "vertex")?, number(ln, toks[2], "vertex")?));
                dirs.push(coords(ln, &toks[3..], d)?);
            }
            "t" => {
                if toks.len() < 2 {
                    return Err(parse_err(ln, "point line needs an index"));
                }
                let i: usize = number(ln, toks[1], "point index")?;
                if i >= n {
                    return Err(parse_err(ln, format!("point index {i} outside 0..{n}")));
                }
                if truth[i].is_some() {
                    return Err(parse_err(ln, format!("point {i} given twice")));
                }
                truth[i] = Some(coords(ln, &toks[2..], d)?);
                any_truth = true;
            }
            "bad" => {
                let mut ks: Vec<usize> =
                    toks[1..].iter().map(|t| number(ln, t, "edge index")).collect::<Result<_>>()?;
                ks.sort_unstable();
                bad = Some(ks);
            }
            "gen" => {
                gen = Some(GenParams {
                    p: keyed(ln, toks.get(1).copied(), "p")?,
                    q: keyed(ln, toks.get(2).copied(), "q")?,
                    sigma: keyed(ln, toks.get(3).copied(), "sigma")?,
                    seed: keyed(ln, toks.get(4).copied(), "seed")?,
                });
            }
            "cameras" => {
                let mut mask = vec![false; n];
                for t in &toks[1..] {
                    let i: usize = number(ln, t, "vertex")?;
                    if i >= n {
                        return Err(parse_err(ln, format!("camera {i} outside 0..{n}")));
                    }
                    mask[i] = true;
                }
                cameras = Some(Partition::new(mask));
            }
            other => return Err(parse_err(ln, format!("unknown record '{other}'"))),
        }
    }
    if edges.len() != m {
        return Err(parse_err(last, format!("header promises m={m} edges, found {}", edges.len())));
    }
    let mut graph = DirectionGraph::new(n, d, &edges, &dirs)?;
    if let Some(p) = cameras {
        graph = graph.with_partition(p)?;
    }
    let mut inst = ProblemInstance::new(graph);
    if any_truth {
        inst.truth = Some(cloud_from_rows(truth, d, last)?);
    }
    inst.corrupted_edges = bad;
    inst.gen_params = gen;
    Ok(inst)
}

pub fn result_to_string(report: &SolveReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{RESULT_MAGIC} {VERSION}");
    for (i, row) in report.locations.as_matrix().row_iter().enumerate() {
        let _ = write!(out, "t {i}");
        push_coords(&mut out, row.iter().copied());
        out.push('\n');
    }
    let rfe = report.rfe.map_or_else(|| "NA".to_string(), real);
    let _ = writeln!(
        out,
        "meta algo={} iterations={} converged={} primal_residual={} dual_residual={} objective={} wall_seconds={} rfe={}",
        report.algo,
        report.iterations,
        report.converged,
        real(report.final_primal_residual),
        real(report.final_dual_residual),
        real(report.objective),
        real(report.wall_seconds),
        rfe
    );
    out
}

pub fn write_result(path: impl AsRef<Path>, report: &SolveReport) -> Result<()> {
    fs::write(path, result_to_string(report))?;
    Ok(())
}

pub fn read_result(path: impl AsRef<Path>) -> Result<SolveReport> {
    parse_result(BufReader::new(fs::File::open(path)?))
}

pub fn parse_result<R: BufRead>(reader: R) -> Result<SolveReport> {
    let lines = lines(reader)?;
    let (hline, header) = lines.first().ok_or_else(|| parse_err(1, "empty file"))?;
    if header.split_whitespace().collect::<Vec<_>>() != [RESULT_MAGIC, VERSION] {
        return Err(parse_err(*hline, format!("expected '{RESULT_MAGIC} {VERSION}' header")));
    }
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut meta = None;
    for (ln, line) in &lines[1..] {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks[0] {
            "t" if meta.is_none() => {
                if toks.len() < 3 {
                    return Err(parse_err(*ln, "point line needs an index and coordinates"));
                }
                let i: usize = number(*ln, toks[1], "point index")?;
                let d = rows.first().map_or(toks.len() - 2, |r| r.1.len());
                rows.push((i, coords(*ln, &toks[2..], d)?));
            }
            "meta" if meta.is_none() => meta = Some((*ln, toks)),
            other => return Err(parse_err(*ln, format!("unexpected record '{other}'"))),
        }
    }
    let (ln, toks) = meta.ok_or_else(|| parse_err(lines.last().map_or(1, |l| l.0), "missing meta line"))?;
    let d = rows.first().map_or(0, |r| r.1.len());
    let mut slots: Vec<Option<Vec<f64>>> = vec![None; rows.len()];
    for (i, r) in rows {
        if i >= slots.len() || slots[i].is_some() {
            return Err(parse_err(ln, format!("point indices must be 0..{} without repeats", slots.len())));
        }
        slots[i] = Some(r);
    }
    let locations = cloud_from_rows(slots, d, ln)?;
    let get = |key: &str| toks.get(meta_index(key)).copied();
    let algo: String = keyed(ln, get("algo"), "algo")?;
    let rfe_tok = get("rfe").ok_or_else(|| parse_err(ln, "missing rfe="))?;
    let rfe = if rfe_tok == "rfe=NA" { None } else { Some(keyed(ln, Some(rfe_tok), "rfe")?) };
    Ok(SolveReport {
        algo,
        locations,
        iterations: keyed(ln, get("iterations"), "iterations")?,
        converged: keyed(ln, get("converged"), "converged")?,
        final_primal_residual: keyed(ln, get("primal_residual"), "primal_residual")?,
        final_dual_residual: keyed(ln, get("dual_residual"), "dual_residual")?,
        objective: keyed(ln, get("objective"), "objective")?,
        wall_seconds: keyed(ln, get("wall_seconds"), "wall_seconds")?,
        rfe,
    })
}

/// Position of each key on the meta line (after the `meta` token).
fn meta_index(key: &str) -> usize {
    const KEYS: [&str; 8] =
        ["algo", "iterations", "converged", "primal_residual", "dual_residual", "objective", "wall_seconds", "rfe"];
    1 + KEYS.iter().position(|k| *k == key).expect("known key")
}
