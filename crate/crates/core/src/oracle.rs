//! Slow reference minimiser for small instances.
//!
//! Both programs are solved by descent on a smoothed objective
//! `sum_k sqrt(r_k^2 + eps^2)`, where `r_k` is the edge residual, with `eps`
//! driven down a fixed schedule. Each descent step is a damped Newton step
//! restricted to the tangent space of the gauge set (falling back to the
//! projected gradient when that is not a descent direction), followed by a
//! backtracking line search. Nothing here is shared with the ADMM code: edge
//! loops, the gauge projection and the linear algebra are all local.
//!
//! The ShapeFit gauge is `sum_i t_i = 0`, `sum_k <t_i - t_j, v_k> = 1`. The
//! LUD gauge is translation only; its edge residual is
//! `|x - max(1, <x, v>) v|` with `x = t_i - t_j`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{DirectionGraph, PointCloud, ProblemInstance};

/// Largest instance the oracle accepts.
pub const MAX_ORACLE_N: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Program {
    ShapeFit,
    Lud,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    /// Strictly decreasing smoothing levels; the last must be at most 1e-12
    /// for the result to be used as a reference.
    pub eps_schedule: Vec<f64>,
    /// Descent iterations allowed per smoothing level.
    pub max_iters: usize,
    /// A level ends once the projected gradient norm falls below this.
    pub grad_tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { eps_schedule: vec![1e-1, 1e-3, 1e-6, 1e-9, 1e-12], max_iters: 500, grad_tol: 1e-13 }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps_schedule.is_empty() {
            return Err(Error::InvalidArgument("eps schedule is empty".into()));
        }
        if self.eps_schedule.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
            return Err(Error::InvalidArgument("smoothing levels must be positive".into()));
        }
        if self.eps_schedule.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidArgument("eps schedule must be strictly decreasing".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// Smoothed values after each accepted step at one smoothing level.
#[derive(Debug, Clone, PartialEq)]
pub struct StageTrace {
    pub eps: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct OracleSolution {
    /// Minimiser in the program's gauge.
    pub locations: PointCloud,
    /// Unsmoothed objective at `locations`.
    pub objective: f64,
    /// Eliminated edge scales `max(1, <t_i - t_j, v_k>)` for LUD.
    pub scales: Option<Vec<f64>>,
    pub trace: Vec<StageTrace>,
}

pub fn oracle_shapefit(inst: &ProblemInstance, cfg: &OracleConfig) -> Result<OracleSolution> {
    solve(inst, Program::ShapeFit, cfg)
}

pub fn oracle_lud(inst: &ProblemInstance, cfg: &OracleConfig) -> Result<OracleSolution> {
    solve(inst, Program::Lud, cfg)
}

/// The edge residual vector of `program` for the difference `x` along `v`.
fn residual(program: Program, x: &[f64], v: &[f64]) -> Vec<f64> {
    let along: f64 = x.iter().zip(v).map(|(a, b)| a * b).sum();
    let shift = match program {
        Program::ShapeFit => along,
        Program::Lud => along.max(1.0),
    };
    x.iter().zip(v).map(|(a, b)| a - shift * b).collect()
}

/// `max(1, <x, v>)`.
pub fn eliminated_scale(x: &[f64], v: &[f64]) -> f64 {
    x.iter().zip(v).map(|(a, b)| a * b).sum::<f64>().max(1.0)
}

fn edge_difference(t: &DMatrix<f64>, i: usize, j: usize) -> Vec<f64> {
    (0..t.ncols()).map(|c| t[(i, c)] - t[(j, c)]).collect()
}

fn check_shape(graph: &DirectionGraph, t: &DMatrix<f64>) -> Result<()> {
    if t.nrows() != graph.vertex_count() || t.ncols() != graph.dimension() {
        return Err(Error::ShapeMismatch(format!(
            "expected {}x{} locations, got {}x{}",
            graph.vertex_count(),
            graph.dimension(),
            t.nrows(),
            t.ncols()
        )));
    }
    Ok(())
}

/// Unsmoothed objective `sum_k |r_k|`.
pub fn objective(graph: &DirectionGraph, program: Program, t: &DMatrix<f64>) -> Result<f64> {
    check_shape(graph, t)?;
    Ok(graph
        .edges()
        .iter()
        .enumerate()
        .map(|(k, &(i, j))| {
            let r = residual(program, &edge_difference(t, i, j), &graph.direction(k));
            r.iter().map(|x| x * x).sum::<f64>().sqrt()
        })
        .sum())
}

/// `sum_k sqrt(|r_k|^2 + eps^2)`.
pub fn smoothed_objective(graph: &DirectionGraph, program: Program, t: &DMatrix<f64>, eps: f64) -> Result<f64> {
    check_shape(graph, t)?;
    Ok(graph
        .edges()
        .iter()
        .enumerate()
        .map(|(k, &(i, j))| {
            let r = residual(program, &edge_difference(t, i, j), &graph.direction(k));
            (r.iter().map(|x| x * x).sum::<f64>() + eps * eps).sqrt()
        })
        .sum())
}

/// Analytic gradient of [`smoothed_objective`] with respect to the
/// locations (unprojected).
pub fn smoothed_gradient(graph: &DirectionGraph, program: Program, t: &DMatrix<f64>, eps: f64) -> Result<DMatrix<f64>> {
    check_shape(graph, t)?;
    let mut g = DMatrix::zeros(t.nrows(), t.ncols());
    for (k, &(i, j)) in graph.edges().iter().enumerate() {
        // Both residual maps have Jacobian P (or I) with J^T r = r, so the
        // gradient in x is r / phi.
        let r = residual(program, &edge_difference(t, i, j), &graph.direction(k));
        let phi = (r.iter().map(|x| x * x).sum::<f64>() + eps * eps).sqrt();
        for (c, rc) in r.iter().enumerate() {
            g[(i, c)] += rc / phi;
            g[(j, c)] -= rc / phi;
        }
    }
    Ok(g)
}

/// Hessian of the smoothed objective in the flattened `t[(i, c)] -> i*d + c`
/// coordinates.
fn smoothed_hessian(graph: &DirectionGraph, program: Program, t: &DMatrix<f64>, eps: f64) -> DMatrix<f64> {
    let d = t.ncols();
    let mut h = DMatrix::zeros(t.nrows() * d, t.nrows() * d);
    for (k, &(i, j)) in graph.edges().iter().enumerate() {
        let v = graph.direction(k);
        let x = edge_difference(t, i, j);
        let r = residual(program, &x, &v);
        let phi = (r.iter().map(|x| x * x).sum::<f64>() + eps * eps).sqrt();
        let along: f64 = x.iter().zip(&v).map(|(a, b)| a * b).sum();
        let projected = program == Program::ShapeFit || along >= 1.0;
        let mut block = DMatrix::zeros(d, d);
        for a in 0..d {
            for b in 0..d {
                let jac = if a == b { 1.0 } else { 0.0 } - if projected { v[a] * v[b] } else { 0.0 };
                block[(a, b)] = jac / phi - r[a] * r[b] / phi.powi(3);
            }
        }
        for (p, q, sign) in [(i, i, 1.0), (j, j, 1.0), (i, j, -1.0), (j, i, -1.0)] {
            for a in 0..d {
                for b in 0..d {
                    h[(p * d + a, q * d + b)] += sign * block[(a, b)];
                }
            }
        }
    }
    h
}

/// The gauge set as an affine subspace of `R^{n d}`.
struct GaugeSet {
    n: usize,
    d: usize,
    /// Unit normal of the scale constraint, when present.
    normal: Option<DVector<f64>>,
    /// `1 / |R^T V|`, the offset of the scale hyperplane along `normal`.
    offset: f64,
}

impl GaugeSet {
    fn new(graph: &DirectionGraph, program: Program) -> Self {
        let (n, d) = (graph.vertex_count(), graph.dimension());
        if program == Program::Lud {
            return Self { n, d, normal: None, offset: 0.0 };
        }
        let mut a = DVector::<f64>::zeros(n * d);
        for (k, &(i, j)) in graph.edges().iter().enumerate() {
            for (c, vc) in graph.direction(k).iter().enumerate() {
                a[i * d + c] += vc;
                a[j * d + c] -= vc;
            }
        }
        let norm = a.norm();
        Self { n, d, normal: Some(a / norm), offset: 1.0 / norm }
    }

    fn center(&self, x: &mut DVector<f64>) {
        for c in 0..self.d {
            let mean = (0..self.n).map(|i| x[i * self.d + c]).sum::<f64>() / self.n as f64;
            for i in 0..self.n {
                x[i * self.d + c] -= mean;
            }
        }
    }

    /// Orthogonal projection onto the tangent space.
    fn tangent(&self, x: &mut DVector<f64>) {
        self.center(x);
        if let Some(a) = &self.normal {
            let s = a.dot(x);
            x.axpy(-s, a, 1.0);
        }
    }

    /// Orthogonal projection onto the affine set.
    fn project(&self, x: &mut DVector<f64>) {
        self.center(x);
        if let Some(a) = &self.normal {
            let s = a.dot(x);
            x.axpy(self.offset - s, a, 1.0);
        }
    }

    /// Dense projector onto the tangent space.
    fn tangent_projector(&self) -> DMatrix<f64> {
        let dim = self.n * self.d;
        let mut p = DMatrix::zeros(dim, dim);
        for col in 0..dim {
            let mut e = DVector::zeros(dim);
            e[col] = 1.0;
            self.tangent(&mut e);
            p.set_column(col, &e);
        }
        p
    }
}

fn to_matrix(x: &DVector<f64>, n: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |i, c| x[i * d + c])
}

fn to_vector(t: &DMatrix<f64>) -> DVector<f64> {
    let (n, d) = t.shape();
    DVector::from_fn(n * d, |k, _| t[(k / d, k % d)])
}

/// Minimises `program` on `inst` by smoothed projected descent.
pub fn solve(inst: &ProblemInstance, program: Program, cfg: &OracleConfig) -> Result<OracleSolution> {
    cfg.validate()?;
    let graph = &inst.graph;
    let (n, d) = (graph.vertex_count(), graph.dimension());
    if n > MAX_ORACLE_N {
        return Err(Error::OracleTooLarge { n, max: MAX_ORACLE_N });
    }
    if graph.edge_count() == 0 || !graph.is_connected() {
        return Err(Error::InvalidArgument("the oracle needs a connected graph with edges".into()));
    }
    let gauge = GaugeSet::new(graph, program);
    let projector = gauge.tangent_projector();

    // ShapeFit starts at the point of the scale hyperplane closest to the
    // origin. LUD starts from the same direction, scaled so that the edges
    // have unit length along their directions on average.
    let mut x = match &gauge.normal {
        Some(a) => a * gauge.offset,
        None => {
            let unit = GaugeSet::new(graph, Program::ShapeFit);
            let a = unit.normal.expect("scale normal");
            a * (graph.edge_count() as f64 * unit.offset)
        }
    };
    gauge.project(&mut x);

    let mut trace = Vec::with_capacity(cfg.eps_schedule.len());
    for &eps in &cfg.eps_schedule {
        let values = descend(graph, program, &gauge, &projector, &mut x, eps, cfg)?;
        trace.push(StageTrace { eps, values });
    }

    let t = to_matrix(&x, n, d);
    let obj = objective(graph, program, &t)?;
    let scales = (program == Program::Lud).then(|| {
        graph
            .edges()
            .iter()
            .enumerate()
            .map(|(k, &(i, j))| eliminated_scale(&edge_difference(&t, i, j), &graph.direction(k)))
            .collect()
    });
    Ok(OracleSolution { locations: PointCloud::from_matrix(t)?, objective: obj, scales, trace })
}

/// Descent at one smoothing level. Returns the smoothed values after each
/// accepted step.
fn descend(
    graph: &DirectionGraph,
    program: Program,
    gauge: &GaugeSet,
    projector: &DMatrix<f64>,
    x: &mut DVector<f64>,
    eps: f64,
    cfg: &OracleConfig,
) -> Result<Vec<f64>> {
    let (n, d) = (gauge.n, gauge.d);
    let dim = n * d;
    let eval = |x: &DVector<f64>| smoothed_objective(graph, program, &to_matrix(x, n, d), eps);
    let mut f = eval(x)?;
    if !f.is_finite() {
        return Err(Error::LineSearch { epsilon: eps });
    }
    let mut values = vec![f];
    for _ in 0..cfg.max_iters {
        let t = to_matrix(x, n, d);
        let mut g = to_vector(&smoothed_gradient(graph, program, &t, eps)?);
        gauge.tangent(&mut g);
        let gnorm = g.norm();
        if !gnorm.is_finite() {
            return Err(Error::LineSearch { epsilon: eps });
        }
        if gnorm <= cfg.grad_tol {
            break;
        }

        // Newton system on the tangent space, with the normal space mapped
        // to the identity and a small relative damping.
        let h = smoothed_hessian(graph, program, &t, eps);
        let mut reduced = projector * h * projector;
        let damping = 1e-12 * (reduced.trace() / dim as f64).max(1.0);
        for k in 0..dim {
            reduced[(k, k)] += damping;
        }
        reduced += DMatrix::identity(dim, dim) - projector;
        let newton = reduced.cholesky().map(|c| {
            let mut s = -c.solve(&g);
            gauge.tangent(&mut s);
            s
        });

        let mut accepted = None;
        let candidates = newton.into_iter().chain(std::iter::once(-&g / gnorm.max(1.0)));
        for dir in candidates {
            let slope = g.dot(&dir);
            if !(slope < 0.0) {
                continue;
            }
            if let Some(step) = backtrack(&eval, gauge, x, &dir, f, slope)? {
                accepted = Some(step);
                break;
            }
        }
        match accepted {
            Some((next, fx)) => {
                let gain = f - fx;
                *x = next;
                f = fx;
                values.push(f);
                if gain <= 1e-16 * f.abs() {
                    break;
                }
            }
            // No decrease representable in floating point.
            None => break,
        }
    }
    Ok(values)
}

/// Armijo backtracking from a unit step. Returns the accepted point and its
/// value, or `None` when the step underflows.
fn backtrack(
    eval: &impl Fn(&DVector<f64>) -> Result<f64>,
    gauge: &GaugeSet,
    x: &DVector<f64>,
    dir: &DVector<f64>,
    f: f64,
    slope: f64,
) -> Result<Option<(DVector<f64>, f64)>> {
    let mut step = 1.0;
    for _ in 0..80 {
        let mut next = x + dir * step;
        gauge.project(&mut next);
        let fx = eval(&next)?;
        if fx.is_finite() && fx <= f + 1e-4 * step * slope && fx < f {
            return Ok(Some((next, fx)));
        }
        step *= 0.5;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, GenConfig};

    #[test]
    fn rejects_large_instances() {
        let inst = generate(&GenConfig::new(31, 0.3, 0.0, 0.0, 1)).unwrap();
        assert!(matches!(
            oracle_shapefit(&inst, &OracleConfig::default()),
            Err(Error::OracleTooLarge { n: 31, max: 30 })
        ));
    }

    #[test]
    fn schedule_must_decrease() {
        let cfg = OracleConfig { eps_schedule: vec![1e-3, 1e-3], ..Default::default() };
        assert!(cfg.validate().is_err());
        assert!(OracleConfig { eps_schedule: vec![], ..Default::default() }.validate().is_err());
    }

    #[test]
    fn gauge_projection_is_exact() {
        let inst = generate(&GenConfig::new(8, 0.7, 0.2, 0.0, 3)).unwrap();
        let sol = oracle_shapefit(&inst, &OracleConfig::default()).unwrap();
        let t = sol.locations.as_matrix();
        assert!(t.row_sum().norm() < 1e-12);
        let mut s = 0.0;
        for (k, &(i, j)) in inst.graph.edges().iter().enumerate() {
            let x = edge_difference(t, i, j);
            s += x.iter().zip(inst.graph.direction(k)).map(|(a, b)| a * b).sum::<f64>();
        }
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stages_descend() {
        let inst = generate(&GenConfig::new(7, 0.8, 0.2, 0.0, 12)).unwrap();
        for program in [Program::ShapeFit, Program::Lud] {
            let sol = solve(&inst, program, &OracleConfig::default()).unwrap();
            for stage in &sol.trace {
                assert!(stage.values.windows(2).all(|w| w[1] <= w[0]));
            }
        }
    }
}
