//! The ADMM iteration shared by every solver.
//!
//! The problem is `min sum_k f_k(y_k)` subject to `y = R T` and `T` in a
//! gauge set. With scaled duals `Lambda` and penalty `rho` one cycle is
//!
//! ```text
//! T      <- argmin_{T in gauge} |R T - (Y - Lambda)|^2
//! Y      <- prox_{f / rho}(R T + Lambda)          (edgewise)
//! Lambda <- Lambda + R T - Y
//! ```
//!
//! with an optional over-relaxation of `R T`. Residuals are `|R T - Y|_F`
//! (primal) and `rho |R^T (Y_new - Y_old)|_F` (dual).

use std::ops::ControlFlow;
use std::time::Instant;

use nalgebra::DMatrix;

use crate::admm::laplacian::{Gauge, LeastSquaresUpdate};
use crate::admm::prox::EdgeProx;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmConfig {
    pub rho0: f64,
    pub max_iters: usize,
    /// Primal tolerance per entry; the stopping threshold is
    /// `eps_primal * sqrt(m d)`.
    pub eps_primal: f64,
    /// Dual tolerance per entry, scaled like `eps_primal`.
    pub eps_dual: f64,
    /// Over-relaxation factor in `(0, 2)`; 1 is plain ADMM.
    pub relaxation: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self { rho0: 1.0, max_iters: 20_000, eps_primal: 1e-11, eps_dual: 1e-11, relaxation: 1.0 }
    }
}

impl AdmmConfig {
    /// Defaults for the LUD program, which is solved in its native scale and
    /// converges far more slowly than ShapeFit at `rho = 1`.
    pub fn lud() -> Self {
        Self { rho0: 10.0, eps_primal: 1e-10, eps_dual: 1e-10, relaxation: 1.8, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rho0", self.rho0),
            ("eps_primal", self.eps_primal),
            ("eps_dual", self.eps_dual),
            ("relaxation", self.relaxation),
        ];
        for (name, x) in positive {
            if !(x > 0.0) || !x.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {x}")));
            }
        }
        if self.relaxation >= 2.0 {
            return Err(Error::InvalidArgument("relaxation must be below 2".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// ADMM iterates in working units.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    /// `n x d` locations.
    pub t: DMatrix<f64>,
    /// `m x d` edge variables.
    pub y: DMatrix<f64>,
    /// `m x d` scaled duals.
    pub lambda: DMatrix<f64>,
    pub rho: f64,
    pub iter: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// Per-iteration bookkeeping returned by [`admm_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `|Y_new - Y_old|_F / max(1, |Y_old|_F)`.
    pub y_change: f64,
}

/// Scratch buffers reused across iterations.
#[derive(Debug, Clone)]
pub struct Workspace {
    rt: DMatrix<f64>,
    rhs: DMatrix<f64>,
    z: Vec<f64>,
    out: Vec<f64>,
}

impl Workspace {
    pub fn new(n: usize, m: usize, d: usize) -> Self {
        Self { rt: DMatrix::zeros(m, d), rhs: DMatrix::zeros(n, d), z: vec![0.0; d], out: vec![0.0; d] }
    }
}

/// One ADMM cycle on `state`.
pub fn admm_step<P: EdgeProx + ?Sized>(
    state: &mut SolverState,
    lsq: &LeastSquaresUpdate,
    prox: &P,
    relaxation: f64,
    ws: &mut Workspace,
) -> StepStats {
    let d = state.t.ncols();
    let m = state.y.nrows();
    let edges = lsq.edges();

    // T-update against B = Y - Lambda; R^T B is accumulated directly.
    ws.rhs.fill(0.0);
    {
        let y = state.y.as_slice();
        let lam = state.lambda.as_slice();
        let rhs = ws.rhs.as_mut_slice();
        let n = rhs.len() / d;
        for c in 0..d {
            for (k, &(i, j)) in edges.iter().enumerate() {
                let b = y[c * m + k] - lam[c * m + k];
                rhs[c * n + i] += b;
                rhs[c * n + j] -= b;
            }
        }
    }
    state.t = lsq.solve_from_adjoint(&ws.rhs);
    lsq.apply_incidence(&state.t, &mut ws.rt);

    // Edgewise prox and dual ascent. The same sweep accumulates the primal
    // residual, |dY|, |Y_old| and R^T dY for the dual residual.
    ws.rhs.fill(0.0);
    let n = ws.rhs.nrows();
    let alpha = relaxation;
    let (mut primal2, mut dy2, mut y2) = (0.0, 0.0, 0.0);
    {
        let rt = ws.rt.as_slice();
        let y = state.y.as_mut_slice();
        let lam = state.lambda.as_mut_slice();
        let rhs = ws.rhs.as_mut_slice();
        for (k, &(i, j)) in edges.iter().enumerate() {
            for c in 0..d {
                let idx = c * m + k;
                let rt_hat = alpha * rt[idx] + (1.0 - alpha) * y[idx];
                ws.z[c] = rt_hat + lam[idx];
            }
            prox.prox(k, &ws.z, state.rho, &mut ws.out);
            for c in 0..d {
                let idx = c * m + k;
                let old = y[idx];
                let new = ws.out[c];
                let rt_hat = ws.z[c] - lam[idx];
                lam[idx] += rt_hat - new;
                y[idx] = new;
                let delta = new - old;
                primal2 += (rt[idx] - new).powi(2);
                dy2 += delta * delta;
                y2 += old * old;
                rhs[c * n + i] += delta;
                rhs[c * n + j] -= delta;
            }
        }
    }

    let primal = primal2.sqrt();
    let dual = state.rho * ws.rhs.norm();
    let y_change = dy2.sqrt() / y2.sqrt().max(1.0);

    state.iter += 1;
    state.primal_residual = primal;
    state.dual_residual = dual;
    StepStats { primal_residual: primal, dual_residual: dual, y_change }
}

/// What observers see after each iteration.
#[derive(Debug, Clone, Copy)]
pub struct IterationView<'a> {
    pub state: &'a SolverState,
    pub stats: StepStats,
    /// Index of the penalty phase (always 0 without kicking).
    pub phase: usize,
    /// Factor converting working units to reported units.
    pub unit: f64,
    pub lsq: &'a LeastSquaresUpdate,
}

impl IterationView<'_> {
    /// Current locations in reported units.
    pub fn locations(&self) -> DMatrix<f64> {
        &self.state.t * self.unit
    }
}

pub type Observer<'o> = dyn FnMut(&IterationView<'_>) -> ControlFlow<()> + 'o;

/// A running ADMM solve: the factorised location update, the iterates and
/// the scratch space.
pub struct Admm<'p, P: EdgeProx + ?Sized> {
    lsq: LeastSquaresUpdate,
    prox: &'p P,
    state: SolverState,
    ws: Workspace,
    relaxation: f64,
}

impl<'p, P: EdgeProx + ?Sized> Admm<'p, P> {
    /// Starts from `T = argmin |R T - B0|` over the gauge set, `Y = R T`,
    /// `Lambda = 0`.
    pub fn new(lsq: LeastSquaresUpdate, prox: &'p P, b0: Option<&DMatrix<f64>>, rho: f64, relaxation: f64) -> Self {
        let (n, d) = lsq.shape();
        let m = lsq.edges().len();
        let t = match b0 {
            Some(b) => lsq.solve(b),
            None => lsq.gauge_point(),
        };
        let mut y = DMatrix::zeros(m, d);
        lsq.apply_incidence(&t, &mut y);
        let state = SolverState {
            t,
            y,
            lambda: DMatrix::zeros(m, d),
            rho,
            iter: 0,
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
        };
        Self { lsq, prox, state, ws: Workspace::new(n, m, d), relaxation }
    }

    pub fn step(&mut self) -> StepStats {
        let stats = admm_step(&mut self.state, &self.lsq, self.prox, self.relaxation, &mut self.ws);
        debug_assert!(self.gauge_error() <= 1e-10, "gauge drift {}", self.gauge_error());
        stats
    }

    /// Changes the penalty, rescaling the scaled duals so that the unscaled
    /// multipliers `rho * Lambda` are unchanged.
    pub fn set_rho(&mut self, rho: f64) {
        let ratio = self.state.rho / rho;
        self.state.lambda *= ratio;
        self.state.rho = rho;
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn into_state(self) -> SolverState {
        self.state
    }

    pub fn lsq(&self) -> &LeastSquaresUpdate {
        &self.lsq
    }

    /// Largest violation of the gauge constraints at the current `T`, in
    /// units of the gauge scale.
    pub fn gauge_error(&self) -> f64 {
        gauge_error(&self.lsq, &self.state.t)
    }

    /// Sum of edge terms at `Y = R T`, in working units.
    pub fn objective(&self) -> f64 {
        let mut rt = DMatrix::zeros(self.state.y.nrows(), self.state.y.ncols());
        self.lsq.apply_incidence(&self.state.t, &mut rt);
        edge_objective(self.prox, &rt)
    }

    pub fn thresholds(&self, cfg: &AdmmConfig) -> (f64, f64) {
        let size = (self.state.y.len() as f64).sqrt();
        (cfg.eps_primal * size, cfg.eps_dual * size)
    }
}

pub(crate) fn gauge_error(lsq: &LeastSquaresUpdate, t: &DMatrix<f64>) -> f64 {
    let (sum_norm, s) = lsq.constraint_values(t);
    match lsq.gauge() {
        Gauge::TranslationAndScale { scale } => (sum_norm / scale).max((s / scale - 1.0).abs()),
        Gauge::Translation => sum_norm / t.norm().max(1.0),
    }
}

pub fn edge_objective<P: EdgeProx + ?Sized>(prox: &P, rt: &DMatrix<f64>) -> f64 {
    let d = rt.ncols();
    let mut buf = vec![0.0; d];
    let mut total = 0.0;
    for k in 0..rt.nrows() {
        for (c, b) in buf.iter_mut().enumerate() {
            *b = rt[(k, c)];
        }
        total += prox.value(k, &buf);
    }
    total
}

/// Result of [`run`], in working units.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub state: SolverState,
    pub converged: bool,
    pub objective: f64,
    pub solve_seconds: f64,
}

/// Iterates until both residuals fall below their thresholds, the observer
/// breaks, or `max_iters` is reached. Non-convergence is reported in the
/// outcome rather than as an error.
pub fn run<P: EdgeProx + ?Sized>(
    lsq: LeastSquaresUpdate,
    prox: &P,
    b0: Option<&DMatrix<f64>>,
    cfg: &AdmmConfig,
    unit: f64,
    observer: &mut Observer<'_>,
) -> Result<RunOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let mut admm = Admm::new(lsq, prox, b0, cfg.rho0, cfg.relaxation);
    let (eps_p, eps_d) = admm.thresholds(cfg);
    let mut converged = false;
    for _ in 0..cfg.max_iters {
        let stats = admm.step();
        let view = IterationView { state: &admm.state, stats, phase: 0, unit, lsq: &admm.lsq };
        if observer(&view).is_break() {
            break;
        }
        if stats.primal_residual < eps_p && stats.dual_residual < eps_d {
            converged = true;
            break;
        }
    }
    let objective = admm.objective();
    let solve_seconds = start.elapsed().as_secs_f64();
    Ok(RunOutcome { state: admm.into_state(), converged, objective, solve_seconds })
}
