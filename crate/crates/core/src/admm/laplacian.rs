//! Gauge-constrained least squares for the location update.
//!
//! Minimising `||R T - B||_F^2` over mean-zero `T` leads to the graph
//! Laplacian system `L T = R^T B`, solved column by column. `L` is singular
//! along the all-ones vector, so the factor is taken of `L + (1/n) 1 1^T`,
//! which is positive definite for a connected graph and coincides with `L`
//! on mean-zero vectors. `R^T B` is always mean-zero, so the solution is the
//! minimum-norm one.
//!
//! For the scale constraint `<R T, V> = kappa` the minimiser differs from the
//! unconstrained one by a multiple of `u = L^+ R^T V`, which is computed once
//! at construction. Each solve is then two triangular sweeps plus a rank-one
//! correction.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::admm::incidence::{adjoint_into, apply_into};
use crate::error::{Error, Result};
use crate::model::DirectionGraph;

/// Which constraints pin the translation/scale ambiguity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gauge {
    /// `sum_i t_i = 0` and `sum_k <t_i - t_j, v_k> = scale`.
    TranslationAndScale { scale: f64 },
    /// `sum_i t_i = 0` only; the objective must fix the scale itself.
    Translation,
}

#[derive(Debug, Clone)]
pub struct LeastSquaresUpdate {
    edges: Vec<(usize, usize)>,
    n: usize,
    d: usize,
    factor: Cholesky<f64, Dyn>,
    gauge: Gauge,
    /// `R^T V`, the gradient of the scale constraint.
    scale_normal: DMatrix<f64>,
    /// `L^+ R^T V`.
    correction: DMatrix<f64>,
    /// `<R^T V, L^+ R^T V>`.
    correction_gain: f64,
}

impl LeastSquaresUpdate {
    pub fn new(graph: &DirectionGraph, gauge: Gauge) -> Result<Self> {
        if !graph.is_connected() {
            return Err(Error::InvalidArgument("graph must be connected".into()));
        }
        let n = graph.vertex_count();
        let d = graph.dimension();
        let edges = graph.edges().to_vec();

        let mut lap = DMatrix::from_element(n, n, 1.0 / n as f64);
        for &(i, j) in &edges {
            lap[(i, i)] += 1.0;
            lap[(j, j)] += 1.0;
            lap[(i, j)] -= 1.0;
            lap[(j, i)] -= 1.0;
        }
        let factor = lap.cholesky().ok_or(Error::Factorization)?;

        let mut scale_normal = DMatrix::zeros(n, d);
        adjoint_into(&edges, graph.directions(), &mut scale_normal);
        let mut correction = factor.solve(&scale_normal);
        center_columns(&mut correction);
        let correction_gain = correction.dot(&scale_normal);

        if let Gauge::TranslationAndScale { scale } = gauge {
            if !(scale > 0.0) {
                return Err(Error::InvalidArgument(format!("gauge scale must be positive, got {scale}")));
            }
            if !(correction_gain > 0.0) {
                return Err(Error::InvalidArgument("scale constraint is degenerate: R^T V vanishes".into()));
            }
        }

        Ok(Self { edges, n, d, factor, gauge, scale_normal, correction, correction_gain })
    }

    pub fn gauge(&self) -> Gauge {
        self.gauge
    }

    /// `(n, d)` of the location matrix.
    pub fn shape(&self) -> (usize, usize) {
        (self.n, self.d)
    }

    /// Solves `L X = rhs` for mean-zero `rhs`, returning the mean-zero `X`.
    pub fn laplacian_solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = self.factor.solve(rhs);
        center_columns(&mut x);
        x
    }

    /// `argmin_{T in gauge set} ||R T - B||_F^2`.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut rhs = DMatrix::zeros(self.n, self.d);
        adjoint_into(&self.edges, b, &mut rhs);
        self.solve_from_adjoint(&rhs)
    }

    /// Same as [`solve`](Self::solve) with `R^T B` already formed.
    pub fn solve_from_adjoint(&self, rtb: &DMatrix<f64>) -> DMatrix<f64> {
        let mut t = self.laplacian_solve(rtb);
        if let Gauge::TranslationAndScale { scale } = self.gauge {
            let gap = scale - t.dot(&self.scale_normal);
            t += &self.correction * (gap / self.correction_gain);
        }
        t
    }

    /// The minimiser for `B = 0`. Under the scale gauge this is the
    /// correction direction rescaled onto the constraint; under the
    /// translation gauge it is zero.
    pub fn gauge_point(&self) -> DMatrix<f64> {
        match self.gauge {
            Gauge::TranslationAndScale { scale } => &self.correction * (scale / self.correction_gain),
            Gauge::Translation => DMatrix::zeros(self.n, self.d),
        }
    }

    /// `(|sum_i t_i|, sum_k <t_i - t_j, v_k>)` for a location matrix.
    pub fn constraint_values(&self, t: &DMatrix<f64>) -> (f64, f64) {
        let sums: f64 = t.column_iter().map(|c| c.sum().powi(2)).sum::<f64>().sqrt();
        (sums, t.dot(&self.scale_normal))
    }

    pub(crate) fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub(crate) fn apply_incidence(&self, t: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        apply_into(&self.edges, t, out);
    }
}

/// Least-squares location update for a single right-hand side. Builds the
/// factorisation every call; solvers keep a [`LeastSquaresUpdate`] instead.
pub fn t_update(graph: &DirectionGraph, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if b.nrows() != graph.edge_count() || b.ncols() != graph.dimension() {
        return Err(Error::ShapeMismatch(format!(
            "expected a {}x{} edge matrix, got {}x{}",
            graph.edge_count(),
            graph.dimension(),
            b.nrows(),
            b.ncols()
        )));
    }
    let lsq = LeastSquaresUpdate::new(graph, Gauge::TranslationAndScale { scale: 1.0 })?;
    Ok(lsq.solve(b))
}

pub(crate) fn center_columns(x: &mut DMatrix<f64>) {
    let n = x.nrows() as f64;
    for mut c in x.column_iter_mut() {
        let mean = c.sum() / n;
        c.add_scalar_mut(-mean);
    }
}
