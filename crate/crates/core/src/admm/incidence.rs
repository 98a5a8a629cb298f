use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::DirectionGraph;

/// Row `k` of the result is `t_i - t_j` for the `k`-th edge `(i, j)`.
pub fn incidence_apply(graph: &DirectionGraph, t: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if t.nrows() != graph.vertex_count() || t.ncols() != graph.dimension() {
        return Err(Error::ShapeMismatch(format!(
            "expected a {}x{} location matrix, got {}x{}",
            graph.vertex_count(),
            graph.dimension(),
            t.nrows(),
            t.ncols()
        )));
    }
    let mut out = DMatrix::zeros(graph.edge_count(), graph.dimension());
    apply_into(graph.edges(), t, &mut out);
    Ok(out)
}

/// Adjoint of [`incidence_apply`]: accumulates `+z_k` on `i` and `-z_k` on
/// `j` for every edge `k = (i, j)`.
pub fn incidence_adjoint(graph: &DirectionGraph, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if z.nrows() != graph.edge_count() || z.ncols() != graph.dimension() {
        return Err(Error::ShapeMismatch(format!(
            "expected a {}x{} edge matrix, got {}x{}",
            graph.edge_count(),
            graph.dimension(),
            z.nrows(),
            z.ncols()
        )));
    }
    let mut out = DMatrix::zeros(graph.vertex_count(), graph.dimension());
    adjoint_into(graph.edges(), z, &mut out);
    Ok(out)
}

pub(crate) fn apply_into(edges: &[(usize, usize)], t: &DMatrix<f64>, out: &mut DMatrix<f64>) {
    for c in 0..t.ncols() {
        let tc = t.column(c);
        let mut oc = out.column_mut(c);
        for (k, &(i, j)) in edges.iter().enumerate() {
            oc[k] = tc[i] - tc[j];
        }
    }
}

pub(crate) fn adjoint_into(edges: &[(usize, usize)], z: &DMatrix<f64>, out: &mut DMatrix<f64>) {
    out.fill(0.0);
    for c in 0..z.ncols() {
        let zc = z.column(c);
        let mut oc = out.column_mut(c);
        for (k, &(i, j)) in edges.iter().enumerate() {
            oc[i] += zc[k];
            oc[j] -= zc[k];
        }
    }
}
