use std::ops::ControlFlow;
use std::time::Instant;

use nalgebra::DMatrix;

use crate::admm::engine::{run, AdmmConfig, Observer, SolverState};
use crate::admm::laplacian::{Gauge, LeastSquaresUpdate};
use crate::admm::prox::LudProx;
use crate::error::Result;
use crate::model::{ProblemInstance, SolveReport};
use crate::solvers::{admit, build_report, Algo};

/// ADMM iterates of an LUD solve together with the per-edge scales.
#[derive(Debug, Clone)]
pub struct LudState {
    pub state: SolverState,
    /// `d_k = max(1, <t_i - t_j, v_k>)`, the optimal scale of each edge at
    /// the final locations.
    pub scales: Vec<f64>,
}

/// Least unsquared deviations: minimises `sum_k |t_i - t_j - d_k v_k|` over
/// locations and scales `d_k >= 1`, subject to `sum_i t_i = 0`.
///
/// Locations are reported in the solver's own scale (no unit-sum
/// normalisation).
pub fn solve_lud(inst: &ProblemInstance, cfg: &AdmmConfig) -> Result<SolveReport> {
    solve_lud_observed(inst, cfg, &mut |_| ControlFlow::Continue(())).map(|(r, _)| r)
}

pub fn solve_lud_observed(
    inst: &ProblemInstance,
    cfg: &AdmmConfig,
    observer: &mut Observer<'_>,
) -> Result<(SolveReport, LudState)> {
    admit(inst)?;
    cfg.validate()?;
    let start = Instant::now();
    let graph = &inst.graph;
    let lsq = LeastSquaresUpdate::new(graph, Gauge::Translation)?;
    let prox = LudProx::new(graph.directions());
    // Start from the least-squares fit of unit-length edges.
    let out = run(lsq, &prox, Some(graph.directions()), cfg, 1.0, observer)?;
    let secs = start.elapsed().as_secs_f64();

    let mut rt = DMatrix::zeros(graph.edge_count(), graph.dimension());
    crate::admm::incidence::apply_into(graph.edges(), &out.state.t, &mut rt);
    let scales =
        (0..graph.edge_count()).map(|k| prox.scale(k, &rt.row(k).iter().copied().collect::<Vec<_>>())).collect();

    let report = build_report(Algo::Lud, inst, &out.state, 1.0, out.objective, out.converged, secs)?;
    Ok((report, LudState { state: out.state, scales }))
}
