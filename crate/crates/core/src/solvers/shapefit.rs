use std::ops::ControlFlow;
use std::time::Instant;

use crate::admm::engine::{run, AdmmConfig, Observer};
use crate::admm::laplacian::{Gauge, LeastSquaresUpdate};
use crate::admm::prox::ShapeFitProx;
use crate::error::Result;
use crate::model::{ProblemInstance, SolveReport};
use crate::solvers::{admit, build_report, shapefit_scale, Algo};

/// Minimises `sum_k |P_{v_k perp}(t_i - t_j)|` subject to `sum_i t_i = 0`
/// and `sum_k <t_i - t_j, v_k> = 1`.
pub fn solve_shapefit(inst: &ProblemInstance, cfg: &AdmmConfig) -> Result<SolveReport> {
    solve_shapefit_observed(inst, cfg, &mut |_| ControlFlow::Continue(()))
}

/// [`solve_shapefit`] with a per-iteration observer.
pub fn solve_shapefit_observed(
    inst: &ProblemInstance,
    cfg: &AdmmConfig,
    observer: &mut Observer<'_>,
) -> Result<SolveReport> {
    admit(inst)?;
    cfg.validate()?;
    let start = Instant::now();
    let scale = shapefit_scale(inst);
    let unit = 1.0 / scale;
    let lsq = LeastSquaresUpdate::new(&inst.graph, Gauge::TranslationAndScale { scale })?;
    let prox = ShapeFitProx::new(inst.graph.directions());
    let out = run(lsq, &prox, None, cfg, unit, observer)?;
    let secs = start.elapsed().as_secs_f64();
    build_report(Algo::ShapeFit, inst, &out.state, unit, out.objective, out.converged, secs)
}
