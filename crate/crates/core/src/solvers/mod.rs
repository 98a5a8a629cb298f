//! Solver frontends on top of the ADMM engine.
//!
//! ShapeFit works internally with the scale constraint set to the number of
//! edges, so that edge vectors have unit size on average and a penalty of
//! order one is a sensible default for every instance size. Reported
//! locations, objectives and residuals are divided back to the unit-sum
//! gauge. LUD fixes its own scale through `d_ij >= 1` and is reported as
//! solved.

mod lud;
mod shapefit;
mod shapekick;

pub use lud::{solve_lud, solve_lud_observed, LudState};
pub use shapefit::{solve_shapefit, solve_shapefit_observed};
pub use shapekick::{solve_shapekick, solve_shapekick_observed, KickConfig, StagnationDetector};

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::admm::engine::SolverState;
use crate::error::{Error, Result};
use crate::metrics::rfe;
use crate::model::{PointCloud, ProblemInstance, SolveReport};

/// Which program to solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algo {
    ShapeFit,
    ShapeKick,
    Lud,
}

impl Algo {
    pub const ALL: [Algo; 3] = [Algo::ShapeFit, Algo::ShapeKick, Algo::Lud];

    pub fn as_str(&self) -> &'static str {
        match self {
            Algo::ShapeFit => "shapefit",
            Algo::ShapeKick => "shapekick",
            Algo::Lud => "lud",
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shapefit" => Ok(Algo::ShapeFit),
            "shapekick" => Ok(Algo::ShapeKick),
            "lud" => Ok(Algo::Lud),
            other => Err(Error::InvalidArgument(format!(
                "unknown algorithm '{other}' (expected shapefit, shapekick or lud)"
            ))),
        }
    }
}

/// Working scale used for ShapeFit-type solves of `inst`.
pub(crate) fn shapefit_scale(inst: &ProblemInstance) -> f64 {
    inst.graph.edge_count() as f64
}

pub(crate) fn admit(inst: &ProblemInstance) -> Result<()> {
    inst.ensure_valid()
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn build_report(
    algo: Algo,
    inst: &ProblemInstance,
    state: &SolverState,
    unit: f64,
    objective: f64,
    converged: bool,
    wall_seconds: f64,
) -> Result<SolveReport> {
    let locations = PointCloud::from_matrix(scaled(&state.t, unit))?;
    let rfe = match &inst.truth {
        Some(truth) => Some(rfe(truth, &locations)?),
        None => None,
    };
    Ok(SolveReport {
        algo: algo.to_string(),
        locations,
        iterations: state.iter,
        converged,
        final_primal_residual: state.primal_residual * unit,
        final_dual_residual: state.dual_residual * unit,
        objective: objective * unit,
        wall_seconds,
        rfe,
    })
}

fn scaled(t: &DMatrix<f64>, unit: f64) -> DMatrix<f64> {
    if unit == 1.0 {
        t.clone()
    } else {
        t * unit
    }
}
