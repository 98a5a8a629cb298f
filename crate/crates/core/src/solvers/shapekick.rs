//! ShapeFit with a kicked penalty schedule.
//!
//! ADMM on this problem makes fast early progress and then slows down. The
//! kicked variant starts with a small penalty, watches the edge iterates,
//! and multiplies the penalty by `kick_factor` whenever they stop moving
//! (relative change below `stagnation_tol` for `stagnation_window`
//! consecutive iterations) or the phase runs out of iterations. Scaled duals
//! are rescaled on every kick so the unscaled multipliers carry over.

use std::ops::ControlFlow;
use std::time::Instant;

use crate::admm::engine::{Admm, IterationView, Observer};
use crate::admm::laplacian::{Gauge, LeastSquaresUpdate};
use crate::admm::prox::ShapeFitProx;
use crate::error::{Error, Result};
use crate::model::{ProblemInstance, SolveReport};
use crate::solvers::{admit, build_report, shapefit_scale, Algo};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KickConfig {
    pub rho0: f64,
    pub kick_factor: f64,
    pub stagnation_window: usize,
    pub stagnation_tol: f64,
    /// Number of kicks; the solve has at most `max_kicks + 1` phases.
    pub max_kicks: usize,
    /// Iteration cap of a single phase.
    pub phase_iters: usize,
    /// Global stopping tolerances, as in [`AdmmConfig`](crate::admm::AdmmConfig).
    pub eps_primal: f64,
    pub eps_dual: f64,
    pub relaxation: f64,
}

impl Default for KickConfig {
    fn default() -> Self {
        Self {
            rho0: 0.001,
            kick_factor: 10.0,
            stagnation_window: 5,
            stagnation_tol: 1e-4,
            max_kicks: 6,
            phase_iters: 500,
            eps_primal: 1e-11,
            eps_dual: 1e-11,
            relaxation: 1.0,
        }
    }
}

impl KickConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        for (name, x) in [
            ("rho0", self.rho0),
            ("stagnation_tol", self.stagnation_tol),
            ("eps_primal", self.eps_primal),
            ("eps_dual", self.eps_dual),
            ("relaxation", self.relaxation),
        ] {
            if !(x > 0.0) || !x.is_finite() {
                return bad(format!("{name} must be positive, got {x}"));
            }
        }
        // A factor of exactly 1 is accepted: it reproduces un-kicked ADMM.
        if !(self.kick_factor >= 1.0) || !self.kick_factor.is_finite() {
            return bad(format!("kick_factor must be at least 1, got {}", self.kick_factor));
        }
        if self.stagnation_window == 0 || self.phase_iters == 0 {
            return bad("stagnation_window and phase_iters must be positive".into());
        }
        if self.relaxation >= 2.0 {
            return bad("relaxation must be below 2".into());
        }
        Ok(())
    }

    pub fn iteration_budget(&self) -> usize {
        (self.max_kicks + 1) * self.phase_iters
    }
}

/// Counts consecutive iterations whose relative `Y` change is below a
/// tolerance.
#[derive(Debug, Clone)]
pub struct StagnationDetector {
    window: usize,
    tol: f64,
    run: usize,
}

impl StagnationDetector {
    pub fn new(window: usize, tol: f64) -> Self {
        Self { window, tol, run: 0 }
    }

    /// Feeds one relative change; true once `window` consecutive values were
    /// below the tolerance.
    pub fn observe(&mut self, y_change: f64) -> bool {
        if y_change < self.tol {
            self.run += 1;
        } else {
            self.run = 0;
        }
        self.run >= self.window
    }

    pub fn reset(&mut self) {
        self.run = 0;
    }
}

pub fn solve_shapekick(inst: &ProblemInstance, kcfg: &KickConfig) -> Result<SolveReport> {
    solve_shapekick_observed(inst, kcfg, &mut |_| ControlFlow::Continue(()))
}

pub fn solve_shapekick_observed(
    inst: &ProblemInstance,
    kcfg: &KickConfig,
    observer: &mut Observer<'_>,
) -> Result<SolveReport> {
    admit(inst)?;
    kcfg.validate()?;
    let start = Instant::now();
    let scale = shapefit_scale(inst);
    let unit = 1.0 / scale;
    let lsq = LeastSquaresUpdate::new(&inst.graph, Gauge::TranslationAndScale { scale })?;
    let prox = ShapeFitProx::new(inst.graph.directions());
    let mut admm = Admm::new(lsq, &prox, None, kcfg.rho0, kcfg.relaxation);
    let size = (admm.state().y.len() as f64).sqrt();
    let (eps_p, eps_d) = (kcfg.eps_primal * size, kcfg.eps_dual * size);

    let mut detector = StagnationDetector::new(kcfg.stagnation_window, kcfg.stagnation_tol);
    let mut phase = 0;
    let mut phase_iter = 0;
    let mut converged = false;
    loop {
        let stats = admm.step();
        let view = IterationView { state: admm.state(), stats, phase, unit, lsq: admm.lsq() };
        if observer(&view).is_break() {
            break;
        }
        if stats.primal_residual < eps_p && stats.dual_residual < eps_d {
            converged = true;
            break;
        }
        phase_iter += 1;
        let stagnated = detector.observe(stats.y_change);
        if stagnated || phase_iter >= kcfg.phase_iters {
            if phase == kcfg.max_kicks {
                break;
            }
            phase += 1;
            phase_iter = 0;
            detector.reset();
            let rho = admm.state().rho * kcfg.kick_factor;
            admm.set_rho(rho);
        }
    }
    let objective = admm.objective();
    let secs = start.elapsed().as_secs_f64();
    build_report(Algo::ShapeKick, inst, admm.state(), unit, objective, converged, secs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::admm::AdmmConfig;
    use crate::solvers::solve_shapefit_observed;
    use crate::synth::{generate, GenConfig};

    #[test]
    fn detector_needs_a_full_window() {
        let mut d = StagnationDetector::new(3, 1e-4);
        assert!(!d.observe(1e-5));
        assert!(!d.observe(1e-5));
        assert!(!d.observe(1e-3));
        assert!(!d.observe(1e-5));
        assert!(!d.observe(1e-5));
        assert!(d.observe(1e-5));
    }

    #[test]
    fn unit_factor_matches_plain_admm() {
        let inst = generate(&GenConfig::new(25, 0.5, 0.1, 0.0, 31)).unwrap();
        let kcfg = KickConfig { kick_factor: 1.0, rho0: 0.5, phase_iters: 40, max_kicks: 4, ..Default::default() };
        let cfg = AdmmConfig { rho0: 0.5, max_iters: kcfg.iteration_budget(), ..Default::default() };
        let mut kicked = Vec::new();
        let rk = solve_shapekick_observed(&inst, &kcfg, &mut |v| {
            kicked.push(v.state.t.clone());
            ControlFlow::Continue(())
        })
        .unwrap();
        let mut plain = Vec::new();
        solve_shapefit_observed(&inst, &cfg, &mut |v| {
            plain.push(v.state.t.clone());
            ControlFlow::Continue(())
        })
        .unwrap();
        assert!(rk.iterations <= kcfg.iteration_budget());
        let k = kicked.len().min(plain.len());
        assert!(k > 0);
        for i in 0..k {
            assert_eq!(kicked[i], plain[i], "iterate {i} differs");
        }
    }

    #[test]
    fn respects_iteration_budget() {
        let inst = generate(&GenConfig::new(40, 0.4, 0.3, 0.0, 2)).unwrap();
        let kcfg = KickConfig { phase_iters: 20, max_kicks: 2, ..Default::default() };
        let rep = solve_shapekick(&inst, &kcfg).unwrap();
        assert!(rep.iterations <= 60);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(KickConfig { kick_factor: 0.5, ..Default::default() }.validate().is_err());
        assert!(KickConfig { stagnation_window: 0, ..Default::default() }.validate().is_err());
    }
}
