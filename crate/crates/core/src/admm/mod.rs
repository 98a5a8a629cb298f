//! ADMM machinery for objectives that are sums of per-edge terms of
//! `t_i - t_j`.

pub mod engine;
pub mod incidence;
pub mod laplacian;
pub mod prox;

pub use engine::{admm_step, run, Admm, AdmmConfig, IterationView, Observer, RunOutcome, SolverState, StepStats};
pub use incidence::{incidence_adjoint, incidence_apply};
pub use laplacian::{t_update, Gauge, LeastSquaresUpdate};
pub use prox::{lud_prox, shrink_prox, EdgeProx, LudProx, ShapeFitProx};
