//! Gauge-invariant error measures and trial aggregation.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{GenParams, PointCloud};

/// A trial counts as exact recovery when its RFE is below this.
pub const EXACT_RFE: f64 = 1e-9;

/// Relative Frobenius error between two clouds.
///
/// Each cloud is centred on its centroid and scaled to unit Frobenius norm;
/// the result is the Frobenius distance between the two normalised
/// matrices, which lies in `[0, 2]` and is invariant under translating or
/// positively scaling either argument.
pub fn rfe(truth: &PointCloud, recovered: &PointCloud) -> Result<f64> {
    if truth.len() != recovered.len() || truth.dimension() != recovered.dimension() {
        return Err(Error::ShapeMismatch(format!(
            "cannot compare {} points in R^{} with {} points in R^{}",
            truth.len(),
            truth.dimension(),
            recovered.len(),
            recovered.dimension()
        )));
    }
    let a = normalized(truth.as_matrix())?;
    let b = normalized(recovered.as_matrix())?;
    Ok((a - b).norm())
}

fn normalized(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = x.nrows() as f64;
    let mut c = x.clone();
    for mut col in c.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
    let norm = c.norm();
    if !(norm > 0.0) {
        return Err(Error::InvalidArgument("cloud collapses to a single point after centring".into()));
    }
    Ok(c / norm)
}

/// Outcome of one solve on one generated instance.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub algo: String,
    pub n: usize,
    pub gen: GenParams,
    pub rfe: f64,
    pub exact: bool,
    pub iterations: usize,
    pub wall_seconds: f64,
}

impl TrialSummary {
    pub fn new(algo: &str, n: usize, gen: GenParams, rfe: f64, iterations: usize, wall_seconds: f64) -> Self {
        Self { algo: algo.to_string(), n, gen, rfe, exact: rfe < EXACT_RFE, iterations, wall_seconds }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub trials: usize,
    pub mean_rfe: f64,
    pub median_rfe: f64,
    pub exact_fraction: f64,
    pub mean_seconds: f64,
}

pub fn summarize(trials: &[TrialSummary]) -> Result<Aggregate> {
    if trials.is_empty() {
        return Err(Error::InvalidArgument("cannot summarise an empty trial list".into()));
    }
    let k = trials.len() as f64;
    let mut rfes: Vec<f64> = trials.iter().map(|t| t.rfe).collect();
    rfes.sort_by(|a, b| a.total_cmp(b));
    let mid = rfes.len() / 2;
    let median_rfe = if rfes.len() % 2 == 1 { rfes[mid] } else { 0.5 * (rfes[mid - 1] + rfes[mid]) };
    Ok(Aggregate {
        trials: trials.len(),
        mean_rfe: rfes.iter().sum::<f64>() / k,
        median_rfe,
        exact_fraction: trials.iter().filter(|t| t.exact).count() as f64 / k,
        mean_seconds: trials.iter().map(|t| t.wall_seconds).sum::<f64>() / k,
    })
}
