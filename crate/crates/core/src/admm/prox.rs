//! Per-edge proximal maps.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::UNIT_NORM_TOL;

/// An objective that splits into one term per edge, `sum_k f_k(y_k)`, with a
/// computable proximal map.
pub trait EdgeProx: Sync {
    /// Writes `argmin_y f_k(y) + (rho/2) ||z - y||^2` into `out`.
    fn prox(&self, edge: usize, z: &[f64], rho: f64, out: &mut [f64]);

    /// `f_k(y)`.
    fn value(&self, edge: usize, y: &[f64]) -> f64;
}

/// Block soft-threshold of the part of `z` orthogonal to the unit vector `v`:
/// returns `P_v z + max(0, 1 - 1/(rho |P_perp z|)) P_perp z`.
///
/// This is the proximal map of `y -> |P_perp y|` with weight `1/rho`.
pub fn shrink_prox(z: &[f64], v: &[f64], rho: f64) -> Result<Vec<f64>> {
    if z.len() != v.len() {
        return Err(Error::ShapeMismatch(format!("z has {} entries, v has {}", z.len(), v.len())));
    }
    let norm = dot(v, v).sqrt();
    if !((norm - 1.0).abs() <= UNIT_NORM_TOL) {
        return Err(Error::InvalidArgument(format!("direction must be a unit vector, norm is {norm}")));
    }
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")));
    }
    let mut out = vec![0.0; z.len()];
    shrink_into(z, v, rho, &mut out);
    Ok(out)
}

pub(crate) fn shrink_into(z: &[f64], v: &[f64], rho: f64, out: &mut [f64]) {
    let along = dot(z, v);
    let mut perp2 = 0.0;
    for ((o, zc), vc) in out.iter_mut().zip(z).zip(v) {
        *o = zc - along * vc;
        perp2 += *o * *o;
    }
    let perp = perp2.sqrt();
    let keep = if perp > 0.0 { (1.0 - 1.0 / (rho * perp)).max(0.0) } else { 0.0 };
    for (o, vc) in out.iter_mut().zip(v) {
        *o = along * vc + keep * *o;
    }
}

/// Joint proximal map of `(y, delta) -> |y - delta v|` over `delta >= 1`.
///
/// For fixed `delta` the `y`-problem is the prox of the Euclidean norm
/// centred at `delta v`: `y = delta v + shrink(z - delta v, 1/rho)`, with
/// optimal value a Huber function of `|z - delta v|`, increasing in that
/// distance. Since `|z - delta v|^2 = |P_perp z|^2 + (<z, v> - delta)^2`, the
/// best `delta` is the clamp `max(1, <z, v>)`. Returns that `delta`.
pub fn lud_prox(z: &[f64], v: &[f64], rho: f64) -> Result<(Vec<f64>, f64)> {
    if z.len() != v.len() {
        return Err(Error::ShapeMismatch(format!("z has {} entries, v has {}", z.len(), v.len())));
    }
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")));
    }
    let mut out = vec![0.0; z.len()];
    let delta = lud_into(z, v, rho, &mut out);
    Ok((out, delta))
}

pub(crate) fn lud_into(z: &[f64], v: &[f64], rho: f64, out: &mut [f64]) -> f64 {
    let delta = dot(z, v).max(1.0);
    let mut r2 = 0.0;
    for ((o, zc), vc) in out.iter_mut().zip(z).zip(v) {
        *o = zc - delta * vc;
        r2 += *o * *o;
    }
    let r = r2.sqrt();
    let keep = if r > 0.0 { (1.0 - 1.0 / (rho * r)).max(0.0) } else { 0.0 };
    for (o, vc) in out.iter_mut().zip(v) {
        *o = delta * vc + keep * *o;
    }
    delta
}

/// `min_{delta >= 1} |y - delta v|` and its minimiser.
pub fn lud_residual(y: &[f64], v: &[f64]) -> (f64, f64) {
    let delta = dot(y, v).max(1.0);
    let r2: f64 = y.iter().zip(v).map(|(a, b)| (a - delta * b).powi(2)).sum();
    (r2.sqrt(), delta)
}

/// `|P_perp y|` for unit `v`.
pub fn perp_norm(y: &[f64], v: &[f64]) -> f64 {
    let along = dot(y, v);
    y.iter().zip(v).map(|(a, b)| (a - along * b).powi(2)).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Directions stored row-major for cheap per-edge slices.
#[derive(Debug, Clone)]
struct RowMajor {
    d: usize,
    data: Vec<f64>,
}

impl RowMajor {
    fn new(dirs: &DMatrix<f64>) -> Self {
        let d = dirs.ncols();
        let mut data = Vec::with_capacity(dirs.len());
        for k in 0..dirs.nrows() {
            data.extend(dirs.row(k).iter());
        }
        Self { d, data }
    }

    fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.d..(k + 1) * self.d]
    }
}

/// Edge terms `|P_{v_k perp} y_k|` of the ShapeFit objective.
#[derive(Debug, Clone)]
pub struct ShapeFitProx {
    dirs: RowMajor,
}

impl ShapeFitProx {
    pub fn new(directions: &DMatrix<f64>) -> Self {
        Self { dirs: RowMajor::new(directions) }
    }
}

impl EdgeProx for ShapeFitProx {
    fn prox(&self, edge: usize, z: &[f64], rho: f64, out: &mut [f64]) {
        shrink_into(z, self.dirs.row(edge), rho, out);
    }

    fn value(&self, edge: usize, y: &[f64]) -> f64 {
        perp_norm(y, self.dirs.row(edge))
    }
}

/// Edge terms `min_{delta >= 1} |y_k - delta v_k|` of the LUD objective.
#[derive(Debug, Clone)]
pub struct LudProx {
    dirs: RowMajor,
}

impl LudProx {
    pub fn new(directions: &DMatrix<f64>) -> Self {
        Self { dirs: RowMajor::new(directions) }
    }

    pub fn scale(&self, edge: usize, y: &[f64]) -> f64 {
        lud_residual(y, self.dirs.row(edge)).1
    }
}

impl EdgeProx for LudProx {
    fn prox(&self, edge: usize, z: &[f64], rho: f64, out: &mut [f64]) {
        lud_into(z, self.dirs.row(edge), rho, out);
    }

    fn value(&self, edge: usize, y: &[f64]) -> f64 {
        lud_residual(y, self.dirs.row(edge)).0
    }
}
