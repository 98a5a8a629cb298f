//! Shared data types: point clouds, direction graphs, problem instances and
//! solve reports, plus the gauge action and instance validation.
//!
//! Edges are stored canonically as `(i, j)` with `i < j`, and the direction
//! attached to an edge points from `j` towards `i`, i.e. it is the unit
//! vector along `t_i - t_j`. Constructors that receive a flipped edge swap
//! the endpoints and negate the direction.

use std::collections::HashMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Stored directions must have unit norm to within this tolerance.
pub const UNIT_NORM_TOL: f64 = 1e-12;

/// `n` points in `R^d`, stored as an `n x d` matrix (one row per point).
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    coords: DMatrix<f64>,
}

impl PointCloud {
    /// Builds a cloud from a list of points. Every point must have exactly
    /// `dimension` finite coordinates and there must be at least two points.
    pub fn new(dimension: usize, points: &[Vec<f64>]) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dimension {
                return Err(Error::ShapeMismatch(format!(
                    "point {i} has {} coordinates, expected {dimension}",
                    p.len()
                )));
            }
        }
        let coords = DMatrix::from_fn(points.len(), dimension, |i, k| points[i][k]);
        Self::from_matrix(coords)
    }

    /// Builds a cloud from an `n x d` matrix.
    pub fn from_matrix(coords: DMatrix<f64>) -> Result<Self> {
        if coords.ncols() == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if coords.nrows() < 2 {
            return Err(Error::InvalidArgument(format!(
                "a point cloud needs at least 2 points, got {}",
                coords.nrows()
            )));
        }
        if let Some(pos) = coords.iter().position(|x| !x.is_finite()) {
            let row = pos % coords.nrows();
            return Err(Error::InvalidArgument(format!("point {row} has a non-finite coordinate")));
        }
        Ok(Self { coords })
    }

    pub fn len(&self) -> usize {
        self.coords.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.nrows() == 0
    }

    pub fn dimension(&self) -> usize {
        self.coords.ncols()
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.coords.row(i).iter().copied().collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// The `n x d` coordinate matrix.
    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.coords
    }

    pub fn centroid(&self) -> DVector<f64> {
        let n = self.len() as f64;
        DVector::from_fn(self.dimension(), |k, _| self.coords.column(k).sum() / n)
    }

    /// Returns `{ alpha * (t_i + w) }`.
    ///
    /// Composition follows `apply_gauge(apply_gauge(c, a, w), b, u) ==
    /// apply_gauge(c, a * b, w + u / a)`.
    pub fn apply_gauge(&self, alpha: f64, w: &[f64]) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidArgument(format!("gauge scale must be positive, got {alpha}")));
        }
        if w.len() != self.dimension() {
            return Err(Error::ShapeMismatch(format!(
                "translation has {} coordinates, cloud has dimension {}",
                w.len(),
                self.dimension()
            )));
        }
        let coords = DMatrix::from_fn(self.len(), self.dimension(), |i, k| alpha * (self.coords[(i, k)] + w[k]));
        Self::from_matrix(coords)
    }

    /// Unit direction from point `j` to point `i`, or `None` when the two
    /// points coincide.
    pub fn direction(&self, i: usize, j: usize) -> Option<Vec<f64>> {
        let diff: Vec<f64> = (0..self.dimension()).map(|k| self.coords[(i, k)] - self.coords[(j, k)]).collect();
        let norm = diff.iter().map(|x| x * x).sum::<f64>().sqrt();
        (norm > 0.0).then(|| diff.iter().map(|x| x / norm).collect())
    }
}

/// Camera / structure split of the vertex set, for bipartite problems.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    is_camera: Vec<bool>,
}

impl Partition {
    pub fn new(is_camera: Vec<bool>) -> Self {
        Self { is_camera }
    }

    /// Vertices `0..n_cameras` are cameras, the rest structure points.
    pub fn leading_cameras(n_cameras: usize, n: usize) -> Self {
        Self { is_camera: (0..n).map(|i| i < n_cameras).collect() }
    }

    pub fn is_camera(&self, i: usize) -> bool {
        self.is_camera[i]
    }

    pub fn len(&self) -> usize {
        self.is_camera.len()
    }

    pub fn is_empty(&self) -> bool {
        self.is_camera.is_empty()
    }

    pub fn cameras(&self) -> impl Iterator<Item = usize> + '_ {
        self.is_camera.iter().enumerate().filter(|(_, c)| **c).map(|(i, _)| i)
    }
}

/// Observation graph with one direction per edge.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    directions: DMatrix<f64>,
    partition: Option<Partition>,
}

impl DirectionGraph {
    /// Builds a graph, canonicalising every edge to `i < j` (negating the
    /// direction when the endpoints are swapped).
    ///
    /// Only structural errors (bad indices, wrong direction length) are
    /// rejected here. Unit norms, duplicates, self-loops and connectivity are
    /// reported by [`validate_instance`].
    pub fn new(n: usize, dimension: usize, edges: &[(usize, usize)], directions: &[Vec<f64>]) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if edges.len() != directions.len() {
            return Err(Error::ShapeMismatch(format!("{} edges but {} directions", edges.len(), directions.len())));
        }
        let mut canon = Vec::with_capacity(edges.len());
        let mut dirs = DMatrix::zeros(edges.len(), dimension);
        for (k, (&(i, j), v)) in edges.iter().zip(directions).enumerate() {
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge {k} = ({i}, {j}) references a vertex outside 0..{n}"
                )));
            }
            if v.len() != dimension {
                return Err(Error::ShapeMismatch(format!(
                    "direction {k} has {} coordinates, expected {dimension}",
                    v.len()
                )));
            }
            let sign = if i > j { -1.0 } else { 1.0 };
            canon.push((i.min(j), i.max(j)));
            for (c, x) in v.iter().enumerate() {
                dirs[(k, c)] = sign * x;
            }
        }
        Ok(Self { n, edges: canon, directions: dirs, partition: None })
    }

    /// Graph whose directions are the exact unit directions of `cloud`.
    pub fn from_cloud(cloud: &PointCloud, edges: &[(usize, usize)]) -> Result<Self> {
        let mut dirs = Vec::with_capacity(edges.len());
        for &(i, j) in edges {
            if i >= cloud.len() || j >= cloud.len() {
                return Err(Error::InvalidArgument(format!("edge ({i}, {j}) out of range")));
            }
            let v =
                cloud.direction(i, j).ok_or_else(|| Error::InvalidArgument(format!("points {i} and {j} coincide")))?;
            dirs.push(v);
        }
        Self::new(cloud.len(), cloud.dimension(), edges, &dirs)
    }

    pub fn with_partition(mut self, partition: Partition) -> Result<Self> {
        if partition.len() != self.n {
            return Err(Error::ShapeMismatch(format!(
                "partition covers {} vertices, graph has {}",
                partition.len(),
                self.n
            )));
        }
        self.partition = Some(partition);
        Ok(self)
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn dimension(&self) -> usize {
        self.directions.ncols()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// `m x d` matrix, row `k` is the direction of edge `k`.
    pub fn directions(&self) -> &DMatrix<f64> {
        &self.directions
    }

    pub fn direction(&self, k: usize) -> Vec<f64> {
        self.directions.row(k).iter().copied().collect()
    }

    pub fn partition(&self) -> Option<&Partition> {
        self.partition.as_ref()
    }

    /// Returns a copy with the direction of edge `k` replaced (after
    /// orientation to the canonical edge order).
    pub fn with_direction(&self, k: usize, v: &[f64]) -> Result<Self> {
        if k >= self.edge_count() || v.len() != self.dimension() {
            return Err(Error::ShapeMismatch(format!("cannot set direction of edge {k}")));
        }
        let mut out = self.clone();
        for (c, x) in v.iter().enumerate() {
            out.directions[(k, c)] = *x;
        }
        Ok(out)
    }

    /// Number of connected components (isolated vertices count as their own
    /// component).
    pub fn component_count(&self) -> usize {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; self.n];
        let mut components = 0;
        let mut stack = Vec::new();
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &w in &adj[u] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        components
    }

    pub fn is_connected(&self) -> bool {
        self.n > 0 && self.component_count() == 1
    }
}

/// Parameters a synthetic instance was drawn with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenParams {
    pub p: f64,
    pub q: f64,
    pub sigma: f64,
    pub seed: u64,
}

/// A direction graph together with whatever is known about how it was made.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub graph: DirectionGraph,
    pub truth: Option<PointCloud>,
    /// Indices of corrupted edges, sorted ascending.
    pub corrupted_edges: Option<Vec<usize>>,
    pub gen_params: Option<GenParams>,
}

impl ProblemInstance {
    pub fn new(graph: DirectionGraph) -> Self {
        Self { graph, truth: None, corrupted_edges: None, gen_params: None }
    }

    pub fn with_truth(mut self, truth: PointCloud) -> Self {
        self.truth = Some(truth);
        self
    }

    /// Errors out unless the instance passes [`validate_instance`].
    pub fn ensure_valid(&self) -> Result<()> {
        let v = validate_instance(self);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInstance(v))
        }
    }
}

/// Output of every solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub algo: String,
    pub locations: PointCloud,
    pub iterations: usize,
    pub converged: bool,
    pub final_primal_residual: f64,
    pub final_dual_residual: f64,
    pub objective: f64,
    pub wall_seconds: f64,
    pub rfe: Option<f64>,
}

/// One violated invariant of a [`ProblemInstance`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    TooFewVertices { n: usize },
    SelfLoop { edge: usize },
    DuplicateEdge { edge: usize, first: usize },
    NonFiniteDirection { edge: usize },
    NonUnitDirection { edge: usize, norm: f64 },
    EdgeWithinPartition { edge: usize },
    Disconnected { components: usize },
    TruthDimension { expected: usize, found: usize },
    TruthSize { expected: usize, found: usize },
    CorruptedEdgeOutOfRange { index: usize },
    GenParam { name: &'static str, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewVertices { n } => write!(f, "graph has {n} vertices, need at least 2"),
            Violation::SelfLoop { edge } => write!(f, "edge {edge} is a self-loop"),
            Violation::DuplicateEdge { edge, first } => {
                write!(f, "edge {edge} duplicates edge {first}")
            }
            Violation::NonFiniteDirection { edge } => {
                write!(f, "edge {edge} has a non-finite direction")
            }
            Violation::NonUnitDirection { edge, norm } => {
                write!(f, "edge {edge} direction has norm {norm}")
            }
            Violation::EdgeWithinPartition { edge } => {
                write!(f, "edge {edge} does not cross the camera/structure partition")
            }
            Violation::Disconnected { components } => {
                write!(f, "graph is disconnected ({components} components)")
            }
            Violation::TruthDimension { expected, found } => {
                write!(f, "ground truth has dimension {found}, expected {expected}")
            }
            Violation::TruthSize { expected, found } => {
                write!(f, "ground truth has {found} points, expected {expected}")
            }
            Violation::CorruptedEdgeOutOfRange { index } => {
                write!(f, "corrupted edge index {index} out of range")
            }
            Violation::GenParam { name, value } => {
                write!(f, "generation parameter {name} = {value} out of range")
            }
        }
    }
}

/// Lists every violated invariant. An empty result means the instance is
/// admissible for the solvers.
pub fn validate_instance(inst: &ProblemInstance) -> Vec<Violation> {
    let g = &inst.graph;
    let mut out = Vec::new();
    if g.n < 2 {
        out.push(Violation::TooFewVertices { n: g.n });
    }
    let mut first_seen: HashMap<(usize, usize), usize> = HashMap::new();
    for (k, &(i, j)) in g.edges.iter().enumerate() {
        if i == j {
            out.push(Violation::SelfLoop { edge: k });
        }
        if let Some(&first) = first_seen.get(&(i, j)) {
            out.push(Violation::DuplicateEdge { edge: k, first });
        } else {
            first_seen.insert((i, j), k);
        }
        let row = g.directions.row(k);
        if row.iter().any(|x| !x.is_finite()) {
            out.push(Violation::NonFiniteDirection { edge: k });
        } else {
            let norm = row.norm();
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                out.push(Violation::NonUnitDirection { edge: k, norm });
            }
        }
        if let Some(part) = &g.partition {
            if part.is_camera(i) == part.is_camera(j) {
                out.push(Violation::EdgeWithinPartition { edge: k });
            }
        }
    }
    if g.n >= 2 {
        let components = g.component_count();
        if components != 1 {
            out.push(Violation::Disconnected { components });
        }
    }
    if let Some(truth) = &inst.truth {
        if truth.dimension() != g.dimension() {
            out.push(Violation::TruthDimension { expected: g.dimension(), found: truth.dimension() });
        }
        if truth.len() != g.n {
            out.push(Violation::TruthSize { expected: g.n, found: truth.len() });
        }
    }
    if let Some(bad) = &inst.corrupted_edges {
        for &index in bad {
            if index >= g.edge_count() {
                out.push(Violation::CorruptedEdgeOutOfRange { index });
            }
        }
    }
    if let Some(gp) = &inst.gen_params {
        for (name, value) in [("p", gp.p), ("q", gp.q)] {
            if !(0.0..=1.0).contains(&value) {
                out.push(Violation::GenParam { name, value });
            }
        }
        if !(gp.sigma >= 0.0) || !gp.sigma.is_finite() {
            out.push(Violation::GenParam { name: "sigma", value: gp.sigma });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> ProblemInstance {
        let cloud = PointCloud::new(3, &[vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.5]]).unwrap();
        let g = DirectionGraph::from_cloud(&cloud, &[(0, 1), (0, 2), (1, 2)]).unwrap();
        ProblemInstance::new(g).with_truth(cloud)
    }

    #[test]
    fn complete_triangle_is_valid() {
        assert!(validate_instance(&triangle()).is_empty());
    }

    #[test]
    fn short_direction_is_reported() {
        let mut inst = triangle();
        inst.graph = inst.graph.with_direction(0, &[0.5, 0.0, 0.0]).unwrap();
        let v = validate_instance(&inst);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::NonUnitDirection { edge: 0, .. }));
    }

    #[test]
    fn two_components_are_reported_once() {
        let d = vec![1.0, 0.0];
        let g = DirectionGraph::new(4, 2, &[(0, 1), (2, 3)], &[d.clone(), d]).unwrap();
        let v = validate_instance(&ProblemInstance::new(g));
        assert_eq!(v, vec![Violation::Disconnected { components: 2 }]);
    }

    #[test]
    fn duplicates_and_self_loops() {
        let d = vec![1.0, 0.0];
        let g = DirectionGraph::new(3, 2, &[(0, 1), (1, 0), (2, 2), (1, 2)], &[d.clone(), d.clone(), d.clone(), d])
            .unwrap();
        let v = validate_instance(&ProblemInstance::new(g));
        assert!(v.contains(&Violation::DuplicateEdge { edge: 1, first: 0 }));
        assert!(v.contains(&Violation::SelfLoop { edge: 2 }));
    }

    #[test]
    fn flipped_edge_flips_direction() {
        let g = DirectionGraph::new(2, 3, &[(1, 0)], &[vec![0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);
        assert_eq!(g.direction(0), vec![0.0, 0.0, -1.0]);
    }

    #[test]
    fn partition_violation() {
        let cloud = PointCloud::new(2, &[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let g = DirectionGraph::from_cloud(&cloud, &[(0, 1), (0, 2), (1, 2)])
            .unwrap()
            .with_partition(Partition::leading_cameras(1, 3))
            .unwrap();
        let v = validate_instance(&ProblemInstance::new(g));
        assert_eq!(v, vec![Violation::EdgeWithinPartition { edge: 2 }]);
    }

    #[test]
    fn truth_and_corruption_checks() {
        let mut inst = triangle();
        inst.truth = Some(PointCloud::new(2, &[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap());
        inst.corrupted_edges = Some(vec![1, 7]);
        let v = validate_instance(&inst);
        assert!(v.contains(&Violation::TruthDimension { expected: 3, found: 2 }));
        assert!(v.contains(&Violation::TruthSize { expected: 3, found: 2 }));
        assert!(v.contains(&Violation::CorruptedEdgeOutOfRange { index: 7 }));
    }

    #[test]
    fn gauge_identity_and_substitution() {
        let c = PointCloud::new(3, &[vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(c.apply_gauge(1.0, &[0.0; 3]).unwrap(), c);
        let g = c.apply_gauge(2.0, &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(g.points(), vec![vec![2.0, 0.0, 0.0], vec![4.0, 0.0, 0.0]]);
    }

    #[test]
    fn gauge_rejects_nonpositive_scale() {
        let c = PointCloud::new(1, &[vec![0.0], vec![1.0]]).unwrap();
        assert!(c.apply_gauge(0.0, &[0.0]).is_err());
        assert!(c.apply_gauge(-1.0, &[0.0]).is_err());
        assert!(c.apply_gauge(f64::NAN, &[0.0]).is_err());
    }

    #[test]
    fn cloud_rejects_bad_input() {
        assert!(PointCloud::new(2, &[vec![0.0, 0.0]]).is_err());
        assert!(PointCloud::new(2, &[vec![0.0, 0.0], vec![1.0]]).is_err());
        assert!(PointCloud::new(1, &[vec![0.0], vec![f64::INFINITY]]).is_err());
    }
}
