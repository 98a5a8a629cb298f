use nalgebra::{DMatrix, DVector};
use shapefit::admm::AdmmConfig;
use shapefit::metrics::rfe;
use shapefit::model::{PointCloud, ProblemInstance};
use shapefit::oracle::{
    self, oracle_lud, oracle_shapefit, smoothed_gradient, smoothed_objective, OracleConfig, Program,
};
use shapefit::rng::SeededRng;
use shapefit::solvers::{solve_lud, solve_lud_observed, solve_shapefit};
use shapefit::synth::{generate, inject_corruption, GenConfig};

fn corrupted(n: usize, seed: u64, edge: usize, v: Vec<f64>) -> ProblemInstance {
    let base = generate(&GenConfig::new(n, 1.0, 0.0, 0.0, seed)).unwrap();
    inject_corruption(&base, &[(edge, v)]).unwrap()
}

#[test]
fn clean_instance_recovered_by_both_programs() {
    let inst = generate(&GenConfig::new(8, 0.8, 0.0, 0.0, 40)).unwrap();
    let truth = inst.truth.as_ref().unwrap();
    let sf = oracle_shapefit(&inst, &OracleConfig::default()).unwrap();
    let lud = oracle_lud(&inst, &OracleConfig::default()).unwrap();
    assert!(rfe(truth, &sf.locations).unwrap() < 1e-6);
    assert!(rfe(truth, &lud.locations).unwrap() < 1e-6);
}

#[test]
fn objectives_agree_with_admm() {
    let inst = corrupted(8, 41, 5, vec![0.6, 0.0, -0.8]);
    let sf = oracle_shapefit(&inst, &OracleConfig::default()).unwrap();
    let a = solve_shapefit(&inst, &AdmmConfig::default()).unwrap();
    assert!((sf.objective - a.objective).abs() <= 1e-6, "{} vs {}", sf.objective, a.objective);
    let lud = oracle_lud(&inst, &OracleConfig::default()).unwrap();
    let b = solve_lud(&inst, &AdmmConfig::lud()).unwrap();
    assert!((lud.objective - b.objective).abs() <= 1e-6, "{} vs {}", lud.objective, b.objective);
}

/// Minimiser of `sum_k |P_perp(v_k) (t_i - t_j)|^2` under `sum_i t_i = 0`
/// and `sum_k <t_i - t_j, v_k> = 1`, from the dense KKT system.
fn projected_least_squares(inst: &ProblemInstance) -> PointCloud {
    let g = &inst.graph;
    let (n, d) = (g.vertex_count(), g.dimension());
    let nd = n * d;
    let mut kkt = DMatrix::zeros(nd + d + 1, nd + d + 1);
    let mut normal = DVector::zeros(nd);
    for (k, &(i, j)) in g.edges().iter().enumerate() {
        let v = g.direction(k);
        for a in 0..d {
            normal[i * d + a] += v[a];
            normal[j * d + a] -= v[a];
            for b in 0..d {
                let p = if a == b { 1.0 } else { 0.0 } - v[a] * v[b];
                for (r, sr) in [(i, 1.0), (j, -1.0)] {
                    for (c, sc) in [(i, 1.0), (j, -1.0)] {
                        kkt[(r * d + a, c * d + b)] += 2.0 * sr * sc * p;
                    }
                }
            }
        }
    }
    for i in 0..n {
        for a in 0..d {
            kkt[(nd + a, i * d + a)] = 1.0;
            kkt[(i * d + a, nd + a)] = 1.0;
        }
    }
    for x in 0..nd {
        kkt[(nd + d, x)] = normal[x];
        kkt[(x, nd + d)] = normal[x];
    }
    let mut rhs = DVector::zeros(nd + d + 1);
    rhs[nd + d] = 1.0;
    let sol = kkt.lu().solve(&rhs).expect("nonsingular KKT system");
    PointCloud::from_matrix(DMatrix::from_fn(n, d, |i, a| sol[i * d + a])).unwrap()
}

#[test]
fn heavy_smoothing_tends_to_least_squares() {
    let inst = corrupted(7, 42, 2, vec![0.0, 1.0, 0.0]);
    let cfg = OracleConfig { eps_schedule: vec![1e3], ..Default::default() };
    let smooth = oracle_shapefit(&inst, &cfg).unwrap();
    let lsq = projected_least_squares(&inst);
    let gap = rfe(&lsq, &smooth.locations).unwrap();
    assert!(gap <= 1e-3, "{gap}");
    // the sparse minimiser is a different point
    let sharp = oracle_shapefit(&inst, &OracleConfig::default()).unwrap();
    assert!(rfe(&lsq, &sharp.locations).unwrap() > 100.0 * gap);
}

#[test]
fn reversed_edge_scale_is_clamped() {
    let base = generate(&GenConfig::new(8, 1.0, 0.0, 0.0, 43)).unwrap();
    let flipped: Vec<f64> = base.graph.direction(3).iter().map(|x| -x).collect();
    let inst = inject_corruption(&base, &[(3, flipped)]).unwrap();
    let or = oracle_lud(&inst, &OracleConfig::default()).unwrap();
    let scales = or.scales.unwrap();
    assert_eq!(scales[3], 1.0);
    assert!(scales.iter().all(|&s| s >= 1.0));
    let (_, st) = solve_lud_observed(&inst, &AdmmConfig::lud(), &mut |_| std::ops::ControlFlow::Continue(())).unwrap();
    assert_eq!(st.scales[3], 1.0);
    assert!(st.scales.iter().all(|&s| s >= 1.0));
}

#[test]
fn gradient_matches_finite_differences() {
    let inst = corrupted(6, 44, 0, vec![1.0, 1.0, 0.0]);
    let g = &inst.graph;
    let (n, d) = (g.vertex_count(), g.dimension());
    let (h, eps) = (1e-6, 1e-3);
    let mut rng = SeededRng::new(45);
    for trial in 0..100 {
        let program = if trial % 2 == 0 { Program::ShapeFit } else { Program::Lud };
        let t = DMatrix::from_fn(n, d, |_, _| 2.0 * rng.normal());
        let analytic = smoothed_gradient(g, program, &t, eps).unwrap();
        let mut numeric = DMatrix::zeros(n, d);
        for i in 0..n {
            for c in 0..d {
                let (mut up, mut down) = (t.clone(), t.clone());
                up[(i, c)] += h;
                down[(i, c)] -= h;
                numeric[(i, c)] = (smoothed_objective(g, program, &up, eps).unwrap()
                    - smoothed_objective(g, program, &down, eps).unwrap())
                    / (2.0 * h);
            }
        }
        let err = (&numeric - &analytic).norm() / analytic.norm();
        assert!(err <= 1e-6, "trial {trial}: relative error {err}");
    }
}

#[test]
fn oversized_instances_are_refused() {
    let inst = generate(&GenConfig::new(oracle::MAX_ORACLE_N + 1, 0.5, 0.0, 0.0, 46)).unwrap();
    assert!(matches!(
        oracle::solve(&inst, Program::ShapeFit, &OracleConfig::default()),
        Err(shapefit::Error::OracleTooLarge { .. })
    ));
}
