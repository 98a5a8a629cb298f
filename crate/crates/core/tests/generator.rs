use proptest::prelude::*;
use shapefit::io::instance_to_string;
use shapefit::model::validate_instance;
use shapefit::synth::{generate, inject_corruption, GenConfig};

#[test]
fn complete_clean_graph_has_exact_directions() {
    for seed in 0..20 {
        let inst = generate(&GenConfig::new(4, 1.0, 0.0, 0.0, seed)).unwrap();
        assert_eq!(inst.graph.edge_count(), 6);
        let truth = inst.truth.as_ref().unwrap();
        for (k, &(i, j)) in inst.graph.edges().iter().enumerate() {
            let want = truth.direction(i, j).unwrap();
            let got = inst.graph.direction(k);
            let err: f64 = want.iter().zip(&got).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(err <= 1e-15, "edge {k}: {err}");
        }
        assert_eq!(inst.corrupted_edges.as_deref(), Some(&[][..]));
    }
}

#[test]
fn same_config_same_bytes() {
    let cfg = GenConfig::new(40, 0.3, 0.2, 0.01, 99);
    assert_eq!(instance_to_string(&generate(&cfg).unwrap()), instance_to_string(&generate(&cfg).unwrap()));
    let other = GenConfig { seed: 100, ..cfg };
    assert_ne!(instance_to_string(&generate(&cfg).unwrap()), instance_to_string(&generate(&other).unwrap()));
}

#[test]
fn corrupted_fraction_concentrates() {
    let (mut bad, mut total) = (0usize, 0usize);
    for seed in 0..1000 {
        let inst = generate(&GenConfig::new(100, 1.0, 0.5, 0.0, seed)).unwrap();
        bad += inst.corrupted_edges.unwrap().len();
        total += inst.graph.edge_count();
    }
    let frac = bad as f64 / total as f64;
    let se = (0.25 / total as f64).sqrt();
    assert!((frac - 0.5).abs() <= 3.0 * se, "fraction {frac}, se {se}");
}

#[test]
fn edge_count_concentrates() {
    let (n, p, draws) = (30usize, 0.3, 400);
    let pairs = (n * (n - 1) / 2) as f64;
    let mut total = 0usize;
    for seed in 0..draws {
        // Retries for connectivity bias the count upward only negligibly at
        // this density.
        total += generate(&GenConfig::new(n, p, 0.0, 0.0, 10_000 + seed)).unwrap().graph.edge_count();
    }
    let mean = total as f64 / draws as f64;
    let se = (pairs * p * (1.0 - p) / draws as f64).sqrt();
    assert!((mean - p * pairs).abs() <= 3.0 * se, "mean {mean}, expected {}", p * pairs);
}

#[test]
fn bipartite_complete_graph() {
    let inst = generate(&GenConfig::bipartite(2, 3, 1.0, 0.0, 0.0, 5)).unwrap();
    assert_eq!(inst.graph.edge_count(), 6);
    let part = inst.graph.partition().unwrap();
    for &(i, j) in inst.graph.edges() {
        assert_ne!(part.is_camera(i), part.is_camera(j));
    }
    assert!(validate_instance(&inst).is_empty());
}

#[test]
fn empty_graph_cannot_connect() {
    let err = generate(&GenConfig::new(2, 0.0, 0.0, 0.0, 1)).unwrap_err();
    assert!(matches!(err, shapefit::Error::Disconnected { attempts: 100 }));
}

#[test]
fn recorded_seed_reproduces_the_draw() {
    // n = 12 at p = 0.15 is often disconnected, so retries happen.
    for seed in 0..30 {
        let cfg = GenConfig::new(12, 0.15, 0.1, 0.0, seed);
        let inst = generate(&cfg).unwrap();
        let used = inst.gen_params.unwrap().seed;
        assert!(used >= seed && used < seed + 100);
        let again = generate(&GenConfig { seed: used, ..cfg }).unwrap();
        assert_eq!(again, inst);
    }
}

#[test]
fn injected_corruption_is_recorded() {
    let inst = generate(&GenConfig::new(10, 0.8, 0.0, 0.0, 2)).unwrap();
    let out = inject_corruption(&inst, &[(3, vec![0.0, 0.0, 1.0]), (0, vec![1.0, 0.0, 0.0])]).unwrap();
    assert_eq!(out.corrupted_edges.as_deref(), Some(&[0, 3][..]));
    assert_eq!(out.graph.direction(3), vec![0.0, 0.0, 1.0]);
    // replacements are normalised; only zero vectors and bad indices fail
    let scaled = inject_corruption(&inst, &[(1, vec![0.0, 2.0, 0.0])]).unwrap();
    assert_eq!(scaled.graph.direction(1), vec![0.0, 1.0, 0.0]);
    assert!(inject_corruption(&inst, &[(0, vec![0.0, 0.0, 0.0])]).is_err());
    assert!(inject_corruption(&inst, &[(inst.graph.edge_count(), vec![1.0, 0.0, 0.0])]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_instances_validate(
        n in 2usize..25,
        p in 0.2f64..1.0,
        q in 0.0f64..1.0,
        sigma in 0.0f64..0.5,
        d in 2usize..5,
        seed in any::<u64>(),
    ) {
        if let Ok(inst) = generate(&GenConfig::new(n, p, q, sigma, seed).with_dimension(d)) {
            prop_assert!(validate_instance(&inst).is_empty());
            prop_assert_eq!(inst.graph.dimension(), d);
        }
    }
}
