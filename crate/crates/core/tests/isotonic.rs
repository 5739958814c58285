mod common;

use common::{
    brute_force_isotonic, grid_search_min_3x3, is_doubly_monotone, partition_projection, sq_dist,
};
use isocal::isotonic::{
    pava_nonincreasing, project_doubly_monotone, project_doubly_monotone_weighted,
    ProjectionAlgorithm, ProjectionConfig, SweepOrder,
};
use isocal::simgen::Draws;
use proptest::prelude::*;

fn config(algorithm: ProjectionAlgorithm) -> ProjectionConfig {
    ProjectionConfig {
        algorithm,
        ..ProjectionConfig::default()
    }
}

const ALGORITHMS: [ProjectionAlgorithm; 3] = [
    ProjectionAlgorithm::Partition,
    ProjectionAlgorithm::Dykstra,
    ProjectionAlgorithm::AcceleratedDual,
];

#[test]
fn pava_small_examples() {
    assert_eq!(
        pava_nonincreasing(&[3.0, 2.0, 1.0], &[1.0; 3]).unwrap(),
        vec![3.0, 2.0, 1.0]
    );
    assert_eq!(
        pava_nonincreasing(&[1.0, 3.0, 2.0], &[1.0; 3]).unwrap(),
        vec![2.0, 2.0, 2.0]
    );
}

#[test]
fn pava_zero_weight_matches_oracle_objective() {
    // With index 1 carrying no weight, the optimum pools the two weighted
    // entries; the zero-weight entry is free and must not move the fit.
    let y = [1.0, 3.0, 2.0];
    let w = [1.0, 0.0, 1.0];
    let fit = pava_nonincreasing(&y, &w).unwrap();
    let objective = |f: &[f64]| -> f64 {
        f.iter()
            .zip(&y)
            .zip(&w)
            .map(|((a, b), c)| c * (a - b).powi(2))
            .sum()
    };
    // Oracle over the weighted entries only.
    let reduced = brute_force_isotonic(&[1.0, 2.0], &[1.0, 1.0]);
    assert!((objective(&fit) - objective(&[reduced[0], 0.0, reduced[1]])).abs() < 1e-12);
    assert!(fit.windows(2).all(|p| p[1] <= p[0] + 1e-12));
    assert_eq!(fit, vec![1.5, 1.5, 1.5]);
}

#[test]
fn two_by_two_matches_exact_oracle() {
    let m = [0.0, 1.0, 1.0, 0.0];
    let oracle = partition_projection(&m, 2, 2);
    for alg in ALGORITHMS {
        let p = project_doubly_monotone(&m, 2, 2, &config(alg))
            .unwrap()
            .matrix;
        for (a, b) in p.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-6, "{alg:?}: {p:?} vs {oracle:?}");
        }
    }
}

#[test]
fn three_by_three_half_grid_is_distance_optimal() {
    // Every 3x3 matrix over {0, 0.5, 1} is too many for the exact oracle in
    // a unit test budget; take a deterministic sample plus the grid search.
    let mut draws = Draws::new(11, 0);
    for _ in 0..40 {
        let m: Vec<f64> = (0..9)
            .map(|_| (draws.uniform() * 3.0).floor() * 0.5)
            .collect();
        let p = project_doubly_monotone(&m, 3, 3, &ProjectionConfig::default())
            .unwrap()
            .matrix;
        let exact = partition_projection(&m, 3, 3);
        assert!(sq_dist(&m, &p) <= sq_dist(&m, &exact) + 1e-9);
        assert!(sq_dist(&m, &p) <= grid_search_min_3x3(&m, 21) + 1e-9);
    }
}

#[test]
fn one_row_projection_is_pava() {
    let row = [0.2, 0.9, 0.4, 0.4, 0.7, 0.1];
    let expected = pava_nonincreasing(&row, &[1.0; 6]).unwrap();
    for alg in ALGORITHMS {
        let p = project_doubly_monotone(&row, 1, 6, &config(alg))
            .unwrap()
            .matrix;
        for (a, b) in p.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-8);
        }
    }
}

#[test]
fn sweep_order_does_not_change_the_projection() {
    let mut draws = Draws::new(5, 0);
    let m: Vec<f64> = (0..30).map(|_| draws.uniform()).collect();
    let a = project_doubly_monotone(&m, 5, 6, &ProjectionConfig::dykstra())
        .unwrap()
        .matrix;
    let b = project_doubly_monotone(
        &m,
        5,
        6,
        &ProjectionConfig {
            order: SweepOrder::TimeFirst,
            ..ProjectionConfig::dykstra()
        },
    )
    .unwrap()
    .matrix;
    assert!(sq_dist(&a, &b).sqrt() < 1e-7);
}

fn matrix_strategy() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (1usize..6, 1usize..7)
        .prop_flat_map(|(n, k)| (Just(n), Just(k), prop::collection::vec(-1.0f64..2.0, n * k)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pava_is_monotone_and_preserves_the_weighted_mean(
        pairs in prop::collection::vec((-5.0f64..5.0, 0.1f64..3.0), 1..40)
    ) {
        let (y, w): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let f = pava_nonincreasing(&y, &w).unwrap();
        prop_assert!(f.windows(2).all(|p| p[1] <= p[0] + 1e-12));
        let lhs: f64 = f.iter().zip(&w).map(|(a, b)| a * b).sum();
        let rhs: f64 = y.iter().zip(&w).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()));
        let again = pava_nonincreasing(&f, &w).unwrap();
        for (a, b) in again.iter().zip(&f) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pava_matches_block_enumeration(
        pairs in prop::collection::vec((-3.0f64..3.0, 0.1f64..2.0), 1..9)
    ) {
        let (y, w): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let f = pava_nonincreasing(&y, &w).unwrap();
        let oracle = brute_force_isotonic(&y, &w);
        for (a, b) in f.iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn projection_is_feasible_and_idempotent((n, k, m) in matrix_strategy()) {
        let p = project_doubly_monotone(&m, n, k, &ProjectionConfig::default()).unwrap().matrix;
        prop_assert!(is_doubly_monotone(&p, n, k, 1e-8));
        let pp = project_doubly_monotone(&p, n, k, &ProjectionConfig::default()).unwrap().matrix;
        prop_assert!(sq_dist(&p, &pp).sqrt() < 1e-8);
    }

    #[test]
    fn solvers_agree((n, k, m) in matrix_strategy()) {
        let exact = project_doubly_monotone(&m, n, k, &config(ProjectionAlgorithm::Partition)).unwrap().matrix;
        for alg in [ProjectionAlgorithm::Dykstra, ProjectionAlgorithm::AcceleratedDual] {
            let p = project_doubly_monotone(&m, n, k, &config(alg)).unwrap().matrix;
            prop_assert!(sq_dist(&p, &exact).sqrt() < 1e-6, "{:?}", alg);
        }
    }

    #[test]
    fn projection_is_contractive(
        (n, k, a) in matrix_strategy(),
        noise in prop::collection::vec(-1.0f64..1.0, 30)
    ) {
        let b: Vec<f64> = a.iter().zip(noise.iter().cycle()).map(|(x, e)| x + e).collect();
        let pa = project_doubly_monotone(&a, n, k, &ProjectionConfig::default()).unwrap().matrix;
        let pb = project_doubly_monotone(&b, n, k, &ProjectionConfig::default()).unwrap().matrix;
        prop_assert!(sq_dist(&pa, &pb) <= sq_dist(&a, &b) + 1e-9);
    }

    #[test]
    fn small_projection_matches_exact_oracle(
        (n, k) in (1usize..4, 1usize..4),
        vals in prop::collection::vec(0.0f64..1.0, 9)
    ) {
        prop_assume!(n * k <= 8);
        let m = &vals[..n * k];
        let p = project_doubly_monotone(m, n, k, &ProjectionConfig::default()).unwrap().matrix;
        let oracle = partition_projection(m, n, k);
        prop_assert!(sq_dist(m, &p) <= sq_dist(m, &oracle) + 1e-9);
        prop_assert!(sq_dist(&p, &oracle).sqrt() < 1e-6);
    }

    #[test]
    fn product_weights_equal_duplicated_rows(
        vals in prop::collection::vec(0.0f64..1.0, 6),
        dup in 1usize..4
    ) {
        // A 2x3 problem whose first row has weight `dup` equals the
        // (dup+1)x3 problem with that row repeated.
        let w = [dup as f64, 1.0];
        let weighted = project_doubly_monotone_weighted(&vals, &w, &[1.0; 3], &ProjectionConfig::default())
            .unwrap()
            .matrix;
        let mut expanded = Vec::new();
        for _ in 0..dup {
            expanded.extend_from_slice(&vals[..3]);
        }
        expanded.extend_from_slice(&vals[3..]);
        let full = project_doubly_monotone(&expanded, dup + 1, 3, &ProjectionConfig::default())
            .unwrap()
            .matrix;
        for j in 0..3 {
            prop_assert!((weighted[j] - full[j]).abs() < 1e-9);
            prop_assert!((weighted[3 + j] - full[dup * 3 + j]).abs() < 1e-9);
        }
    }
}
