use cpmol::linsolve::{LinearSolver, LinearSolverKind};
use cpmol::operators::lagrange_weights_1d;
use cpmol::prelude::*;
use cpmol::sparse::OperatorRole;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lagrange_weights_reproduce_monomials(p in 1usize..6, t in -0.5f64..6.5) {
        let mut w = vec![0.0; p + 1];
        lagrange_weights_1d(p, t, &mut w);
        for k in 0..=p as i32 {
            let s: f64 = w.iter().enumerate().map(|(j, wj)| wj * (j as f64).powi(k)).sum();
            prop_assert!((s - t.powi(k)).abs() < 1e-9 * (1.0 + t.abs().powi(k)));
        }
    }

    #[test]
    fn closest_point_is_idempotent_and_nearer_than_samples(
        x in -3.0f64..3.0,
        y in -2.0f64..2.0,
        which in 0usize..3,
    ) {
        let s = match which {
            0 => Surface::circle(Point::new2(0.3, -0.2), 1.3),
            1 => Surface::ellipse(2.0, 1.0),
            _ => Surface::snowflake(),
        };
        let q = Point::new2(x, y);
        // points near the medial axis may legitimately be rejected
        if let Ok(c) = s.closest_point(&q) {
            prop_assert!((c.dist - q.dist(&c.cp)).abs() < 1e-10);
            let again = s.closest_point(&c.cp).unwrap();
            prop_assert!(again.cp.dist(&c.cp) < 1e-9);
            for (pt, _) in s.sample(400) {
                prop_assert!(c.dist <= q.dist(&pt) + 1e-9);
            }
        }
    }

    #[test]
    fn mesh_closest_point_matches_brute_force(
        x in -2.0f64..2.0,
        y in -2.0f64..2.0,
        z in -1.0f64..1.0,
    ) {
        let m = TriMesh::torus(1.0, 0.4, 24, 12);
        let p = [x, y, z];
        let fast = m.closest_point(p);
        let slow = m.closest_point_brute_force(p);
        prop_assert!((fast.dist2 - slow.dist2).abs() < 1e-12);
    }

    #[test]
    fn extension_is_consistent_on_shifted_circles(
        cx in -0.5f64..0.5,
        cy in -0.5f64..0.5,
        r in 0.7f64..1.5,
        dx in 0.06f64..0.15,
        p in 1usize..5,
    ) {
        let s = Surface::circle(Point::new2(cx, cy), r);
        let g = BandedGrid::build(&s, dx, StencilSpec::laplacian(p)).unwrap();
        let e = extension_matrix(&g, p).unwrap();
        prop_assert!(e.row_sums().iter().all(|v| (v - 1.0).abs() < 1e-12));
        // linear data is reproduced exactly for every p >= 1
        let f: Vec<f64> = (0..g.len()).map(|n| { let x = g.coords(n); 2.0 * x[0] - x[1] + 0.5 }).collect();
        let ef = e.apply(&f);
        for (v, c) in ef.iter().zip(g.cps()) {
            prop_assert!((v - (2.0 * c.cp[0] - c.cp[1] + 0.5)).abs() < 1e-10);
        }
    }

    #[test]
    fn assembled_operators_kill_constants(
        r in 0.8f64..1.4,
        dx in 0.08f64..0.15,
        gamma_dx2 in 0.5f64..50.0,
        c in -5.0f64..5.0,
    ) {
        let s = Surface::circle(Point::new2(0.0, 0.0), r);
        let g = BandedGrid::build(&s, dx, StencilSpec::laplacian(4)).unwrap();
        let gamma = gamma_dx2 / (dx * dx);
        let ones = vec![c; g.len()];
        let heat = heat_operator(&g, gamma, 3).unwrap();
        prop_assert!(max_abs(&heat.apply(&ones)) < 1e-9 * gamma.max(1.0) * c.abs().max(1.0));
        let bi = biharmonic_operator(&g, gamma, 4).unwrap();
        prop_assert!(max_abs(&bi.apply(&ones)) < 1e-9 * gamma.max(1.0) / (dx * dx) * c.abs().max(1.0));
    }

    #[test]
    fn direct_and_iterative_solvers_agree(
        n in 5usize..60,
        seed in 0u64..1000,
    ) {
        // deterministic, strictly diagonally dominant, nonsymmetric
        let mut trip = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut next = || rng.random_range(-0.5f64..0.5);
        for i in 0..n {
            let mut off = 0.0;
            for j in [i.wrapping_sub(1), i + 1, (i * 7 + 3) % n] {
                if j < n && j != i {
                    let v = next();
                    off += v.abs();
                    trip.push((i, j, v));
                }
            }
            trip.push((i, i, off + 1.0 + next().abs()));
        }
        let a = SparseOperator::from_triplets(n, n, &trip, OperatorRole::Assembled);
        let b: Vec<f64> = (0..n).map(|_| next()).collect();
        let xd = LinearSolver::new(&a, LinearSolverKind::Direct).unwrap().solve(&b, None).unwrap();
        let xi = LinearSolver::new(&a, LinearSolverKind::iterative()).unwrap().solve(&b, None).unwrap();
        let res: Vec<f64> = a.apply(&xd).iter().zip(&b).map(|(u, v)| u - v).collect();
        prop_assert!(max_abs(&res) < 1e-12);
        let diff: Vec<f64> = xd.iter().zip(&xi).map(|(u, v)| u - v).collect();
        prop_assert!(max_abs(&diff) < 1e-8 * max_abs(&xd).max(1.0));
    }

    #[test]
    fn sparse_products_are_associative_with_vectors(
        n in 2usize..20,
        vals in proptest::collection::vec(-2.0f64..2.0, 60),
    ) {
        let mk = |off: usize| {
            let trip: Vec<(usize, usize, f64)> = (0..n)
                .flat_map(|i| [(i, i, vals[(i + off) % 60]), (i, (i + off + 1) % n, vals[(2 * i + off) % 60])])
                .collect();
            SparseOperator::from_triplets(n, n, &trip, OperatorRole::Assembled)
        };
        let (a, b) = (mk(0), mk(5));
        let x: Vec<f64> = (0..n).map(|i| vals[(3 * i + 1) % 60]).collect();
        let lhs = a.mul(&b).unwrap().apply(&x);
        let rhs = a.apply(&b.apply(&x));
        for (u, v) in lhs.iter().zip(&rhs) {
            prop_assert!((u - v).abs() < 1e-12);
        }
        prop_assert_eq!(a.transpose().transpose().max_abs_diff(&a), 0.0);
    }
}
