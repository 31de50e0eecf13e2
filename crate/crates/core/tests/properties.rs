//! Property tests for the invariants of each module.

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use linking::deformation::{build_field, DeformationConfig};
use linking::ekeland::{
    build_a, ekeland_point, max_subdifferential, min_norm_descent, penalty_psi, EkelandOptions, EkelandSpace,
    GridSpace, MapSpace,
};
use linking::exec::Exec;
use linking::functional::{make_test_functional, pseudogradient, Functional, PalaisSmaleTrace, TestFunctional};
use linking::geometry::{
    brouwer_degree, find_intersection, make_pair, AdmissibleMap, IntersectOptions, PairKind, PairParams,
};
use linking::minimax::{estimate_cgamma, MinimaxOptions, TAU_C};
use linking::space::{Decomposition, Projection, SetDescriptor, Vector};

fn v(x: &[f64]) -> Vector {
    Vector::from_column_slice(x)
}

fn silva_decomp() -> Decomposition {
    Decomposition::coordinate(3, &[0], &[2], Some(1)).unwrap()
}

fn library() -> Vec<TestFunctional> {
    let none = Default::default();
    ["double_well", "saddle", "exp1d", "radial_plateau", "bvp_quartic"]
        .iter()
        .map(|n| make_test_functional(n, &none).unwrap())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projections_idempotent_and_orthogonal(x in prop::collection::vec(-10.0f64..10.0, 3)) {
        let d = silva_decomp();
        let x = v(&x);
        let mut total = 0.0;
        for which in [Projection::P1, Projection::P2, Projection::Pe] {
            let p = d.project(which, &x).unwrap();
            let pp = d.project(which, &p).unwrap();
            prop_assert!((&pp - &p).norm() <= 1e-12);
            total += p.norm_squared();
        }
        prop_assert!((total - x.norm_squared()).abs() <= 1e-10 * x.norm_squared().max(1.0));
    }

    #[test]
    fn pseudogradient_inequalities(which in 0usize..5, x in prop::collection::vec(-2.0f64..2.0, 16)) {
        let f = &library()[which];
        let x = Vector::from_iterator(f.dim(), x.into_iter().take(f.dim()));
        let g = f.gradient(&x);
        if let Ok(w) = pseudogradient(f, &x) {
            prop_assert!(w.norm() <= 2.0 * g.norm());
            prop_assert!(g.dot(&w) >= g.norm_squared() * (1.0 - 1e-12));
        }
    }

    #[test]
    fn palais_smale_trace_matches_reevaluation(pts in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 1..20)) {
        let f = TestFunctional::double_well();
        let pts: Vec<Vector> = pts.iter().map(|p| v(p)).collect();
        let tr = PalaisSmaleTrace::record(&f, pts.clone(), 0.0);
        prop_assert_eq!(tr.len(), pts.len());
        prop_assert_eq!(tr.values.len(), tr.gradient_norms.len());
        for (i, p) in pts.iter().enumerate() {
            prop_assert!((tr.values[i] - f.value(p)).abs() <= 1e-12);
            prop_assert!((tr.gradient_norms[i] - f.grad_norm(p)).abs() <= 1e-12);
        }
    }

    #[test]
    fn pairs_keep_s_off_the_boundary(rho in 0.2f64..1.8, r in 0.5f64..3.0) {
        let saddle = make_pair(
            PairKind::Saddle,
            &Decomposition::coordinate(2, &[0], &[1], None).unwrap(),
            &PairParams { radius: r, ..Default::default() },
            8,
        ).unwrap();
        prop_assert!(saddle.boundary_gap > 0.0);
        if rho < 2.0 {
            let silva = make_pair(PairKind::Silva, &silva_decomp(), &PairParams { rho, radius: 2.0, ..Default::default() }, 6).unwrap();
            prop_assert!(silva.boundary_gap > 0.0);
            let brute = silva.mesh.boundary_nodes().iter().map(|&b| silva.s.dist(silva.mesh.node(b))).fold(f64::INFINITY, f64::min);
            prop_assert!((brute - silva.boundary_gap).abs() <= 1e-12);
        }
    }

    #[test]
    fn degree_is_signed_certificate_count(seed in 0u64..1000, amp in 0.0f64..0.4) {
        let pair = make_pair(PairKind::Silva, &silva_decomp(), &PairParams::default(), 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = AdmissibleMap::random_perturbation(pair.mesh.clone(), amp, &mut rng);
        let vals: Vec<Vector> = g.images().iter().map(|x| pair.mesh.chart().coords(x)).collect();
        let y = Vector::from_element(pair.mesh.dim(), 0.05);
        if let Ok(r) = brouwer_degree(&pair.mesh, &vals, &y, Exec::Sequential) {
            prop_assert!(r.boundary_margin > 0.0);
            prop_assert_eq!(r.degree, r.signed_count());
        }
    }

    #[test]
    fn intersections_for_small_perturbations(seed in 0u64..1000, frac in 0.0f64..0.25) {
        let d = Decomposition::coordinate(2, &[0], &[1], None).unwrap();
        let pair = make_pair(PairKind::Saddle, &d, &PairParams { radius: 2.0, ..Default::default() }, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = AdmissibleMap::random_perturbation(pair.mesh.clone(), frac * pair.boundary_gap, &mut rng);
        let hit = find_intersection(&g, &pair, &IntersectOptions::default()).unwrap();
        prop_assert!(hit.residual <= 1e-3);
        prop_assert!((pair.s.dist(&g.eval(&hit.ref_point)) - hit.residual).abs() <= 1e-12);
    }

    #[test]
    fn field_is_bounded_and_local(x in prop::collection::vec(-2.5f64..2.5, 2)) {
        let f = TestFunctional::saddle();
        let pts = |p: &[[f64; 2]]| SetDescriptor::FiniteSample { points: p.iter().map(|q| v(q)).collect() };
        let cfg = DeformationConfig { eps_bar: 4.0, delta: 0.5, field_samples: 50, ..Default::default() };
        let e = pts(&[[0.0, 1.0], [0.0, -1.0]]);
        let (field, _) = build_field(&f, &pts(&[[1.0, 0.0], [-1.0, 0.0]]), &e, &cfg).unwrap();
        let x = v(&x);
        let w = field.eval_field(&x);
        prop_assert!(w.norm() <= field.delta() / 3.0 * (1.0 + 1e-12));
        if e.dist(&x) > field.delta() || field.in_d1(&x) {
            prop_assert_eq!(w.norm(), 0.0);
        }
    }

    #[test]
    fn psi_bounded_and_lipschitz(eps in 0.01f64..1.0, a in prop::collection::vec(-2.0f64..2.0, 2), b in prop::collection::vec(-2.0f64..2.0, 2)) {
        let s = SetDescriptor::Sphere { center: Vector::zeros(2), radius: 1.0, basis: None };
        let (a, b) = (v(&a), v(&b));
        let (pa, pb) = (penalty_psi(&a, &s, eps), penalty_psi(&b, &s, eps));
        prop_assert!((0.0..=eps * eps).contains(&pa));
        prop_assert!((pa - pb).abs() <= eps * (&a - &b).norm() + 1e-15);
    }

    #[test]
    fn ekeland_grid_certificates(seed in 0u64..10_000, eps in 0.01f64..1.0, delta in 0.05f64..2.0) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vector> = (0..60).map(|_| v(&[rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])).collect();
        let grid = GridSpace::from_fn(pts, |x| (x[0] - 0.3).powi(2) + (3.0 * x[1]).cos());
        let inf = grid.values.iter().copied().fold(f64::INFINITY, f64::min);
        let x = (0..60).find(|&i| grid.values[i] <= inf + eps).unwrap();
        let cert = ekeland_point(&grid, x, eps, delta, &EkelandOptions::default()).unwrap();
        prop_assert_eq!(grid.verify(x, &cert), (true, true, 0));
        prop_assert!(cert.checks.all_hold());
    }

    #[test]
    fn min_norm_descent_is_unit_and_attains(g in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 1..6)) {
        let grads: Vec<Vector> = g.iter().map(|x| v(x)).collect();
        let d = min_norm_descent(&grads);
        let min = grads.iter().map(|x| x.norm()).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(d.bound, min);
        if min > 0.0 {
            prop_assert!((d.direction.norm() - 1.0).abs() <= 1e-12);
            prop_assert!((grads[d.t0].dot(&d.direction) + min).abs() <= 1e-12);
        }
    }

    #[test]
    fn subdifferential_support_is_the_tie_band(vals in prop::collection::vec(-2.0f64..2.0, 1..12), tau in 0.0f64..0.5) {
        let m = max_subdifferential(&vals, tau);
        prop_assert!(!m.indices.is_empty());
        for (i, x) in vals.iter().enumerate() {
            prop_assert_eq!(m.indices.contains(&i), *x >= m.max - tau);
        }
        prop_assert_eq!(m.simplex_dim + 1, m.indices.len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn minimax_history_and_pinning(amp in 0.0f64..0.8) {
        let d = Decomposition::coordinate(2, &[0, 1], &[], None).unwrap();
        let p = PairParams { rho: 0.5, start: Some(vec![-1.0, 0.0]), e: Some(vec![1.0, 0.0]), ..Default::default() };
        let pair = make_pair(PairKind::MpPath, &d, &p, 32).unwrap();
        let f = TestFunctional::double_well();
        let g = AdmissibleMap::from_fn(pair.mesh.clone(), |u, _| v(&[u[0], u[1] + amp * (1.0 - u[0] * u[0])]));
        let r = estimate_cgamma(&f, &pair, &g, &MinimaxOptions::default()).unwrap();
        prop_assert!(r.iteration_history.windows(2).all(|w| w[1].1 <= w[0].1));
        prop_assert!(r.c_estimate >= r.alpha - TAU_C);
        prop_assert_eq!(r.best_map.boundary_deviation(), 0.0);
    }

    #[test]
    fn penalized_value_has_the_linking_lower_bound(seed in 0u64..1000, eps in 0.05f64..0.4, amp in 0.0f64..0.5) {
        use rand::Rng;
        // f = x² − y² on the saddle pair is a limiting instance with c = 0
        let f = TestFunctional::saddle();
        let d = Decomposition::coordinate(2, &[0], &[1], None).unwrap();
        let pair = make_pair(PairKind::Saddle, &d, &PairParams { radius: 2.0, ..Default::default() }, 32).unwrap();
        let abar = build_a(&AdmissibleMap::identity(pair.mesh.clone()), &pair, eps, 8, 6).unwrap();
        let space = MapSpace::penalized(&f, &abar, pair.s.clone(), eps, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k: Vec<Vector> = abar
            .g_tilde()
            .into_iter()
            .zip(&abar.pinned)
            .map(|(x, &pin)| if pin { x } else { x + v(&[rng.gen_range(-amp..amp), rng.gen_range(-amp..amp)]) })
            .collect();
        prop_assert!(space.value(&k) >= eps * eps - 1e-6);
    }
}

#[test]
fn identity_decomposition_matrix_is_orthonormal() {
    let d = silva_decomp();
    let mut cols: Vec<Vector> = d.basis1().column_iter().map(|c| c.into_owned()).collect();
    cols.extend(d.basis2().column_iter().map(|c| c.into_owned()));
    cols.push(d.e().unwrap().clone());
    let m = DMatrix::from_columns(&cols);
    assert!((m.transpose() * &m - DMatrix::identity(3, 3)).norm() <= 1e-14);
}
