use proptest::prelude::*;

use driftlab_core::barrier::{Barrier, BarrierParams, SmoothStep};
use driftlab_core::field::fd_laplacian;
use driftlab_core::norms::{lp_norm, trail_diverges};
use driftlab_core::solver::sparse::Csr;
use driftlab_core::solver::{assemble_axisym, linear_solve, AxisymGrid, Problem};
use driftlab_core::weak_form::BumpFunction;
use driftlab_core::{Domain, Point, QuadratureSpec, ScalarField};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csr_matvec_matches_triplet_sum(
        entries in prop::collection::vec((0usize..6, 0usize..6, -5.0f64..5.0), 1..40),
        x in prop::collection::vec(-3.0f64..3.0, 6),
    ) {
        let a = Csr::from_triplets(6, &entries);
        let mut y = vec![0.0; 6];
        a.matvec(&x, &mut y);
        let mut dense = [0.0; 6];
        for &(r, c, v) in &entries {
            dense[r] += v * x[c];
        }
        for (got, want) in y.iter().zip(dense) {
            prop_assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn drift_parity_in_z(rho in 0.0f64..1.0, z in 0.001f64..1.0, eps in 0.02f64..0.2) {
        let bar = Barrier::new(BarrierParams::default().with_eps(eps)).unwrap();
        let (br, bz) = bar.b_eps(rho, z);
        let (mr, mz) = bar.b_eps(rho, -z);
        prop_assert_eq!(br, mr);
        prop_assert_eq!(bz, -mz);
    }

    #[test]
    fn smooth_step_is_monotone_and_bounded(a in -0.5f64..1.5, b in -0.5f64..1.5) {
        let eta = SmoothStep::new();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (vl, vh) = (eta.value(lo), eta.value(hi));
        prop_assert!((0.0..=1.0).contains(&vl) && (0.0..=1.0).contains(&vh));
        prop_assert!(vl <= vh + 1e-15);
        prop_assert!(eta.derivative(lo) >= 0.0);
    }

    #[test]
    fn lp_norm_is_absolutely_homogeneous(c in -4.0f64..4.0, p in 1.0f64..4.0) {
        let dom = Domain::ball(2, 1.0).unwrap();
        let q = QuadratureSpec::gauss(4, 8);
        let f = |x: &[f64]| 1.0 + x[0] * x[1];
        let base = lp_norm(f, &dom, p, &q).unwrap().value;
        let scaled = lp_norm(|x: &[f64]| c * f(x), &dom, p, &q).unwrap().value;
        prop_assert!((scaled - c.abs() * base).abs() <= 1e-12 * (1.0 + base));
    }

    #[test]
    fn geometric_trails_are_not_flagged(start in 0.1f64..10.0, ratio in 0.01f64..0.49) {
        let incs = [start, start * ratio, start * ratio * ratio];
        let trail = [1.0, 1.0 + incs[0], 1.0 + incs[0] + incs[1], 1.0 + incs[0] + incs[1] + incs[2]];
        prop_assert!(!trail_diverges(&trail));
        let growing = [1.0, 1.0 + start, 1.0 + 2.0 * start, 1.0 + 3.0 * start];
        prop_assert!(trail_diverges(&growing));
    }

    #[test]
    fn bump_laplacian_matches_differences(
        cx in -0.3f64..0.3, cy in -0.3f64..0.3, radius in 0.3f64..0.6,
        t in 0.0f64..0.9, angle in 0.0f64..std::f64::consts::TAU,
    ) {
        let bump = BumpFunction::new(Point::new(vec![cx, cy]), radius);
        let x = [cx + t * radius * angle.cos(), cy + t * radius * angle.sin()];
        let exact = bump.laplacian(&x);
        let approx = fd_laplacian(&bump, &x, 1e-4);
        prop_assert!((exact - approx).abs() <= 1e-4 * (1.0 + exact.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn constant_data_is_reproduced_under_any_drift(
        c in -3.0f64..3.0, br in -50.0f64..50.0, bz in -50.0f64..50.0,
    ) {
        let g = AxisymGrid::half(12, 12).unwrap();
        let drift = move |rho: f64, _: f64| (br * rho, bz);
        let data = move |_: f64, _: f64| c;
        let sys = assemble_axisym(&g, &Problem::new(3, &drift, &data)).unwrap();
        prop_assert!(sys.all_m_matrix());
        let (u, _) = linear_solve(&sys, 1e-13, 2_000).unwrap();
        for v in &u.values {
            prop_assert!((v - c).abs() <= 1e-10 * (1.0 + c.abs()));
        }
    }
}
