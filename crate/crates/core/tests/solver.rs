mod common;

use driftlab_core::barrier::{Barrier, BarrierParams};
use driftlab_core::solver::sparse::Preconditioner;
use driftlab_core::solver::{
    assemble_axisym, assemble_disc, linear_solve, linear_solve_from, neumann_series_solve, solve_cylinder_eps,
    AxisymGrid, ConvectionScheme, DiscGrid, Problem,
};
use driftlab_core::Error;

use common::*;

#[test]
fn manufactured_solution_is_second_order_without_drift() {
    let errs: Vec<f64> = [16, 32, 64].iter().map(|&c| mms_error(c, &no_drift, ConvectionScheme::Hybrid)).collect();
    for p in orders(&errs) {
        assert!(p >= 1.8, "order {p}, errors {errs:?}");
    }
}

#[test]
fn manufactured_solution_is_second_order_with_central_drift() {
    let errs: Vec<f64> = [16, 32, 64].iter().map(|&c| mms_error(c, &smooth_drift, ConvectionScheme::Central)).collect();
    for p in orders(&errs) {
        assert!(p >= 1.8, "order {p}, errors {errs:?}");
    }
}

#[test]
fn homogeneous_problem_has_only_the_zero_solution() {
    let params = BarrierParams::default().with_eps(0.1);
    let bar = Barrier::new(params).unwrap();
    let drift = |rho: f64, z: f64| bar.b_eps(rho, z);
    let g = AxisymGrid::half(64, 64).unwrap();
    let sys = assemble_axisym(&g, &Problem::new(3, &drift, &zero)).unwrap();
    let ones = vec![1.0; sys.size()];
    let (u, _) = linear_solve_from(&sys, &ones, 1e-13, 5_000, Preconditioner::Ilu0).unwrap();
    assert!(u.max_abs() <= 1e-10, "{}", u.max_abs());
}

#[test]
fn neumann_series_without_drift_is_one_step() {
    let g = DiscGrid::new(48).unwrap();
    let prob = Problem::new(2, &no_drift, &zero).with_source(&one);
    let poisson = assemble_disc(&g, &prob).unwrap();
    let (u, rep) = neumann_series_solve(&poisson, &poisson, 1e-10, 50).unwrap();
    assert_eq!(rep.iterations, 1);
    let (direct, _) = linear_solve(&poisson, 1e-12, 5_000).unwrap();
    let diff = u.values.iter().zip(&direct.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff <= 1e-10 * direct.max_abs());
}

#[test]
fn neumann_series_matches_direct_solve_under_contraction() {
    let scale = calibrated_rotation(0.3);
    let (u, rep, direct) = rotation_run(scale).unwrap();
    let factor = *rep.factors.last().unwrap();
    assert!((0.2..0.4).contains(&factor), "factor {factor}");
    let rel = relative_l2(&u, &direct);
    assert!(rel <= 1e-6, "relative difference {rel}");

    match rotation_run(100.0 * scale) {
        Err(Error::ContractionFailure { factor, .. }) => assert!(factor >= 1.0),
        other => panic!("expected ContractionFailure, got {:?}", other.map(|r| r.1.factors)),
    }
}

#[test]
fn full_cylinder_is_the_odd_extension_of_the_half() {
    let params = BarrierParams::default().with_eps(0.1);
    let bar = Barrier::new(params).unwrap();
    let drift = |rho: f64, z: f64| bar.b_eps(rho, z);
    let half = AxisymGrid::half(48, 48).unwrap();
    let full = AxisymGrid::full(48, 96).unwrap();
    let (uh, _) = solve_cylinder_eps(&params, &half, 1e-13, 5_000).unwrap();
    let sys = assemble_axisym(&full, &Problem::new(3, &drift, &cylinder_data)).unwrap();
    let (uf, _) = linear_solve(&sys, 1e-13, 5_000).unwrap();
    let mut diff: f64 = 0.0;
    for j in 0..=48 {
        for i in 0..=48 {
            diff = diff.max((uf.at(i, 48 + j) - uh.at(i, j)).abs());
            diff = diff.max((uf.at(i, 48 - j) + uh.at(i, j)).abs());
        }
    }
    assert!(diff <= 1e-8, "{diff}");
}

#[test]
fn forced_upwind_keeps_solution_within_boundary_range() {
    let params = BarrierParams::default().with_eps(0.05);
    let bar = Barrier::new(params).unwrap();
    let drift = |rho: f64, z: f64| bar.b_eps(rho, z);
    let wavy = |rho: f64, z: f64| (3.0 * rho + 5.0 * z).sin();
    let g = AxisymGrid::half(80, 80).unwrap();
    let sys = assemble_axisym(&g, &Problem::new(3, &drift, &wavy).with_scheme(ConvectionScheme::Upwind)).unwrap();
    assert!(sys.all_m_matrix());
    let (u, rep) = linear_solve(&sys, 1e-13, 5_000).unwrap();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (k, m) in sys.node_map.iter().enumerate() {
        if m.is_none() {
            lo = lo.min(sys.boundary[k]);
            hi = hi.max(sys.boundary[k]);
        }
    }
    assert!(rep.min >= lo - 1e-12 && rep.max <= hi + 1e-12);
    assert_eq!(rep.maximum_principle, Some(true));
    assert!(u.values.iter().all(|v| v.is_finite()));
}

#[test]
fn hybrid_rows_with_upwinding_are_m_matrix_rows() {
    let params = BarrierParams::default().with_eps(0.05);
    let bar = Barrier::new(params).unwrap();
    let drift = |rho: f64, z: f64| bar.b_eps(rho, z);
    let g = AxisymGrid::half(128, 128).unwrap();
    let sys = assemble_axisym(&g, &Problem::new(3, &drift, &cylinder_data)).unwrap();
    assert!(sys.upwind_rows > 0);
    assert!(sys.all_m_matrix());
}

#[test]
fn coarse_grid_is_rejected() {
    let params = BarrierParams::default().with_eps(0.05);
    let g = AxisymGrid::half(64, 64).unwrap();
    match solve_cylinder_eps(&params, &g, 1e-10, 1_000) {
        Err(Error::GridTooCoarse { h_z, required }) => {
            assert!((h_z - 1.0 / 64.0).abs() < 1e-15);
            assert!((required - 0.0125).abs() < 1e-15);
        }
        other => panic!("expected GridTooCoarse, got {:?}", other.map(|r| r.1.iterations)),
    }
}

#[test]
fn cylinder_solution_vanishes_at_origin_and_respects_bounds() {
    let params = BarrierParams::default().with_eps(0.1);
    let g = AxisymGrid::half(64, 64).unwrap();
    let (u, rep) = solve_cylinder_eps(&params, &g, 1e-10, 5_000).unwrap();
    assert_eq!(u.at(0, 0), 0.0);
    assert_eq!(rep.maximum_principle, Some(true));
    assert!(rep.barrier_gap.unwrap() >= -1e-12);
    assert!(rep.residual <= 1e-10);
}
