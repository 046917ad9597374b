use std::f64::consts::TAU;

use cpmol::cli::{simulate, SimulateOptions};
use cpmol::prelude::*;
use cpmol::problems::gray_scott::{gray_scott_initial, gray_scott_system, GrayScottParams};
use cpmol::problems::{convergence_slope, curvature_diffusion_problem, restrict, ProblemKind};
use cpmol::sparse::OperatorRole;

/// Damped rotation with forcing: smooth, non-normal enough to expose low order.
fn forced_rotation() -> SemiDiscreteSystem {
    let m = SparseOperator::from_triplets(
        2,
        2,
        &[(0, 0, -1.0), (0, 1, 2.0), (1, 0, -2.0), (1, 1, -1.0)],
        OperatorRole::Assembled,
    );
    SemiDiscreteSystem::linear(m).with_forcing(|t, o| {
        o[0] = t.sin();
        o[1] = (2.0 * t).cos();
    })
}

fn observed_order(sys: &SemiDiscreteSystem, scheme: Scheme, dts: &[f64]) -> f64 {
    let v0 = [1.0, 0.5];
    let t_end = 1.0;
    let reference = integrate(sys, &v0, &StepperConfig::new(Scheme::Rk4, 1e-4, t_end)).unwrap();
    let errs: Vec<f64> = dts
        .iter()
        .map(|&dt| {
            let v = integrate(sys, &v0, &StepperConfig::new(scheme, dt, t_end)).unwrap();
            v.iter()
                .zip(&reference)
                .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
        })
        .collect();
    convergence_slope(dts, &errs).unwrap()
}

#[test]
fn time_steppers_reach_their_orders() {
    let sys = forced_rotation();
    let dts = [0.05, 0.025, 0.0125];
    for (scheme, order) in [
        (Scheme::ForwardEuler, 1.0),
        (Scheme::BackwardEuler, 1.0),
        (Scheme::Bdf2, 2.0),
        (Scheme::Rk4, 4.0),
    ] {
        let q = observed_order(&sys, scheme, &dts);
        assert!((q - order).abs() < 0.2, "{}: {q}", scheme.name());
    }
    let nonlinear = forced_rotation().with_nonlinear(|_, v, o| {
        o[0] = -0.3 * v[0] * v[0] * v[0];
        o[1] = 0.2 * v[0] * v[1];
    });
    let q = observed_order(&nonlinear, Scheme::ImexBdf2, &dts);
    assert!((q - 2.0).abs() < 0.2, "imex-bdf2: {q}");
}

/// On the unit circle κ = 1, so the curvature-dependent diffusivity is the
/// constant 1/2 and cos 3s decays like e^{−9t/2}.
#[test]
fn curvature_diffusion_on_circle_is_heat_with_half_diffusivity() {
    let t_end = 0.2;
    let mut dxs = Vec::new();
    let mut errs = Vec::new();
    for dx in [0.1, 0.05, 0.025] {
        let gamma = PenaltyConfig::recommended().gamma(2, dx, None).unwrap();
        let (grid, sys, v0) =
            curvature_diffusion_problem(&Surface::unit_circle(), dx, 3, gamma).unwrap();
        let v = integrate(
            &sys,
            &v0,
            &StepperConfig::new(Scheme::Bdf2, dx / 4.0, t_end),
        )
        .unwrap();
        let n = 200;
        let pts: Vec<Point> = (0..n)
            .map(|i| {
                let s = TAU * i as f64 / n as f64;
                Point::new2(s.cos(), s.sin())
            })
            .collect();
        let u = restrict(&grid, &v, &pts).unwrap();
        let err = (0..n)
            .map(|i| {
                let s = TAU * i as f64 / n as f64;
                (u[i] - (-4.5 * t_end).exp() * (3.0 * s).cos()).abs()
            })
            .fold(0.0, f64::max);
        dxs.push(dx);
        errs.push(err);
    }
    assert!(errs[2] < 5e-3, "{errs:?}");
    let slope = convergence_slope(&dxs, &errs).unwrap();
    assert!(slope > 1.7, "slope {slope}, errors {errs:?}");
}

#[test]
fn gray_scott_keeps_homogeneous_state_and_stays_bounded() {
    let surface = Surface::unit_sphere();
    let dx = 0.2;
    let grid = BandedGrid::build(&surface, dx, StencilSpec::laplacian(2)).unwrap();
    let params = GrayScottParams::standard(3, dx);
    let sys = gray_scott_system(&grid, &params, 2).unwrap();
    let n = grid.len();
    let mut rest = vec![1.0; n];
    rest.extend(vec![0.0; n]);
    let cfg =
        StepperConfig::new(Scheme::ImexBdf2, 1.0, 10.0).with_solver(LinearSolverKind::iterative());
    let out = integrate(&sys, &rest, &cfg).unwrap();
    let drift = out
        .iter()
        .zip(&rest)
        .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()));
    assert!(drift < 1e-10, "drift {drift}");

    let v0 = gray_scott_initial(&grid, 0.5, 0.5, 7);
    assert_eq!(v0, gray_scott_initial(&grid, 0.5, 0.5, 7));
    assert_ne!(v0, gray_scott_initial(&grid, 0.5, 0.5, 8));
    let out = integrate(
        &sys,
        &v0,
        &StepperConfig::new(Scheme::ImexBdf2, 1.0, 200.0)
            .with_solver(LinearSolverKind::iterative()),
    )
    .unwrap();
    assert!(out.iter().all(|x| (-0.1..=1.5).contains(x)));
}

#[test]
fn simulate_is_reproducible_for_a_seed() {
    let mut o = SimulateOptions::new(ProblemKind::GrayScott, 0.2).unwrap();
    o.p = 2;
    o.t_end = 20.0;
    o.snapshots = 2;
    o.seed = 5;
    o.amplitude = 0.5;
    let a = simulate(&o).unwrap();
    let b = simulate(&o).unwrap();
    assert!(a.failure.is_none());
    assert_eq!(a.snapshots.len(), 3);
    assert_eq!(a.last().t, 20.0);
    assert_eq!(a.last().fields, b.last().fields);
    o.seed = 6;
    assert_ne!(simulate(&o).unwrap().last().fields, a.last().fields);
}
