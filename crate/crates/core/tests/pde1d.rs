use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gevrey_kit::implicit_diff::{Direction, ResidualOracle};
use gevrey_kit::pde1d::{nemyckii_derivative, BoundaryCondition, Mesh1D, Nonlinearity, PdeData, PdeOracle};

fn cubic() -> Nonlinearity {
    Nonlinearity::polynomial(vec![0.0, 0.0, 1.0], None).unwrap()
}

fn linear() -> Nonlinearity {
    Nonlinearity::polynomial(vec![1.0], None).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

fn nodal_error(oracle: &PdeOracle, u: &[f64], exact: impl Fn(f64) -> f64) -> f64 {
    let full = oracle.mesh().full_nodal(u);
    oracle.mesh().nodes().iter().zip(&full).map(|(&x, &v)| (v - exact(x)).abs()).fold(0.0, f64::max)
}

fn solve(oracle: &PdeOracle, data: &PdeData) -> Vec<f64> {
    oracle.newton_solve(data, &vec![0.0; oracle.state_dim()], 1e-12).unwrap().u
}

/// `u(1)` for `u″ = u³ − f`, `u(0) = 0`, `u′(0) = s`, by classical RK4.
fn shoot(s: f64, f: f64, steps: usize) -> (f64, Vec<f64>) {
    let h = 1.0 / steps as f64;
    let rhs = |y: [f64; 2]| [y[1], y[0].powi(3) - f];
    let mut y = [0.0, s];
    let mut path = vec![0.0];
    for _ in 0..steps {
        let k1 = rhs(y);
        let k2 = rhs([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = rhs([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = rhs([y[0] + h * k3[0], y[1] + h * k3[1]]);
        for i in 0..2 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        path.push(y[0]);
    }
    (y[0], path)
}

/// Dirichlet solution of `−u″ + u³ = f` by shooting with secant updates.
fn shooting_solution(f: f64, steps: usize) -> Vec<f64> {
    let (mut s0, mut s1) = (0.0, 1.0);
    let (mut r0, _) = shoot(s0, f, steps);
    for _ in 0..100 {
        let (r1, path) = shoot(s1, f, steps);
        if r1.abs() < 1e-14 {
            return path;
        }
        let s2 = s1 - r1 * (s1 - s0) / (r1 - r0);
        (s0, r0, s1) = (s1, r1, s2);
    }
    panic!("shooting did not converge");
}

#[test]
fn linear_dirichlet_converges_at_second_order() {
    let exact = |x: f64| 1.0 - (x - 0.5).cosh() / 0.5f64.cosh();
    let mut errors = Vec::new();
    for n in [32, 128] {
        let mesh = Mesh1D::uniform(n, BoundaryCondition::Dirichlet).unwrap();
        let oracle = PdeOracle::new(mesh.clone(), linear()).unwrap();
        let u = solve(&oracle, &PdeData::constant(&mesh, 1.0, 1.0, 1.0, 0.0));
        errors.push(nodal_error(&oracle, &u, exact));
    }
    assert!(errors[1] < 1e-5);
    assert!(errors[0] / errors[1] > 12.0, "{errors:?}");
}

#[test]
fn linear_neumann_manufactured_solution() {
    // u = sin x solves −u″ + u = 2 sin x with u′(1) = cos 1
    let mut errors = Vec::new();
    for n in [32, 128] {
        let mesh = Mesh1D::uniform(n, BoundaryCondition::Neumann).unwrap();
        let oracle = PdeOracle::new(mesh.clone(), linear()).unwrap();
        let data = PdeData::from_fns(&mesh, |_| 1.0, |_| 1.0, |x| 2.0 * x.sin(), 1f64.cos());
        let u = solve(&oracle, &data);
        errors.push(nodal_error(&oracle, &u, f64::sin));
    }
    assert!(errors[1] < 1e-5);
    assert!(errors[0] / errors[1] > 12.0, "{errors:?}");
}

#[test]
fn cubic_problem_matches_shooting() {
    let steps = 4096;
    let reference = shooting_solution(10.0, steps);
    let mesh = Mesh1D::uniform(256, BoundaryCondition::Dirichlet).unwrap();
    let oracle = PdeOracle::new(mesh.clone(), cubic()).unwrap();
    let u = solve(&oracle, &PdeData::constant(&mesh, 1.0, 1.0, 10.0, 0.0));
    let err = nodal_error(&oracle, &u, |x| reference[(x * steps as f64).round() as usize]);
    assert!(err < 1e-4 * max_abs(&reference), "error {err}");
}

#[test]
fn first_derivative_matches_residual_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mesh = Mesh1D::uniform(16, BoundaryCondition::Neumann).unwrap();
    let oracle = PdeOracle::new(mesh.clone(), Nonlinearity::tanh_shifted()).unwrap();
    let d: Vec<f64> = PdeData::from_fns(&mesh, |x| 1.0 + x, |_| 0.5, |x| x, 0.3).to_vector();
    let u: Vec<f64> = (0..oracle.state_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let dd: Vec<f64> = (0..d.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let du: Vec<f64> = (0..u.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let exact = oracle.apply_derivative(&d, &u, &[Direction::joint(&dd, &du)]);
    let h = 1e-5;
    let shift = |t: f64| {
        let ds: Vec<f64> = d.iter().zip(&dd).map(|(a, b)| a + t * b).collect();
        let us: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + t * b).collect();
        oracle.eval(&ds, &us)
    };
    let fd: Vec<f64> = shift(h).iter().zip(shift(-h)).map(|(p, m)| (p - m) / (2.0 * h)).collect();
    assert!(max_abs_diff(&exact, &fd) <= 1e-7 * max_abs(&exact).max(1.0));
}

#[test]
fn polynomial_derivatives_vanish_past_degree_plus_one() {
    let mesh = Mesh1D::uniform(8, BoundaryCondition::Dirichlet).unwrap();
    let oracle = PdeOracle::new(mesh.clone(), cubic()).unwrap();
    let d = PdeData::constant(&mesh, 1.0, 2.0, 1.0, 0.0).to_vector();
    let u: Vec<f64> = (0..oracle.state_dim()).map(|i| (i as f64).sin()).collect();
    let dd: Vec<f64> = (0..d.len()).map(|i| (i as f64 * 0.3).cos()).collect();
    let du: Vec<f64> = (0..u.len()).map(|i| (i as f64 * 0.7).cos()).collect();
    let arg = Direction::joint(&dd, &du);
    assert!(max_abs(&oracle.apply_derivative(&d, &u, &[arg; 4])) > 0.0);
    assert!(oracle.apply_derivative(&d, &u, &[arg; 5]).iter().all(|&v| v == 0.0));
    assert_eq!(oracle.max_derivative_order(), Some(4));
}

#[test]
fn strong_monotonicity_of_the_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mesh = Mesh1D::uniform(32, BoundaryCondition::Neumann).unwrap();
    let oracle = PdeOracle::new(mesh.clone(), cubic()).unwrap();
    let data = PdeData::from_fns(&mesh, |x| 0.5 + x, |x| 1.0 + x * x, |_| 1.0, 0.2);
    let d = data.to_vector();
    let stiffness = oracle.stiffness();
    for _ in 0..20 {
        let u: Vec<f64> = (0..oracle.state_dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let v: Vec<f64> = (0..oracle.state_dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let diff: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
        let (ru, rv) = (oracle.eval(&d, &u), oracle.eval(&d, &v));
        let pairing: f64 = ru.iter().zip(&rv).zip(&diff).map(|((a, b), w)| (a - b) * w).sum();
        assert!(pairing >= data.ess_inf_a() * stiffness.quad_form(&diff) * (1.0 - 1e-12));
    }
}

#[test]
fn a_priori_bound_over_random_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for i in 0..20 {
        let bc = if i % 2 == 0 { BoundaryCondition::Dirichlet } else { BoundaryCondition::Neumann };
        let mesh = Mesh1D::uniform(64, bc).unwrap();
        let nl = if i % 3 == 0 { Nonlinearity::tanh_shifted() } else { cubic() };
        let oracle = PdeOracle::new(mesh.clone(), nl).unwrap();
        let (a0, a1) = (rng.gen_range(0.2..2.0), rng.gen_range(-0.1..0.1));
        let (b0, f0) = (rng.gen_range(0.0..3.0), rng.gen_range(-20.0..20.0));
        let g = if bc == BoundaryCondition::Neumann { rng.gen_range(-2.0..2.0) } else { 0.0 };
        let data = PdeData::from_fns(&mesh, |x| a0 + a1 * x, |_| b0, |x| f0 * (1.0 - x), g);
        let sol = oracle.newton_solve(&data, &vec![0.0; oracle.state_dim()], 1e-11).unwrap();
        assert!(sol.a_priori.holds, "draw {i}: {:?}", sol.a_priori);
        let consts = oracle.estimate_constants(&data, &sol.u, None).unwrap();
        assert!(consts.alpha_measured <= consts.alpha_guaranteed * (1.0 + 1e-9), "draw {i}");
        assert!(consts.sigma >= 1.0 && consts.digamma >= 1.0);
    }
}

#[test]
fn poincare_constant_approaches_continuum_value() {
    // smallest eigenvalue of −u″ is π² (Dirichlet) or π²/4 (mixed)
    for (bc, lambda) in [(BoundaryCondition::Dirichlet, PI * PI), (BoundaryCondition::Neumann, PI * PI / 4.0)] {
        let want = (1.0 + 1.0 / lambda).sqrt();
        let mut prev = f64::INFINITY;
        for n in [16, 64, 256] {
            let oracle = PdeOracle::new(Mesh1D::uniform(n, bc).unwrap(), linear()).unwrap();
            let err = (oracle.poincare_friedrichs().unwrap() - want).abs();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 1e-5, "{bc:?}: {prev}");
    }
}

#[test]
fn sobolev_constant_dominates_random_ratios() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let oracle = PdeOracle::new(Mesh1D::uniform(40, BoundaryCondition::Neumann).unwrap(), linear()).unwrap();
    let e = oracle.sobolev_constant();
    for _ in 0..50 {
        let v: Vec<f64> = (0..oracle.state_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        assert!(max_abs(&v) / oracle.h1_norm(&v) <= e * (1.0 + 1e-12));
    }
}

#[test]
fn tanh_derivatives_match_differences() {
    let nl = Nonlinearity::tanh_shifted();
    for &z in &[-1.5, -0.2, 0.0, 0.7, 2.0] {
        assert!((nl.value(z) - (2.0 + z.tanh())).abs() < 1e-15);
        let sech2 = 1.0 / z.cosh().powi(2);
        assert!((nl.derivative(1, z) - sech2).abs() < 1e-14);
        assert!((nl.derivative(2, z) + 2.0 * z.tanh() * sech2).abs() < 1e-14);
        for n in 2..6 {
            let h = 1e-4;
            let fd = (nl.derivative(n - 1, z + h) - nl.derivative(n - 1, z - h)) / (2.0 * h);
            assert!((nl.derivative(n, z) - fd).abs() < 1e-6 * fd.abs().max(1.0), "n = {n}, z = {z}");
        }
    }
}

#[test]
fn nemyckii_derivative_is_pointwise_product() {
    let nl = cubic();
    let u = [0.5, -1.0];
    let (a, b) = ([1.0, 2.0], [3.0, -1.0]);
    let got = nemyckii_derivative(&nl, &u, &[&a, &b]);
    assert_eq!(got, vec![6.0 * 0.5 * 3.0, -6.0 * -2.0]);
}

#[test]
fn inadmissible_inputs_are_rejected() {
    assert!(Nonlinearity::exponential().is_err());
    assert!(Nonlinearity::polynomial(vec![0.0, 1.0], None).is_err());
    assert!(Nonlinearity::polynomial(vec![0.0, 0.0, -1.0], None).is_err());
    assert!(Nonlinearity::polynomial(vec![0.0, 0.0, 1.0], Some(3.0)).is_err());
    assert!(Nonlinearity::polynomial(vec![f64::NAN], None).is_err());
    let mesh = Mesh1D::uniform(8, BoundaryCondition::Dirichlet).unwrap();
    assert!(PdeData::constant(&mesh, 1.0, 1.0, 1.0, 0.5).validate(&mesh).is_err());
    assert!(PdeData::constant(&mesh, 0.0, 1.0, 1.0, 0.0).validate(&mesh).is_err());
    assert!(PdeData::constant(&mesh, 1.0, -1.0, 1.0, 0.0).validate(&mesh).is_err());
    assert!(Mesh1D::uniform(1, BoundaryCondition::Dirichlet).is_err());
    assert!(Mesh1D::new(vec![0.0, 0.6, 0.5, 1.0], BoundaryCondition::Neumann).is_err());
}

#[test]
fn data_vector_roundtrip() {
    let mesh = Mesh1D::uniform(5, BoundaryCondition::Neumann).unwrap();
    let data = PdeData::from_fns(&mesh, |x| 1.0 + x, |x| x * x, |x| -x, 0.25);
    assert_eq!(PdeData::from_vector(&data.to_vector()).unwrap(), data);
    assert!(PdeData::from_vector(&[1.0, 2.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn residual_derivatives_are_symmetric_and_multilinear(seed in 0u64..10_000, r in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mesh = Mesh1D::uniform(6, BoundaryCondition::Neumann).unwrap();
        let nl = if seed % 2 == 0 { cubic() } else { Nonlinearity::tanh_shifted() };
        let oracle = PdeOracle::new(mesh.clone(), nl).unwrap();
        let d = PdeData::constant(&mesh, 1.0, 1.0, 1.0, 0.5).to_vector();
        let u: Vec<f64> = (0..oracle.state_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let ds: Vec<Vec<f64>> = (0..=r).map(|_| draw(d.len())).collect();
        let us: Vec<Vec<f64>> = (0..=r).map(|_| draw(u.len())).collect();
        let args: Vec<Direction<'_>> = (0..r).map(|i| Direction::joint(&ds[i], &us[i])).collect();
        let base = oracle.apply_derivative(&d, &u, &args);
        let scale = max_abs(&base).max(1.0);
        let mut rotated = args.clone();
        rotated.rotate_left(1);
        prop_assert!(max_abs_diff(&base, &oracle.apply_derivative(&d, &u, &rotated)) <= 1e-12 * scale);

        let mixed_d: Vec<f64> = ds[0].iter().zip(&ds[r]).map(|(a, b)| a - 3.0 * b).collect();
        let mixed_u: Vec<f64> = us[0].iter().zip(&us[r]).map(|(a, b)| a - 3.0 * b).collect();
        let mut combined = args.clone();
        combined[0] = Direction::joint(&mixed_d, &mixed_u);
        let mut other = args.clone();
        other[0] = Direction::joint(&ds[r], &us[r]);
        let lhs = oracle.apply_derivative(&d, &u, &combined);
        let rhs: Vec<f64> = base.iter().zip(oracle.apply_derivative(&d, &u, &other)).map(|(a, b)| a - 3.0 * b).collect();
        prop_assert!(max_abs_diff(&lhs, &rhs) <= 1e-11 * scale.max(max_abs(&lhs)));
    }
}
