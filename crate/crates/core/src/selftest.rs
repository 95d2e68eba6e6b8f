//! Built-in checks run by `gevrey-kit selftest`. Each compares a library
//! result with an independently computed value.

use std::time::Instant;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::combinatorics::{
    binomial, compositions, composition_identity_check, composition_identity_sides,
    factorial_inequality_check, multi_index_compositions,
    schroeder_hipparchus_by_compositions, schroeder_hipparchus_sequence, set_partitions, MultiIndex,
    C_KAPPA,
};
use crate::envelopes::{
    compose_envelopes, compose_parametric, convergence_radius, envelope_check, implicit_envelope,
    lemma_bound, GevreyEnvelope, NormEntry, ParametricEnvelope, StabilityConstant, WeightSequence,
};
use crate::implicit_diff::{
    derivative_table, finite_difference_check, first_derivative, higher_derivative,
    higher_derivative_literal, richardson_steps, solve_residual, DerivativeTable, NewtonOptions,
    PolynomialOracle, ResidualOracle,
};
use crate::linalg::norm_inf;
use crate::parametric::{
    data_map_partials, gevrey_rate_fit, pullback, DomainMap1D, ParametricProblem,
};
use crate::pde1d::{nemyckii_derivative, BoundaryCondition, Mesh1D, Nonlinearity, PdeData, PdeOracle};
use crate::cli::{run_verify, NonlinearityConfig, VerifyConfig};

pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type Check = fn() -> Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(got: f64, want: f64, rel: f64) -> Result<(), String> {
    ensure((got - want).abs() <= rel * want.abs().max(1e-300), || format!("got {got:e}, want {want:e}"))
}

fn err(e: crate::Error) -> String {
    e.to_string()
}

/// The named checks, in run order.
pub fn checks() -> Vec<(&'static str, Check)> {
    vec![
        ("compositions/5-into-3", compositions_5_3),
        ("compositions/multi-index", multi_index_comps),
        ("set-partitions/bell", partition_counts),
        ("kappa/small-values", kappa_small),
        ("kappa/recursions-agree-n10", kappa_ten),
        ("identity/factorial-inequality-n8", factorial_inequality),
        ("identity/multi-index-compositions", composition_identity),
        ("envelope/lemma-bound", lemma_bound_values),
        ("envelope/implicit", implicit_values),
        ("envelope/radius-identity", radius_identity),
        ("envelope/compose", compose_values),
        ("envelope/cubic-pipeline", cubic_pipeline),
        ("newton/cubic-root", newton_cubic),
        ("derivative/first", first_derivatives),
        ("derivative/quadratic-second", quadratic_second),
        ("derivative/cubic-series", cubic_series),
        ("derivative/collapsed-vs-literal", collapsed_vs_literal),
        ("derivative/pde-table-count", pde_table_count),
        ("fd/cubic-third", fd_cubic),
        ("pde/tanh-second-derivative", tanh_second),
        ("pde/manufactured-dirichlet", manufactured_dirichlet),
        ("pde/manufactured-neumann", manufactured_neumann),
        ("pde/vanishing-high-order", vanishing_high_order),
        ("pde/shooting-midpoint", shooting_midpoint),
        ("pde/poincare-limit", poincare_limit),
        ("parametric/pullback-single-mode", pullback_single_mode),
        ("parametric/ellipticity-floor", ellipticity_floor),
        ("parametric/data-partials", data_partials),
        ("parametric/linear-case", linear_case),
        ("parametric/mixed-fd", mixed_fd),
        ("parametric/verify-bounds", verify_bounds_run),
        ("parametric/rate-fit-synthetic", rate_fit_synthetic),
        ("parametric/rate-fit-affine", rate_fit_affine),
    ]
}

/// Runs every check whose name contains `filter`.
pub fn run(filter: Option<&str>) -> Vec<CheckResult> {
    checks()
        .into_iter()
        .filter(|(name, _)| filter.is_none_or(|f| name.contains(f)))
        .map(|(name, f)| {
            let start = Instant::now();
            let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
            CheckResult {
                name,
                passed: outcome.is_ok(),
                detail: outcome.err().unwrap_or_default(),
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

fn compositions_5_3() -> Result<(), String> {
    let c = compositions(5, 3);
    ensure(c.len() == 6 && BigUint::from(6u32) == binomial(4, 2), || format!("{} tuples", c.len()))
}

fn multi_index_comps() -> Result<(), String> {
    let two = MultiIndex::from_dense(&[2]);
    let mixed = MultiIndex::from_dense(&[1, 1]);
    let (a, b) = (multi_index_compositions(&two, 2).len(), multi_index_compositions(&mixed, 2).len());
    ensure(a == 1 && b == 2, || format!("counts {a}, {b}"))
}

fn partition_counts() -> Result<(), String> {
    let a = set_partitions(3, 1).count();
    let b = set_partitions(4, 2).count();
    ensure(a == 5 && b == 14, || format!("counts {a}, {b}"))
}

fn kappa_small() -> Result<(), String> {
    for (n, want) in [(3, 3u32), (4, 11), (5, 45)] {
        let k = schroeder_hipparchus_by_compositions(n).map_err(err)?;
        ensure(k == BigUint::from(want), || format!("kappa_{n} = {k}"))?;
    }
    Ok(())
}

fn kappa_ten() -> Result<(), String> {
    let rec = schroeder_hipparchus_sequence(10)[9].clone();
    let en = schroeder_hipparchus_by_compositions(10).map_err(err)?;
    ensure(rec == en && rec == BigUint::from(103_049u32), || format!("{rec} vs {en}"))
}

fn factorial_inequality() -> Result<(), String> {
    for n in 1..=8 {
        for r in 1..=n {
            if let Some(c) = compositions(n, r).into_iter().find(|c| !factorial_inequality_check(c)) {
                return Err(format!("fails for {:?}", c.parts));
            }
        }
    }
    Ok(())
}

fn composition_identity() -> Result<(), String> {
    let (l, r) = composition_identity_sides(&MultiIndex::from_dense(&[2]), 2);
    ensure(l == BigUint::from(2u32) && r == BigUint::from(2u32), || format!("{l} vs {r}"))?;
    for alpha in MultiIndex::all_up_to_order(3, 6).iter().filter(|a| !a.is_zero()) {
        for r in 1..=alpha.order() as usize {
            ensure(composition_identity_check(alpha, r), || format!("fails for {alpha}, r = {r}"))?;
        }
    }
    Ok(())
}

fn lemma_bound_values() -> Result<(), String> {
    let unit = GevreyEnvelope::analytic(1.0, 1.0).map_err(err)?;
    let b2 = lemma_bound(2, StabilityConstant::new(1.0).map_err(err)?, &unit).map_err(err)?.exp();
    close(b2, 2.0, 1e-12)?;
    let b3 = lemma_bound(3, StabilityConstant::new(2.0).map_err(err)?, &unit).map_err(err)?.exp();
    close(b3, 576.0, 1e-12)
}

fn implicit_values() -> Result<(), String> {
    let env = implicit_envelope(
        StabilityConstant::new(2.0).map_err(err)?,
        &GevreyEnvelope::analytic(3.0, 1.0).map_err(err)?,
    )
    .map_err(err)?;
    close(env.scale, 1.0 / (6.0 * C_KAPPA), 1e-12)?;
    close(env.rate, 36.0 * C_KAPPA, 1e-12)
}

fn radius_identity() -> Result<(), String> {
    let env = implicit_envelope(
        StabilityConstant::new(1.0).map_err(err)?,
        &GevreyEnvelope::analytic(1.0, 1.0).map_err(err)?,
    )
    .map_err(err)?;
    close(convergence_radius(&env).map_err(err)?, 0.171_572_875_253_809_9, 1e-12)
}

fn compose_values() -> Result<(), String> {
    let unit = GevreyEnvelope::analytic(1.0, 1.0).map_err(err)?;
    let c = compose_envelopes(&unit, &unit);
    close(c.scale, 0.5, 1e-15)?;
    close(c.rate, 2.0, 1e-15)?;
    let weights = WeightSequence::algebraic(0.3, 2.0, 3).map_err(err)?;
    let p = compose_parametric(&ParametricEnvelope { base: unit, weights: weights.clone() }, &unit);
    close(p.base.scale, 0.5, 1e-15)?;
    close(p.base.rate, 2.0, 1e-15)?;
    ensure(p.weights == weights, || "weights changed".into())
}

fn cubic_pipeline() -> Result<(), String> {
    let oracle = PolynomialOracle::scalar_cubic();
    let table = derivative_table(&oracle, &[0.0], &[0.0], vec![vec![1.0]], 6, NewtonOptions::default())
        .map_err(err)?;
    let (alpha, sigma, digamma) = oracle.local_constants(&[0.0], &table.solution).map_err(err)?;
    let env = implicit_envelope(
        StabilityConstant::at_least_one(alpha).map_err(err)?,
        &GevreyEnvelope::analytic(sigma, digamma).map_err(err)?,
    )
    .map_err(err)?;
    let entries: Vec<NormEntry> = table
        .iter()
        .filter(|(k, _)| !k.is_empty())
        .map(|(k, v)| NormEntry::directional(format!("{}", k.len()), k.len() as u64, 0.0, norm_inf(v)))
        .collect();
    let report = envelope_check(&entries, &env, 0.0).map_err(err)?;
    ensure(report.passed, || format!("max ratio {}", report.max_ratio()))
}

fn newton_cubic() -> Result<(), String> {
    let s = solve_residual(&PolynomialOracle::scalar_cubic(), &[2.0], &[0.0], NewtonOptions::default())
        .map_err(err)?;
    close(s.state[0], 1.0, 1e-12)
}

fn first_derivatives() -> Result<(), String> {
    let q = PolynomialOracle::scalar_quadratic();
    close(first_derivative(&q, &[3.0], &[9.0], &[1.0]).map_err(err)?[0], 6.0, 1e-12)?;
    let c = PolynomialOracle::scalar_cubic();
    close(first_derivative(&c, &[0.0], &[0.0], &[1.0]).map_err(err)?[0], 1.0, 1e-12)
}

fn quadratic_second() -> Result<(), String> {
    let q = PolynomialOracle::scalar_quadratic();
    let t = derivative_table(&q, &[3.0], &[0.0], vec![vec![1.0]], 2, NewtonOptions::default()).map_err(err)?;
    close(t.get(&[0, 0]).ok_or("missing entry")?[0], 2.0, 1e-12)
}

/// Taylor coefficients of the inverse of `u + u³` are `1, 0, −1, 0, 3`;
/// derivatives are those times `n!`.
fn cubic_series() -> Result<(), String> {
    let c = PolynomialOracle::scalar_cubic();
    let t = derivative_table(&c, &[0.0], &[0.0], vec![vec![1.0]], 5, NewtonOptions::default()).map_err(err)?;
    let want = [1.0, 0.0, -6.0, 0.0, 360.0];
    for (n, w) in want.iter().enumerate() {
        let got = t.get(&vec![0; n + 1]).ok_or("missing entry")?[0];
        ensure((got - w).abs() <= 1e-10 * w.abs().max(1.0), || format!("order {}: {got} vs {w}", n + 1))?;
    }
    Ok(())
}

fn collapsed_vs_literal() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let oracle = PolynomialOracle::random(3, 3, 4, 6, &mut rng);
    let dirs: Vec<Vec<f64>> = (0..3).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let t = derivative_table(&oracle, &[0.1, -0.2, 0.3], &[0.0; 3], dirs, 3, NewtonOptions::default())
        .map_err(err)?;
    let mut full: DerivativeTable = t.clone();
    crate::implicit_diff::extend_table(&oracle, &mut full, 4).map_err(err)?;
    for key in [vec![0, 1], vec![0, 1, 2], vec![0, 0, 1, 2]] {
        let a = higher_derivative(&oracle, &full, &key).map_err(err)?;
        let b = higher_derivative_literal(&oracle, &full, &key).map_err(err)?;
        let scale = norm_inf(&b).max(1e-300);
        let diff = a.iter().zip(&b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        ensure(diff <= 1e-12 * scale, || format!("key {key:?}: relative gap {:e}", diff / scale))?;
    }
    Ok(())
}

fn pde_table_count() -> Result<(), String> {
    let mesh = Mesh1D::uniform(16, BoundaryCondition::Dirichlet).map_err(err)?;
    let oracle = PdeOracle::new(mesh.clone(), cubic()).map_err(err)?;
    let data = PdeData::constant(&mesh, 1.0, 1.0, 1.0, 0.0);
    let nq = mesh.num_quadrature_points();
    let mut h1 = vec![0.0; oracle.data_dim()];
    h1[2 * nq..3 * nq].iter_mut().for_each(|v| *v = 1.0);
    let mut h2 = vec![0.0; oracle.data_dim()];
    h2[nq..2 * nq].iter_mut().for_each(|v| *v = 0.5);
    let zero = vec![0.0; oracle.state_dim()];
    let t = derivative_table(&oracle, &data.to_vector(), &zero, vec![h1, h2], 3, NewtonOptions::default())
        .map_err(err)?;
    // Sorted multisets over two directions: 2 + 3 + 4 entries plus the base.
    ensure(t.len() == 10, || format!("{} entries", t.len()))
}

fn fd_cubic() -> Result<(), String> {
    let c = PolynomialOracle::scalar_cubic();
    let map = |d: &[f64]| solve_residual(&c, d, &[d[0]], NewtonOptions::with_tol(1e-15)).map(|s| s.state);
    let r = finite_difference_check(map, &[0.0], &[&[1.0], &[1.0], &[1.0]], &richardson_steps(0.05, 4))
        .map_err(err)?;
    ensure((r.estimate[0] + 6.0).abs() < 1e-4, || format!("estimate {}", r.estimate[0]))
}

fn tanh_second() -> Result<(), String> {
    let v = nemyckii_derivative(&Nonlinearity::tanh_shifted(), &[0.0], &[&[1.0], &[1.0]]);
    ensure(v[0].abs() < 1e-15, || format!("got {}", v[0]))
}

fn cubic() -> Nonlinearity {
    Nonlinearity::polynomial(vec![0.0, 0.0, 1.0], None).expect("admissible")
}

fn linear() -> Nonlinearity {
    Nonlinearity::polynomial(vec![1.0], None).expect("admissible")
}

fn manufactured_dirichlet() -> Result<(), String> {
    let mut last = f64::INFINITY;
    for n in [16, 32, 64] {
        let mesh = Mesh1D::uniform(n, BoundaryCondition::Dirichlet).map_err(err)?;
        let oracle = PdeOracle::new(mesh.clone(), linear()).map_err(err)?;
        let data = PdeData::constant(&mesh, 1.0, 0.0, 1.0, 0.0);
        let u = mesh.interpolate(|x| x * (1.0 - x) / 2.0);
        let r = oracle.dual_norm(&oracle.assemble_residual(&data, &u));
        ensure(r <= last / 3.0 || r < 1e-13, || format!("residual {r:e} after {last:e}"))?;
        last = r;
    }
    Ok(())
}

fn manufactured_neumann() -> Result<(), String> {
    let mesh = Mesh1D::uniform(32, BoundaryCondition::Neumann).map_err(err)?;
    let oracle = PdeOracle::new(mesh.clone(), linear()).map_err(err)?;
    let data = PdeData::constant(&mesh, 1.0, 0.0, 0.0, 1.0);
    let u = mesh.interpolate(|x| x);
    let r = norm_inf(&oracle.assemble_residual(&data, &u));
    ensure(r < 1e-13, || format!("residual {r:e}"))
}

fn vanishing_high_order() -> Result<(), String> {
    let mesh = Mesh1D::uniform(8, BoundaryCondition::Dirichlet).map_err(err)?;
    let oracle = PdeOracle::new(mesh.clone(), cubic()).map_err(err)?;
    let data = PdeData::constant(&mesh, 1.0, 1.0, 1.0, 0.0).to_vector();
    let u: Vec<f64> = (0..oracle.state_dim()).map(|i| 0.1 * i as f64).collect();
    let w: Vec<f64> = (0..oracle.state_dim()).map(|i| 1.0 - 0.05 * i as f64).collect();
    let args = vec![crate::implicit_diff::Direction::state(&w); 5];
    let v = oracle.apply_derivative(&data, &u, &args);
    ensure(v.iter().all(|&x| x == 0.0), || format!("max {:e}", norm_inf(&v)))
}

/// `−u″ + u³ = 1`, `u(0) = u(1) = 0`: bisection on the initial slope with RK4.
fn shooting_midpoint_value() -> f64 {
    let end = |s: f64| -> (f64, f64) {
        let steps = 4000;
        let h = 1.0 / steps as f64;
        let rhs = |y: [f64; 2]| [y[1], y[0].powi(3) - 1.0];
        let mut y = [0.0, s];
        let mut mid = 0.0;
        for i in 0..steps {
            let k1 = rhs(y);
            let k2 = rhs([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
            let k3 = rhs([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
            let k4 = rhs([y[0] + h * k3[0], y[1] + h * k3[1]]);
            for j in 0..2 {
                y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
            if i + 1 == steps / 2 {
                mid = y[0];
            }
        }
        (y[0], mid)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let m = 0.5 * (lo + hi);
        if end(m).0 > 0.0 {
            hi = m;
        } else {
            lo = m;
        }
    }
    end(0.5 * (lo + hi)).1
}

fn shooting_midpoint() -> Result<(), String> {
    let mesh = Mesh1D::uniform(256, BoundaryCondition::Dirichlet).map_err(err)?;
    let oracle = PdeOracle::new(mesh.clone(), cubic()).map_err(err)?;
    let data = PdeData::constant(&mesh, 1.0, 1.0, 1.0, 0.0);
    let sol = oracle.newton_solve(&data, &vec![0.0; oracle.state_dim()], 1e-12).map_err(err)?;
    let full = mesh.full_nodal(&sol.u);
    let n = full.len() - 1;
    let asym = (0..=n).fold(0.0_f64, |m, i| m.max((full[i] - full[n - i]).abs()));
    ensure(asym < 1e-12 && full[1..n].iter().all(|&v| v > 0.0), || format!("asymmetry {asym:e}"))?;
    close(full[n / 2], shooting_midpoint_value(), 1e-4)
}

fn poincare_limit() -> Result<(), String> {
    let exact = (1.0 + std::f64::consts::PI.powi(2)).sqrt() / std::f64::consts::PI;
    let mut last = f64::INFINITY;
    for n in [32, 64, 128] {
        let mesh = Mesh1D::uniform(n, BoundaryCondition::Dirichlet).map_err(err)?;
        let c = PdeOracle::new(mesh, linear()).map_err(err)?.poincare_friedrichs().map_err(err)?;
        let gap = (c - exact).abs();
        ensure(gap < last, || format!("gap {gap:e} did not shrink"))?;
        last = gap;
    }
    ensure(last < 1e-4, || format!("gap {last:e}"))
}

fn pullback_single_mode() -> Result<(), String> {
    let mesh = Mesh1D::uniform(32, BoundaryCondition::Dirichlet).map_err(err)?;
    let map = DomainMap1D::new(1, 0.8, 2.0).map_err(err)?;
    let hat = PdeData::constant(&mesh, 1.0, 1.0, 1.0, 0.0);
    let t = pullback(&map, &hat, &mesh, &[0.5]).map_err(err)?;
    for (x, a) in mesh.quadrature_points().iter().zip(&t.data.a) {
        let want = 1.0 / (1.0 + 0.4 * (std::f64::consts::PI * x).cos());
        ensure((a - want).abs() < 1e-14, || format!("x = {x}: {a} vs {want}"))?;
    }
    Ok(())
}

fn ellipticity_floor() -> Result<(), String> {
    let mesh = Mesh1D::uniform(64, BoundaryCondition::Dirichlet).map_err(err)?;
    let map = DomainMap1D::new(4, 0.5, 2.0).map_err(err)?;
    let hat = PdeData::constant(&mesh, 1.0, 1.0, 1.0, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let y: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.5..=0.5)).collect();
        let inf = pullback(&map, &hat, &mesh, &y).map_err(err)?.data.ess_inf_a();
        ensure(inf >= 0.125, || format!("ess-inf {inf} at {y:?}"))?;
    }
    Ok(())
}

fn data_partials() -> Result<(), String> {
    let mesh = Mesh1D::uniform(16, BoundaryCondition::Dirichlet).map_err(err)?;
    let map = DomainMap1D::new(2, 0.5, 2.0).map_err(err)?;
    let hat = PdeData::constant(&mesh, 1.0, 0.0, 0.0, 0.0);
    let xs = mesh.quadrature_points();
    let y = [0.2, -0.1];
    let e1 = data_map_partials(&map, &hat, &mesh, &y, &MultiIndex::unit(1)).map_err(err)?;
    for (q, &x) in xs.iter().enumerate() {
        let v = map.jacobian(&y, x);
        let want = -map.gamma(1) * DomainMap1D::mode_slope(1, x) / (v * v);
        ensure((e1.a[q] - want).abs() < 1e-13, || format!("e1 at {x}"))?;
    }
    let e22 = data_map_partials(&map, &hat, &mesh, &[0.0, 0.0], &MultiIndex::from_dense(&[0, 2])).map_err(err)?;
    for (q, &x) in xs.iter().enumerate() {
        let want = 2.0 * (map.gamma(2) * DomainMap1D::mode_slope(2, x)).powi(2);
        ensure((e22.a[q] - want).abs() < 1e-13, || format!("2e2 at {x}"))?;
    }
    Ok(())
}

/// With `b = 0` the problem is linear, so differentiating
/// `K_Ã u = F(f̃)` by Leibniz gives
/// `K_Ã ∂^α u = F(∂^α f̃) − Σ_{0<β≤α} binom(α, β) K_{∂^β Ã} ∂^{α−β} u`.
fn linear_case() -> Result<(), String> {
    use num_traits::ToPrimitive;
    let mesh = Mesh1D::uniform(64, BoundaryCondition::Dirichlet).map_err(err)?;
    let map = DomainMap1D::new(2, 0.5, 2.0).map_err(err)?;
    let hat = PdeData::from_fns(&mesh, |x| 1.0 + 0.5 * x, |_| 0.0, |x| 1.0 + x, 0.0);
    let problem = ParametricProblem::new(map, hat, mesh.clone(), linear()).map_err(err)?;
    let y = [0.1, -0.2];
    let sample = problem.sample(0, &y, 3, 1e-13).map_err(err)?;
    let o = &problem.oracle;
    let nq = mesh.num_quadrature_points();
    let zeros = vec![0.0; nq];
    let partial = |a: &MultiIndex| sample.tilde.partial(a).map_err(err);
    let k0 = o.assemble_matrix(&sample.tilde.data.a, &zeros).factor().map_err(err)?;
    let mut oracle_table = std::collections::BTreeMap::new();
    for alpha in MultiIndex::all_up_to_order(2, 3) {
        let mut rhs = o.load(&zeros, &partial(&alpha)?.f, 0.0);
        for beta in alpha.sub_indices().into_iter().filter(|b| !b.is_zero()) {
            let rest = alpha.checked_sub(&beta).expect("beta below alpha");
            let w = alpha.binomial(&beta).to_f64().expect("small binomial");
            let kb = o.assemble_matrix(&partial(&beta)?.a, &zeros);
            let prev: &Vec<f64> = &oracle_table[&rest];
            crate::linalg::axpy(-w, &kb.mul_vec(prev), &mut rhs);
        }
        oracle_table.insert(alpha, k0.solve(&rhs));
    }
    for (alpha, want) in &oracle_table {
        let got = sample.table.get(alpha).ok_or("missing entry")?;
        let diff: Vec<f64> = got.iter().zip(want).map(|(a, b)| a - b).collect();
        let rel = o.h1_norm(&diff) / o.h1_norm(want).max(1e-300);
        ensure(rel < 1e-10, || format!("{alpha}: relative gap {rel:e}"))?;
    }
    Ok(())
}

fn mixed_fd() -> Result<(), String> {
    let mesh = Mesh1D::uniform(64, BoundaryCondition::Dirichlet).map_err(err)?;
    let map = DomainMap1D::new(2, 0.6, 1.2).map_err(err)?;
    let hat = PdeData::constant(&mesh, 1.0, 1.0, 20.0, 0.0);
    let problem = ParametricProblem::new(map, hat, mesh, cubic()).map_err(err)?;
    let sample = problem.sample(0, &[0.0, 0.0], 2, 1e-13).map_err(err)?;
    let base = sample.table.solution().to_vec();
    let f = |y: &[f64]| problem.solve(y, Some(&base), 1e-13);
    let fd = finite_difference_check(f, &[0.0, 0.0], &[&[1.0, 0.0], &[0.0, 1.0]], &richardson_steps(0.15, 3))
        .map_err(err)?;
    let rec = sample.table.get(&MultiIndex::from_dense(&[1, 1])).ok_or("missing entry")?;
    let o = &problem.oracle;
    let diff: Vec<f64> = rec.iter().zip(&fd.estimate).map(|(a, b)| a - b).collect();
    ensure(o.h1_norm(&diff) <= o.h1_norm(&fd.indicator).max(1e-12 * o.h1_norm(rec)), || {
        format!("gap {:e}, indicator {:e}", o.h1_norm(&diff), o.h1_norm(&fd.indicator))
    })
}

fn verify_bounds_run() -> Result<(), String> {
    let cfg = VerifyConfig {
        p: 4,
        max_order: 4,
        y_samples: 5,
        nonlinearity: NonlinearityConfig::Polynomial { coefficients: vec![0.0, 0.0, 1.0], q: None },
        ..serde_json::from_str(r#"{"p": 4}"#).map_err(|e| e.to_string())?
    };
    let out = run_verify(&cfg).map_err(err)?;
    ensure(out.passed, || format!("max ratio {:e}", out.max_ratio))?;
    let shrunk = run_verify(&VerifyConfig { scale_multiplier: 0.1, ..cfg }).map_err(err)?;
    ensure(!shrunk.passed, || "shrunken envelope still passed".into())
}

fn rate_fit_synthetic() -> Result<(), String> {
    let weights = WeightSequence::algebraic(0.5, 2.0, 3).map_err(err)?;
    let norms: Vec<(MultiIndex, f64)> = MultiIndex::all_up_to_order(3, 6)
        .into_iter()
        .map(|a| {
            let ln = 1.5 * crate::combinatorics::ln_factorial(a.order())
                + a.order() as f64 * 2f64.ln()
                + a.ln_weight_pow(|k| weights.weight(k));
            (a, ln.exp())
        })
        .collect();
    let fit = gevrey_rate_fit(&norms, &weights).map_err(err)?;
    close(fit.s, 1.5, 1e-6)?;
    close(fit.rate, 2.0, 1e-6)
}

/// `−ũ″/V′ + V′ ũ = V′` is the pullback of a fixed problem on the same
/// interval, so `y ↦ û[y]` is analytic with bounded Taylor coefficients.
fn rate_fit_affine() -> Result<(), String> {
    let mesh = Mesh1D::uniform(1024, BoundaryCondition::Dirichlet).map_err(err)?;
    let map = DomainMap1D::new(1, 0.5, 2.0).map_err(err)?;
    let weights = map.weights();
    let hat = PdeData::constant(&mesh, 1.0, 1.0, 1.0, 0.0);
    let problem = ParametricProblem::new(map, hat, mesh, linear()).map_err(err)?;
    let sample = problem.sample(0, &[0.1], 6, 1e-12).map_err(err)?;
    let fit = gevrey_rate_fit(&sample.norms(&problem.oracle), &weights).map_err(err)?;
    ensure(fit.s <= 1.2, || format!("s_fit = {}", fit.s))
}
