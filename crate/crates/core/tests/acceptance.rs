//! Acceptance suite. Prints one PASS/FAIL line per criterion; run with
//! `cargo test -p gevrey-kit --test acceptance -- --nocapture`.

use std::process::Command;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gevrey_kit::combinatorics::{
    binomial, composition_identity_check, compositions, factorial_inequality_check, ln_big,
    ln_kappa_asymptotic, schroeder_hipparchus_by_compositions, schroeder_hipparchus_sequence,
    MultiIndex, C_KAPPA,
};
use gevrey_kit::envelopes::{
    compose_envelopes, compose_parametric, implicit_envelope, lemma_bound, GevreyEnvelope,
    ParametricEnvelope, StabilityConstant, WeightSequence,
};
use gevrey_kit::implicit_diff::{
    derivative_table, extend_table, finite_difference_check, higher_derivative,
    higher_derivative_literal, richardson_steps, Direction, NewtonOptions, PolynomialOracle,
    ResidualOracle,
};
use gevrey_kit::parametric::{DomainMap1D, ParametricProblem};
use gevrey_kit::pde1d::{BoundaryCondition, Mesh1D, Nonlinearity, PdeData, PdeOracle};

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s(e: gevrey_kit::Error) -> String {
    e.to_string()
}

fn rel_gap(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let diff = a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn cubic() -> Nonlinearity {
    Nonlinearity::polynomial(vec![0.0, 0.0, 1.0], None).unwrap()
}

fn c1_combinatorial_exactness() -> Outcome {
    let seq = schroeder_hipparchus_sequence(12);
    for n in 1..=12 {
        let en = schroeder_hipparchus_by_compositions(n).map_err(e2s)?;
        ensure(en == seq[n - 1], || format!("n = {n}: enumeration {en}, recursion {}", seq[n - 1]))?;
    }
    for (n, want) in [(3, 3u32), (4, 11), (5, 45), (10, 103_049)] {
        ensure(seq[n - 1] == BigUint::from(want), || format!("kappa_{n} = {}", seq[n - 1]))?;
    }
    Ok("kappa_1..12 agree; kappa_3,4,5,10 = 3, 11, 45, 103049".into())
}

fn c2_growth_bound() -> Outcome {
    let seq = schroeder_hipparchus_sequence(501);
    let ln_c = C_KAPPA.ln();
    for n in 1..=500 {
        let (k, next) = (&seq[n - 1], &seq[n]);
        // κ_{n+1} ≤ (3+√8) κ_n  ⟺  κ_{n+1} − 3κ_n ≤ √8 κ_n, squared when positive.
        let three_k = k * 3u32;
        if next > &three_k {
            let d = next - &three_k;
            ensure(&d * &d <= k * k * 8u32, || format!("exact check fails at n = {n}"))?;
        }
        let ln_ratio = ln_big(next) - ln_big(k);
        ensure(ln_ratio <= ln_c + 1e-12, || format!("log check fails at n = {n}"))?;
    }
    let asym = (ln_big(&seq[499]) - ln_kappa_asymptotic(500)).exp();
    ensure((0.9..=1.1).contains(&asym), || format!("asymptotic ratio {asym}"))?;
    Ok(format!("ratio ≤ 3+√8 for n ≤ 500; kappa_500 / asymptotic = {asym:.6}"))
}

fn c3_identities() -> Outcome {
    for n in 1..=8 {
        for r in 1..=n {
            for c in compositions(n, r) {
                ensure(factorial_inequality_check(&c), || format!("factorial inequality fails for {:?}", c.parts))?;
            }
        }
    }
    let mut checked = 0;
    for alpha in MultiIndex::all_up_to_order(3, 6).into_iter().filter(|a| !a.is_zero()) {
        for r in 1..=alpha.order() as usize {
            ensure(composition_identity_check(&alpha, r), || format!("identity fails for {alpha}, r = {r}"))?;
            checked += 1;
        }
    }
    for n in 1..=10usize {
        for r in 1..=n {
            let count = compositions(n, r).len();
            ensure(BigUint::from(count) == binomial(n as u64 - 1, r as u64 - 1), || {
                format!("|C({n},{r})| = {count}")
            })?;
        }
    }
    Ok(format!("{checked} multi-index identity cases, factorial inequality n ≤ 8, counts n ≤ 10"))
}

/// Coefficients of the inverse series of `d = u + u³` by Lagrange inversion:
/// `[dⁿ]u = (1/n) [u^{n−1}] (1+u²)^{−n}`.
fn inverse_series_derivative(n: u64) -> f64 {
    if n.is_multiple_of(2) {
        return 0.0;
    }
    let m = (n - 1) / 2;
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    let coeff = sign * binomial(n + m - 1, m).to_f64().unwrap() / n as f64;
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    coeff * fact
}

fn c4_scalar_recursion() -> Outcome {
    let oracle = PolynomialOracle::scalar_cubic();
    let t = derivative_table(&oracle, &[0.0], &[0.0], vec![vec![1.0]], 5, NewtonOptions::default())
        .map_err(e2s)?;
    let mut worst: f64 = 0.0;
    for n in 1..=5u64 {
        let got = t.get(&vec![0; n as usize]).ok_or("missing entry")?[0];
        let want = inverse_series_derivative(n);
        let err = (got - want).abs() / want.abs().max(1.0);
        ensure(err <= 1e-10, || format!("order {n}: {got} vs {want}"))?;
        worst = worst.max(err);
    }
    let first_three: Vec<f64> = (1..=3).map(|n| t.get(&vec![0; n]).unwrap()[0]).collect();
    ensure(first_three == [1.0, 0.0, -6.0] || rel_gap(&first_three, &[1.0, 0.0, -6.0]) < 1e-12, || {
        format!("D1..3 S = {first_three:?}")
    })?;
    Ok(format!("orders 1-5 match series inversion, worst relative error {worst:.1e}"))
}

fn c5_collapsed_vs_literal() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Three scalar variables: one data, two state.
        let oracle = PolynomialOracle::random(1, 2, 4, 6, &mut rng);
        let dirs: Vec<Vec<f64>> = (0..3).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect();
        let d = [rng.gen_range(-0.2..0.2)];
        let mut table = derivative_table(&oracle, &d, &[0.0, 0.0], dirs, 3, NewtonOptions::default())
            .map_err(e2s)?;
        extend_table(&oracle, &mut table, 4).map_err(e2s)?;
        for key in [vec![0, 1], vec![1, 1], vec![0, 1, 2], vec![2, 2, 0], vec![0, 1, 2, 2], vec![1, 1, 1, 1]] {
            let a = higher_derivative(&oracle, &table, &key).map_err(e2s)?;
            let b = higher_derivative_literal(&oracle, &table, &key).map_err(e2s)?;
            let g = rel_gap(&a, &b);
            ensure(g <= 1e-12, || format!("seed {seed}, key {key:?}: relative gap {g:e}"))?;
            worst = worst.max(g);
        }
    }
    Ok(format!("5 random oracles, n = 2,3,4, worst relative gap {worst:.1e}"))
}

fn c6_pde_derivatives() -> Outcome {
    let mesh = Mesh1D::uniform(256, BoundaryCondition::Dirichlet).map_err(e2s)?;
    let map = DomainMap1D::new(2, 0.6, 1.2).map_err(e2s)?;
    let hat = PdeData::constant(&mesh, 1.0, 1.0, 20.0, 0.0);
    let problem = ParametricProblem::new(map, hat, mesh, cubic()).map_err(e2s)?;
    let y0 = [0.0, 0.0];
    let sample = problem.sample(0, &y0, 3, 1e-13).map_err(e2s)?;
    let base = sample.table.solution().to_vec();
    let solve = |y: &[f64]| problem.solve(y, Some(&base), 1e-13);
    let steps = richardson_steps(0.15, 3);
    let units: [&[f64]; 2] = [&[1.0, 0.0], &[0.0, 1.0]];
    let o = &problem.oracle;
    let mut worst_ind: f64 = 0.0;
    let mut checked = 0;
    for alpha in MultiIndex::all_up_to_order(2, 3).into_iter().filter(|a| !a.is_zero()) {
        let dirs: Vec<&[f64]> = alpha.to_coordinates().iter().map(|&k| units[k - 1]).collect();
        let fd = finite_difference_check(solve, &y0, &dirs, &steps).map_err(e2s)?;
        let rec = sample.table.get(&alpha).ok_or("missing entry")?;
        let diff: Vec<f64> = rec.iter().zip(&fd.estimate).map(|(a, b)| a - b).collect();
        let (gap, ind, size) = (o.h1_norm(&diff), o.h1_norm(&fd.indicator), o.h1_norm(rec));
        ensure(gap <= ind, || format!("{alpha}: gap {gap:e} exceeds indicator {ind:e}"))?;
        ensure(ind <= 1e-4 * size, || format!("{alpha}: indicator {ind:e} vs norm {size:e}"))?;
        worst_ind = worst_ind.max(ind / size);
        checked += 1;
    }
    Ok(format!("{checked} indices within the FD indicator; worst relative indicator {worst_ind:.1e}"))
}

fn c7_bound_compliance() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("verify.json");
    let csv = dir.path().join("bounds.csv");
    std::fs::write(
        &cfg,
        r#"{"mesh_n": 256, "p": 4, "c": 0.5, "vartheta": 2.0, "max_order": 4, "y_samples": 5, "seed": 2024,
            "nonlinearity": {"kind": "polynomial", "coefficients": [0, 0, 1]}}"#,
    )
    .map_err(|e| e.to_string())?;
    let status = Command::new(env!("CARGO_BIN_EXE_gevrey-kit"))
        .args(["verify-bounds", "--config"])
        .arg(&cfg)
        .arg("--output")
        .arg(&csv)
        .status()
        .map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(&csv).map_err(|e| e.to_string())?;
    let rows: Vec<&str> = text.lines().skip(1).collect();
    let (mut max_ratio, mut max_higher): (f64, f64) = (0.0, 0.0);
    for row in &rows {
        let ratio: f64 = row.rsplit(',').next().unwrap().parse().map_err(|_| format!("bad row {row}"))?;
        max_ratio = max_ratio.max(ratio);
        if !row.starts_with("0,") {
            max_higher = max_higher.max(ratio);
        }
    }
    ensure(status.code() == Some(0), || format!("exit status {status}, max ratio {max_ratio:e}"))?;
    ensure(rows.len() == 5 * 70, || format!("{} rows", rows.len()))?;
    ensure(max_ratio <= 1.0, || format!("max ratio {max_ratio:e}"))?;
    Ok(format!(
        "{} rows, max ratio {max_ratio:.3e} (order ≥ 1: {max_higher:.3e}), exit 0",
        rows.len()
    ))
}

fn random_data(mesh: &Mesh1D, rng: &mut ChaCha8Rng) -> PdeData {
    let (a0, a1, b0, f0, f1) = (
        rng.gen_range(0.5..2.0),
        rng.gen_range(-0.4..0.4),
        rng.gen_range(0.0..2.0),
        rng.gen_range(-5.0..5.0),
        rng.gen_range(-5.0..5.0),
    );
    let k = rng.gen_range(1..4) as f64;
    let g = if mesh.right_bc() == BoundaryCondition::Neumann { rng.gen_range(-1.0..1.0) } else { 0.0 };
    PdeData::from_fns(
        mesh,
        |x| a0 + a1 * (k * std::f64::consts::PI * x).sin(),
        |x| b0 * (1.0 + x),
        |x| f0 + f1 * x * x,
        g,
    )
}

fn c8_monotone_solvability() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_probe = f64::INFINITY;
    for draw in 0..20 {
        let bc = if draw % 2 == 0 { BoundaryCondition::Dirichlet } else { BoundaryCondition::Neumann };
        let mesh = Mesh1D::uniform(rng.gen_range(32..128), bc).map_err(e2s)?;
        let nl = if draw % 3 == 0 {
            Nonlinearity::tanh_shifted()
        } else {
            Nonlinearity::polynomial(vec![rng.gen_range(0.0..1.0), 0.0, rng.gen_range(0.1..2.0)], None)
                .map_err(e2s)?
        };
        let oracle = PdeOracle::new(mesh.clone(), nl).map_err(e2s)?;
        let data = random_data(&mesh, &mut rng);
        let zero = vec![0.0; oracle.state_dim()];
        let sol = oracle.newton_solve(&data, &zero, 1e-12).map_err(e2s)?;
        ensure(sol.residual_norm <= 1e-12, || format!("draw {draw}: residual {:e}", sol.residual_norm))?;
        ensure(sol.a_priori.holds, || format!("draw {draw}: a priori bound {:?}", sol.a_priori))?;
        let c_pf = oracle.poincare_friedrichs().map_err(e2s)?;
        let c_a = data.ess_inf_a().min(1.0);
        for _ in 0..5 {
            let u1: Vec<f64> = (0..oracle.state_dim()).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let u2: Vec<f64> = (0..oracle.state_dim()).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let r1 = oracle.assemble_residual(&data, &u1);
            let r2 = oracle.assemble_residual(&data, &u2);
            let du: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| a - b).collect();
            let lhs: f64 = r1.iter().zip(&r2).zip(&du).map(|((a, b), d)| (a - b) * d).sum();
            let rhs = c_a / (c_pf * c_pf) * oracle.h1_norm(&du).powi(2);
            ensure(lhs >= rhs * (1.0 - 1e-12), || format!("draw {draw}: monotonicity {lhs:e} < {rhs:e}"))?;
            worst_probe = worst_probe.min(lhs / rhs);
        }
    }
    Ok(format!("20 draws converge; a priori bound holds; min monotonicity ratio {worst_probe:.3}"))
}

fn c9_degenerate_cases() -> Outcome {
    let affine = PolynomialOracle::affine(&[2.0, -1.0, 0.5, 1.0], &[[3.0, 1.0], [0.5, 2.0]], &[0.1, -0.3])
        .map_err(e2s)?;
    let t = derivative_table(
        &affine,
        &[0.3, -0.7],
        &[0.0, 0.0],
        vec![vec![1.0, 0.0], vec![0.2, 1.0]],
        5,
        NewtonOptions::default(),
    )
    .map_err(e2s)?;
    for (key, v) in t.iter().filter(|(k, _)| k.len() >= 2) {
        ensure(v.iter().all(|&x| x == 0.0), || format!("entry {key:?} = {v:?}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for degree in 1..=5usize {
        let theta: Vec<f64> = (0..degree).map(|j| if j + 1 == degree || j == 0 { 1.0 } else { 0.0 }).collect();
        let nl = match Nonlinearity::polynomial(theta, None) {
            Ok(nl) => nl,
            Err(_) => continue, // even degrees are not monotone
        };
        let mesh = Mesh1D::uniform(16, BoundaryCondition::Neumann).map_err(e2s)?;
        let oracle = PdeOracle::new(mesh.clone(), nl).map_err(e2s)?;
        let d = random_data(&mesh, &mut rng).to_vector();
        let u: Vec<f64> = (0..oracle.state_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dirs: Vec<(Vec<f64>, Vec<f64>)> = (0..degree + 3)
            .map(|_| {
                (
                    (0..oracle.data_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    (0..oracle.state_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                )
            })
            .collect();
        for r in degree + 2..=degree + 3 {
            let args: Vec<Direction<'_>> = dirs[..r].iter().map(|(a, b)| Direction::joint(a, b)).collect();
            let v = oracle.apply_derivative(&d, &u, &args);
            ensure(v.iter().all(|&x| x == 0.0), || format!("degree {degree}, r = {r}: nonzero"))?;
        }
    }
    Ok("affine: every entry of order ≥ 2 is exactly 0; PDE D^rR ≡ 0 for r ≥ J+2".into())
}

fn c10_envelope_algebra() -> Outcome {
    let mut cases = 0;
    for &alpha in &[1.0, 1.5, 2.0, 5.0] {
        for &sigma in &[1.0, 3.0, 10.0] {
            for &digamma in &[1.0, 2.0, 4.0] {
                for &s in &[1.0, 1.5, 2.0] {
                    let env_r = GevreyEnvelope::new(s, sigma, digamma).map_err(e2s)?;
                    let a = StabilityConstant::new(alpha).map_err(e2s)?;
                    let env_s = implicit_envelope(a, &env_r).map_err(e2s)?;
                    for n in 1..=50u64 {
                        let lb = lemma_bound(n, a, &env_r).map_err(e2s)?;
                        let eb = env_s.ln_bound(n);
                        ensure(lb <= eb + 1e-9 * eb.abs().max(1.0), || {
                            format!("alpha {alpha}, sigma {sigma}, digamma {digamma}, s {s}, n {n}")
                        })?;
                        cases += 1;
                    }
                }
            }
        }
    }
    let unit = GevreyEnvelope::analytic(1.0, 1.0).map_err(e2s)?;
    let c = compose_envelopes(&unit, &unit);
    ensure((c.scale - 0.5).abs() < 1e-15 && (c.rate - 2.0).abs() < 1e-15, || format!("{c:?}"))?;
    let weights = WeightSequence::algebraic(0.7, 1.5, 4).map_err(e2s)?;
    let p = compose_parametric(&ParametricEnvelope { base: unit, weights: weights.clone() }, &unit);
    ensure((p.base.scale - 0.5).abs() < 1e-15 && (p.base.rate - 2.0).abs() < 1e-15, || format!("{p:?}"))?;
    ensure(p.weights == weights, || "weights changed".into())?;
    Ok(format!("{cases} grid cases dominated; identity-point compositions give (1/2, 2)"))
}

#[test]
fn acceptance() {
    let criteria = [
        Criterion { id: 1, name: "combinatorial exactness", limit: Duration::from_secs(1), run: c1_combinatorial_exactness },
        Criterion { id: 2, name: "growth-constant bound", limit: Duration::from_secs(5), run: c2_growth_bound },
        Criterion { id: 3, name: "identity suite", limit: Duration::from_secs(10), run: c3_identities },
        Criterion { id: 4, name: "scalar recursion vs series", limit: Duration::from_secs(1), run: c4_scalar_recursion },
        Criterion { id: 5, name: "collapsed vs literal", limit: Duration::from_secs(5), run: c5_collapsed_vs_literal },
        Criterion { id: 6, name: "PDE derivatives vs FD", limit: Duration::from_secs(60), run: c6_pde_derivatives },
        Criterion { id: 7, name: "bound compliance", limit: Duration::from_secs(300), run: c7_bound_compliance },
        Criterion { id: 8, name: "monotone solvability", limit: Duration::from_secs(60), run: c8_monotone_solvability },
        Criterion { id: 9, name: "degenerate and affine cases", limit: Duration::from_secs(1), run: c9_degenerate_cases },
        Criterion { id: 10, name: "envelope algebra", limit: Duration::from_secs(1), run: c10_envelope_algebra },
    ];
    let mut failed = Vec::new();
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > c.limit => Err(format!("{detail}; took {elapsed:.2?}, limit {:?}", c.limit)),
            other => other,
        };
        match &outcome {
            Ok(detail) => println!("PASS [{:>2}] {} ({elapsed:.2?}): {detail}", c.id, c.name),
            Err(why) => {
                println!("FAIL [{:>2}] {} ({elapsed:.2?}): {why}", c.id, c.name);
                failed.push(c.id);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

#[test]
fn big_integer_sanity() {
    // Guards the helpers the suite relies on.
    assert!(BigUint::one() > BigUint::zero());
    assert_eq!(inverse_series_derivative(3), -6.0);
    assert_eq!(inverse_series_derivative(5), 360.0);
}
