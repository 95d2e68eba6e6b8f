//! Parametric domains for the model problem.
//!
//! The physical interval is `V[y](Ĝ)` with
//!
//! ```text
//! V[y](x) = x + Σ_{k ≤ p} y_k γ_k sin(kπx)/(kπ),   y ∈ [−1/2, 1/2]^p,
//! ```
//!
//! so `V′ = 1 + Σ y_k γ_k cos(kπx)` is affine in `y`. Pulling the problem
//! back to `(0, 1)` gives `Ã = â/V′`, `b̃ = V′ b̂`, `f̃ = V′ f̂`, `g̃ = ĝ`.
//! All dependence on `y` beyond first order sits in `1/V′`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::combinatorics::{ln_big, ln_factorial, multi_index_compositions, MultiIndex};
use crate::envelopes::{
    compose_parametric, implicit_envelope, log_ratio, GevreyEnvelope, ParametricEnvelope,
    StabilityConstant, WeightSequence,
};
use crate::error::{Error, Result};
use crate::implicit_diff::ResidualOracle;
use crate::linalg::{axpy, norm_inf, scaled};
use crate::pde1d::{Mesh1D, Nonlinearity, PdeConstants, PdeData, PdeOracle};

/// Largest supported number of active parameters.
pub const MAX_PARAMETERS: usize = 8;

/// Bi-Lipschitz constant of every admitted map: `V′ ∈ [1/2, 3/2]`.
pub const C_V: f64 = 2.0;

#[derive(Clone, Debug, PartialEq)]
pub struct DomainMap1D {
    gammas: Vec<f64>,
    c: f64,
    theta: f64,
}

impl DomainMap1D {
    /// `γ_k = c k^{−ϑ}` for `k = 1..=p`. Requires `Σ γ_k ≤ 1`, which keeps
    /// `V′` inside `[1/2, 3/2]` on the whole parameter box.
    pub fn new(p: usize, c: f64, theta: f64) -> Result<Self> {
        if p == 0 || p > MAX_PARAMETERS {
            return Err(Error::domain(format!("active dimension must be in 1..={MAX_PARAMETERS}")));
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::domain("weight constant c must be positive"));
        }
        if !(theta > 1.0) || !theta.is_finite() {
            return Err(Error::domain("decay exponent must exceed 1"));
        }
        let gammas: Vec<f64> = (1..=p).map(|k| c * (k as f64).powf(-theta)).collect();
        let total: f64 = gammas.iter().sum();
        if total > 1.0 {
            return Err(Error::Inadmissible(format!(
                "bi-Lipschitz margin violated: sum of weights {total} exceeds 1"
            )));
        }
        Ok(Self { gammas, c, theta })
    }

    pub fn dim(&self) -> usize {
        self.gammas.len()
    }

    pub fn gamma(&self, k: usize) -> f64 {
        self.gammas[k - 1]
    }

    pub fn weights(&self) -> WeightSequence {
        WeightSequence::algebraic(self.c, self.theta, self.dim()).expect("validated at construction")
    }

    /// `ψ_k′(x) = cos(kπx)`
    pub fn mode_slope(k: usize, x: f64) -> f64 {
        (k as f64 * std::f64::consts::PI * x).cos()
    }

    pub fn map(&self, y: &[f64], x: f64) -> f64 {
        x + self
            .gammas
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let kpi = (i + 1) as f64 * std::f64::consts::PI;
                y[i] * g * (kpi * x).sin() / kpi
            })
            .sum::<f64>()
    }

    /// `V′[y](x)`
    pub fn jacobian(&self, y: &[f64], x: f64) -> f64 {
        1.0 + self
            .gammas
            .iter()
            .enumerate()
            .map(|(i, g)| y[i] * g * Self::mode_slope(i + 1, x))
            .sum::<f64>()
    }

    pub fn check_parameter(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.dim() {
            return Err(Error::domain(format!("parameter needs {} entries", self.dim())));
        }
        if y.iter().any(|v| !(v.abs() <= 0.5)) {
            return Err(Error::domain("parameter outside the box [-1/2, 1/2]^p"));
        }
        Ok(())
    }
}

/// Pulled-back data `d̃[y]` with a cache of mixed partials `∂^α d̃[y]`.
#[derive(Clone, Debug)]
pub struct TildeData {
    pub y: Vec<f64>,
    pub data: PdeData,
    partials: BTreeMap<MultiIndex, PdeData>,
}

impl TildeData {
    pub fn partial(&self, alpha: &MultiIndex) -> Result<&PdeData> {
        if alpha.is_zero() {
            return Ok(&self.data);
        }
        self.partials
            .get(alpha)
            .ok_or_else(|| Error::contract(format!("data partial {alpha} not prepared")))
    }

    /// Fills the cache for every `α` with `|α| ≤ max_order`.
    pub fn prepare(&mut self, map: &DomainMap1D, hat: &PdeData, mesh: &Mesh1D, max_order: u32) {
        let all = MultiIndex::all_up_to_order(map.dim(), max_order);
        let recip = reciprocal_partials(map, mesh, &self.y, &all);
        for alpha in all.into_iter().filter(|a| !a.is_zero()) {
            let d = assemble_partial(map, hat, mesh, &alpha, &recip[&alpha]);
            self.partials.insert(alpha, d);
        }
    }
}

/// `d̃[y] = (â/V′, V′ b̂, V′ f̂, ĝ)`.
pub fn pullback(map: &DomainMap1D, hat: &PdeData, mesh: &Mesh1D, y: &[f64]) -> Result<TildeData> {
    map.check_parameter(y)?;
    hat.validate(mesh)?;
    let jac: Vec<f64> = mesh.quadrature_points().iter().map(|&x| map.jacobian(y, x)).collect();
    let data = PdeData {
        a: hat.a.iter().zip(&jac).map(|(a, j)| a / j).collect(),
        b: hat.b.iter().zip(&jac).map(|(b, j)| b * j).collect(),
        f: hat.f.iter().zip(&jac).map(|(f, j)| f * j).collect(),
        g: hat.g,
    };
    Ok(TildeData { y: y.to_vec(), data, partials: BTreeMap::new() })
}

/// `∂^α(1/V′)` at the quadrature points for every index in `indices`, from
/// `∂^α W = −W Σ_k α_k γ_k ψ_k′ ∂^{α−e_k} W` (differentiate `V′ W = 1`;
/// `V′` is affine in `y`). `indices` must be closed downward.
fn reciprocal_partials(
    map: &DomainMap1D,
    mesh: &Mesh1D,
    y: &[f64],
    indices: &[MultiIndex],
) -> BTreeMap<MultiIndex, Vec<f64>> {
    let xs = mesh.quadrature_points();
    let w: Vec<f64> = xs.iter().map(|&x| 1.0 / map.jacobian(y, x)).collect();
    let slopes: Vec<Vec<f64>> = (1..=map.dim())
        .map(|k| xs.iter().map(|&x| map.gamma(k) * DomainMap1D::mode_slope(k, x)).collect())
        .collect();
    let mut out: BTreeMap<MultiIndex, Vec<f64>> = BTreeMap::new();
    let mut sorted = indices.to_vec();
    sorted.sort_by_key(MultiIndex::order);
    for alpha in sorted {
        if alpha.is_zero() {
            out.insert(alpha, w.clone());
            continue;
        }
        let mut acc = vec![0.0; xs.len()];
        for (k, ak) in alpha.iter() {
            let lower = alpha.checked_sub(&MultiIndex::unit(k)).expect("k in support");
            let prev = &out[&lower];
            for q in 0..xs.len() {
                acc[q] -= f64::from(ak) * slopes[k - 1][q] * prev[q];
            }
        }
        for q in 0..xs.len() {
            acc[q] *= w[q];
        }
        out.insert(alpha, acc);
    }
    out
}

fn assemble_partial(
    map: &DomainMap1D,
    hat: &PdeData,
    mesh: &Mesh1D,
    alpha: &MultiIndex,
    recip: &[f64],
) -> PdeData {
    let nq = mesh.num_quadrature_points();
    let a = hat.a.iter().zip(recip).map(|(a, r)| a * r).collect();
    let (b, f) = if alpha.order() == 1 {
        let k = alpha.support().next().expect("order one");
        let slope: Vec<f64> = mesh
            .quadrature_points()
            .iter()
            .map(|&x| map.gamma(k) * DomainMap1D::mode_slope(k, x))
            .collect();
        (
            hat.b.iter().zip(&slope).map(|(b, s)| b * s).collect(),
            hat.f.iter().zip(&slope).map(|(f, s)| f * s).collect(),
        )
    } else {
        (vec![0.0; nq], vec![0.0; nq])
    };
    PdeData { a, b, f, g: 0.0 }
}

/// `∂^α d̃[y]`, exact.
pub fn data_map_partials(
    map: &DomainMap1D,
    hat: &PdeData,
    mesh: &Mesh1D,
    y: &[f64],
    alpha: &MultiIndex,
) -> Result<PdeData> {
    if alpha.max_coordinate() > map.dim() {
        return Err(Error::domain(format!("{alpha} touches an inactive coordinate")));
    }
    let tilde = pullback(map, hat, mesh, y)?;
    if alpha.is_zero() {
        return Ok(tilde.data);
    }
    let subs = alpha.sub_indices();
    let recip = reciprocal_partials(map, mesh, y, &subs);
    Ok(assemble_partial(map, hat, mesh, alpha, &recip[alpha]))
}

/// Mixed partials `∂^α û[y]` keyed by multi-index; the zero index holds `û[y]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParametricTable {
    pub y: Vec<f64>,
    entries: BTreeMap<MultiIndex, Vec<f64>>,
}

impl ParametricTable {
    pub fn new(y: Vec<f64>, solution: Vec<f64>) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert(MultiIndex::zero(), solution);
        Self { y, entries }
    }

    pub fn solution(&self) -> &[f64] {
        &self.entries[&MultiIndex::zero()]
    }

    pub fn get(&self, alpha: &MultiIndex) -> Option<&[f64]> {
        self.entries.get(alpha).map(Vec::as_slice)
    }

    pub fn insert(&mut self, alpha: MultiIndex, value: Vec<f64>) {
        self.entries.insert(alpha, value);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &[f64])> {
        self.entries.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `∂^α û[y]` for `α ≠ 0` from differentiating `R(d̃(y), û(y)) = 0`:
///
/// ```text
/// D₂R ∂^α û = −D₁R[∂^α d̃] − α! Σ_{r ≥ 2} 1/r! Σ_{β ∈ C(α, r)} D^rR[(∂^{β_j} d̃, ∂^{β_j} û)_j] / Π β_j!
/// ```
///
/// Every `∂^β û` with `β < α` must already be in `table`.
pub fn parametric_solution_derivative(
    oracle: &PdeOracle,
    tilde: &TildeData,
    table: &ParametricTable,
    alpha: &MultiIndex,
) -> Result<Vec<f64>> {
    if alpha.is_zero() {
        return Ok(table.solution().to_vec());
    }
    let d = &tilde.data;
    let u = table.solution();
    let n = alpha.order() as usize;
    let cap = oracle.max_derivative_order().unwrap_or(usize::MAX);
    let ln_alpha_fact = ln_big(&alpha.factorial());

    let mut rhs = oracle.apply_residual_derivative(d, u, &[(Some(tilde.partial(alpha)?), None)]);
    for r in 2..=n.min(cap) {
        let ln_r_fact = ln_factorial(r as u64);
        for comp in multi_index_compositions(alpha, r) {
            let mut args = Vec::with_capacity(r);
            let mut ln_w = ln_alpha_fact - ln_r_fact;
            for beta in &comp.parts {
                let state = table
                    .get(beta)
                    .ok_or_else(|| Error::contract(format!("missing lower-order entry {beta}")))?;
                args.push((Some(tilde.partial(beta)?), Some(state)));
                ln_w -= ln_big(&beta.factorial());
            }
            let term = oracle.apply_residual_derivative(d, u, &args);
            axpy(ln_w.exp(), &term, &mut rhs);
        }
    }
    if rhs.iter().all(|&v| v == 0.0) {
        return Ok(vec![0.0; u.len()]);
    }
    Ok(scaled(-1.0, &oracle.jacobian(d, u).solve(&rhs)?))
}

/// A parametric problem: domain family, reference data, mesh and nonlinearity.
#[derive(Clone, Debug)]
pub struct ParametricProblem {
    pub map: DomainMap1D,
    pub hat: PdeData,
    pub oracle: PdeOracle,
}

/// Everything measured at one parameter sample.
#[derive(Clone, Debug)]
pub struct ParametricSample {
    pub y_id: usize,
    pub tilde: TildeData,
    pub table: ParametricTable,
    pub constants: PdeConstants,
    pub newton_iterations: usize,
    pub residual_norm: f64,
}

impl ParametricSample {
    /// `(α, ‖∂^α û‖_{H¹})` for every table entry.
    pub fn norms(&self, oracle: &PdeOracle) -> Vec<(MultiIndex, f64)> {
        self.table.iter().map(|(a, v)| (a.clone(), oracle.h1_norm(v))).collect()
    }
}

impl ParametricProblem {
    pub fn new(map: DomainMap1D, hat: PdeData, mesh: Mesh1D, nl: Nonlinearity) -> Result<Self> {
        hat.validate(&mesh)?;
        let oracle = PdeOracle::new(mesh, nl)?;
        Ok(Self { map, hat, oracle })
    }

    pub fn mesh(&self) -> &Mesh1D {
        self.oracle.mesh()
    }

    /// `û[y]`, solved from `u0` (zero when absent).
    pub fn solve(&self, y: &[f64], u0: Option<&[f64]>, tol: f64) -> Result<Vec<f64>> {
        let tilde = pullback(&self.map, &self.hat, self.mesh(), y)?;
        let zero = vec![0.0; self.mesh().num_free()];
        Ok(self.oracle.newton_solve(&tilde.data, u0.unwrap_or(&zero), tol)?.u)
    }

    /// `c_A = min(1, ess-inf â) · c_V⁻³`, valid for every `y` in the box.
    pub fn coercivity(&self) -> f64 {
        self.hat.ess_inf_a().min(1.0) * C_V.powi(-3)
    }

    /// Solves at `y`, fills all `∂^α û[y]` with `|α| ≤ max_order` and
    /// estimates the local constants. Indices of equal order run in parallel.
    pub fn sample(&self, y_id: usize, y: &[f64], max_order: u32, tol: f64) -> Result<ParametricSample> {
        let mesh = self.mesh();
        let mut tilde = pullback(&self.map, &self.hat, mesh, y)?;
        tilde.prepare(&self.map, &self.hat, mesh, max_order);
        let zero = vec![0.0; mesh.num_free()];
        let sol = self.oracle.newton_solve(&tilde.data, &zero, tol)?;
        let constants = self.oracle.estimate_constants(&tilde.data, &sol.u, Some(self.coercivity()))?;
        let mut table = ParametricTable::new(y.to_vec(), sol.u);
        let all = MultiIndex::all_up_to_order(self.map.dim(), max_order);
        for order in 1..=u64::from(max_order) {
            let layer: Vec<&MultiIndex> = all.iter().filter(|a| a.order() == order).collect();
            let values: Vec<Result<Vec<f64>>> = layer
                .par_iter()
                .map(|a| parametric_solution_derivative(&self.oracle, &tilde, &table, a))
                .collect();
            for (a, v) in layer.into_iter().zip(values) {
                table.insert(a.clone(), v?);
            }
        }
        Ok(ParametricSample {
            y_id,
            tilde,
            table,
            constants,
            newton_iterations: sol.iterations,
            residual_norm: sol.residual_norm,
        })
    }

    /// Envelope of `y ↦ d̃[y]` for `|α| ≥ 1`: with `|∂^α(1/V′)| ≤ |α|! 2^{|α|+1} γ^α`,
    /// scale `max(2‖â‖, ‖b̂‖/2, ‖f̂‖/2)` and rate `c_V = 2`.
    pub fn data_envelope(&self) -> Result<ParametricEnvelope> {
        let scale = (2.0 * norm_inf(&self.hat.a))
            .max(0.5 * norm_inf(&self.hat.b))
            .max(0.5 * norm_inf(&self.hat.f));
        Ok(ParametricEnvelope {
            base: GevreyEnvelope::analytic(scale, C_V)?,
            weights: self.map.weights(),
        })
    }

    /// Composes the data envelope with the solution-map envelope built from
    /// the worst constants over `samples`. The scale is raised to cover
    /// `‖û[y]‖` itself and the rate is kept at least 1.
    pub fn composed_envelope(&self, samples: &[ParametricSample]) -> Result<ParametricEnvelope> {
        if samples.is_empty() {
            return Err(Error::domain("no parameter samples"));
        }
        let mut alpha: f64 = 1.0;
        let (mut sigma, mut digamma, mut sup_u): (f64, f64, f64) = (1.0, 1.0, 0.0);
        for s in samples {
            let c = &s.constants;
            alpha = alpha.max(c.alpha_guaranteed).max(c.alpha_measured);
            sigma = sigma.max(c.sigma);
            digamma = digamma.max(c.digamma);
            sup_u = sup_u.max(self.oracle.h1_norm(s.table.solution()));
        }
        let solution_map = implicit_envelope(
            StabilityConstant::new(alpha)?,
            &GevreyEnvelope::analytic(sigma, digamma)?,
        )?;
        let composed = compose_parametric(&self.data_envelope()?, &solution_map);
        Ok(ParametricEnvelope {
            base: GevreyEnvelope::new(
                composed.base.s,
                composed.base.scale.max(sup_u),
                composed.base.rate.max(1.0),
            )?,
            weights: composed.weights,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParametricBoundRow {
    pub alpha: String,
    pub y_id: usize,
    pub measured_norm: f64,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParametricBoundReport {
    pub rows: Vec<ParametricBoundRow>,
    pub passed: bool,
}

impl ParametricBoundReport {
    pub fn offending(&self) -> impl Iterator<Item = &ParametricBoundRow> {
        self.rows.iter().filter(|r| !(r.ratio <= 1.0))
    }
}

/// Checks `‖∂^α û[y]‖_{H¹} ≤ (|α|!)^s μ κ^{|α|} γ^α` for every sampled `y`
/// and every tabulated `α`.
pub fn verify_parametric_bounds(
    oracle: &PdeOracle,
    samples: &[ParametricSample],
    envelope: &ParametricEnvelope,
) -> ParametricBoundReport {
    let mut rows = Vec::new();
    for s in samples {
        for (alpha, norm) in s.norms(oracle) {
            let ln_b = envelope.ln_bound(&alpha);
            rows.push(ParametricBoundRow {
                alpha: alpha.to_string(),
                y_id: s.y_id,
                measured_norm: norm,
                bound: ln_b.exp(),
                ratio: log_ratio(norm, ln_b),
            });
        }
    }
    let passed = rows.iter().all(|r| r.ratio <= 1.0);
    ParametricBoundReport { rows, passed }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub s: f64,
    pub rate: f64,
    pub scale: f64,
}

/// Least-squares fit of `ln(‖∂^α u‖/γ^α) ≈ s ln|α|! + |α| ln ν + ln μ` over
/// entries with `|α| ≥ 1` and a positive norm.
pub fn gevrey_rate_fit(norms: &[(MultiIndex, f64)], weights: &WeightSequence) -> Result<RateFit> {
    let rows: Vec<(f64, f64, f64)> = norms
        .iter()
        .filter(|(a, n)| a.order() >= 1 && *n > 0.0)
        .map(|(a, n)| {
            let ord = a.order();
            (ln_factorial(ord), ord as f64, n.ln() - a.ln_weight_pow(|k| weights.weight(k)))
        })
        .collect();
    let mut orders: Vec<u64> = rows.iter().map(|r| r.1 as u64).collect();
    orders.sort_unstable();
    orders.dedup();
    if orders.len() < 3 {
        return Err(Error::Degenerate(
            "rate fit needs positive norms on at least three distinct orders".into(),
        ));
    }
    let x = DMatrix::from_fn(rows.len(), 3, |i, j| match j {
        0 => rows[i].0,
        1 => rows[i].1,
        _ => 1.0,
    });
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.2));
    let svd = x.svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-12 * smax {
        return Err(Error::Degenerate("rate fit design matrix is rank deficient".into()));
    }
    let coef = svd
        .solve(&b, 1e-14 * smax)
        .map_err(|e| Error::Degenerate(e.to_string()))?;
    Ok(RateFit { s: coef[0], rate: coef[1].exp(), scale: coef[2].exp() })
}
