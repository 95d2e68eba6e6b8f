//! Arbitrary-order derivatives of an implicitly defined solution map.
//!
//! Given a residual `R(d, u)` and a point with `R(d, u) = 0`, the local
//! solution map `S` with `R(d, S(d)) = 0` has derivatives
//!
//! ```text
//! DS(d)[h]          = −(D₂R)⁻¹ D₁R[h]
//! DⁿS(d)[h_1..h_n]  = −(D₂R)⁻¹ Σ_{π, |π| ≥ 2} D^{|π|}R[(Id_B, S_B) for B ∈ π]
//! ```
//!
//! where `π` ranges over set partitions of `{1, …, n}`, `(Id_B, S_B)` is
//! `(h_k, DS[h_k])` for a singleton `B = {k}` and `(0, D^{|B|}S[h_B])` otherwise.
//! Derivatives of the identity of order two or more vanish, which is why
//! larger blocks carry no data component.

mod fd;
mod polynomial;

use std::collections::BTreeMap;

use itertools::Itertools;
use rayon::prelude::*;

pub use fd::{finite_difference_check, richardson_steps, FdEstimate};
pub use polynomial::{Monomial, PolynomialOracle};

use crate::combinatorics::{compositions, factorial, set_partitions, MultiIndex};
use crate::error::{Error, Result};
use crate::linalg::{axpy, norm_inf, scaled};
use num_traits::ToPrimitive;

/// One argument `(δd, δu)` of a multilinear derivative. `None` is zero.
#[derive(Clone, Copy, Debug, Default)]
pub struct Direction<'a> {
    pub data: Option<&'a [f64]>,
    pub state: Option<&'a [f64]>,
}

impl<'a> Direction<'a> {
    pub fn data(d: &'a [f64]) -> Self {
        Self { data: Some(d), state: None }
    }

    pub fn state(u: &'a [f64]) -> Self {
        Self { data: None, state: Some(u) }
    }

    pub fn joint(d: &'a [f64], u: &'a [f64]) -> Self {
        Self { data: Some(d), state: Some(u) }
    }
}

/// A residual map `R : D × U → 𝓡` together with its multilinear derivatives
/// and a solver for the state linearization.
///
/// Implementations must be usable from several threads at once.
pub trait ResidualOracle: Sync {
    fn data_dim(&self) -> usize;
    fn state_dim(&self) -> usize;

    /// `R(d, u)`
    fn eval(&self, d: &[f64], u: &[f64]) -> Vec<f64>;

    /// `D^r R(d, u)[(δd_1, δu_1), …, (δd_r, δu_r)]` with `r = args.len() ≥ 1`.
    /// Must be symmetric in its arguments and linear in each.
    fn apply_derivative(&self, d: &[f64], u: &[f64], args: &[Direction<'_>]) -> Vec<f64>;

    /// `(D₂R(d, u))⁻¹ rhs`
    fn solve_linearized(&self, d: &[f64], u: &[f64], rhs: &[f64]) -> Result<Vec<f64>>;

    /// Order beyond which every `D^r R` vanishes identically, if any.
    fn max_derivative_order(&self) -> Option<usize> {
        None
    }

    /// Norm on the residual space used for convergence tests.
    fn residual_norm(&self, r: &[f64]) -> f64 {
        norm_inf(r)
    }

    fn state_norm(&self, u: &[f64]) -> f64 {
        norm_inf(u)
    }

    fn data_norm(&self, d: &[f64]) -> f64 {
        norm_inf(d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iterations: 100,
            max_halvings: 30,
        }
    }
}

impl NewtonOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonSolution {
    pub state: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
}

/// Damped Newton iteration for `R(d, u) = 0` starting from `u0`.
///
/// Each step is halved while the residual norm fails to decrease.
pub fn solve_residual<O: ResidualOracle + ?Sized>(
    oracle: &O,
    d: &[f64],
    u0: &[f64],
    opts: NewtonOptions,
) -> Result<NewtonSolution> {
    if u0.len() != oracle.state_dim() || d.len() != oracle.data_dim() {
        return Err(Error::domain("dimension mismatch in solve_residual"));
    }
    let mut u = u0.to_vec();
    let mut r = oracle.eval(d, &u);
    let mut norm = oracle.residual_norm(&r);
    let mut iterations = 0;
    while !(norm <= opts.tol) {
        if iterations == opts.max_iterations || !norm.is_finite() {
            return Err(Error::NonConvergence { iterations, residual_norm: norm });
        }
        iterations += 1;
        let step = oracle.solve_linearized(d, &u, &r)?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let mut trial = u.clone();
            axpy(-t, &step, &mut trial);
            let r_trial = oracle.eval(d, &trial);
            let n_trial = oracle.residual_norm(&r_trial);
            if n_trial < norm {
                u = trial;
                r = r_trial;
                norm = n_trial;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NonConvergence { iterations, residual_norm: norm });
        }
    }
    Ok(NewtonSolution { state: u, iterations, residual_norm: norm })
}

/// `DS(d)[h] = −(D₂R)⁻¹ D₁R[h]` at a solution `u = S(d)`.
pub fn first_derivative<O: ResidualOracle + ?Sized>(
    oracle: &O,
    d: &[f64],
    u: &[f64],
    h: &[f64],
) -> Result<Vec<f64>> {
    let rhs = oracle.apply_derivative(d, u, &[Direction::data(h)]);
    Ok(scaled(-1.0, &oracle.solve_linearized(d, u, &rhs)?))
}

/// Memoized derivatives `D^k S(d)[h_{i_1}, …, h_{i_k}]` keyed by the sorted
/// multiset of direction indices `[i_1 ≤ … ≤ i_k]` (0-based).
#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeTable {
    pub data: Vec<f64>,
    pub solution: Vec<f64>,
    pub directions: Vec<Vec<f64>>,
    entries: BTreeMap<Vec<usize>, Vec<f64>>,
}

impl DerivativeTable {
    /// A table holding only the base point; the empty key maps to `u`.
    pub fn new(data: Vec<f64>, solution: Vec<f64>, directions: Vec<Vec<f64>>) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert(Vec::new(), solution.clone());
        Self { data, solution, directions, entries }
    }

    pub fn get(&self, key: &[usize]) -> Option<&[f64]> {
        if key.windows(2).all(|w| w[0] <= w[1]) {
            self.entries.get(key).map(Vec::as_slice)
        } else {
            let mut k = key.to_vec();
            k.sort_unstable();
            self.entries.get(&k).map(Vec::as_slice)
        }
    }

    fn require(&self, key: &[usize]) -> Result<&[f64]> {
        self.get(key).ok_or_else(|| {
            Error::contract(format!("missing lower-order entry {}", direction_label(key)))
        })
    }

    pub fn insert(&mut self, mut key: Vec<usize>, value: Vec<f64>) {
        key.sort_unstable();
        self.entries.insert(key, value);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[usize], &[f64])> {
        self.entries.iter().map(|(k, v)| (k.as_slice(), v.as_slice()))
    }

    pub fn max_order(&self) -> usize {
        self.entries.keys().map(Vec::len).max().unwrap_or(0)
    }
}

/// `[0, 0, 2] → "2h1+h3"`, the empty key is `"0"`.
pub fn direction_label(key: &[usize]) -> String {
    let coords: Vec<usize> = key.iter().map(|k| k + 1).collect();
    MultiIndex::from_coordinates(&coords)
        .map(|m| m.to_string().replace('e', "h"))
        .unwrap_or_else(|_| format!("{key:?}"))
}

fn check_key(table: &DerivativeTable, key: &[usize]) -> Result<()> {
    if let Some(&k) = key.iter().find(|&&k| k >= table.directions.len()) {
        return Err(Error::domain(format!("direction index {k} out of range")));
    }
    Ok(())
}

/// `D^n S(d)[h_key]` for `n = key.len() ≥ 2` by the set-partition recursion.
///
/// Every entry for a proper sub-multiset of `key` must already be in `table`.
pub fn higher_derivative<O: ResidualOracle + ?Sized>(
    oracle: &O,
    table: &DerivativeTable,
    key: &[usize],
) -> Result<Vec<f64>> {
    let n = key.len();
    if n < 2 {
        return Err(Error::domain("higher_derivative needs at least two directions"));
    }
    check_key(table, key)?;
    let (d, u) = (&table.data, &table.solution);
    let cap = oracle.max_derivative_order().unwrap_or(usize::MAX);
    let mut acc = vec![0.0; oracle.state_dim()];
    let mut any = false;
    for partition in set_partitions(n, 2) {
        if partition.num_blocks() > cap {
            continue;
        }
        let mut sub_keys: Vec<Vec<usize>> = Vec::with_capacity(partition.num_blocks());
        for block in &partition.blocks {
            let mut k: Vec<usize> = block.iter().map(|&i| key[i]).collect();
            k.sort_unstable();
            sub_keys.push(k);
        }
        let mut args = Vec::with_capacity(sub_keys.len());
        for k in &sub_keys {
            let state = table.require(k)?;
            args.push(if k.len() == 1 {
                Direction::joint(&table.directions[k[0]], state)
            } else {
                Direction::state(state)
            });
        }
        axpy(1.0, &oracle.apply_derivative(d, u, &args), &mut acc);
        any = true;
    }
    if !any || acc.iter().all(|&v| v == 0.0) {
        return Ok(vec![0.0; oracle.state_dim()]);
    }
    Ok(scaled(-1.0, &oracle.solve_linearized(d, u, &acc)?))
}

/// Reference evaluation of the same derivative through the full sum over
/// permutations `σ ∈ Π_n`, block counts `r` and compositions `i ∈ C(n, r)`,
/// with the `1/r!` and `1/i_j!` weights. Costs `n!` terms; meant for `n ≤ 4`.
pub fn higher_derivative_literal<O: ResidualOracle + ?Sized>(
    oracle: &O,
    table: &DerivativeTable,
    key: &[usize],
) -> Result<Vec<f64>> {
    let n = key.len();
    if n < 2 {
        return Err(Error::domain("higher_derivative needs at least two directions"));
    }
    check_key(table, key)?;
    let (d, u) = (&table.data, &table.solution);
    let mut acc = vec![0.0; oracle.state_dim()];
    for sigma in (0..n).permutations(n) {
        for r in 2..=n {
            let r_fact = factorial(r as u64).to_f64().expect("small factorial");
            for comp in compositions(n, r) {
                let mut owned: Vec<(Option<Vec<f64>>, Vec<f64>)> = Vec::with_capacity(r);
                let mut start = 0;
                for &len in &comp.parts {
                    let k: Vec<usize> = sigma[start..start + len].iter().map(|&i| key[i]).collect();
                    start += len;
                    let w = 1.0 / factorial(len as u64).to_f64().expect("small factorial");
                    let state = scaled(w, table.require(&k)?);
                    let data = (len == 1).then(|| scaled(w, &table.directions[k[0]]));
                    owned.push((data, state));
                }
                let args: Vec<Direction<'_>> = owned
                    .iter()
                    .map(|(dd, uu)| Direction { data: dd.as_deref(), state: Some(uu) })
                    .collect();
                axpy(1.0 / r_fact, &oracle.apply_derivative(d, u, &args), &mut acc);
            }
        }
    }
    if acc.iter().all(|&v| v == 0.0) {
        return Ok(vec![0.0; oracle.state_dim()]);
    }
    Ok(scaled(-1.0, &oracle.solve_linearized(d, u, &acc)?))
}

/// Solves `R(d, u) = 0` from `u0` and fills a table with every derivative
/// `D^k S(d)[h_key]` over sorted multisets `key` of direction indices with
/// `1 ≤ |key| ≤ max_order`.
///
/// Orders are computed in sequence; entries of the same order run in
/// parallel and the result is independent of the thread count.
pub fn derivative_table<O: ResidualOracle + ?Sized>(
    oracle: &O,
    d: &[f64],
    u0: &[f64],
    directions: Vec<Vec<f64>>,
    max_order: usize,
    opts: NewtonOptions,
) -> Result<DerivativeTable> {
    if directions.iter().any(|h| h.len() != oracle.data_dim()) {
        return Err(Error::domain("direction length differs from data dimension"));
    }
    let sol = solve_residual(oracle, d, u0, opts)?;
    let mut table = DerivativeTable::new(d.to_vec(), sol.state, directions);
    extend_table(oracle, &mut table, max_order)?;
    Ok(table)
}

/// Adds all entries of orders `1..=max_order` missing from `table`.
pub fn extend_table<O: ResidualOracle + ?Sized>(
    oracle: &O,
    table: &mut DerivativeTable,
    max_order: usize,
) -> Result<()> {
    let m = table.directions.len();
    for order in 1..=max_order {
        let keys: Vec<Vec<usize>> = (0..m)
            .combinations_with_replacement(order)
            .filter(|k| table.get(k).is_none())
            .collect();
        let values: Vec<Result<Vec<f64>>> = keys
            .par_iter()
            .map(|k| {
                if order == 1 {
                    first_derivative(oracle, &table.data, &table.solution, &table.directions[k[0]])
                } else {
                    higher_derivative(oracle, table, k)
                }
            })
            .collect();
        for (k, v) in keys.into_iter().zip(values) {
            table.insert(k, v?);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newton_closed_forms() {
        let q = PolynomialOracle::scalar_quadratic();
        let s = solve_residual(&q, &[3.0], &[0.0], NewtonOptions::default()).unwrap();
        assert!((s.state[0] - 9.0).abs() < 1e-12);

        let c = PolynomialOracle::scalar_cubic();
        let s = solve_residual(&c, &[2.0], &[0.0], NewtonOptions::default()).unwrap();
        assert!((s.state[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn newton_reports_nonconvergence() {
        // u² + 1 = 0 has no real root.
        let o = PolynomialOracle::new(
            1,
            1,
            vec![vec![Monomial::new(1.0, vec![0, 2]), Monomial::new(1.0, vec![0, 0])]],
        )
        .unwrap();
        let err = solve_residual(&o, &[0.0], &[0.5], NewtonOptions::default()).unwrap_err();
        match err {
            Error::NonConvergence { residual_norm, .. } => assert!(residual_norm >= 1.0),
            Error::Singular(_) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn first_derivative_examples() {
        let q = PolynomialOracle::scalar_quadratic();
        assert!((first_derivative(&q, &[3.0], &[9.0], &[1.0]).unwrap()[0] - 6.0).abs() < 1e-12);
        let c = PolynomialOracle::scalar_cubic();
        assert!((first_derivative(&c, &[0.0], &[0.0], &[1.0]).unwrap()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn second_derivative_quadratic() {
        let q = PolynomialOracle::scalar_quadratic();
        let t = derivative_table(&q, &[3.0], &[0.0], vec![vec![1.0]], 3, NewtonOptions::default())
            .unwrap();
        assert!((t.get(&[0, 0]).unwrap()[0] - 2.0).abs() < 1e-12);
        assert!(t.get(&[0, 0, 0]).unwrap()[0].abs() < 1e-12);
    }

    #[test]
    fn cubic_matches_series_inversion() {
        // u(d) = d − d³ + 3d⁵ − …  ⇒ u' = 1, u'' = 0, u''' = −6, u'''' = 0, u⁽⁵⁾ = 360
        let c = PolynomialOracle::scalar_cubic();
        let t = derivative_table(&c, &[0.0], &[0.0], vec![vec![1.0]], 5, NewtonOptions::default())
            .unwrap();
        let expected = [1.0, 0.0, -6.0, 0.0, 360.0];
        for (n, e) in expected.iter().enumerate() {
            let v = t.get(&vec![0; n + 1]).unwrap()[0];
            assert!((v - e).abs() <= 1e-10 * e.abs().max(1.0), "order {} got {v}", n + 1);
        }
    }

    #[test]
    fn table_keys_and_counts() {
        let c = PolynomialOracle::scalar_cubic();
        let t = derivative_table(&c, &[0.0], &[0.0], vec![vec![1.0]], 1, NewtonOptions::default())
            .unwrap();
        assert_eq!(t.len(), 2);
        assert!(t.get(&[]).is_some() && t.get(&[0]).is_some());

        let t = derivative_table(
            &c,
            &[0.3],
            &[0.0],
            vec![vec![1.0], vec![-0.5]],
            3,
            NewtonOptions::default(),
        )
        .unwrap();
        // 1 base + 2 + 3 + 4 sorted multisets over two directions
        assert_eq!(t.len(), 10);
        assert_eq!(direction_label(&[0, 0, 1]), "2h1+h2");
    }

    #[test]
    fn missing_entry_is_contract_violation() {
        let c = PolynomialOracle::scalar_cubic();
        let t = DerivativeTable::new(vec![0.0], vec![0.0], vec![vec![1.0]]);
        assert!(matches!(higher_derivative(&c, &t, &[0, 0]), Err(Error::Contract(_))));
        assert!(matches!(higher_derivative(&c, &t, &[0, 3]), Err(Error::Domain(_))));
    }

    #[test]
    fn affine_residual_has_vanishing_higher_derivatives() {
        let a = PolynomialOracle::affine(&[2.0, -1.0, 0.5, 1.0], &[[1.0, 0.5], [0.0, 3.0]], &[0.25, 1.0]).unwrap();
        assert_eq!(a.max_derivative_order(), Some(1));
        let t = derivative_table(
            &a,
            &[0.0, 0.0],
            &[0.0, 0.0],
            vec![vec![1.0, 0.0], vec![0.3, -2.0]],
            4,
            NewtonOptions::default(),
        )
        .unwrap();
        for (k, v) in t.iter() {
            if k.len() >= 2 {
                assert!(v.iter().all(|&x| x == 0.0), "{k:?} -> {v:?}");
            }
        }
    }
}
