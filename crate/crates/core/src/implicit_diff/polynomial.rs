//! Polynomial residuals in the joint variable `z = (d, u)`.
//!
//! Derivatives are exact, so this oracle is the reference for the engine and
//! for the envelope constants (exact multilinear norms under ∞-norms).

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{Direction, ResidualOracle};
use crate::error::{Error, Result};
use crate::linalg::norm_inf;

/// `coeff · Π z_i^{exponents[i]}` over `z = (d_1..d_k, u_1..u_m)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub coeff: f64,
    pub exponents: Vec<u32>,
}

impl Monomial {
    pub fn new(coeff: f64, exponents: Vec<u32>) -> Self {
        Self { coeff, exponents }
    }

    pub fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    /// `∂_{v_1} ⋯ ∂_{v_r}` of this monomial at `z`.
    fn partial(&self, z: &[f64], counts: &[u32]) -> f64 {
        let mut value = self.coeff;
        for (i, (&e, &c)) in self.exponents.iter().zip(counts).enumerate() {
            if c > e {
                return 0.0;
            }
            for j in 0..c {
                value *= f64::from(e - j);
            }
            value *= z[i].powi((e - c) as i32);
        }
        value
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialOracle {
    data_dim: usize,
    state_dim: usize,
    components: Vec<Vec<Monomial>>,
}

impl PolynomialOracle {
    /// One polynomial per residual component; there must be `state_dim` of them.
    pub fn new(data_dim: usize, state_dim: usize, components: Vec<Vec<Monomial>>) -> Result<Self> {
        if components.len() != state_dim {
            return Err(Error::domain("need one residual component per state variable"));
        }
        let nvars = data_dim + state_dim;
        if components.iter().flatten().any(|m| m.exponents.len() != nvars) {
            return Err(Error::domain(format!("every monomial needs {nvars} exponents")));
        }
        Ok(Self { data_dim, state_dim, components })
    }

    /// `R(d, u) = u − d²`
    pub fn scalar_quadratic() -> Self {
        Self::new(
            1,
            1,
            vec![vec![Monomial::new(1.0, vec![0, 1]), Monomial::new(-1.0, vec![2, 0])]],
        )
        .expect("valid")
    }

    /// `R(d, u) = u³ + u − d`
    pub fn scalar_cubic() -> Self {
        Self::new(
            1,
            1,
            vec![vec![
                Monomial::new(1.0, vec![0, 3]),
                Monomial::new(1.0, vec![0, 1]),
                Monomial::new(-1.0, vec![1, 0]),
            ]],
        )
        .expect("valid")
    }

    /// `R(d, u) = A u + B d + c` with `A` square over the state.
    pub fn affine<const M: usize>(
        b_rows: &[f64],
        a: &[[f64; M]; M],
        c: &[f64; M],
    ) -> Result<Self> {
        // b_rows holds B row-major with one data column per state row.
        if !b_rows.len().is_multiple_of(M) {
            return Err(Error::domain("B must have one row per state variable"));
        }
        let k = b_rows.len() / M;
        let nvars = k + M;
        let mut comps = Vec::with_capacity(M);
        for i in 0..M {
            let mut poly = Vec::new();
            for j in 0..k {
                let mut e = vec![0; nvars];
                e[j] = 1;
                poly.push(Monomial::new(b_rows[i * k + j], e));
            }
            for j in 0..M {
                let mut e = vec![0; nvars];
                e[k + j] = 1;
                poly.push(Monomial::new(a[i][j], e));
            }
            poly.push(Monomial::new(c[i], vec![0; nvars]));
            comps.push(poly);
        }
        Self::new(k, M, comps)
    }

    /// Random residual with a dominant linear state part plus `terms` random
    /// monomials of total degree 2..=`max_degree` per component.
    pub fn random<R: Rng + ?Sized>(
        data_dim: usize,
        state_dim: usize,
        max_degree: u32,
        terms: usize,
        rng: &mut R,
    ) -> Self {
        let nvars = data_dim + state_dim;
        let mut comps = Vec::with_capacity(state_dim);
        for i in 0..state_dim {
            let mut poly = Vec::new();
            let mut e = vec![0; nvars];
            e[data_dim + i] = 1;
            poly.push(Monomial::new(2.0 + rng.gen::<f64>(), e));
            for j in 0..data_dim {
                let mut e = vec![0; nvars];
                e[j] = 1;
                poly.push(Monomial::new(rng.gen_range(-1.0..1.0), e));
            }
            for _ in 0..terms {
                let degree = rng.gen_range(2..=max_degree.max(2));
                let mut e = vec![0; nvars];
                for _ in 0..degree {
                    e[rng.gen_range(0..nvars)] += 1;
                }
                poly.push(Monomial::new(rng.gen_range(-0.5..0.5), e));
            }
            comps.push(poly);
        }
        Self::new(data_dim, state_dim, comps).expect("valid by construction")
    }

    pub fn degree(&self) -> u32 {
        self.components.iter().flatten().map(Monomial::degree).max().unwrap_or(0)
    }

    fn joint(&self, d: &[f64], u: &[f64]) -> Vec<f64> {
        d.iter().chain(u).copied().collect()
    }

    fn joint_arg(&self, a: &Direction<'_>) -> Vec<f64> {
        let mut x = vec![0.0; self.data_dim + self.state_dim];
        if let Some(dd) = a.data {
            x[..self.data_dim].copy_from_slice(dd);
        }
        if let Some(du) = a.state {
            x[self.data_dim..].copy_from_slice(du);
        }
        x
    }

    /// `D^r R(z)[x_1, …, x_r]` with joint arguments `x_j ∈ ℝ^{k+m}`.
    fn derivative_joint(&self, z: &[f64], xs: &[Vec<f64>]) -> Vec<f64> {
        let nvars = z.len();
        let mut counts = vec![0u32; nvars];
        self.components
            .iter()
            .map(|poly| {
                let mut total = 0.0;
                accumulate(poly, z, xs, 0, 1.0, &mut counts, &mut total);
                total
            })
            .collect()
    }

    fn state_jacobian(&self, d: &[f64], u: &[f64]) -> DMatrix<f64> {
        let z = self.joint(d, u);
        let m = self.state_dim;
        let mut jac = DMatrix::zeros(m, m);
        let mut counts = vec![0u32; z.len()];
        for (i, poly) in self.components.iter().enumerate() {
            for j in 0..m {
                counts[self.data_dim + j] = 1;
                jac[(i, j)] = poly.iter().map(|mono| mono.partial(&z, &counts)).sum();
                counts[self.data_dim + j] = 0;
            }
        }
        jac
    }

    /// `‖(D₂R)⁻¹‖` as an operator on `(ℝ^m, ‖·‖_∞)`.
    pub fn inverse_norm(&self, d: &[f64], u: &[f64]) -> Result<f64> {
        let inv = self
            .state_jacobian(d, u)
            .try_inverse()
            .ok_or_else(|| Error::Singular("state Jacobian not invertible".into()))?;
        Ok(inv.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max))
    }

    /// `‖D^r R(z)‖` as an r-linear map on `(ℝ^{k+m}, ‖·‖_∞)` into `(ℝ^m, ‖·‖_∞)`.
    ///
    /// The map is multilinear, so its sup over the unit ball is attained at
    /// vertices; all `2^{(k+m)r}` of them are enumerated.
    pub fn multilinear_norm(&self, d: &[f64], u: &[f64], r: usize) -> f64 {
        let z = self.joint(d, u);
        let nvars = z.len();
        let bits = nvars * r;
        assert!(bits <= 24, "vertex enumeration too large");
        let mut best: f64 = 0.0;
        let mut xs = vec![vec![0.0; nvars]; r];
        for mask in 0u32..(1u32 << bits) {
            for (b, slot) in xs.iter_mut().flatten().enumerate() {
                *slot = if mask >> b & 1 == 1 { -1.0 } else { 1.0 };
            }
            best = best.max(norm_inf(&self.derivative_joint(&z, &xs)));
        }
        best
    }

    /// Local constants `(α, ς, ϝ)` with `ϝ = 1`, `ς = max(1, max_r ‖D^rR‖/r!)`
    /// and `α = max(1, ‖(D₂R)⁻¹‖)`; all `r ≤ degree` are inspected, higher
    /// derivatives vanish.
    pub fn local_constants(&self, d: &[f64], u: &[f64]) -> Result<(f64, f64, f64)> {
        let alpha = self.inverse_norm(d, u)?.max(1.0);
        let mut sigma: f64 = 1.0;
        let mut fact = 1.0;
        for r in 1..=self.degree() as usize {
            fact *= r as f64;
            sigma = sigma.max(self.multilinear_norm(d, u, r) / fact);
        }
        Ok((alpha, sigma, 1.0))
    }
}

fn accumulate(
    poly: &[Monomial],
    z: &[f64],
    xs: &[Vec<f64>],
    depth: usize,
    weight: f64,
    counts: &mut [u32],
    total: &mut f64,
) {
    if depth == xs.len() {
        *total += weight * poly.iter().map(|m| m.partial(z, counts)).sum::<f64>();
        return;
    }
    for (v, &xv) in xs[depth].iter().enumerate() {
        if xv == 0.0 {
            continue;
        }
        counts[v] += 1;
        accumulate(poly, z, xs, depth + 1, weight * xv, counts, total);
        counts[v] -= 1;
    }
}

impl ResidualOracle for PolynomialOracle {
    fn data_dim(&self) -> usize {
        self.data_dim
    }

    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn eval(&self, d: &[f64], u: &[f64]) -> Vec<f64> {
        let z = self.joint(d, u);
        let zero = vec![0u32; z.len()];
        self.components
            .iter()
            .map(|poly| poly.iter().map(|m| m.partial(&z, &zero)).sum())
            .collect()
    }

    fn apply_derivative(&self, d: &[f64], u: &[f64], args: &[Direction<'_>]) -> Vec<f64> {
        let z = self.joint(d, u);
        let xs: Vec<Vec<f64>> = args.iter().map(|a| self.joint_arg(a)).collect();
        self.derivative_joint(&z, &xs)
    }

    fn solve_linearized(&self, d: &[f64], u: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
        let lu = self.state_jacobian(d, u).lu();
        lu.solve(&DVector::from_column_slice(rhs))
            .map(|x| x.iter().copied().collect())
            .ok_or_else(|| Error::Singular("state Jacobian not invertible".into()))
    }

    fn max_derivative_order(&self) -> Option<usize> {
        Some(self.degree() as usize)
    }
}
