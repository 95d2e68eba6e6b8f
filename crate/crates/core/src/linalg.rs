//! Small dense-vector helpers and a symmetric tridiagonal matrix type.
//!
//! Every operator of the P1 discretization on an interval is tridiagonal, so
//! this is all the linear algebra the PDE layer needs.

use crate::error::{Error, Result};

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// `y += a * x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn scaled(a: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| a * v).collect()
}

pub fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

pub fn add(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a + b).collect()
}

/// Symmetric tridiagonal matrix stored by its diagonal and first off-diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i + 1`.
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn zeros(n: usize) -> Self {
        Self {
            diag: vec![0.0; n],
            off: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }

    /// `xᵀ A x`
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }

    pub fn plus(&self, other: &SymTridiag) -> SymTridiag {
        SymTridiag {
            diag: add(&self.diag, &other.diag),
            off: add(&self.off, &other.off),
        }
    }

    /// Factors the matrix once; the factorization solves repeatedly.
    pub fn factor(&self) -> Result<TridiagFactor> {
        let n = self.dim();
        // LDLᵀ without pivoting; all matrices passed here are SPD.
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        for i in 0..n {
            let mut di = self.diag[i];
            if i > 0 {
                di -= l[i - 1] * l[i - 1] * d[i - 1];
            }
            if !(di.abs() > f64::MIN_POSITIVE) || !di.is_finite() {
                return Err(Error::Singular(format!("zero pivot at row {i}")));
            }
            d[i] = di;
            if i + 1 < n {
                l[i] = self.off[i] / di;
            }
        }
        Ok(TridiagFactor { d, l })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.factor()?.solve(rhs))
    }

    /// Number of eigenvalues below `mu` of the pencil `(self, b)` with `b`
    /// SPD, i.e. the negative pivots of `self − mu·b` (Sylvester inertia).
    pub fn count_below(&self, b: &SymTridiag, mu: f64) -> usize {
        let n = self.dim();
        let mut count = 0;
        let mut prev = 1.0;
        for i in 0..n {
            let mut d = self.diag[i] - mu * b.diag[i];
            if i > 0 {
                let e = self.off[i - 1] - mu * b.off[i - 1];
                d -= e * e / prev;
            }
            if d == 0.0 {
                d = -f64::EPSILON * (self.diag[i].abs() + mu.abs() * b.diag[i].abs()).max(f64::MIN_POSITIVE);
            }
            if d < 0.0 {
                count += 1;
            }
            prev = d;
        }
        count
    }

    /// Smallest `|μ|` over eigenvalues of `self x = μ b x`, by bisection on
    /// the inertia counts.
    pub fn min_abs_generalized_eigenvalue(&self, b: &SymTridiag) -> Result<f64> {
        let inside = |t: f64| self.count_below(b, t) - self.count_below(b, -t);
        let mut hi = 1.0;
        let mut guard = 0;
        while inside(hi) == 0 {
            hi *= 2.0;
            guard += 1;
            if guard > 2000 || !hi.is_finite() {
                return Err(Error::Eigen("could not bracket the smallest eigenvalue".into()));
            }
        }
        let mut lo = 0.0;
        if inside(f64::MIN_POSITIVE) > 0 {
            return Err(Error::Singular("pencil has a zero eigenvalue".into()));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 4.0 * f64::EPSILON * hi {
                break;
            }
            if inside(mid) > 0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

#[derive(Clone, Debug)]
pub struct TridiagFactor {
    d: Vec<f64>,
    l: Vec<f64>,
}

impl TridiagFactor {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        let mut x = rhs.to_vec();
        for i in 1..n {
            x[i] -= self.l[i - 1] * x[i - 1];
        }
        for (xi, di) in x.iter_mut().zip(&self.d) {
            *xi /= di;
        }
        for i in (0..n.saturating_sub(1)).rev() {
            x[i] -= self.l[i] * x[i + 1];
        }
        x
    }

    /// Diagonal of the inverse matrix, one solve per column.
    pub fn inverse_diagonal(&self) -> Vec<f64> {
        let n = self.d.len();
        let mut e = vec![0.0; n];
        (0..n)
            .map(|i| {
                e[i] = 1.0;
                let col = self.solve(&e);
                e[i] = 0.0;
                col[i]
            })
            .collect()
    }

    /// True when every pivot is positive, i.e. the factored matrix is SPD.
    pub fn is_positive_definite(&self) -> bool {
        self.d.iter().all(|&v| v > 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_solve_roundtrip() {
        let a = SymTridiag {
            diag: vec![4.0, 5.0, 6.0, 7.0],
            off: vec![1.0, -2.0, 0.5],
        };
        let x = vec![1.0, -2.0, 3.0, 0.25];
        let b = a.mul_vec(&x);
        let y = a.solve(&b).unwrap();
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn inverse_diagonal_matches_dense() {
        let a = SymTridiag {
            diag: vec![2.0, 2.0, 2.0],
            off: vec![-1.0, -1.0],
        };
        // inverse of the 3x3 second-difference matrix
        let expected = [0.75, 1.0, 0.75];
        let got = a.factor().unwrap().inverse_diagonal();
        for (e, g) in expected.iter().zip(&got) {
            assert!((e - g).abs() < 1e-14);
        }
    }

    #[test]
    fn pencil_eigenvalue_by_bisection() {
        // (2, −1) second-difference matrix against the identity: eigenvalues 2 − 2cos(kπ/4)
        let a = SymTridiag { diag: vec![2.0; 3], off: vec![-1.0; 2] };
        let id = SymTridiag { diag: vec![1.0; 3], off: vec![0.0; 2] };
        let expected = 2.0 - 2.0 * (std::f64::consts::PI / 4.0).cos();
        let got = a.min_abs_generalized_eigenvalue(&id).unwrap();
        assert!((got - expected).abs() < 1e-14);
        // indefinite: eigenvalues −3, 0.5, 4 → smallest magnitude 0.5
        let d = SymTridiag { diag: vec![-3.0, 0.5, 4.0], off: vec![0.0; 2] };
        assert!((d.min_abs_generalized_eigenvalue(&id).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(d.count_below(&id, 1.0), 2);
    }

    #[test]
    fn zero_pivot_is_singular() {
        let a = SymTridiag {
            diag: vec![0.0, 1.0],
            off: vec![1.0],
        };
        assert!(matches!(a.factor(), Err(Error::Singular(_))));
    }
}
