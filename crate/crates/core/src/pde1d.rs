//! Semilinear elliptic model problem on `(0, 1)`:
//!
//! ```text
//! ⟨A u′, v′⟩ + ⟨b 𝔑(u), v⟩ = ⟨f, v⟩ + g v(1)   for all v ∈ H¹_D
//! ```
//!
//! discretized with P1 elements and 3-point Gauss quadrature. The left end is
//! always Dirichlet; the right end is Dirichlet or Neumann with flux `g`.
//! Coefficients live at quadrature points. The state is the vector of free
//! nodal values; residuals are vectors over the same free nodes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::implicit_diff::{solve_residual, Direction, NewtonOptions, ResidualOracle};
use crate::linalg::{dot, norm_inf, SymTridiag, TridiagFactor};

const GAUSS_POINTS: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GAUSS_WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh1D {
    nodes: Vec<f64>,
    right: BoundaryCondition,
}

impl Mesh1D {
    pub fn new(nodes: Vec<f64>, right: BoundaryCondition) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::domain("mesh needs at least one element"));
        }
        if nodes[0] != 0.0 || *nodes.last().unwrap() != 1.0 {
            return Err(Error::domain("mesh must span [0, 1]"));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("mesh nodes must be strictly increasing"));
        }
        if right == BoundaryCondition::Dirichlet && nodes.len() < 3 {
            return Err(Error::domain("a Dirichlet-Dirichlet mesh needs an interior node"));
        }
        Ok(Self { nodes, right })
    }

    pub fn uniform(elements: usize, right: BoundaryCondition) -> Result<Self> {
        if elements == 0 {
            return Err(Error::domain("mesh needs at least one element"));
        }
        let mut nodes: Vec<f64> = (0..=elements).map(|i| i as f64 / elements as f64).collect();
        nodes[elements] = 1.0;
        Self::new(nodes, right)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn right_bc(&self) -> BoundaryCondition {
        self.right
    }

    pub fn num_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Interior nodes, plus the right end under a Neumann condition.
    pub fn num_free(&self) -> usize {
        match self.right {
            BoundaryCondition::Dirichlet => self.nodes.len() - 2,
            BoundaryCondition::Neumann => self.nodes.len() - 1,
        }
    }

    pub fn num_quadrature_points(&self) -> usize {
        3 * self.num_elements()
    }

    /// Coordinates of all quadrature points, element by element.
    pub fn quadrature_points(&self) -> Vec<f64> {
        self.nodes
            .windows(2)
            .flat_map(|w| {
                let (mid, half) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
                GAUSS_POINTS.map(|xi| mid + half * xi)
            })
            .collect()
    }

    pub fn quadrature_weights(&self) -> Vec<f64> {
        self.nodes
            .windows(2)
            .flat_map(|w| GAUSS_WEIGHTS.map(|wt| 0.5 * (w[1] - w[0]) * wt))
            .collect()
    }

    /// Nodal values with the Dirichlet nodes filled in as zero.
    pub fn full_nodal(&self, u: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.nodes.len()];
        full[1..=u.len()].copy_from_slice(u);
        full
    }

    /// Samples `field` at the quadrature points.
    pub fn sample(&self, field: impl Fn(f64) -> f64) -> Vec<f64> {
        self.quadrature_points().into_iter().map(field).collect()
    }

    /// Free nodal values of the interpolant of `field`.
    pub fn interpolate(&self, field: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes[1..=self.num_free()].iter().map(|&x| field(x)).collect()
    }
}

/// Coefficients `(A, b, f)` at quadrature points and the Neumann flux `g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdeData {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub f: Vec<f64>,
    pub g: f64,
}

impl PdeData {
    pub fn constant(mesh: &Mesh1D, a: f64, b: f64, f: f64, g: f64) -> Self {
        let nq = mesh.num_quadrature_points();
        Self { a: vec![a; nq], b: vec![b; nq], f: vec![f; nq], g }
    }

    pub fn from_fns(
        mesh: &Mesh1D,
        a: impl Fn(f64) -> f64,
        b: impl Fn(f64) -> f64,
        f: impl Fn(f64) -> f64,
        g: f64,
    ) -> Self {
        Self { a: mesh.sample(a), b: mesh.sample(b), f: mesh.sample(f), g }
    }

    pub fn zeros(mesh: &Mesh1D) -> Self {
        Self::constant(mesh, 0.0, 0.0, 0.0, 0.0)
    }

    /// Checks lengths, `ess-inf a > 0`, `b ≥ 0` and `g = 0` under Dirichlet.
    pub fn validate(&self, mesh: &Mesh1D) -> Result<()> {
        let nq = mesh.num_quadrature_points();
        if self.a.len() != nq || self.b.len() != nq || self.f.len() != nq {
            return Err(Error::domain(format!("coefficient fields need {nq} quadrature values")));
        }
        if self.a.iter().chain(&self.b).chain(&self.f).any(|v| !v.is_finite()) || !self.g.is_finite() {
            return Err(Error::domain("coefficients must be finite"));
        }
        if !(self.ess_inf_a() > 0.0) {
            return Err(Error::domain("diffusion coefficient a must be bounded below by a positive constant"));
        }
        if self.b.iter().any(|&v| v < 0.0) {
            return Err(Error::domain("reaction coefficient b must be nonnegative"));
        }
        if mesh.right_bc() == BoundaryCondition::Dirichlet && self.g != 0.0 {
            return Err(Error::domain("Neumann value g must be 0 with a Dirichlet right end"));
        }
        Ok(())
    }

    pub fn ess_inf_a(&self) -> f64 {
        self.a.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Flattened as `[a; b; f; g]`, the data-vector layout of [`PdeOracle`].
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(3 * self.a.len() + 1);
        v.extend_from_slice(&self.a);
        v.extend_from_slice(&self.b);
        v.extend_from_slice(&self.f);
        v.push(self.g);
        v
    }

    pub fn from_vector(v: &[f64]) -> Result<Self> {
        if v.len() % 3 != 1 {
            return Err(Error::domain("data vector length must be 3·nq + 1"));
        }
        let nq = v.len() / 3;
        Ok(Self {
            a: v[..nq].to_vec(),
            b: v[nq..2 * nq].to_vec(),
            f: v[2 * nq..3 * nq].to_vec(),
            g: v[3 * nq],
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NonlinearityKind {
    /// `𝔑(ζ) = Σ_{j ≥ 1} θ_j ζ^j`, stored as `[θ_1, …, θ_J]`.
    Polynomial(Vec<f64>),
    /// `𝔑(ζ) = 2 + tanh(ζ)`
    TanhShifted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Nonlinearity {
    kind: NonlinearityKind,
    growth: f64,
}

impl Nonlinearity {
    /// Checks monotonicity and the growth bound `|𝔑(ζ)| ≤ c(1 + |ζ|^{q−1})`.
    /// `q` defaults to `J + 1`.
    pub fn polynomial(coefficients: Vec<f64>, growth: Option<f64>) -> Result<Self> {
        let mut theta = coefficients;
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Inadmissible("nonlinearity coefficients must be finite".into()));
        }
        while theta.last() == Some(&0.0) {
            theta.pop();
        }
        let degree = theta.len();
        let q = growth.unwrap_or(degree as f64 + 1.0);
        if !(q >= 1.0) {
            return Err(Error::Inadmissible("growth exponent q must be at least 1".into()));
        }
        if degree as f64 > (q - 1.0).floor() {
            return Err(Error::Inadmissible(format!(
                "polynomial of degree {degree} violates the growth bound for q = {q}"
            )));
        }
        let nl = Self { kind: NonlinearityKind::Polynomial(theta), growth: q };
        nl.check_monotone()?;
        nl.check_growth()?;
        Ok(nl)
    }

    pub fn tanh_shifted() -> Self {
        Self { kind: NonlinearityKind::TanhShifted, growth: 1.0 }
    }

    /// The exponential has no polynomial growth bound and is never admitted.
    pub fn exponential() -> Result<Self> {
        Err(Error::Inadmissible(
            "exp nonlinearity: the polynomial growth condition |N(z)| <= c(1 + |z|^(q-1)) cannot be satisfied for any q".into(),
        ))
    }

    pub fn kind(&self) -> &NonlinearityKind {
        &self.kind
    }

    pub fn growth_exponent(&self) -> f64 {
        self.growth
    }

    /// Polynomial degree `J`, or `None` for the analytic kind.
    pub fn degree(&self) -> Option<usize> {
        match &self.kind {
            NonlinearityKind::Polynomial(t) => Some(t.len()),
            NonlinearityKind::TanhShifted => None,
        }
    }

    pub fn value(&self, z: f64) -> f64 {
        self.derivative(0, z)
    }

    /// `𝔑^{(n)}(ζ)`
    pub fn derivative(&self, n: usize, z: f64) -> f64 {
        match &self.kind {
            NonlinearityKind::Polynomial(theta) => {
                let mut acc = 0.0;
                // Horner over j = J..=max(n,1) of θ_j · j!/(j−n)! · ζ^{j−n}
                for j in (n.max(1)..=theta.len()).rev() {
                    let mut c = theta[j - 1];
                    for i in 0..n {
                        c *= (j - i) as f64;
                    }
                    acc = acc * z + c;
                }
                // the loop above multiplied by z once per step; the lowest
                // retained power is j − n ≥ 0, so fix the offset for n = 0
                if n == 0 {
                    acc * z
                } else {
                    acc
                }
            }
            NonlinearityKind::TanhShifted => {
                let c = tanh_taylor(z, n);
                let d = c[n] * factorial_f64(n);
                if n == 0 {
                    2.0 + d
                } else {
                    d
                }
            }
        }
    }

    /// `max_{k ≤ n} |𝔑^{(k)}|` over `[lo, hi]`, sampled on a fine grid.
    pub fn derivative_sup(&self, lo: f64, hi: f64, n: usize) -> Vec<f64> {
        const SAMPLES: usize = 400;
        let mut sup = vec![0.0_f64; n + 1];
        for i in 0..=SAMPLES {
            let z = lo + (hi - lo) * i as f64 / SAMPLES as f64;
            match &self.kind {
                NonlinearityKind::TanhShifted => {
                    let c = tanh_taylor(z, n);
                    let mut fact = 1.0;
                    for k in 0..=n {
                        if k > 0 {
                            fact *= k as f64;
                        }
                        let v = if k == 0 { 2.0 + c[0] } else { c[k] * fact };
                        sup[k] = sup[k].max(v.abs());
                    }
                }
                NonlinearityKind::Polynomial(_) => {
                    for (k, s) in sup.iter_mut().enumerate() {
                        *s = s.max(self.derivative(k, z).abs());
                    }
                }
            }
        }
        sup
    }

    fn check_monotone(&self) -> Result<()> {
        if let NonlinearityKind::Polynomial(theta) = &self.kind {
            let j = theta.len();
            if j >= 2 && (j % 2 == 0 || theta[j - 1] < 0.0) {
                return Err(Error::Inadmissible(
                    "polynomial nonlinearity is not monotone (needs odd degree with positive leading coefficient)".into(),
                ));
            }
            let bad = (0..=4000)
                .map(|i| -20.0 + 0.01 * i as f64)
                .find(|&z| self.derivative(1, z) < -1e-12 * (1.0 + z.abs().powi(j as i32)));
            if let Some(z) = bad {
                return Err(Error::Inadmissible(format!(
                    "polynomial nonlinearity is not monotone: N'({z}) < 0"
                )));
            }
        }
        Ok(())
    }

    fn check_growth(&self) -> Result<()> {
        if let NonlinearityKind::Polynomial(theta) = &self.kind {
            let c: f64 = theta.iter().map(|t| t.abs()).sum();
            let p = self.growth - 1.0;
            let bad = (0..=4000)
                .map(|i| -20.0 + 0.01 * i as f64)
                .find(|&z| self.value(z).abs() > c * (1.0 + z.abs().powf(p)) * (1.0 + 1e-12));
            if let Some(z) = bad {
                return Err(Error::Inadmissible(format!("growth bound fails at z = {z}")));
            }
        }
        Ok(())
    }
}

/// Taylor coefficients `c_0..=c_n` of `t ↦ tanh(z + t)` at `t = 0`, from
/// `y′ = 1 − y²`.
fn tanh_taylor(z: f64, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n + 1];
    c[0] = z.tanh();
    for k in 0..n {
        let conv: f64 = (0..=k).map(|i| c[i] * c[k - i]).sum();
        let rhs = if k == 0 { 1.0 - conv } else { -conv };
        c[k + 1] = rhs / (k + 1) as f64;
    }
    c
}

fn factorial_f64(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `D^n N(u)[u_1, …, u_n] = 𝔑^{(n)}(u) · u_1 ⋯ u_n`, pointwise at quadrature
/// points. All arguments are quadrature-point fields.
pub fn nemyckii_derivative(nl: &Nonlinearity, u: &[f64], args: &[&[f64]]) -> Vec<f64> {
    let n = args.len();
    u.iter()
        .enumerate()
        .map(|(q, &z)| args.iter().fold(nl.derivative(n, z), |acc, a| acc * a[q]))
        .collect()
}

/// Constants of the discrete problem at a solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdeConstants {
    /// `c_PF` with `‖v‖_{H¹} ≤ c_PF |v|_{H¹}` on the free space.
    pub c_pf: f64,
    pub c_a: f64,
    /// `c_PF² / c_A`
    pub alpha_guaranteed: f64,
    /// `‖(D₂R)⁻¹‖` from power iteration on the discrete linearization.
    pub alpha_measured: f64,
    pub sigma: f64,
    pub digamma: f64,
    /// `max_v ‖v‖_∞ / ‖v‖_{H¹}` over the discrete space.
    pub sobolev: f64,
    /// Highest derivative order inspected for `sigma`.
    pub orders_checked: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PdeSolution {
    pub u: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
    /// `‖u‖_𝓤 ≤ 2 c_PF² c_A⁻¹ ‖d‖_𝓓`
    pub a_priori: BoundCheck,
}

/// Residual oracle for the model problem with data `d = [a; b; f; g]`.
#[derive(Clone, Debug)]
pub struct PdeOracle {
    mesh: Mesh1D,
    nl: Nonlinearity,
    weights: Vec<f64>,
    mass: SymTridiag,
    stiffness: SymTridiag,
    gram: SymTridiag,
    gram_factor: TridiagFactor,
}

impl PdeOracle {
    pub fn new(mesh: Mesh1D, nl: Nonlinearity) -> Result<Self> {
        let weights = mesh.quadrature_weights();
        let nq = weights.len();
        let mut oracle = Self {
            mesh,
            nl,
            weights,
            mass: SymTridiag::zeros(0),
            stiffness: SymTridiag::zeros(0),
            gram: SymTridiag::zeros(0),
            gram_factor: SymTridiag { diag: vec![1.0], off: vec![] }.factor()?,
        };
        oracle.stiffness = oracle.assemble_matrix(&vec![1.0; nq], &vec![0.0; nq]);
        oracle.mass = oracle.assemble_matrix(&vec![0.0; nq], &vec![1.0; nq]);
        oracle.gram = oracle.mass.plus(&oracle.stiffness);
        oracle.gram_factor = oracle.gram.factor()?;
        Ok(oracle)
    }

    pub fn mesh(&self) -> &Mesh1D {
        &self.mesh
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nl
    }

    pub fn mass(&self) -> &SymTridiag {
        &self.mass
    }

    pub fn stiffness(&self) -> &SymTridiag {
        &self.stiffness
    }

    /// H¹ Gram matrix `M + K` on the free nodes.
    pub fn gram(&self) -> &SymTridiag {
        &self.gram
    }

    pub fn gram_factor(&self) -> &TridiagFactor {
        &self.gram_factor
    }

    /// `‖v‖_{H¹}` for a free-node vector.
    pub fn h1_norm(&self, u: &[f64]) -> f64 {
        self.gram.quad_form(u).max(0.0).sqrt()
    }

    /// Dual norm `sup_v r(v)/‖v‖_{H¹} = sqrt(rᵀ G⁻¹ r)`.
    pub fn dual_norm(&self, r: &[f64]) -> f64 {
        dot(r, &self.gram_factor.solve(r)).max(0.0).sqrt()
    }

    /// `‖f‖_{H⁻¹}` of a quadrature-point forcing field.
    pub fn forcing_dual_norm(&self, f: &[f64]) -> f64 {
        let zeros = vec![0.0; f.len()];
        self.dual_norm(&self.load(&zeros, f, 0.0))
    }

    /// `|g| · sup_v |v(1)| / ‖v‖_{H¹}`, zero under a Dirichlet right end.
    pub fn flux_norm(&self, g: f64) -> f64 {
        match self.mesh.right_bc() {
            BoundaryCondition::Dirichlet => 0.0,
            BoundaryCondition::Neumann => {
                let diag = self.gram_factor.inverse_diagonal();
                g.abs() * diag[diag.len() - 1].sqrt()
            }
        }
    }

    /// `max(‖A‖_∞, ‖b‖_∞, ‖f‖_{H⁻¹}, ‖g‖)`
    pub fn pde_data_norm(&self, data: &PdeData) -> f64 {
        norm_inf(&data.a)
            .max(norm_inf(&data.b))
            .max(self.forcing_dual_norm(&data.f))
            .max(self.flux_norm(data.g))
    }

    /// Values and derivatives of a free-node field at the quadrature points.
    pub fn qp_values(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let full = self.mesh.full_nodal(u);
        let nodes = self.mesh.nodes();
        let nq = self.mesh.num_quadrature_points();
        let (mut vals, mut ders) = (Vec::with_capacity(nq), Vec::with_capacity(nq));
        for e in 0..self.mesh.num_elements() {
            let len = nodes[e + 1] - nodes[e];
            let slope = (full[e + 1] - full[e]) / len;
            for xi in GAUSS_POINTS {
                vals.push(0.5 * (1.0 - xi) * full[e] + 0.5 * (1.0 + xi) * full[e + 1]);
                ders.push(slope);
            }
        }
        (vals, ders)
    }

    /// Free-node vector of `v ↦ ⟨flux, v′⟩ + ⟨source, v⟩ + boundary · v(1)`.
    pub fn load(&self, flux: &[f64], source: &[f64], boundary: f64) -> Vec<f64> {
        let nodes = self.mesh.nodes();
        let mut full = vec![0.0; nodes.len()];
        for e in 0..self.mesh.num_elements() {
            let len = nodes[e + 1] - nodes[e];
            for (k, xi) in GAUSS_POINTS.iter().enumerate() {
                let q = 3 * e + k;
                let w = self.weights[q];
                full[e] += w * (-flux[q] / len + source[q] * 0.5 * (1.0 - xi));
                full[e + 1] += w * (flux[q] / len + source[q] * 0.5 * (1.0 + xi));
            }
        }
        let last = full.len() - 1;
        full[last] += boundary;
        full[1..=self.mesh.num_free()].to_vec()
    }

    /// Matrix of `(w, v) ↦ ⟨k w′, v′⟩ + ⟨m w, v⟩` on the free nodes.
    pub fn assemble_matrix(&self, k_coef: &[f64], m_coef: &[f64]) -> SymTridiag {
        let nodes = self.mesh.nodes();
        let mut diag = vec![0.0; nodes.len()];
        let mut off = vec![0.0; nodes.len() - 1];
        for e in 0..self.mesh.num_elements() {
            let len = nodes[e + 1] - nodes[e];
            for (k, xi) in GAUSS_POINTS.iter().enumerate() {
                let q = 3 * e + k;
                let w = self.weights[q];
                let (pl, pr) = (0.5 * (1.0 - xi), 0.5 * (1.0 + xi));
                let kk = w * k_coef[q] / (len * len);
                diag[e] += kk + w * m_coef[q] * pl * pl;
                diag[e + 1] += kk + w * m_coef[q] * pr * pr;
                off[e] += -kk + w * m_coef[q] * pl * pr;
            }
        }
        let nf = self.mesh.num_free();
        SymTridiag {
            diag: diag[1..=nf].to_vec(),
            off: off[1..nf].to_vec(),
        }
    }

    /// `R(d, u)` as a free-node vector.
    pub fn assemble_residual(&self, data: &PdeData, u: &[f64]) -> Vec<f64> {
        let (uv, ud) = self.qp_values(u);
        let flux: Vec<f64> = data.a.iter().zip(&ud).map(|(a, d)| a * d).collect();
        let source: Vec<f64> = (0..uv.len())
            .map(|q| data.b[q] * self.nl.value(uv[q]) - data.f[q])
            .collect();
        self.load(&flux, &source, -self.neumann(data.g))
    }

    fn neumann(&self, g: f64) -> f64 {
        match self.mesh.right_bc() {
            BoundaryCondition::Dirichlet => 0.0,
            BoundaryCondition::Neumann => g,
        }
    }

    /// `D^r R(d, u)[(δd_1, δu_1), …]` following the product structure of the
    /// residual: `A·u′` is bilinear, `(f, g)` enter linearly and
    ///
    /// ```text
    /// D^r(b N(u))[…] = b 𝔑^{(r)}(u) Π_j u_j + Σ_j b_j 𝔑^{(r−1)}(u) Π_{k≠j} u_k.
    /// ```
    pub fn apply_residual_derivative(
        &self,
        data: &PdeData,
        u: &[f64],
        args: &[(Option<&PdeData>, Option<&[f64]>)],
    ) -> Vec<f64> {
        let r = args.len();
        assert!(r >= 1, "derivative order must be positive");
        let nq = self.mesh.num_quadrature_points();
        let (uv, ud) = self.qp_values(u);
        let fields: Vec<Option<(Vec<f64>, Vec<f64>)>> =
            args.iter().map(|(_, s)| s.map(|s| self.qp_values(s))).collect();
        let mut flux = vec![0.0; nq];
        let mut source = vec![0.0; nq];
        let mut boundary = 0.0;

        if r == 1 {
            let (dd, du) = (&args[0].0, &fields[0]);
            if let Some(dd) = dd {
                for q in 0..nq {
                    flux[q] += dd.a[q] * ud[q];
                    source[q] += dd.b[q] * self.nl.value(uv[q]) - dd.f[q];
                }
                boundary -= self.neumann(dd.g);
            }
            if let Some((v, d)) = du {
                for q in 0..nq {
                    flux[q] += data.a[q] * d[q];
                    source[q] += data.b[q] * self.nl.derivative(1, uv[q]) * v[q];
                }
            }
            return self.load(&flux, &source, boundary);
        }

        if r == 2 {
            for (i, j) in [(0, 1), (1, 0)] {
                if let (Some(dd), Some((_, d))) = (&args[i].0, &fields[j]) {
                    for q in 0..nq {
                        flux[q] += dd.a[q] * d[q];
                    }
                }
            }
        }

        let all_states = fields.iter().all(Option::is_some);
        if all_states {
            for q in 0..nq {
                let prod: f64 = fields.iter().map(|f| f.as_ref().unwrap().0[q]).product();
                source[q] += data.b[q] * self.nl.derivative(r, uv[q]) * prod;
            }
        }
        for (j, arg) in args.iter().enumerate() {
            let Some(dd) = arg.0 else { continue };
            if fields.iter().enumerate().any(|(k, f)| k != j && f.is_none()) {
                continue;
            }
            for q in 0..nq {
                let prod: f64 = fields
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != j)
                    .map(|(_, f)| f.as_ref().unwrap().0[q])
                    .product();
                source[q] += dd.b[q] * self.nl.derivative(r - 1, uv[q]) * prod;
            }
        }
        self.load(&flux, &source, boundary)
    }

    /// `D₂R(d, u)` as a tridiagonal matrix.
    pub fn jacobian(&self, data: &PdeData, u: &[f64]) -> SymTridiag {
        let (uv, _) = self.qp_values(u);
        let m: Vec<f64> = (0..uv.len()).map(|q| data.b[q] * self.nl.derivative(1, uv[q])).collect();
        self.assemble_matrix(&data.a, &m)
    }

    fn data_from(&self, d: &[f64]) -> PdeData {
        PdeData::from_vector(d).expect("data vector layout")
    }

    /// Damped Newton solve plus the a priori bound check.
    pub fn newton_solve(&self, data: &PdeData, u0: &[f64], tol: f64) -> Result<PdeSolution> {
        data.validate(&self.mesh)?;
        if u0.len() != self.mesh.num_free() {
            return Err(Error::domain("initial guess has the wrong length"));
        }
        let sol = solve_residual(self, &data.to_vector(), u0, NewtonOptions::with_tol(tol))?;
        let a_priori = self.a_priori_check(data, &sol.state)?;
        Ok(PdeSolution {
            u: sol.state,
            iterations: sol.iterations,
            residual_norm: sol.residual_norm,
            a_priori,
        })
    }

    /// `‖u‖_𝓤 ≤ 2 c_PF² c_A⁻¹ ‖d‖_𝓓`. A constant `𝔑(0) = c` is moved into
    /// the forcing as `f − c·b` first.
    pub fn a_priori_check(&self, data: &PdeData, u: &[f64]) -> Result<BoundCheck> {
        let c_pf = self.poincare_friedrichs()?;
        let c_a = data.ess_inf_a().min(1.0);
        let n0 = self.nl.value(0.0);
        let mut effective = data.clone();
        if n0 != 0.0 {
            for q in 0..effective.f.len() {
                effective.f[q] -= n0 * data.b[q];
            }
        }
        let lhs = self.h1_norm(u);
        let rhs = 2.0 * c_pf * c_pf / c_a * self.pde_data_norm(&effective);
        Ok(BoundCheck { lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-10) + 1e-14 })
    }

    /// `c_PF = sqrt(1 + 1/λ_min)` with `λ_min` the smallest eigenvalue of
    /// `K x = λ M x`, by inverse iteration.
    pub fn poincare_friedrichs(&self) -> Result<f64> {
        let kf = self.stiffness.factor()?;
        let n = self.mesh.num_free();
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * (i as f64 / n as f64)).collect();
        let mut lambda = f64::NAN;
        for _ in 0..2000 {
            let y = kf.solve(&self.mass.mul_vec(&x));
            let norm = self.mass.quad_form(&y).sqrt();
            if !(norm > 0.0) {
                return Err(Error::Eigen("inverse iteration collapsed".into()));
            }
            x = y.iter().map(|v| v / norm).collect();
            let next = self.stiffness.quad_form(&x);
            if (next - lambda).abs() <= 1e-14 * next {
                return Ok((1.0 + 1.0 / next).sqrt());
            }
            lambda = next;
        }
        Err(Error::Eigen("inverse iteration for the Poincaré constant did not converge".into()))
    }

    /// `‖(D₂R)⁻¹‖` from the dual space to H¹. With `J` symmetric this is
    /// `1 / min |μ|` over the pencil `J x = μ G x`, found by bisection.
    pub fn inverse_linearization_norm(&self, data: &PdeData, u: &[f64]) -> Result<f64> {
        let mu = self.jacobian(data, u).min_abs_generalized_eigenvalue(&self.gram)?;
        Ok(1.0 / mu)
    }

    /// `max_v ‖v‖_∞ / ‖v‖_{H¹}`; for P1 the maximum sits at a node, where the
    /// ratio is `sqrt((G⁻¹)_ii)`.
    pub fn sobolev_constant(&self) -> f64 {
        self.gram_factor
            .inverse_diagonal()
            .into_iter()
            .fold(0.0, |m, v| m.max(v.sqrt()))
    }

    /// Stability and regularity constants at a solution `u`.
    ///
    /// `c_a` overrides the coercivity constant `min(1, ess-inf a)`.
    pub fn estimate_constants(
        &self,
        data: &PdeData,
        u: &[f64],
        c_a: Option<f64>,
    ) -> Result<PdeConstants> {
        data.validate(&self.mesh)?;
        let c_pf = self.poincare_friedrichs()?;
        let c_a = c_a.unwrap_or_else(|| data.ess_inf_a().min(1.0));
        if !(c_a > 0.0) {
            return Err(Error::domain("coercivity constant must be positive"));
        }
        let alpha_guaranteed = c_pf * c_pf / c_a;
        let alpha_measured = self.inverse_linearization_norm(data, u)?;
        let sobolev = self.sobolev_constant();
        let (sigma, digamma, orders_checked) = self.regularity_constants(data, u, sobolev);
        Ok(PdeConstants {
            c_pf,
            c_a,
            alpha_guaranteed,
            alpha_measured,
            sigma,
            digamma,
            sobolev,
            orders_checked,
        })
    }

    /// `ς, ϝ` with `‖D^rR(d, u)‖ ≤ r! ς ϝ^r`, from term-by-term bounds on the
    /// derivative formulas under the max-norm on `(δd, δu)`:
    ///
    /// ```text
    /// r = 1:  ‖u‖ + ‖A‖ + M_0 + ‖b‖ M_1 + 2
    /// r = 2:  2 + ‖b‖ M_2 E + 2 M_1
    /// r ≥ 3:  ‖b‖ M_r E^{r−1} + r M_{r−1} E^{r−2}
    /// ```
    ///
    /// with `M_k = sup |𝔑^{(k)}(u)|` and `E` the Sobolev constant. Polynomial
    /// nonlinearities stop at `J + 1` with `ϝ = 1`; the tanh kind uses
    /// `ϝ = max(1, E)` and checks orders up to 60, where the terms have long
    /// since started to decay.
    fn regularity_constants(&self, data: &PdeData, u: &[f64], e: f64) -> (f64, f64, usize) {
        let full = self.mesh.full_nodal(u);
        let lo = full.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = full.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (max_r, digamma) = match self.nl.degree() {
            Some(j) => ((j + 1).max(2), 1.0),
            None => (60, e.max(1.0)),
        };
        let m = self.nl.derivative_sup(lo, hi, max_r);
        let (a_norm, b_norm) = (norm_inf(&data.a), norm_inf(&data.b));
        let u_norm = self.h1_norm(u);
        let mut sigma: f64 = 1.0;
        let mut scale = 1.0;
        for r in 1..=max_r {
            scale *= r as f64 * digamma;
            let term = match r {
                1 => u_norm + a_norm + m[0] + b_norm * m[1] + 2.0,
                2 => 2.0 + b_norm * m[2] * e + 2.0 * m[1],
                _ => b_norm * m[r] * e.powi(r as i32 - 1) + r as f64 * m[r - 1] * e.powi(r as i32 - 2),
            };
            sigma = sigma.max(term / scale);
        }
        (sigma, digamma, max_r)
    }
}

impl ResidualOracle for PdeOracle {
    fn data_dim(&self) -> usize {
        3 * self.mesh.num_quadrature_points() + 1
    }

    fn state_dim(&self) -> usize {
        self.mesh.num_free()
    }

    fn eval(&self, d: &[f64], u: &[f64]) -> Vec<f64> {
        self.assemble_residual(&self.data_from(d), u)
    }

    fn apply_derivative(&self, d: &[f64], u: &[f64], args: &[Direction<'_>]) -> Vec<f64> {
        let data = self.data_from(d);
        let dirs: Vec<Option<PdeData>> = args.iter().map(|a| a.data.map(|v| self.data_from(v))).collect();
        let pairs: Vec<(Option<&PdeData>, Option<&[f64]>)> =
            dirs.iter().zip(args).map(|(dd, a)| (dd.as_ref(), a.state)).collect();
        self.apply_residual_derivative(&data, u, &pairs)
    }

    fn solve_linearized(&self, d: &[f64], u: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
        self.jacobian(&self.data_from(d), u).solve(rhs)
    }

    fn max_derivative_order(&self) -> Option<usize> {
        self.nl.degree().map(|j| (j + 1).max(2))
    }

    fn residual_norm(&self, r: &[f64]) -> f64 {
        self.dual_norm(r)
    }

    fn state_norm(&self, u: &[f64]) -> f64 {
        self.h1_norm(u)
    }

    fn data_norm(&self, d: &[f64]) -> f64 {
        self.pde_data_norm(&self.data_from(d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic() -> Nonlinearity {
        Nonlinearity::polynomial(vec![0.0, 0.0, 1.0], None).unwrap()
    }

    #[test]
    fn nonlinearity_derivatives() {
        let n = cubic();
        assert_eq!(n.derivative(1, 2.0), 12.0);
        assert_eq!(n.derivative(4, 2.0), 0.0);
        assert_eq!(n.value(2.0), 8.0);
        let t = Nonlinearity::tanh_shifted();
        assert!(t.derivative(2, 0.0).abs() < 1e-15);
        assert!((t.value(0.0) - 2.0).abs() < 1e-15);
        assert!((t.derivative(1, 0.0) - 1.0).abs() < 1e-15);
        // tanh''' (0) = −2, tanh⁽⁵⁾(0) = 16
        assert!((t.derivative(3, 0.0) + 2.0).abs() < 1e-13);
        assert!((t.derivative(5, 0.0) - 16.0).abs() < 1e-12);
        let z = 0.7_f64;
        let s2 = 1.0 / z.cosh().powi(2);
        assert!((t.derivative(2, z) + 2.0 * z.tanh() * s2).abs() < 1e-14);
    }

    #[test]
    fn nemyckii_pointwise() {
        let n = cubic();
        let u = vec![2.0; 4];
        let one = vec![1.0; 4];
        assert_eq!(nemyckii_derivative(&n, &u, &[&one]), vec![12.0; 4]);
        assert_eq!(nemyckii_derivative(&n, &u, &[&one, &one, &one, &one]), vec![0.0; 4]);
    }

    #[test]
    fn admissibility_checks() {
        assert!(matches!(Nonlinearity::exponential(), Err(Error::Inadmissible(_))));
        assert!(Nonlinearity::polynomial(vec![0.0, 1.0], None).is_err());
        assert!(Nonlinearity::polynomial(vec![1.0, 0.0, -1.0], None).is_err());
        assert!(Nonlinearity::polynomial(vec![0.0, 0.0, 1.0], Some(3.0)).is_err());
        assert!(Nonlinearity::polynomial(vec![1.0, 0.0, 1.0], Some(4.5)).is_ok());
        // ζ − 3ζ² + ζ³ has a negative slope near ζ = 1
        assert!(Nonlinearity::polynomial(vec![1.0, -3.0, 1.0], None).is_err());
    }

    #[test]
    fn mesh_validation() {
        assert!(Mesh1D::new(vec![0.0, 0.5, 0.5, 1.0], BoundaryCondition::Dirichlet).is_err());
        assert!(Mesh1D::new(vec![0.1, 1.0], BoundaryCondition::Neumann).is_err());
        let m = Mesh1D::uniform(4, BoundaryCondition::Neumann).unwrap();
        assert_eq!(m.num_free(), 4);
        assert_eq!(Mesh1D::uniform(4, BoundaryCondition::Dirichlet).unwrap().num_free(), 3);
    }

    #[test]
    fn zero_data_zero_residual() {
        let mesh = Mesh1D::uniform(8, BoundaryCondition::Dirichlet).unwrap();
        let o = PdeOracle::new(mesh.clone(), cubic()).unwrap();
        let data = PdeData::constant(&mesh, 1.0, 1.0, 0.0, 0.0);
        let r = o.assemble_residual(&data, &vec![0.0; mesh.num_free()]);
        assert!(r.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn neumann_linear_solution_is_exact() {
        let mesh = Mesh1D::uniform(16, BoundaryCondition::Neumann).unwrap();
        let o = PdeOracle::new(mesh.clone(), Nonlinearity::polynomial(vec![], None).unwrap()).unwrap();
        let data = PdeData::constant(&mesh, 1.0, 0.0, 0.0, 1.0);
        let u = mesh.interpolate(|x| x);
        assert!(norm_inf(&o.assemble_residual(&data, &u)) < 1e-13);
    }

    #[test]
    fn poincare_constant_converges() {
        let exact = (1.0 + std::f64::consts::PI.powi(2)).sqrt() / std::f64::consts::PI;
        let mut prev = f64::INFINITY;
        for n in [16, 64, 256] {
            let mesh = Mesh1D::uniform(n, BoundaryCondition::Dirichlet).unwrap();
            let o = PdeOracle::new(mesh, cubic()).unwrap();
            let err = (o.poincare_friedrichs().unwrap() - exact).abs();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 1e-5);
    }
}
