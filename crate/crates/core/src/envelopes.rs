//! Gevrey derivative-bound envelopes `(n!)^s · scale · rate^n` and their
//! propagation through the implicit mapping theorem and through compositions.
//!
//! All bounds are evaluated in natural-log space: `(n!)^s` leaves the range of
//! `f64` near `n = 170` while the logarithm stays tame far beyond that.

use std::fmt;

use crate::combinatorics::{ln_big, ln_factorial, schroeder_hipparchus, MultiIndex, C_KAPPA};
use crate::error::{Error, Result};

/// Acceptance slack for norms produced by exact (closed-form or polynomial)
/// arithmetic.
pub const EXACT_TOLERANCE: f64 = 1e-9;
/// Acceptance slack for norms measured on finite-element solutions.
pub const FEM_TOLERANCE: f64 = 1e-6;

/// Bound family `n ↦ (n!)^s · scale · rate^n`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GevreyEnvelope {
    pub s: f64,
    pub scale: f64,
    pub rate: f64,
}

impl GevreyEnvelope {
    pub fn new(s: f64, scale: f64, rate: f64) -> Result<Self> {
        let env = Self { s, scale, rate };
        env.validate()?;
        Ok(env)
    }

    pub fn analytic(scale: f64, rate: f64) -> Result<Self> {
        Self::new(1.0, scale, rate)
    }

    fn validate(&self) -> Result<()> {
        if !(self.s >= 1.0 && self.s.is_finite()) {
            return Err(Error::domain(format!("Gevrey index must be ≥ 1, got {}", self.s)));
        }
        if !(self.scale >= 0.0 && self.scale.is_finite()) {
            return Err(Error::domain(format!("scale must be finite and ≥ 0, got {}", self.scale)));
        }
        if !(self.rate >= 0.0 && self.rate.is_finite()) {
            return Err(Error::domain(format!("rate must be finite and ≥ 0, got {}", self.rate)));
        }
        Ok(())
    }

    /// The normalization `scale ≥ 1`, `rate ≥ 1` required of residual bounds.
    fn require_normalized(&self) -> Result<()> {
        self.validate()?;
        if self.scale < 1.0 || self.rate < 1.0 {
            return Err(Error::domain(format!(
                "residual envelope needs scale ≥ 1 and rate ≥ 1, got scale={} rate={}",
                self.scale, self.rate
            )));
        }
        Ok(())
    }

    /// `ln((n!)^s · scale · rate^n)`; `−∞` for a vanishing bound.
    pub fn ln_bound(&self, n: u64) -> f64 {
        if self.scale == 0.0 || (self.rate == 0.0 && n > 0) {
            return f64::NEG_INFINITY;
        }
        let rate_term = if n == 0 { 0.0 } else { n as f64 * self.rate.ln() };
        self.s * ln_factorial(n) + self.scale.ln() + rate_term
    }

    pub fn bound(&self, n: u64) -> f64 {
        self.ln_bound(n).exp()
    }
}

impl fmt::Display for GevreyEnvelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(n!)^{} · {:e} · {:e}^n", self.s, self.scale, self.rate)
    }
}

/// Uniform bound `α` on the inverse of the state linearization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityConstant(f64);

impl StabilityConstant {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha >= 1.0 && alpha.is_finite()) {
            return Err(Error::domain(format!("stability constant must be ≥ 1, got {alpha}")));
        }
        Ok(Self(alpha))
    }

    /// Clamps a measured inverse norm to the normalization `α ≥ 1`.
    pub fn at_least_one(alpha: f64) -> Result<Self> {
        Self::new(alpha.max(1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Weight tail `γ_k = c · k^{−ϑ}`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AlgebraicTail {
    pub c: f64,
    pub theta: f64,
}

/// A summable weight sequence `γ = (γ_1, γ_2, …)`: an explicit finite prefix
/// followed by an optional algebraic tail (zero when absent).
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WeightSequence {
    pub prefix: Vec<f64>,
    pub tail: Option<AlgebraicTail>,
}

impl WeightSequence {
    pub fn new(prefix: Vec<f64>, tail: Option<AlgebraicTail>) -> Result<Self> {
        if prefix.iter().any(|&g| !(g >= 0.0 && g.is_finite())) {
            return Err(Error::domain("weights must be finite and nonnegative"));
        }
        if let Some(t) = tail {
            if !(t.c >= 0.0 && t.theta > 1.0) {
                return Err(Error::domain("tail needs c ≥ 0 and ϑ > 1 for summability"));
            }
        }
        Ok(Self { prefix, tail })
    }

    /// `γ_k = c k^{−ϑ}` on `1..=active`, zero beyond.
    pub fn algebraic(c: f64, theta: f64, active: usize) -> Result<Self> {
        let prefix = (1..=active).map(|k| c * (k as f64).powf(-theta)).collect();
        Self::new(prefix, None)
    }

    /// All-ones on `1..=active`.
    pub fn ones(active: usize) -> Self {
        Self {
            prefix: vec![1.0; active],
            tail: None,
        }
    }

    /// `γ_k`, 1-based.
    pub fn weight(&self, k: usize) -> f64 {
        assert!(k >= 1, "weights are 1-based");
        if k <= self.prefix.len() {
            self.prefix[k - 1]
        } else {
            self.tail.map_or(0.0, |t| t.c * (k as f64).powf(-t.theta))
        }
    }
}

/// Weighted bound `α ↦ (|α|!)^s · scale · rate^{|α|} · γ^α` for mixed partials.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ParametricEnvelope {
    pub base: GevreyEnvelope,
    pub weights: WeightSequence,
}

impl ParametricEnvelope {
    pub fn ln_bound(&self, alpha: &MultiIndex) -> f64 {
        let ln_w = alpha.ln_weight_pow(|k| self.weights.weight(k));
        self.base.ln_bound(alpha.order()) + ln_w
    }

    pub fn bound(&self, alpha: &MultiIndex) -> f64 {
        self.ln_bound(alpha).exp()
    }
}

/// `ln[(n!)^s α^{2n−1} ς^{2n−1} ϝ^{3n−2} κ_n]`, the order-by-order bound on
/// the derivatives of the implicitly defined solution map.
pub fn lemma_bound(n: u64, alpha: StabilityConstant, env_r: &GevreyEnvelope) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("order must be ≥ 1"));
    }
    env_r.require_normalized()?;
    let kappa = schroeder_hipparchus(n as usize)?;
    let n_f = n as f64;
    Ok(env_r.s * ln_factorial(n)
        + (2.0 * n_f - 1.0) * (alpha.value().ln() + env_r.scale.ln())
        + (3.0 * n_f - 2.0) * env_r.rate.ln()
        + ln_big(&kappa))
}

/// Envelope of the solution map: same `s`, scale `1/(c_κ α ς ϝ²)` and rate
/// `c_κ α² ς² ϝ³`.
pub fn implicit_envelope(alpha: StabilityConstant, env_r: &GevreyEnvelope) -> Result<GevreyEnvelope> {
    env_r.require_normalized()?;
    let a = alpha.value();
    let (sigma, digamma) = (env_r.scale, env_r.rate);
    GevreyEnvelope::new(
        env_r.s,
        1.0 / (C_KAPPA * a * sigma * digamma * digamma),
        C_KAPPA * a * a * sigma * sigma * digamma.powi(3),
    )
}

/// Guaranteed radius of convergence `1/rate` of the Taylor series of an
/// analytic map.
pub fn convergence_radius(env_s: &GevreyEnvelope) -> Result<f64> {
    if env_s.s > 1.0 {
        return Err(Error::domain(
            "no positive radius guaranteed for non-analytic class (s > 1)",
        ));
    }
    if !(env_s.rate > 0.0) {
        return Err(Error::domain("radius needs a positive rate"));
    }
    Ok(1.0 / env_s.rate)
}

fn composed_constants(mu_inner: f64, nu_inner: f64, mu_outer: f64, nu_outer: f64) -> (f64, f64) {
    let t = nu_outer * mu_inner;
    (mu_outer * t / (t + 1.0), (t + 1.0) * nu_inner)
}

/// Envelope of `outer ∘ inner`.
pub fn compose_envelopes(inner: &GevreyEnvelope, outer: &GevreyEnvelope) -> GevreyEnvelope {
    let (scale, rate) = composed_constants(inner.scale, inner.rate, outer.scale, outer.rate);
    GevreyEnvelope {
        s: inner.s.max(outer.s),
        scale,
        rate,
    }
}

/// Weighted envelope of `outer ∘ inner` where `inner` is a parametric map.
/// The weight sequence is inherited unchanged.
pub fn compose_parametric(inner: &ParametricEnvelope, outer: &GevreyEnvelope) -> ParametricEnvelope {
    ParametricEnvelope {
        base: compose_envelopes(&inner.base, outer),
        weights: inner.weights.clone(),
    }
}

/// One measured derivative norm to be checked against an envelope.
#[derive(Clone, Debug, PartialEq)]
pub struct NormEntry {
    pub key: String,
    pub order: u64,
    /// Needed for weighted (parametric) envelopes.
    pub index: Option<MultiIndex>,
    /// Log of an extra multiplicative factor on the bound, e.g. the product of
    /// direction norms for a directional derivative.
    pub ln_factor: f64,
    pub norm: f64,
}

impl NormEntry {
    pub fn directional(key: impl Into<String>, order: u64, ln_factor: f64, norm: f64) -> Self {
        Self {
            key: key.into(),
            order,
            index: None,
            ln_factor,
            norm,
        }
    }

    pub fn parametric(index: MultiIndex, norm: f64) -> Self {
        Self {
            key: index.to_string(),
            order: index.order(),
            index: Some(index),
            ln_factor: 0.0,
            norm,
        }
    }
}

/// Anything that can bound a [`NormEntry`].
pub trait Envelope {
    fn ln_bound_for(&self, entry: &NormEntry) -> Result<f64>;
}

impl Envelope for GevreyEnvelope {
    fn ln_bound_for(&self, entry: &NormEntry) -> Result<f64> {
        self.validate()?;
        Ok(self.ln_bound(entry.order) + entry.ln_factor)
    }
}

impl Envelope for ParametricEnvelope {
    fn ln_bound_for(&self, entry: &NormEntry) -> Result<f64> {
        self.base.validate()?;
        let alpha = entry.index.as_ref().ok_or_else(|| {
            Error::contract(format!("entry {} has no multi-index for a weighted bound", entry.key))
        })?;
        Ok(self.ln_bound(alpha) + entry.ln_factor)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckRow {
    pub key: String,
    pub order: u64,
    pub measured: f64,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopeReport {
    pub rows: Vec<CheckRow>,
    pub tolerance: f64,
    pub passed: bool,
}

impl EnvelopeReport {
    pub fn offending(&self) -> impl Iterator<Item = &CheckRow> {
        self.rows.iter().filter(move |r| !(r.ratio <= 1.0 + self.tolerance))
    }

    pub fn max_ratio(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| if r.ratio > m || r.ratio.is_nan() { r.ratio } else { m })
    }
}

/// Ratio `measured / bound` computed in log space.
pub fn log_ratio(measured: f64, ln_bound: f64) -> f64 {
    if measured == 0.0 {
        0.0
    } else if ln_bound == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        (measured.ln() - ln_bound).exp()
    }
}

/// Compares each measured norm with its envelope bound; passes iff every
/// ratio is at most `1 + tolerance`.
pub fn envelope_check<E: Envelope + ?Sized>(
    table: &[NormEntry],
    env: &E,
    tolerance: f64,
) -> Result<EnvelopeReport> {
    if table.is_empty() {
        return Err(Error::domain("empty norm table"));
    }
    let mut rows = Vec::with_capacity(table.len());
    for entry in table {
        if !(entry.norm >= 0.0) {
            return Err(Error::domain(format!("norm of {} is not a nonnegative number", entry.key)));
        }
        let ln_b = env.ln_bound_for(entry)?;
        rows.push(CheckRow {
            key: entry.key.clone(),
            order: entry.order,
            measured: entry.norm,
            bound: ln_b.exp(),
            ratio: log_ratio(entry.norm, ln_b),
        });
    }
    let passed = rows.iter().all(|r| r.ratio <= 1.0 + tolerance);
    Ok(EnvelopeReport {
        rows,
        tolerance,
        passed,
    })
}
