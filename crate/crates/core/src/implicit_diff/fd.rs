//! Finite-difference reference for mixed directional derivatives of a
//! black-box map, with Richardson extrapolation in `h²`.

use crate::error::{Error, Result};
use crate::linalg::{axpy, sub};

#[derive(Clone, Debug, PartialEq)]
pub struct FdEstimate {
    pub estimate: Vec<f64>,
    /// Difference of the last two diagonal extrapolants.
    pub indicator: Vec<f64>,
}

/// Geometric step list `h0, h0/2, …` of the given length.
pub fn richardson_steps(h0: f64, levels: usize) -> Vec<f64> {
    (0..levels).map(|i| h0 / f64::powi(2.0, i as i32)).collect()
}

/// Central-difference estimate of `Dⁿ map(d)[h_1, …, h_n]` from the product
/// of one-dimensional central differences (`2ⁿ` evaluations per step).
///
/// The truncation error is even in the step, so Neville extrapolation in
/// `step²` over `steps` removes successive error terms.
pub fn finite_difference_check<F>(
    map: F,
    d: &[f64],
    directions: &[&[f64]],
    steps: &[f64],
) -> Result<FdEstimate>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = directions.len();
    if n == 0 || n > 4 {
        return Err(Error::domain("finite differences support orders 1 to 4"));
    }
    if steps.len() < 2 || steps.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::domain("need at least two positive steps"));
    }
    let mut rows: Vec<Vec<Vec<f64>>> = Vec::with_capacity(steps.len());
    for (i, &step) in steps.iter().enumerate() {
        let mut row = vec![stencil(&map, d, directions, step)?];
        for j in 1..=i {
            let (xi, xj) = (steps[i] * steps[i], steps[i - j] * steps[i - j]);
            let prev = &row[j - 1];
            let above = &rows[i - 1][j - 1];
            let next: Vec<f64> = prev
                .iter()
                .zip(above)
                .map(|(p, a)| (xj * p - xi * a) / (xj - xi))
                .collect();
            row.push(next);
        }
        rows.push(row);
    }
    let m = steps.len();
    let estimate = rows[m - 1][m - 1].clone();
    let indicator = sub(&estimate, &rows[m - 2][m - 2]);
    Ok(FdEstimate { estimate, indicator })
}

fn stencil<F>(map: &F, d: &[f64], directions: &[&[f64]], step: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = directions.len();
    let mut acc: Option<Vec<f64>> = None;
    for mask in 0u32..(1 << n) {
        let mut point = d.to_vec();
        let mut sign = 1.0;
        for (j, h) in directions.iter().enumerate() {
            let s = if mask >> j & 1 == 1 { -1.0 } else { 1.0 };
            sign *= s;
            axpy(s * step, h, &mut point);
        }
        let value = map(&point)?;
        match acc.as_mut() {
            Some(a) => axpy(sign, &value, a),
            None => acc = Some(value.iter().map(|v| sign * v).collect()),
        }
    }
    let scale = (2.0 * step).powi(n as i32);
    Ok(acc.expect("at least one evaluation").iter().map(|v| v / scale).collect())
}
