//! Basis pursuit: `min |z|_1` subject to `Az = b`.
//!
//! The problem is solved as the linear program over `z = u - v`, `u, v >= 0`
//! with a simplex solver. A vertex solution is supported on at most `n`
//! columns; it is then polished by solving the square or overdetermined
//! system on that support in least squares, which removes the simplex
//! round-off without changing the support or signs.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};

use crate::error::{arg, Error, Result};
use crate::matrix::{norm2, Matrix};

pub const DEFAULT_TOL: f64 = 1e-9;

fn residual(a: &Matrix, z: &[f64], b: &[f64]) -> f64 {
    let az = a.mul_vec(z);
    az.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn l1(z: &[f64]) -> f64 {
    z.iter().map(|v| v.abs()).sum()
}

/// Least-squares refit of `z` on its own support; `None` if it would change
/// a sign or increase the ℓ1 norm.
fn polish(a: &Matrix, b: &[f64], z: &[f64]) -> Option<Vec<f64>> {
    let scale = z.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let support: Vec<usize> = (0..z.len()).filter(|&j| z[j].abs() > 1e-10 * scale).collect();
    if support.is_empty() || support.len() > a.rows() {
        return None;
    }
    let sub = DMatrix::from_fn(a.rows(), support.len(), |i, c| a.get(i, support[c]));
    let rhs = DVector::from_column_slice(b);
    let svd = sub.svd(true, true);
    let w = svd.solve(&rhs, 1e-13).ok()?;
    let mut out = vec![0.0; z.len()];
    for (c, &j) in support.iter().enumerate() {
        if w[c].signum() != z[j].signum() {
            return None;
        }
        out[j] = w[c];
    }
    (l1(&out) <= l1(z) + 1e-9 * scale).then_some(out)
}

/// Minimum ℓ1-norm `z` with `|Az - b|_2 <= tol * max(1, |b|_2)`.
pub fn basis_pursuit(a: &Matrix, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    let (n, big_n) = (a.rows(), a.cols());
    if b.len() != n {
        return arg(format!("b has length {}, expected {n}", b.len()));
    }
    if n > big_n {
        return arg(format!("basis pursuit expects n <= N, got {n} x {big_n}"));
    }
    if !(tol > 0.0) {
        return arg(format!("tolerance {tol} must be positive"));
    }

    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let pos: Vec<_> = (0..big_n).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    let neg: Vec<_> = (0..big_n).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    for (i, &bi) in b.iter().enumerate() {
        let row = a.row(i);
        let terms: Vec<_> = (0..big_n)
            .filter(|&j| row[j] != 0.0)
            .flat_map(|j| [(pos[j], row[j]), (neg[j], -row[j])])
            .collect();
        lp.add_constraint(terms.as_slice(), ComparisonOp::Eq, bi);
    }
    let sol = lp.solve().map_err(|e| match e {
        microlp::Error::Infeasible => Error::Infeasible("no z satisfies Az = b (A is rank deficient and b is not in its range)".into()),
        other => Error::NonConvergence {
            reason: other.to_string(),
            best: Vec::new(),
        },
    })?;
    let z: Vec<f64> = (0..big_n).map(|j| sol[pos[j]] - sol[neg[j]]).collect();

    let z = match polish(a, b, &z) {
        Some(p) if residual(a, &p, b) <= residual(a, &z, b) => p,
        _ => z,
    };
    let limit = tol * norm2(b).max(1.0);
    let res = residual(a, &z, b);
    if res > limit {
        return Err(Error::NonConvergence {
            reason: format!("residual {res:.3e} exceeds tolerance {limit:.3e}"),
            best: z,
        });
    }
    Ok(z)
}
