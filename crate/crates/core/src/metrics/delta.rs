//! Restricted isometry constant of order m.
//!
//! For an already normalized matrix `A`, `δ_m(A) = sup_{x ∈ U_m} | |Ax|² - |x|² |`.
//! On a fixed support `J` the supremum is attained at an extreme eigenvector
//! of `A_Jᵀ A_J`, so the exact value is a max over supports of
//! `max(λmax - 1, 1 - λmin)`.

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combin::{binomial, binomial_u64, next_combination, rank_blocks, unrank};
use crate::error::{arg, Error, Result};
use crate::matrix::{sym_extremes, Matrix};
use crate::rng::RandomStream;

pub const DEFAULT_DELTA_CAP: u64 = 1_000_000;

const BLOCK: u64 = 1 << 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `λmax - 1` attains the value.
    Upper,
    /// `1 - λmin` attains the value.
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub value: f64,
    pub witness_support: Vec<usize>,
    pub witness_eigenvalue: f64,
    pub side: Side,
    /// True when only a random subset of supports was examined.
    pub lower_bound: bool,
    pub supports_examined: u64,
}

impl DeltaReport {
    /// Recomputes the value on the witness support from `a`.
    pub fn recompute(&self, a: &Matrix) -> f64 {
        let g = a.column_gram();
        support_deviation(&g, a.cols(), &self.witness_support, &mut Vec::new()).0
    }
}

/// (deviation, eigenvalue, side) on one support.
fn support_deviation(gram: &[f64], cols: usize, support: &[usize], buf: &mut Vec<f64>) -> (f64, f64, Side) {
    let m = support.len();
    buf.clear();
    for &r in support {
        for &c in support {
            buf.push(gram[r * cols + c]);
        }
    }
    let (lo, hi) = sym_extremes(buf, m);
    let (up, down) = (hi - 1.0, 1.0 - lo);
    if up >= down {
        (up, hi, Side::Upper)
    } else {
        (down, lo, Side::Lower)
    }
}

#[derive(Clone)]
struct Best {
    value: f64,
    eig: f64,
    side: Side,
    support: Vec<usize>,
}

impl Best {
    fn better(self, other: Best) -> Best {
        match other.value.total_cmp(&self.value) {
            std::cmp::Ordering::Greater => other,
            std::cmp::Ordering::Less => self,
            std::cmp::Ordering::Equal => {
                if other.support < self.support {
                    other
                } else {
                    self
                }
            }
        }
    }
}

/// Exact δ_m by enumerating every support of size `m`.
pub fn delta_m_exact(a: &Matrix, m: usize) -> Result<DeltaReport> {
    delta_m_exact_with_cap(a, m, DEFAULT_DELTA_CAP)
}

pub fn delta_m_exact_with_cap(a: &Matrix, m: usize, cap: u64) -> Result<DeltaReport> {
    let cols = a.cols();
    if m == 0 || m > cols {
        return arg(format!("m = {m} must lie in 1..={cols}"));
    }
    let total = match binomial_u64(cols, m) {
        Some(t) if t <= cap => t,
        _ => {
            return Err(Error::TooLarge {
                count: binomial(cols, m),
                cap,
                hint: "use delta_m_sampled (random supports, lower bound)",
            })
        }
    };
    let gram = a.column_gram();
    let best = rank_blocks(total, BLOCK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(start, end)| {
            let mut support = unrank(cols, m, start);
            let mut buf = Vec::with_capacity(m * m);
            let (v, e, s) = support_deviation(&gram, cols, &support, &mut buf);
            let mut best = Best { value: v, eig: e, side: s, support: support.clone() };
            for _ in start + 1..end {
                next_combination(&mut support, cols);
                let (v, e, s) = support_deviation(&gram, cols, &support, &mut buf);
                // lexicographic order within a block: strict improvement only
                if v > best.value {
                    best = Best { value: v, eig: e, side: s, support: support.clone() };
                }
            }
            best
        })
        .reduce_with(Best::better)
        .expect("at least one support");
    Ok(DeltaReport {
        value: best.value,
        witness_support: best.support,
        witness_eigenvalue: best.eig,
        side: best.side,
        lower_bound: false,
        supports_examined: total,
    })
}

/// δ_m restricted to `supports` uniformly random supports; a lower bound on
/// the exact value. Support `s` is drawn from `stream.child(s)`.
pub fn delta_m_sampled(a: &Matrix, m: usize, supports: u64, stream: &RandomStream) -> Result<DeltaReport> {
    let cols = a.cols();
    if m == 0 || m > cols {
        return arg(format!("m = {m} must lie in 1..={cols}"));
    }
    if supports == 0 {
        return arg("at least one support must be sampled");
    }
    let gram = a.column_gram();
    let best = (0..supports)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream.child(s).rng();
            let mut support = sample(&mut rng, cols, m).into_vec();
            support.sort_unstable();
            let (v, e, side) = support_deviation(&gram, cols, &support, &mut Vec::with_capacity(m * m));
            Best { value: v, eig: e, side, support }
        })
        .reduce_with(Best::better)
        .expect("at least one support");
    Ok(DeltaReport {
        value: best.value,
        witness_support: best.support,
        witness_eigenvalue: best.eig,
        side: best.side,
        lower_bound: true,
        supports_examined: supports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn diag21() -> Matrix {
        Matrix::from_rows(&[[2.0, 0.0], [0.0, 1.0]]).unwrap()
    }

    #[test]
    fn orthonormal_columns_have_zero_delta() {
        let r = delta_m_exact(&Matrix::identity(2), 1).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn diagonal_examples() {
        let r = delta_m_exact(&diag21(), 1).unwrap();
        assert_eq!(r.value, 3.0);
        assert_eq!(r.witness_support, vec![0]);
        let r = delta_m_exact(&diag21(), 2).unwrap();
        assert_eq!(r.value, 3.0);
        assert_eq!(r.side, Side::Upper);
    }

    #[test]
    fn diag_m2_matches_brute_force_over_unit_vectors() {
        let mut rng = RandomStream::new(3).rng();
        let mut best: f64 = 0.0;
        for _ in 0..100_000 {
            let th: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let (x1, x2) = (th.cos(), th.sin());
            best = best.max((4.0 * x1 * x1 + x2 * x2 - 1.0).abs());
        }
        assert!((delta_m_exact(&diag21(), 2).unwrap().value - best).abs() < 1e-3);
    }

    #[test]
    fn cap_is_enforced() {
        let a = Matrix::identity(30);
        let err = delta_m_exact_with_cap(&a, 5, 1000).unwrap_err();
        assert!(matches!(err, Error::TooLarge { .. }));
        assert!(delta_m_exact(&a, 0).is_err());
    }

    #[test]
    fn sampled_is_a_lower_bound_and_reproducible() {
        let spec = crate::sampler::DistributionSpec::new(crate::sampler::Kind::Gaussian, 12);
        let a = crate::sampler::sample_matrix(&spec, 6, &RandomStream::new(1)).unwrap().scaled(1.0 / 6f64.sqrt());
        let exact = delta_m_exact(&a, 3).unwrap();
        let s1 = delta_m_sampled(&a, 3, 50, &RandomStream::new(2)).unwrap();
        let s2 = delta_m_sampled(&a, 3, 50, &RandomStream::new(2)).unwrap();
        assert_eq!(s1, s2);
        assert!(s1.lower_bound);
        assert!(s1.value <= exact.value);
        assert_relative_eq!(exact.recompute(&a), exact.value, max_relative = 1e-12);
    }
}
