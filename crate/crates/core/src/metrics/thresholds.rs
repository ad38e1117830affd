use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::matrix::Matrix;
use crate::metrics::gamma::{gamma_km_exact, gamma_km_heuristic_warm, GammaMethod};
use crate::rng::RandomStream;

/// Result of the k′ search: either a qualifying ℓ, or `n` when none exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum KPrime {
    Value(usize),
    Saturated(usize),
}

impl KPrime {
    pub fn get(self) -> usize {
        match self {
            KPrime::Value(v) | KPrime::Saturated(v) => v,
        }
    }

    pub fn is_saturated(self) -> bool {
        matches!(self, KPrime::Saturated(_))
    }
}

/// `x log(e D / x)`, the entropy-type growth used throughout.
pub(crate) fn xlog(x: f64, d: f64) -> f64 {
    x * (std::f64::consts::E * d / x).ln()
}

/// Smallest ℓ in `1..=n` with `m log(eN/m) <= ℓ log(en/ℓ)`.
pub fn k_prime(m: usize, n: usize, big_n: usize) -> Result<KPrime> {
    if m == 0 || m > big_n {
        return arg(format!("m = {m} must lie in 1..={big_n}"));
    }
    if n == 0 {
        return arg("n must be at least 1");
    }
    let target = xlog(m as f64, big_n as f64);
    Ok((1..=n)
        .find(|&l| target <= xlog(l as f64, n as f64))
        .map_or(KPrime::Saturated(n), KPrime::Value))
}

/// `λ = sqrt(log log 3m) sqrt(m) log(eN/m) + sqrt(k) log(en/k)`.
pub fn lambda_threshold(k: usize, m: usize, n: usize, big_n: usize) -> Result<f64> {
    if k == 0 || k > n {
        return arg(format!("k = {k} must lie in 1..={n}"));
    }
    if n > big_n {
        return arg(format!("n = {n} must not exceed N = {big_n}"));
    }
    if m == 0 || m > big_n {
        return arg(format!("m = {m} must lie in 1..={big_n}"));
    }
    let (k, m) = (k as f64, m as f64);
    let loglog = (3.0 * m).ln().ln();
    Ok(loglog.sqrt() * m.sqrt() * (std::f64::consts::E * big_n as f64 / m).ln()
        + k.sqrt() * (std::f64::consts::E * n as f64 / k).ln())
}

/// Options for [`self_consistent_k`].
#[derive(Debug, Clone)]
pub struct ScanOptions {
    pub method: GammaMethod,
    pub restarts: usize,
    pub stream: RandomStream,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            method: GammaMethod::Exact,
            restarts: 20,
            stream: RandomStream::new(0),
        }
    }
}

/// Largest `k <= n` with `k <= (Γ_{k,m}(A)/B)²`, or 0 if none.
///
/// Since Γ_{k,m} <= Γ_{n,m}, only `k <= (Γ_{n,m}/B)²` can qualify, which
/// bounds the scan. Heuristic runs are warm-started from the previous
/// certificate.
pub fn self_consistent_k(a: &Matrix, m: usize, b: f64, opts: &ScanOptions) -> Result<usize> {
    if !(b >= 1.0) {
        return arg(format!("B = {b} must be at least 1"));
    }
    let n = a.rows();
    let mut warm: Option<Vec<f64>> = None;
    let gamma = |k: usize, warm: &Option<Vec<f64>>| -> Result<(f64, Vec<f64>)> {
        let c = match opts.method {
            GammaMethod::Exact => gamma_km_exact(a, k, m)?,
            GammaMethod::Heuristic => gamma_km_heuristic_warm(
                a,
                k,
                m,
                opts.restarts,
                &opts.stream.child(k as u64),
                warm.as_deref(),
            )?,
        };
        Ok((c.value, c.direction))
    };

    let (top, _) = gamma(n, &None)?;
    let ceiling = ((top / b).powi(2).floor() as usize).min(n);
    let mut found = 0;
    for k in 1..=ceiling {
        let (value, dir) = gamma(k, &warm)?;
        if k as f64 <= (value / b).powi(2) {
            found = k;
        }
        warm = Some(dir);
    }
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn k_prime_examples() {
        assert_eq!(k_prime(2, 16, 16).unwrap(), KPrime::Value(2));
        for n in [1, 5, 40] {
            assert_eq!(k_prime(1, n, n).unwrap(), KPrime::Value(1));
        }
        assert_eq!(k_prime(4, 8, 16).unwrap(), KPrime::Saturated(8));
        assert!(k_prime(0, 8, 16).is_err());
    }

    #[test]
    fn k_prime_matches_definition_scan() {
        for big_n in [4usize, 16, 64] {
            for n in 1..=big_n {
                for m in 1..=big_n {
                    let kp = k_prime(m, n, big_n).unwrap();
                    let t = m as f64 * (std::f64::consts::E * big_n as f64 / m as f64).ln();
                    let f = |l: usize| l as f64 * (std::f64::consts::E * n as f64 / l as f64).ln();
                    match kp {
                        KPrime::Value(l) => {
                            assert!(t <= f(l));
                            assert!((1..l).all(|j| t > f(j)));
                        }
                        KPrime::Saturated(l) => {
                            assert_eq!(l, n);
                            assert!((1..=n).all(|j| t > f(j)));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn lambda_examples() {
        let e = std::f64::consts::E;
        let direct = 12f64.ln().ln().sqrt() * 2.0 * (4.0 * e).ln() + 2f64.sqrt() * (4.0 * e).ln();
        assert_relative_eq!(lambda_threshold(2, 4, 8, 16).unwrap(), direct, max_relative = 1e-14);
        assert_relative_eq!(lambda_threshold(2, 4, 8, 16).unwrap(), 7.9281, epsilon = 1e-4);
        let one = lambda_threshold(1, 1, 1, 1).unwrap();
        assert_relative_eq!(one, 3f64.ln().ln().sqrt() + 1.0, max_relative = 1e-14);
        let gap = lambda_threshold(2, 4, 8, 32).unwrap() - lambda_threshold(2, 4, 8, 16).unwrap();
        assert_relative_eq!(gap, 12f64.ln().ln().sqrt() * 2.0 * 2f64.ln(), max_relative = 1e-12);
        assert!(lambda_threshold(1, 1, 9, 8).is_err());
    }

    #[test]
    fn self_consistent_examples() {
        let id = Matrix::identity(4);
        assert_eq!(self_consistent_k(&id, 1, 1.0, &ScanOptions::default()).unwrap(), 1);
        let two = id.scaled(2.0);
        assert_eq!(self_consistent_k(&two, 1, 1.0, &ScanOptions::default()).unwrap(), 4);
        let a = Matrix::from_rows(&[[1.0, -2.0, 0.5], [0.3, 3.0, 1.0]]).unwrap();
        let b = 10.0 * a.max_abs() * (2.0f64 * 2.0).sqrt();
        assert_eq!(self_consistent_k(&a, 2, b, &ScanOptions::default()).unwrap(), 0);
        assert!(self_consistent_k(&a, 2, 0.5, &ScanOptions::default()).is_err());
    }

    #[test]
    fn heuristic_scan_agrees_on_diagonal() {
        let opts = ScanOptions {
            method: GammaMethod::Heuristic,
            ..ScanOptions::default()
        };
        let two = Matrix::identity(4).scaled(2.0);
        assert_eq!(self_consistent_k(&two, 1, 1.0, &opts).unwrap(), 4);
    }
}
