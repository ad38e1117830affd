use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::metrics::delta::{delta_m_exact, delta_m_sampled};
use crate::recovery::solver::{basis_pursuit, DEFAULT_TOL};
use crate::rng::RandomStream;
use crate::sampler::{sample_matrix, DistributionSpec};
use crate::tails::curve::clopper_pearson;

/// Relative sup-norm error below which a reconstruction counts as exact.
pub const SUCCESS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryTrial {
    pub trial: usize,
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub m: usize,
    pub support: Vec<usize>,
    pub signs: Vec<i8>,
    pub success: bool,
    pub max_error: f64,
    pub residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub m: usize,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub records: Vec<RecoveryTrial>,
}

/// Uniform random support of size `m` with ±1/√m entries.
pub fn random_sparse_signal(big_n: usize, m: usize, stream: &RandomStream) -> (Vec<usize>, Vec<i8>, Vec<f64>) {
    let mut rng = stream.rng();
    let mut support = sample(&mut rng, big_n, m).into_vec();
    support.sort_unstable();
    let signs: Vec<i8> = support.iter().map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
    let amp = 1.0 / (m as f64).sqrt();
    let mut x = vec![0.0; big_n];
    for (&j, &s) in support.iter().zip(&signs) {
        x[j] = amp * s as f64;
    }
    (support, signs, x)
}

fn run_trial(spec: &DistributionSpec, n: usize, m: usize, trial: usize, stream: &RandomStream) -> RecoveryTrial {
    let big_n = spec.dimension();
    let (support, signs, x) = random_sparse_signal(big_n, m, &stream.child(1));
    let mut rec = RecoveryTrial {
        trial,
        n,
        big_n,
        m,
        support,
        signs,
        success: false,
        max_error: f64::INFINITY,
        residual: f64::INFINITY,
        failure: None,
    };
    let a = match sample_matrix(spec, n, &stream.child(0)) {
        Ok(a) => a.scaled(1.0 / (n as f64).sqrt()),
        Err(e) => {
            rec.failure = Some(e.to_string());
            return rec;
        }
    };
    let b = a.mul_vec(&x);
    match basis_pursuit(&a, &b, DEFAULT_TOL) {
        Ok(z) => {
            let xmax = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            rec.max_error = z.iter().zip(&x).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
            let az = a.mul_vec(&z);
            rec.residual = az.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            rec.success = rec.max_error <= SUCCESS_TOL * xmax;
        }
        Err(e) => rec.failure = Some(e.to_string()),
    }
    rec
}

/// Basis pursuit on `(Γ/√n, Γx/√n)` for `trials` random m-sparse unit
/// signals; trial `t` uses `stream.child(t)`.
pub fn recovery_experiment(
    spec: &DistributionSpec,
    n: usize,
    m: usize,
    trials: usize,
    stream: &RandomStream,
) -> Result<RecoveryReport> {
    spec.validate()?;
    let big_n = spec.dimension();
    if m == 0 || m > big_n {
        return arg(format!("m = {m} must lie in 1..={big_n}"));
    }
    if n == 0 || n > big_n {
        return arg(format!("n = {n} must lie in 1..={big_n}"));
    }
    if trials == 0 {
        return arg("at least one trial is required");
    }
    let records: Vec<RecoveryTrial> = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(spec, n, m, t, &stream.child(t as u64)))
        .collect();
    let successes = records.iter().filter(|r| r.success).count();
    let (ci_low, ci_high) = clopper_pearson(successes as u64, trials as u64, 0.95);
    Ok(RecoveryReport {
        n,
        big_n,
        m,
        trials,
        successes,
        success_rate: successes as f64 / trials as f64,
        ci_low,
        ci_high,
        records,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum DeltaMethod {
    Exact,
    SupportSampled { supports: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaEnsemble {
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub m: usize,
    pub values: Vec<f64>,
    pub median: f64,
    pub q90: f64,
    /// True when values are support-sampled lower bounds.
    pub lower_bound: bool,
}

/// Linear-interpolation quantile (type 7) of `values`.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Independent draws of `δ_m(Γ/√n)`; trial `t` uses `stream.child(t)`.
pub fn delta_m_ensemble(
    spec: &DistributionSpec,
    n: usize,
    m: usize,
    trials: usize,
    method: DeltaMethod,
    stream: &RandomStream,
) -> Result<DeltaEnsemble> {
    spec.validate()?;
    if trials == 0 {
        return arg("at least one trial is required");
    }
    let scale = 1.0 / (n.max(1) as f64).sqrt();
    // Trials run sequentially; each exact enumeration is itself parallel.
    let values = (0..trials)
        .map(|t| {
            let s = stream.child(t as u64);
            let a = sample_matrix(spec, n, &s.child(0))?.scaled(scale);
            Ok(match method {
                DeltaMethod::Exact => delta_m_exact(&a, m)?.value,
                DeltaMethod::SupportSampled { supports } => delta_m_sampled(&a, m, supports, &s.child(1))?.value,
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(DeltaEnsemble {
        n,
        big_n: spec.dimension(),
        m,
        median: quantile(&values, 0.5),
        q90: quantile(&values, 0.9),
        lower_bound: matches!(method, DeltaMethod::SupportSampled { .. }),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::Kind;

    #[test]
    fn square_gaussian_always_recovers() {
        let spec = DistributionSpec::new(Kind::Gaussian, 8);
        let r = recovery_experiment(&spec, 8, 1, 30, &RandomStream::new(2)).unwrap();
        assert_eq!(r.success_rate, 1.0);
        for rec in &r.records {
            assert!(rec.residual <= DEFAULT_TOL * 1.0);
        }
    }

    #[test]
    fn records_independent_of_thread_count() {
        let spec = DistributionSpec::new(Kind::LaplaceProduct, 40);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| recovery_experiment(&spec, 16, 3, 12, &RandomStream::new(5)).unwrap())
        };
        let (a, b) = (run(1), run(8));
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn signal_is_unit_and_sparse() {
        let (support, signs, x) = random_sparse_signal(30, 4, &RandomStream::new(1));
        assert_eq!(support.len(), 4);
        assert_eq!(signs.len(), 4);
        assert_eq!(x.iter().filter(|v| **v != 0.0).count(), 4);
        assert!((crate::matrix::norm2(&x) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quantiles() {
        let v = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
    }

    #[test]
    fn delta_ensemble_examples() {
        let g = DistributionSpec::new(Kind::Gaussian, 4);
        let e = delta_m_ensemble(&g, 1000, 1, 20, DeltaMethod::Exact, &RandomStream::new(1)).unwrap();
        assert!(e.median <= 0.15, "{}", e.median);
        let e = delta_m_ensemble(&g, 2, 1, 20, DeltaMethod::Exact, &RandomStream::new(1)).unwrap();
        assert!(e.values.iter().all(|v| *v >= 0.0));
        let big = DistributionSpec::new(Kind::Gaussian, 200);
        assert!(delta_m_ensemble(&big, 10, 5, 1, DeltaMethod::Exact, &RandomStream::new(1)).is_err());
    }

    #[test]
    fn delta_medians_shrink_with_n() {
        let g = DistributionSpec::new(Kind::Gaussian, 32);
        let med = |n| delta_m_ensemble(&g, n, 2, 20, DeltaMethod::Exact, &RandomStream::new(n as u64)).unwrap().median;
        assert!(med(256) < med(64));
    }
}
