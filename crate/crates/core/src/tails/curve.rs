//! Empirical survival curves with exact binomial confidence intervals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{arg, Result};
use crate::metrics::gamma::{gamma_km, GammaMethod};
use crate::metrics::order::{order_statistic_unchecked, top_m_energy_unchecked};
use crate::metrics::thresholds::{lambda_threshold, xlog};
use crate::rng::RandomStream;
use crate::sampler::{sample_many, sample_matrix, DistributionSpec};

/// `{1, 1.25, ..., 4}`
pub fn default_t_grid() -> Vec<f64> {
    (0..=12).map(|i| 1.0 + 0.25 * i as f64).collect()
}

/// Which left-hand side a curve estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "statistic", rename_all = "snake_case")]
pub enum TailStatistic {
    /// `sup_{|I|=m} |P_I X|` against `t sqrt(m) log(eN/m)`.
    ProjectionSup { m: usize },
    /// `X*(ℓ)` against the raw `t`.
    OrderStat { l: usize },
    /// Γ_{k,m} of an `n x N` matrix against `t λ(k,m,n,N)`.
    GammaKm {
        n: usize,
        k: usize,
        m: usize,
        method: GammaMethod,
        restarts: usize,
    },
}

impl TailStatistic {
    /// Threshold scale: the statistic is compared with `t * scale`.
    pub fn scale(&self, dim: usize) -> Result<f64> {
        match *self {
            TailStatistic::ProjectionSup { m } => {
                if m == 0 || m > dim {
                    return arg(format!("m = {m} must lie in 1..={dim}"));
                }
                Ok(xlog(m as f64, dim as f64) / (m as f64).sqrt())
            }
            TailStatistic::OrderStat { l } => {
                if l == 0 || l > dim {
                    return arg(format!("ℓ = {l} must lie in 1..={dim}"));
                }
                Ok(1.0)
            }
            TailStatistic::GammaKm { n, k, m, .. } => lambda_threshold(k, m, n, dim),
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            TailStatistic::ProjectionSup { m } => format!("sup_|I|={m} |P_I X| >= t*sqrt(m)*log(eN/m)"),
            TailStatistic::OrderStat { l } => format!("X*({l}) >= t"),
            TailStatistic::GammaKm { n, k, m, method, restarts } => match method {
                GammaMethod::Exact => format!("Gamma_{{{k},{m}}} (n={n}, exact) >= t*lambda"),
                GammaMethod::Heuristic => format!(
                    "Gamma_{{{k},{m}}} (n={n}, heuristic lower bound, {restarts} restarts) >= t*lambda"
                ),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub descriptor: String,
    pub statistic: Option<TailStatistic>,
    pub t_grid: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub hits: Vec<u64>,
    pub survival: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub trials: u64,
}

impl TailCurve {
    /// A curve from explicit values, for synthetic comparisons.
    pub fn from_parts(t_grid: Vec<f64>, survival: Vec<f64>, ci_low: Vec<f64>, ci_high: Vec<f64>, trials: u64) -> Result<Self> {
        let len = t_grid.len();
        if survival.len() != len || ci_low.len() != len || ci_high.len() != len {
            return arg("curve columns must have equal length");
        }
        Ok(Self {
            descriptor: "synthetic".into(),
            statistic: None,
            thresholds: t_grid.clone(),
            hits: survival.iter().map(|s| (s * trials as f64).round() as u64).collect(),
            t_grid,
            survival,
            ci_low,
            ci_high,
            trials,
        })
    }

    /// True at grid points where no trial exceeded the threshold.
    pub fn censored(&self, i: usize) -> bool {
        self.hits[i] == 0
    }
}

/// Exact (Clopper–Pearson) two-sided interval for `hits` successes out of
/// `trials` at confidence `level`.
pub fn clopper_pearson(hits: u64, trials: u64, level: f64) -> (f64, f64) {
    assert!(hits <= trials && trials > 0);
    let alpha = 1.0 - level;
    let (x, n) = (hits as f64, trials as f64);
    // P(Bin(n,p) >= x) = I_p(x, n-x+1), increasing in p
    let lo = if hits == 0 {
        0.0
    } else {
        bisect(|p| beta_reg(x, n - x + 1.0, p) >= alpha / 2.0)
    };
    // P(Bin(n,p) <= x) = 1 - I_p(x+1, n-x), decreasing in p
    let hi = if hits == trials {
        1.0
    } else {
        bisect(|p| 1.0 - beta_reg(x + 1.0, n - x, p) <= alpha / 2.0)
    };
    (lo, hi)
}

/// Smallest p in [0,1] where the monotone predicate turns true.
fn bisect(pred: impl Fn(f64) -> bool) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Survival curve of `samples` against thresholds `t * scale`.
pub fn survival_curve(samples: &[f64], t_grid: &[f64], scale: f64, descriptor: String) -> Result<TailCurve> {
    if samples.is_empty() {
        return arg("no samples");
    }
    if t_grid.is_empty() || t_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return arg("t grid must be non-empty and strictly increasing");
    }
    let trials = samples.len() as u64;
    let thresholds: Vec<f64> = t_grid.iter().map(|t| t * scale).collect();
    let hits: Vec<u64> = thresholds
        .iter()
        .map(|&th| samples.iter().filter(|&&s| s >= th).count() as u64)
        .collect();
    let survival = hits.iter().map(|&h| h as f64 / trials as f64).collect();
    let (ci_low, ci_high) = hits.iter().map(|&h| clopper_pearson(h, trials, 0.95)).unzip();
    Ok(TailCurve {
        descriptor,
        statistic: None,
        t_grid: t_grid.to_vec(),
        thresholds,
        hits,
        survival,
        ci_low,
        ci_high,
        trials,
    })
}

/// One value of `statistic` per trial; trial `i` uses `stream.child(i)`.
pub fn sample_statistic(
    spec: &DistributionSpec,
    statistic: &TailStatistic,
    trials: usize,
    stream: &RandomStream,
) -> Result<Vec<f64>> {
    spec.validate()?;
    let dim = spec.dimension();
    statistic.scale(dim)?;
    match *statistic {
        TailStatistic::ProjectionSup { m } => {
            let xs = sample_many(spec, trials, stream)?;
            Ok(xs.par_chunks(dim).map(|x| top_m_energy_unchecked(x, m)).collect())
        }
        TailStatistic::OrderStat { l } => {
            let xs = sample_many(spec, trials, stream)?;
            Ok(xs.par_chunks(dim).map(|x| order_statistic_unchecked(x, l)).collect())
        }
        TailStatistic::GammaKm { n, k, m, method, restarts } => {
            if method == GammaMethod::Heuristic && restarts < 10 {
                return arg(format!("heuristic Γ curves need at least 10 restarts, got {restarts}"));
            }
            // Each trial runs its own enumeration; keep those sequential and
            // parallelize across trials instead.
            (0..trials)
                .into_par_iter()
                .map(|i| {
                    let s = stream.child(i as u64);
                    let a = sample_matrix(spec, n, &s.child(0))?;
                    Ok(gamma_km(&a, k, m, method, restarts, &s.child(1))?.value)
                })
                .collect()
        }
    }
}

/// Empirical survival of `statistic` over `trials` independent draws.
pub fn tail_curve(
    spec: &DistributionSpec,
    statistic: TailStatistic,
    t_grid: &[f64],
    trials: usize,
    stream: &RandomStream,
) -> Result<TailCurve> {
    if trials < 100 {
        return arg(format!("trials = {trials} is below the minimum of 100"));
    }
    let scale = statistic.scale(spec.dimension())?;
    let samples = sample_statistic(spec, &statistic, trials, stream)?;
    let mut curve = survival_curve(&samples, t_grid, scale, statistic.describe())?;
    curve.statistic = Some(statistic);
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::Kind;

    #[test]
    fn clopper_pearson_reference_values() {
        // Reference values from the beta quantile definition.
        let (lo, hi) = clopper_pearson(0, 10, 0.95);
        assert_eq!(lo, 0.0);
        assert!((hi - (1.0 - 0.025f64.powf(0.1))).abs() < 1e-12);
        let (lo, hi) = clopper_pearson(10, 10, 0.95);
        assert!((lo - 0.025f64.powf(0.1)).abs() < 1e-12);
        assert_eq!(hi, 1.0);
        let (lo, hi) = clopper_pearson(5, 10, 0.95);
        assert!((lo - 0.187_086_028_447_69).abs() < 1e-9, "{lo}");
        assert!((hi - 0.812_913_971_552_31).abs() < 1e-9, "{hi}");
    }

    #[test]
    fn clopper_pearson_contains_estimate() {
        for n in [1u64, 7, 100, 1000] {
            for x in [0, n / 3, n / 2, n] {
                let (lo, hi) = clopper_pearson(x, n, 0.95);
                let p = x as f64 / n as f64;
                assert!(lo <= p && p <= hi, "{x}/{n}: {lo} {hi}");
            }
        }
    }

    #[test]
    fn projection_full_rank_is_monotone() {
        let spec = DistributionSpec::new(Kind::Gaussian, 6);
        let grid: Vec<f64> = (1..=60).map(|i| 0.05 * i as f64).collect();
        let c = tail_curve(&spec, TailStatistic::ProjectionSup { m: 6 }, &grid, 2000, &RandomStream::new(3)).unwrap();
        assert_eq!(c.survival[0], 1.0);
        assert_eq!(*c.survival.last().unwrap(), 0.0);
        assert!(c.survival.windows(2).all(|w| w[0] >= w[1]));
        for i in 0..grid.len() {
            assert!(c.ci_low[i] <= c.survival[i] && c.survival[i] <= c.ci_high[i]);
        }
    }

    #[test]
    fn argument_checks() {
        let spec = DistributionSpec::new(Kind::Gaussian, 4);
        let s = RandomStream::new(0);
        assert!(tail_curve(&spec, TailStatistic::OrderStat { l: 1 }, &[1.0], 99, &s).is_err());
        assert!(tail_curve(&spec, TailStatistic::OrderStat { l: 5 }, &[1.0], 100, &s).is_err());
        assert!(tail_curve(&spec, TailStatistic::OrderStat { l: 1 }, &[2.0, 1.0], 100, &s).is_err());
        let heur = TailStatistic::GammaKm { n: 4, k: 1, m: 1, method: GammaMethod::Heuristic, restarts: 3 };
        assert!(tail_curve(&spec, heur, &[1.0], 100, &s).is_err());
    }

    #[test]
    fn laplace_single_coordinate_tail() {
        let spec = DistributionSpec::new(Kind::LaplaceProduct, 1);
        let c = tail_curve(&spec, TailStatistic::OrderStat { l: 1 }, &[1.0, 2.0], 1_000_000, &RandomStream::new(6)).unwrap();
        for (t, s) in c.t_grid.iter().zip(&c.survival) {
            let exact = (-std::f64::consts::SQRT_2 * t).exp();
            assert!((s / exact - 1.0).abs() < 0.02, "t={t}: {s} vs {exact}");
        }
    }

    #[test]
    fn small_gamma_curve_has_light_tail() {
        let spec = DistributionSpec::new(Kind::Gaussian, 16);
        let stat = TailStatistic::GammaKm { n: 8, k: 2, m: 2, method: GammaMethod::Exact, restarts: 0 };
        let c = tail_curve(&spec, stat, &[1.0, 3.0], 500, &RandomStream::new(7)).unwrap();
        assert!(c.survival[1] < 0.05);
    }
}
