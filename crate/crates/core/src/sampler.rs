//! Isotropic log-concave laws and exact samplers for them.
//!
//! Every built-in kind is rescaled so that it is centered with identity
//! covariance. Ball and ℓ1-ball draws use exact representations (direction
//! times radius, and normalized exponentials), never a Markov chain.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{RandomStream, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kind {
    #[serde(rename = "gaussian")]
    Gaussian,
    /// Independent Laplace coordinates.
    #[serde(rename = "laplace")]
    LaplaceProduct,
    /// Independent uniform coordinates (uniform on a cube).
    #[serde(rename = "cube")]
    UniformCubeProduct,
    #[serde(rename = "ball")]
    UniformBall,
    #[serde(rename = "l1ball")]
    UniformL1Ball,
    /// `Y = Σ xᵢ Xᵢ` for independent copies `Xᵢ` of a base law.
    #[serde(rename = "wsum")]
    WeightedSum,
}

impl Kind {
    pub const BUILT_IN: [Kind; 5] = [
        Kind::Gaussian,
        Kind::LaplaceProduct,
        Kind::UniformCubeProduct,
        Kind::UniformBall,
        Kind::UniformL1Ball,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Gaussian => "gaussian",
            Kind::LaplaceProduct => "laplace",
            Kind::UniformCubeProduct => "cube",
            Kind::UniformBall => "ball",
            Kind::UniformL1Ball => "l1ball",
            Kind::WeightedSum => "wsum",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "gaussian" => Kind::Gaussian,
            "laplace" => Kind::LaplaceProduct,
            "cube" => Kind::UniformCubeProduct,
            "ball" => Kind::UniformBall,
            "l1ball" => Kind::UniformL1Ball,
            "wsum" => Kind::WeightedSum,
            other => {
                return Err(Error::InvalidSpec(format!(
                    "unknown distribution kind `{other}` (expected gaussian, laplace, cube, ball, l1ball or wsum)"
                )))
            }
        })
    }
}

/// Declarative description of an isotropic log-concave law on `R^N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub kind: Kind,
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<Box<DistributionSpec>>,
}

impl DistributionSpec {
    /// A built-in (non-composite) law.
    pub fn new(kind: Kind, dimension: usize) -> Self {
        Self {
            kind,
            dimension,
            weights: None,
            base: None,
        }
    }

    pub fn weighted_sum(weights: Vec<f64>, base: DistributionSpec) -> Self {
        Self {
            kind: Kind::WeightedSum,
            dimension: base.dimension,
            weights: Some(weights),
            base: Some(Box::new(base)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::InvalidSpec("dimension must be at least 1".into()));
        }
        match self.kind {
            Kind::WeightedSum => {
                let weights = self
                    .weights
                    .as_ref()
                    .filter(|w| !w.is_empty())
                    .ok_or_else(|| Error::InvalidSpec("wsum requires non-empty weights".into()))?;
                if weights.iter().any(|w| !w.is_finite()) {
                    return Err(Error::InvalidSpec("wsum weights must be finite".into()));
                }
                let base = self
                    .base
                    .as_ref()
                    .ok_or_else(|| Error::InvalidSpec("wsum requires a base spec".into()))?;
                if base.kind == Kind::WeightedSum {
                    return Err(Error::InvalidSpec("wsum base cannot itself be wsum".into()));
                }
                if base.dimension != self.dimension {
                    return Err(Error::InvalidSpec(format!(
                        "wsum dimension {} differs from base dimension {}",
                        self.dimension, base.dimension
                    )));
                }
                base.validate()
            }
            _ => {
                if self.weights.is_some() || self.base.is_some() {
                    return Err(Error::InvalidSpec(format!(
                        "weights/base are only allowed for wsum, not {}",
                        self.kind
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }
}

/// The factor that makes the unit-parameter law of `kind` isotropic in
/// dimension `n`.
pub fn isotropic_scale(kind: Kind, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidSpec("dimension must be at least 1".into()));
    }
    let nf = n as f64;
    Ok(match kind {
        Kind::Gaussian => 1.0,
        Kind::LaplaceProduct => std::f64::consts::FRAC_1_SQRT_2,
        Kind::UniformCubeProduct => 3f64.sqrt(),
        Kind::UniformBall => (nf + 2.0).sqrt(),
        Kind::UniformL1Ball => ((nf + 1.0) * (nf + 2.0) / 2.0).sqrt(),
        Kind::WeightedSum => {
            return Err(Error::InvalidSpec(
                "wsum has no isotropic scale of its own".into(),
            ))
        }
    })
}

/// Draws one vector into `out` (length = dimension), accumulating `coef * X`.
fn accumulate_base(kind: Kind, scale: f64, coef: f64, rng: &mut StreamRng, out: &mut [f64]) {
    let n = out.len();
    let s = scale * coef;
    match kind {
        Kind::Gaussian => {
            for o in out.iter_mut() {
                let g: f64 = StandardNormal.sample(rng);
                *o += s * g;
            }
        }
        Kind::LaplaceProduct => {
            for o in out.iter_mut() {
                let e: f64 = Exp1.sample(rng);
                let v = if rng.random::<bool>() { e } else { -e };
                *o += s * v;
            }
        }
        Kind::UniformCubeProduct => {
            for o in out.iter_mut() {
                let u: f64 = rng.random_range(-1.0..1.0);
                *o += s * u;
            }
        }
        Kind::UniformBall => {
            let mut dir: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
            let mut norm = crate::matrix::norm2(&dir);
            while norm == 0.0 {
                dir.iter_mut().for_each(|d| *d = StandardNormal.sample(rng));
                norm = crate::matrix::norm2(&dir);
            }
            let u: f64 = rng.random();
            let radius = u.powf(1.0 / n as f64);
            for (o, d) in out.iter_mut().zip(&dir) {
                *o += s * radius * d / norm;
            }
        }
        Kind::UniformL1Ball => {
            // (E_1..E_n) / (E_1 + ... + E_{n+1}) with random signs is uniform
            // on the unit ℓ1 ball.
            let exps: Vec<f64> = (0..=n).map(|_| Exp1.sample(rng)).collect();
            let total: f64 = exps.iter().sum();
            for (o, e) in out.iter_mut().zip(&exps) {
                let v = if rng.random::<bool>() { *e } else { -*e };
                *o += s * v / total;
            }
        }
        Kind::WeightedSum => unreachable!("validated"),
    }
}

pub(crate) fn sample_into(spec: &DistributionSpec, rng: &mut StreamRng, out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    match spec.kind {
        Kind::WeightedSum => {
            let base = spec.base.as_ref().expect("validated");
            let scale = isotropic_scale(base.kind, base.dimension).expect("validated");
            for &w in spec.weights.as_ref().expect("validated") {
                accumulate_base(base.kind, scale, w, rng, out);
            }
        }
        kind => {
            let scale = isotropic_scale(kind, spec.dimension).expect("validated");
            accumulate_base(kind, scale, 1.0, rng, out);
        }
    }
}

/// One draw from the law described by `spec`, using the stream from its start.
pub fn sample_vector(spec: &DistributionSpec, stream: &RandomStream) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut out = vec![0.0; spec.dimension];
    sample_into(spec, &mut stream.rng(), &mut out);
    Ok(out)
}

/// `trials` independent draws, draw `i` taken from `stream.child(i)`, packed
/// row-major into one buffer.
pub fn sample_many(spec: &DistributionSpec, trials: usize, stream: &RandomStream) -> Result<Vec<f64>> {
    spec.validate()?;
    let dim = spec.dimension;
    let mut out = vec![0.0; trials * dim];
    out.par_chunks_mut(dim).enumerate().for_each(|(i, row)| {
        sample_into(spec, &mut stream.child(i as u64).rng(), row);
    });
    Ok(out)
}

/// An `n x N` matrix whose rows are independent draws; row `i` comes from
/// `stream.child(i)`, so the result does not depend on scheduling.
pub fn sample_matrix(spec: &DistributionSpec, n: usize, stream: &RandomStream) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::Argument("row count must be at least 1".into()));
    }
    let data = sample_many(spec, n, stream)?;
    Matrix::new(n, spec.dimension, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Max entrywise deviation of the empirical second-moment matrix from the
    /// identity, plus max |mean|.
    fn isotropy_defect(spec: &DistributionSpec, trials: usize, seed: u64) -> (f64, f64) {
        let n = spec.dimension;
        let xs = sample_many(spec, trials, &RandomStream::new(seed)).unwrap();
        let mut cov = vec![0.0; n * n];
        let mut mean = vec![0.0; n];
        for x in xs.chunks(n) {
            for i in 0..n {
                mean[i] += x[i];
                for j in 0..n {
                    cov[i * n + j] += x[i] * x[j];
                }
            }
        }
        let t = trials as f64;
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((cov[i * n + j] / t - target).abs());
            }
        }
        (dev, mean.iter().fold(0.0f64, |a, m| a.max((m / t).abs())))
    }

    #[test]
    fn scale_constants() {
        assert_eq!(isotropic_scale(Kind::Gaussian, 17).unwrap(), 1.0);
        assert_relative_eq!(isotropic_scale(Kind::UniformCubeProduct, 3).unwrap(), 1.7320508, epsilon = 1e-7);
        assert_relative_eq!(isotropic_scale(Kind::UniformBall, 3).unwrap(), 2.2360680, epsilon = 1e-7);
        assert_relative_eq!(isotropic_scale(Kind::UniformL1Ball, 2).unwrap(), 6f64.sqrt(), epsilon = 1e-12);
        assert!(isotropic_scale(Kind::WeightedSum, 3).is_err());
        assert!(isotropic_scale(Kind::Gaussian, 0).is_err());
    }

    #[test]
    fn scale_constants_match_monte_carlo_second_moment() {
        // Second moment of the unit-parameter law, estimated from scaled draws.
        for (kind, n) in [
            (Kind::UniformCubeProduct, 3),
            (Kind::UniformBall, 3),
            (Kind::UniformL1Ball, 2),
        ] {
            let spec = DistributionSpec::new(kind, n);
            let xs = sample_many(&spec, 1_000_000, &RandomStream::new(5)).unwrap();
            let m2: f64 = xs.iter().step_by(n).map(|x| x * x).sum::<f64>() / 1e6;
            // scaled law has unit variance, so the unit law has variance 1/s²
            assert!((m2 - 1.0).abs() < 0.01, "{kind}: {m2}");
        }
    }

    #[test]
    fn unknown_kind_is_invalid_spec() {
        assert!(matches!("cauchy".parse::<Kind>(), Err(Error::InvalidSpec(_))));
        for k in Kind::BUILT_IN {
            assert_eq!(k.name().parse::<Kind>().unwrap(), k);
        }
    }

    #[test]
    fn nested_weighted_sum_rejected() {
        let inner = DistributionSpec::weighted_sum(vec![1.0], DistributionSpec::new(Kind::Gaussian, 2));
        let outer = DistributionSpec {
            kind: Kind::WeightedSum,
            dimension: 2,
            weights: Some(vec![1.0]),
            base: Some(Box::new(inner)),
        };
        assert!(matches!(outer.validate(), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn gaussian_mean_square_norm() {
        let spec = DistributionSpec::new(Kind::Gaussian, 2);
        let xs = sample_many(&spec, 100_000, &RandomStream::new(11)).unwrap();
        let m: f64 = xs.chunks(2).map(|x| x[0] * x[0] + x[1] * x[1]).sum::<f64>() / 1e5;
        assert!((m - 2.0).abs() < 0.06, "{m}");
    }

    #[test]
    fn ball_support_and_symmetry() {
        let spec = DistributionSpec::new(Kind::UniformBall, 3);
        let xs = sample_many(&spec, 100_000, &RandomStream::new(3)).unwrap();
        let mut cross = 0.0;
        for x in xs.chunks(3) {
            assert!(crate::matrix::norm2(x) <= 5f64.sqrt() + 1e-12);
            cross += x[0] * x[1];
        }
        assert!((cross / 1e5).abs() <= 0.03);
    }

    #[test]
    fn degenerate_weights_reproduce_base_law() {
        let base = DistributionSpec::new(Kind::LaplaceProduct, 4);
        let ws = DistributionSpec::weighted_sum(vec![1.0, 0.0, 0.0], base.clone());
        let stream = RandomStream::new(21);
        // Same first base draw, the zero-weight draws add nothing.
        let a = sample_vector(&ws, &stream).unwrap();
        let b = sample_vector(&base, &stream).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn every_kind_is_isotropic() {
        for kind in Kind::BUILT_IN {
            for n in [2usize, 10, 50] {
                let (dev, mean) = isotropy_defect(&DistributionSpec::new(kind, n), 100_000, 1);
                assert!(dev <= 0.05, "{kind} N={n}: covariance deviation {dev}");
                assert!(mean <= 0.02, "{kind} N={n}: mean {mean}");
            }
        }
    }

    #[test]
    fn unit_norm_weighted_sum_is_isotropic() {
        let w = vec![0.6, 0.0, 0.8];
        let spec = DistributionSpec::weighted_sum(w, DistributionSpec::new(Kind::UniformCubeProduct, 10));
        let (dev, _) = isotropy_defect(&spec, 100_000, 2);
        assert!(dev <= 0.05, "{dev}");
    }

    #[test]
    fn matrix_rows_and_determinism() {
        let spec = DistributionSpec::new(Kind::Gaussian, 2);
        assert!(sample_matrix(&spec, 0, &RandomStream::new(1)).is_err());
        let a = sample_matrix(&spec, 3, &RandomStream::new(9)).unwrap();
        let b = sample_matrix(&spec, 3, &RandomStream::new(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.rows(), a.cols()), (3, 2));
    }

    #[test]
    fn matrix_identical_across_thread_counts() {
        let spec = DistributionSpec::new(Kind::UniformL1Ball, 30);
        let stream = RandomStream::new(1234);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| sample_matrix(&spec, 500, &stream).unwrap())
        };
        let (a, b) = (run(1), run(8));
        assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn laplace_empirical_covariance_diagonal() {
        let spec = DistributionSpec::new(Kind::LaplaceProduct, 100);
        let a = sample_matrix(&spec, 200, &RandomStream::new(4)).unwrap();
        let g = a.column_gram();
        let diag_mean: f64 = (0..100).map(|j| g[j * 100 + j] / 200.0).sum::<f64>() / 100.0;
        assert!((diag_mean - 1.0).abs() <= 0.1, "{diag_mean}");
    }
}
