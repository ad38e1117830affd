//! The weak moment parameter `σ_X(p) = sup_{|t|=1} (E|⟨t,X⟩|^p)^{1/p}`.
//!
//! Only the Gaussian law has a closed form. For every other law the value is
//! bracketed: a Monte Carlo direction search gives a lower estimate and the
//! log-concave bound `σ_X(p) <= p` (for isotropic X) gives the upper end.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{arg, Result};
use crate::matrix::{dot, norm2};
use crate::rng::RandomStream;
use crate::sampler::{sample_many, DistributionSpec, Kind};

pub const DEFAULT_P_GRID: [f64; 8] = [1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 10.0];

const RANDOM_DIRECTIONS: usize = 100;
const ASCENT_ITERATIONS: usize = 60;
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMethod {
    ClosedForm,
    DirectionSearchLower,
    LogConcaveUpper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// Basis vectors, the normalized all-ones vector and random directions.
    CanonicalPlusRandom,
    /// The candidates above, then projected gradient ascent on the sphere.
    SphereAscent,
}

/// `(E|g|^p)^{1/p}` for a standard normal `g`.
pub fn gaussian_abs_moment(p: f64) -> f64 {
    let log_m = 0.5 * p * 2f64.ln() + ln_gamma(0.5 * (p + 1.0)) - 0.5 * std::f64::consts::PI.ln();
    (log_m / p).exp()
}

/// Exact σ_X(p) where a closed form exists (Gaussian only).
pub fn sigma_closed_form(spec: &DistributionSpec, p: f64) -> Option<f64> {
    (spec.kind == Kind::Gaussian && p >= 1.0).then(|| gaussian_abs_moment(p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaEstimate {
    pub value: f64,
    pub method: SigmaMethod,
    /// Best direction found.
    pub direction: Vec<f64>,
    /// The log-concave upper bound `p`, reported alongside.
    pub log_concave_upper: f64,
}

/// Sum with a fixed association order, independent of the thread count.
pub(crate) fn det_sum<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let partial: Vec<f64> = (0..len.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| (c * CHUNK..((c + 1) * CHUNK).min(len)).map(&f).sum())
        .collect();
    partial.iter().sum()
}

/// Monte Carlo `E|⟨t,X⟩|^p` over a sample reservoir.
fn moment(samples: &[f64], dim: usize, t: &[f64], p: f64) -> f64 {
    let n = samples.len() / dim;
    det_sum(n, |i| dot(&samples[i * dim..(i + 1) * dim], t).abs().powf(p)) / n as f64
}

fn normalize(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let n = norm2(&v);
    if n == 0.0 || !n.is_finite() {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= n);
    Some(v)
}

/// Direction search on an existing sample reservoir. Returns (moment^(1/p),
/// direction).
pub(crate) fn search_directions(
    samples: &[f64],
    dim: usize,
    p: f64,
    search: SearchMode,
    stream: &RandomStream,
) -> (f64, Vec<f64>) {
    let mut candidates: Vec<Vec<f64>> = (0..dim)
        .map(|j| {
            let mut e = vec![0.0; dim];
            e[j] = 1.0;
            e
        })
        .collect();
    if dim > 1 {
        candidates.push(vec![1.0 / (dim as f64).sqrt(); dim]);
        let mut rng = stream.rng();
        for _ in 0..RANDOM_DIRECTIONS {
            let g: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            if let Some(t) = normalize(g) {
                candidates.push(t);
            }
        }
    }
    let mut best = (f64::NEG_INFINITY, candidates[0].clone());
    for t in candidates {
        let m = moment(samples, dim, &t, p);
        if m > best.0 {
            best = (m, t);
        }
    }

    if search == SearchMode::SphereAscent && dim > 1 {
        let n = samples.len() / dim;
        let mut step = 0.5;
        for _ in 0..ASCENT_ITERATIONS {
            let t = &best.1;
            // gradient of E|⟨t,X⟩|^p up to the factor p
            let grad: Vec<f64> = {
                let parts: Vec<Vec<f64>> = (0..n.div_ceil(CHUNK))
                    .into_par_iter()
                    .map(|c| {
                        let mut g = vec![0.0; dim];
                        for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                            let x = &samples[i * dim..(i + 1) * dim];
                            let s = dot(x, t);
                            let w = s.abs().powf(p - 1.0) * s.signum();
                            g.iter_mut().zip(x).for_each(|(gj, xj)| *gj += w * xj);
                        }
                        g
                    })
                    .collect();
                let mut g = vec![0.0; dim];
                for part in parts {
                    g.iter_mut().zip(part).for_each(|(a, b)| *a += b);
                }
                g
            };
            let radial = dot(&grad, t);
            let tangent: Vec<f64> = grad.iter().zip(t).map(|(g, tj)| g - radial * tj).collect();
            let Some(dir) = normalize(tangent) else { break };
            let mut improved = false;
            while step > 1e-6 {
                let trial: Vec<f64> = t.iter().zip(&dir).map(|(tj, dj)| tj + step * dj).collect();
                let trial = normalize(trial).expect("non-zero");
                let m = moment(samples, dim, &trial, p);
                if m > best.0 {
                    best = (m, trial);
                    improved = true;
                    step *= 1.5;
                    break;
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
    }
    (best.0.powf(1.0 / p), best.1)
}

/// Lower estimate of σ_X(p) by direction search over a fresh reservoir of
/// `trials` draws (draw `i` from `stream.child(0).child(i)`).
pub fn sigma_estimate(
    spec: &DistributionSpec,
    p: f64,
    trials: usize,
    search: SearchMode,
    stream: &RandomStream,
) -> Result<SigmaEstimate> {
    if !(p >= 1.0) {
        return arg(format!("p = {p} must be at least 1"));
    }
    if trials < 1000 {
        return arg(format!("trials = {trials} is below the minimum of 1000"));
    }
    let dim = spec.dimension();
    let samples = sample_many(spec, trials, &stream.child(0))?;
    let (value, direction) = search_directions(&samples, dim, p, search, &stream.child(1));
    Ok(SigmaEstimate {
        value,
        method: SigmaMethod::DirectionSearchLower,
        direction,
        log_concave_upper: p,
    })
}

/// σ_X tabulated over an increasing p-grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaProfile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<DistributionSpec>,
    pub p_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub methods: Vec<SigmaMethod>,
    pub trials: usize,
    /// Largest upward adjustment made to restore monotonicity.
    pub isotonic_correction: f64,
}

/// Generalized inverse lookup result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaInverse {
    pub p: f64,
    /// `u` exceeded the largest tabulated value; `p` is the grid maximum.
    pub saturated: bool,
}

impl SigmaProfile {
    /// A profile from explicit values (e.g. synthetic or analytic).
    pub fn from_values(p_grid: Vec<f64>, values: Vec<f64>, method: SigmaMethod) -> Result<Self> {
        if p_grid.is_empty() || p_grid.len() != values.len() {
            return arg("profile needs equally many, and at least one, grid points and values");
        }
        if p_grid.windows(2).any(|w| !(w[0] < w[1])) || p_grid[0] < 1.0 {
            return arg("p grid must be strictly increasing and start at p >= 1");
        }
        if values.windows(2).any(|w| w[1] < w[0]) || values.iter().any(|v| !v.is_finite()) {
            return arg("profile values must be finite and non-decreasing");
        }
        let methods = vec![method; values.len()];
        Ok(Self {
            spec: None,
            p_grid,
            values,
            methods,
            trials: 0,
            isotonic_correction: 0.0,
        })
    }

    /// The log-concave upper profile σ(p) = p.
    pub fn log_concave_upper(p_grid: Vec<f64>) -> Result<Self> {
        let values = p_grid.clone();
        Self::from_values(p_grid, values, SigmaMethod::LogConcaveUpper)
    }

    /// Builds a profile for `spec`: closed form where available, otherwise a
    /// direction-search estimate from one shared reservoir. Estimates are made
    /// monotone by a running maximum, which keeps them valid lower bounds since
    /// the true σ is non-decreasing in p.
    pub fn estimate(
        spec: &DistributionSpec,
        p_grid: &[f64],
        trials: usize,
        search: SearchMode,
        stream: &RandomStream,
    ) -> Result<Self> {
        if p_grid.is_empty() || p_grid.windows(2).any(|w| !(w[0] < w[1])) || p_grid[0] < 1.0 {
            return arg("p grid must be non-empty, strictly increasing and start at p >= 1");
        }
        if trials < 1000 {
            return arg(format!("trials = {trials} is below the minimum of 1000"));
        }
        let dim = spec.dimension();
        let needs_mc = sigma_closed_form(spec, p_grid[0]).is_none();
        let samples = if needs_mc {
            sample_many(spec, trials, &stream.child(0))?
        } else {
            Vec::new()
        };
        let mut values = Vec::with_capacity(p_grid.len());
        let mut methods = Vec::with_capacity(p_grid.len());
        for &p in p_grid {
            match sigma_closed_form(spec, p) {
                Some(v) => {
                    values.push(v);
                    methods.push(SigmaMethod::ClosedForm);
                }
                None => {
                    let (v, _) = search_directions(&samples, dim, p, search, &stream.child(1));
                    values.push(v);
                    methods.push(SigmaMethod::DirectionSearchLower);
                }
            }
        }
        let mut correction: f64 = 0.0;
        for i in 1..values.len() {
            if values[i] < values[i - 1] {
                correction = correction.max(values[i - 1] - values[i]);
                values[i] = values[i - 1];
            }
        }
        Ok(Self {
            spec: Some(spec.clone()),
            p_grid: p_grid.to_vec(),
            values,
            methods,
            trials: if needs_mc { trials } else { 0 },
            isotonic_correction: correction,
        })
    }

    /// Piecewise-linear interpolation of the profile at `p` (clamped).
    pub fn value_at(&self, p: f64) -> f64 {
        let (g, v) = (&self.p_grid, &self.values);
        if p <= g[0] {
            return v[0];
        }
        for i in 1..g.len() {
            if p <= g[i] {
                let w = (p - g[i - 1]) / (g[i] - g[i - 1]);
                return v[i - 1] + w * (v[i] - v[i - 1]);
            }
        }
        *v.last().expect("non-empty")
    }

    /// Smallest grid-interpolated `p` with `σ(p) >= u`.
    pub fn inverse(&self, u: f64) -> SigmaInverse {
        let (g, v) = (&self.p_grid, &self.values);
        if u <= v[0] {
            return SigmaInverse { p: g[0], saturated: false };
        }
        if u > *v.last().expect("non-empty") {
            return SigmaInverse { p: *g.last().expect("non-empty"), saturated: true };
        }
        // first segment whose right end reaches u, then bisection inside it
        let i = (1..v.len()).find(|&i| v[i] >= u).expect("u within range");
        let (mut lo, mut hi) = (g[i - 1], g[i]);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.value_at(mid) >= u {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-14 * hi {
                break;
            }
        }
        SigmaInverse { p: hi, saturated: false }
    }
}

/// σ⁻¹ over a profile; errors on an empty profile.
pub fn sigma_inverse(profile: &SigmaProfile, u: f64) -> Result<SigmaInverse> {
    if profile.p_grid.is_empty() || profile.values.len() != profile.p_grid.len() {
        return arg("sigma profile is empty");
    }
    if profile.values.windows(2).any(|w| w[1] < w[0]) {
        return arg("sigma profile is not monotone");
    }
    Ok(profile.inverse(u))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaourisRatio {
    pub p: f64,
    pub ratio: f64,
    /// `(E|X|^p)^{1/p}`
    pub norm_p: f64,
    /// `(E|X|²)^{1/2}`
    pub norm_2: f64,
    pub sigma: f64,
}

/// Monte Carlo `(E|X|^p)^{1/p} / ((E|X|²)^{1/2} + σ̂_X(p))`, an empirical
/// lower bound on the constant in the strengthened Paouris inequality.
pub fn paouris_ratio(spec: &DistributionSpec, p: f64, trials: usize, stream: &RandomStream) -> Result<PaourisRatio> {
    if !(p >= 1.0) {
        return arg(format!("p = {p} must be at least 1"));
    }
    if trials < 1000 {
        return arg(format!("trials = {trials} is below the minimum of 1000"));
    }
    let dim = spec.dimension();
    let samples = sample_many(spec, trials, &stream.child(0))?;
    let norms: Vec<f64> = samples.chunks(dim).map(|x| dot(x, x)).collect();
    let n = trials as f64;
    let norm_p = (det_sum(trials, |i| norms[i].powf(0.5 * p)) / n).powf(1.0 / p);
    let norm_2 = (det_sum(trials, |i| norms[i]) / n).sqrt();
    let (sigma, _) = search_directions(&samples, dim, p, SearchMode::CanonicalPlusRandom, &stream.child(1));
    Ok(PaourisRatio {
        p,
        ratio: norm_p / (norm_2 + sigma),
        norm_p,
        norm_2,
        sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_forms() {
        let g = DistributionSpec::new(Kind::Gaussian, 5);
        assert_relative_eq!(sigma_closed_form(&g, 2.0).unwrap(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(sigma_closed_form(&g, 4.0).unwrap(), 3f64.powf(0.25), max_relative = 1e-12);
        assert_relative_eq!(sigma_closed_form(&g, 6.0).unwrap(), 15f64.powf(1.0 / 6.0), max_relative = 1e-12);
        assert_relative_eq!(sigma_closed_form(&g, 1.0).unwrap(), (2.0 / std::f64::consts::PI).sqrt(), max_relative = 1e-12);
        assert!(sigma_closed_form(&DistributionSpec::new(Kind::LaplaceProduct, 5), 4.0).is_none());
    }

    #[test]
    fn estimate_argument_checks() {
        let g = DistributionSpec::new(Kind::Gaussian, 2);
        let s = RandomStream::new(0);
        assert!(sigma_estimate(&g, 0.5, 5000, SearchMode::CanonicalPlusRandom, &s).is_err());
        assert!(sigma_estimate(&g, 2.0, 999, SearchMode::CanonicalPlusRandom, &s).is_err());
    }

    #[test]
    fn gaussian_estimate_near_closed_form() {
        let g = DistributionSpec::new(Kind::Gaussian, 4);
        let est = sigma_estimate(&g, 4.0, 100_000, SearchMode::CanonicalPlusRandom, &RandomStream::new(8)).unwrap();
        assert!((est.value / 3f64.powf(0.25) - 1.0).abs() < 0.03, "{}", est.value);
        assert_eq!(est.log_concave_upper, 4.0);
    }

    #[test]
    fn cube_diagonal_beats_basis() {
        // E(X1+X2)^4/4 = (2*9/5 + 6)/4 = 2.4 against E X1^4 = 9/5
        let spec = DistributionSpec::new(Kind::UniformCubeProduct, 2);
        let est = sigma_estimate(&spec, 4.0, 100_000, SearchMode::SphereAscent, &RandomStream::new(2)).unwrap();
        assert!(est.value >= 1.245, "{}", est.value);
        assert!(est.value <= 2.4f64.powf(0.25) * 1.02);
    }

    #[test]
    fn inverse_examples() {
        let linear = SigmaProfile::from_values(
            (1..=20).map(f64::from).collect(),
            (1..=20).map(|p| p as f64 / 2.0).collect(),
            SigmaMethod::ClosedForm,
        )
        .unwrap();
        assert_relative_eq!(sigma_inverse(&linear, 5.0).unwrap().p, 10.0, max_relative = 1e-12);
        assert_eq!(sigma_inverse(&linear, 0.1).unwrap().p, 1.0);
        let sat = sigma_inverse(&linear, 11.0).unwrap();
        assert!(sat.saturated && sat.p == 20.0);

        let g = DistributionSpec::new(Kind::Gaussian, 3);
        let prof = SigmaProfile::estimate(&g, &DEFAULT_P_GRID, 1000, SearchMode::CanonicalPlusRandom, &RandomStream::new(0)).unwrap();
        assert!(prof.methods.iter().all(|m| *m == SigmaMethod::ClosedForm));
        assert_relative_eq!(sigma_inverse(&prof, 1.0).unwrap().p, 2.0, max_relative = 1e-9);
        assert_eq!(sigma_inverse(&prof, 0.5).unwrap().p, 1.0);
    }

    #[test]
    fn empty_or_non_monotone_profiles_rejected() {
        assert!(SigmaProfile::from_values(vec![], vec![], SigmaMethod::ClosedForm).is_err());
        assert!(SigmaProfile::from_values(vec![1.0, 2.0], vec![2.0, 1.0], SigmaMethod::ClosedForm).is_err());
        let bad = SigmaProfile {
            spec: None,
            p_grid: vec![],
            values: vec![],
            methods: vec![],
            trials: 0,
            isotonic_correction: 0.0,
        };
        assert!(sigma_inverse(&bad, 1.0).is_err());
    }

    #[test]
    fn estimated_profile_is_monotone_and_below_p() {
        let spec = DistributionSpec::new(Kind::LaplaceProduct, 5);
        let prof = SigmaProfile::estimate(&spec, &DEFAULT_P_GRID, 20_000, SearchMode::CanonicalPlusRandom, &RandomStream::new(4)).unwrap();
        assert!(prof.values.windows(2).all(|w| w[0] <= w[1]));
        for (p, v) in prof.p_grid.iter().zip(&prof.values) {
            assert!(*v <= p * 1.05, "p={p} σ={v}");
        }
    }

    #[test]
    fn paouris_ratio_examples() {
        let g = DistributionSpec::new(Kind::Gaussian, 100);
        let r = paouris_ratio(&g, 2.0, 20_000, &RandomStream::new(1)).unwrap();
        assert!((r.ratio / (10.0 / 11.0) - 1.0).abs() < 0.03, "{}", r.ratio);
        let c = DistributionSpec::new(Kind::UniformBall, 10);
        let r = paouris_ratio(&c, 1.0, 20_000, &RandomStream::new(1)).unwrap();
        assert!(r.ratio <= 1.0 + 1e-9);
    }
}
