//! Empirical extraction of the unspecified absolute constants.
//!
//! For bounds of the form `P(S >= C t s) <= f(t)`, a curve measured at
//! thresholds `t_j s` satisfies the bound with constant `C` exactly when
//! `ci_high_j <= f(t_j / C)` at every grid point. The bound formulas are
//! evaluated off their `t >= 1` domain here, so that points with survival
//! near one force a large `C` rather than being silently dropped. For the
//! order statistic tail, `C` enters the σ⁻¹ argument and the premise
//! `t >= C log(eN/ℓ)`; only grid points satisfying the premise are checked.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::metrics::thresholds::lambda_threshold;
use crate::tails::bounds::{cor6_value, thm3_value, thm4_value, thm7_value, BoundId};
use crate::tails::curve::TailCurve;
use crate::tails::sigma::SigmaProfile;

pub const MAX_FITTED_CONSTANT: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub bound_id: BoundId,
    /// `None` when no constant up to [`MAX_FITTED_CONSTANT`] works.
    pub constant: Option<f64>,
    /// Grid points that constrained the fit.
    pub points_used: usize,
}

fn need(params: &BTreeMap<String, f64>, name: &str) -> Result<f64> {
    params
        .get(name)
        .copied()
        .ok_or_else(|| Error::Argument(format!("fit: missing parameter `{name}`")))
}

fn need_int(params: &BTreeMap<String, f64>, name: &str) -> Result<usize> {
    let v = need(params, name)?;
    if v < 1.0 || v.fract() != 0.0 {
        return arg(format!("fit: `{name}` = {v} must be a positive integer"));
    }
    Ok(v as usize)
}

/// Smallest `C` in `[1, MAX_FITTED_CONSTANT]` for which `bound_id` dominates
/// the curve's upper confidence limits.
pub fn fit_constant(
    curve: &TailCurve,
    bound_id: BoundId,
    params: &BTreeMap<String, f64>,
    profile: Option<&SigmaProfile>,
) -> Result<FitResult> {
    // Bound as a function of the effective (rescaled) t and C.
    let bound: Box<dyn Fn(f64, f64) -> Option<f64>> = match bound_id {
        BoundId::Thm3 => {
            let (m, big_n) = (need_int(params, "m")?, need_int(params, "N")?);
            Box::new(move |t, c| Some(thm3_value(t / c, m, big_n)))
        }
        BoundId::Cor6 => {
            let (m, big_n, b) = (need_int(params, "m")?, need_int(params, "N")?, need(params, "b")?);
            Box::new(move |t, c| Some(cor6_value(t / c, m, big_n, b)))
        }
        BoundId::Thm7 => {
            let (k, m) = (need_int(params, "k")?, need_int(params, "m")?);
            let (n, big_n) = (need_int(params, "n")?, need_int(params, "N")?);
            let lambda = lambda_threshold(k, m, n, big_n)?;
            Box::new(move |t, c| Some(thm7_value(t / c, lambda, m)))
        }
        BoundId::Thm4 => {
            let (m, big_n) = (need_int(params, "m")?, need_int(params, "N")?);
            let upper = params.get("sigma_upper").is_some_and(|v| *v != 0.0);
            if profile.is_none() && !upper {
                return arg("fit: thm4 needs a sigma profile or sigma_upper = 1");
            }
            let profile = profile.cloned();
            Box::new(move |t, c| {
                thm4_value(t / c, m, big_n, profile.as_ref(), upper, &mut Vec::new())
                    .ok()
                    .map(|(v, _, _)| v)
            })
        }
        BoundId::Thm5 => {
            let (l, big_n) = (need_int(params, "l")?, need_int(params, "N")?);
            let upper = params.get("sigma_upper").is_some_and(|v| *v != 0.0);
            if profile.is_none() && !upper {
                return arg("fit: thm5 needs a sigma profile or sigma_upper = 1");
            }
            let profile = profile.cloned();
            Box::new(move |t, c| {
                let floor = c * (std::f64::consts::E * big_n as f64 / l as f64).ln();
                if t < floor {
                    return None;
                }
                let u = t * (l as f64).sqrt() / c;
                let p = if upper {
                    u.max(1.0)
                } else {
                    profile.as_ref().expect("checked").inverse(u).p
                };
                Some((-p).exp())
            })
        }
        other => return arg(format!("fit: {other} is not a tail bound")),
    };

    let dominates = |c: f64| -> (bool, usize) {
        let mut used = 0;
        for (t, hi) in curve.t_grid.iter().zip(&curve.ci_high) {
            match bound(*t, c) {
                Some(b) => {
                    used += 1;
                    if *hi > b {
                        return (false, used);
                    }
                }
                None => continue,
            }
        }
        (used > 0, used)
    };

    if dominates(1.0).0 {
        return Ok(FitResult { bound_id, constant: Some(1.0), points_used: dominates(1.0).1 });
    }
    // geometric scan, then bisection between the last failure and first success
    let ratio: f64 = 1.002;
    let mut prev = 1.0;
    let mut c = ratio;
    while c <= MAX_FITTED_CONSTANT * ratio {
        let cc = c.min(MAX_FITTED_CONSTANT);
        if dominates(cc).0 {
            let (mut lo, mut hi) = (prev, cc);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if dominates(mid).0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(FitResult { bound_id, constant: Some(hi), points_used: dominates(hi).1 });
        }
        prev = cc;
        c *= ratio;
    }
    Ok(FitResult { bound_id, constant: None, points_used: 0 })
}
