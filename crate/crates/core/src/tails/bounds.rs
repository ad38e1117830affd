//! Closed-form evaluation of the probability bounds and premises.
//!
//! Every unspecified absolute constant is an explicit parameter (default 1,
//! except the constant inside the RIP premise, which defaults to e) and is
//! echoed back in the result. Inputs outside a bound's premises are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::thresholds::{lambda_threshold, xlog};
use crate::tails::sigma::SigmaProfile;

const E: f64 = std::f64::consts::E;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundId {
    /// Success probability of the discretized deviation lemma.
    Lemma1,
    /// Sample-size premise of the RIP deviation estimate.
    Eq2Premise,
    /// Uniform tail of coordinate projection norms.
    Thm3,
    /// The σ-refined projection tail.
    Thm4,
    /// Order statistic tail.
    Thm5,
    /// Projection tail for weighted sums.
    Cor6,
    /// Deviation of Γ_{k,m}.
    Thm7,
    /// Left side of the RIP sample-complexity condition.
    Thm8Lhs,
    /// Moment bound for weighted sums.
    SigmaWeighted,
}

impl BoundId {
    pub const ALL: [BoundId; 9] = [
        BoundId::Lemma1,
        BoundId::Eq2Premise,
        BoundId::Thm3,
        BoundId::Thm4,
        BoundId::Thm5,
        BoundId::Cor6,
        BoundId::Thm7,
        BoundId::Thm8Lhs,
        BoundId::SigmaWeighted,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundId::Lemma1 => "lemma1",
            BoundId::Eq2Premise => "eq2_premise",
            BoundId::Thm3 => "thm3",
            BoundId::Thm4 => "thm4",
            BoundId::Thm5 => "thm5",
            BoundId::Cor6 => "cor6",
            BoundId::Thm7 => "thm7",
            BoundId::Thm8Lhs => "thm8_lhs",
            BoundId::SigmaWeighted => "sigma_weighted",
        }
    }
}

impl fmt::Display for BoundId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundId::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown bound id `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundQuery {
    pub bound_id: BoundId,
    pub parameters: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<SigmaProfile>,
}

impl BoundQuery {
    pub fn new(bound_id: BoundId) -> Self {
        Self {
            bound_id,
            parameters: BTreeMap::new(),
            profile: None,
        }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.parameters.insert(name.to_string(), value);
        self
    }

    pub fn with_profile(mut self, profile: SigmaProfile) -> Self {
        self.profile = Some(profile);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub bound_id: BoundId,
    pub value: f64,
    /// Secondary outputs (thresholds, m₀, slack, ...).
    pub aux: BTreeMap<String, f64>,
    /// Constants the evaluation used, defaults included.
    pub constants: BTreeMap<String, f64>,
    pub flags: Vec<String>,
}

struct Params<'a> {
    map: &'a BTreeMap<String, f64>,
    id: BoundId,
}

impl Params<'_> {
    fn get(&self, name: &str) -> Result<f64> {
        let v = *self
            .map
            .get(name)
            .ok_or_else(|| Error::Argument(format!("{}: missing parameter `{name}`", self.id)))?;
        if !v.is_finite() {
            return Err(Error::Argument(format!("{}: parameter `{name}` is not finite", self.id)));
        }
        Ok(v)
    }

    fn int(&self, name: &str) -> Result<usize> {
        let v = self.get(name)?;
        if v < 1.0 || v.fract() != 0.0 {
            return Err(Error::Argument(format!(
                "{}: parameter `{name}` = {v} must be a positive integer",
                self.id
            )));
        }
        Ok(v as usize)
    }

    fn or(&self, name: &str, default: f64) -> Result<f64> {
        if self.map.contains_key(name) {
            self.get(name)
        } else {
            Ok(default)
        }
    }
}

fn domain<T>(id: BoundId, msg: String) -> Result<T> {
    Err(Error::Domain(format!("{id}: {msg}")))
}

/// `sup{k <= m : k log(eN/k) <= u}`; `None` when no k qualifies. The map
/// `k -> k log(eN/k)` is increasing on `1..=N`, so the admissible set is an
/// initial segment.
pub fn m0_scan(u: f64, m: usize, big_n: usize) -> Option<usize> {
    (1..=m).take_while(|&k| xlog(k as f64, big_n as f64) <= u).last()
}

/// Inverse of σ used by the σ-dependent bounds: the supplied profile, or the
/// log-concave upper profile σ(p) = p when `sigma_upper` is set.
fn sigma_inv(id: BoundId, profile: Option<&SigmaProfile>, upper: bool, u: f64, flags: &mut Vec<String>) -> Result<f64> {
    if upper {
        flags.push("sigma_upper_profile".into());
        return Ok(u.max(1.0));
    }
    let profile = profile.ok_or_else(|| {
        Error::Argument(format!("{id}: a sigma profile is required (or set sigma_upper = 1)"))
    })?;
    if profile.methods.iter().any(|m| *m == crate::tails::sigma::SigmaMethod::DirectionSearchLower) {
        flags.push("profile_is_lower_estimate".into());
    }
    let inv = crate::tails::sigma::sigma_inverse(profile, u)?;
    if inv.saturated {
        flags.push("sigma_inverse_saturated".into());
    }
    Ok(inv.p)
}

/// Evaluates one bound.
pub fn evaluate_bound(query: &BoundQuery) -> Result<BoundValue> {
    let id = query.bound_id;
    let p = Params { map: &query.parameters, id };
    let mut aux = BTreeMap::new();
    let mut constants = BTreeMap::new();
    let mut flags = Vec::new();

    let value = match id {
        BoundId::Lemma1 => {
            let t_size = p.int("T")? as f64;
            let theta = p.get("theta")?;
            let b = p.get("B")?;
            let n = p.int("n")? as f64;
            if !(theta > 0.0 && theta < 1.0) {
                return domain(id, format!("theta = {theta} must lie in (0, 1)"));
            }
            if b < 1.0 {
                return domain(id, format!("B = {b} must be at least 1"));
            }
            1.0 - t_size * (-3.0 * theta * theta * n / (8.0 * b * b)).exp()
        }
        BoundId::Eq2Premise => {
            let m = p.int("m")?;
            let big_n = p.int("N")?;
            let n = p.int("n")? as f64;
            let theta = p.get("theta")?;
            let b = p.get("B")?;
            let c = p.or("C", E)?;
            constants.insert("C".into(), c);
            if m > big_n {
                return domain(id, format!("m = {m} exceeds N = {big_n}"));
            }
            if !(theta > 0.0 && theta < 1.0) {
                return domain(id, format!("theta = {theta} must lie in (0, 1)"));
            }
            if b < 1.0 {
                return domain(id, format!("B = {b} must be at least 1"));
            }
            if c <= 0.0 {
                return domain(id, format!("C = {c} must be positive"));
            }
            let lhs = m as f64 * (c * big_n as f64 / m as f64).ln();
            let rhs = 3.0 * theta * theta * n / (16.0 * b * b);
            aux.insert("lhs".into(), lhs);
            aux.insert("rhs".into(), rhs);
            aux.insert("slack".into(), rhs - lhs);
            aux.insert("probability".into(), 1.0 - (-rhs).exp());
            if lhs <= rhs {
                1.0
            } else {
                0.0
            }
        }
        BoundId::Thm3 => {
            let t = p.get("t")?;
            let m = p.int("m")?;
            let big_n = p.int("N")?;
            let c = p.or("C", 1.0)?;
            constants.insert("C".into(), c);
            if t < 1.0 {
                return domain(id, format!("t = {t} must be at least 1"));
            }
            if m > big_n {
                return domain(id, format!("m = {m} exceeds N = {big_n}"));
            }
            let mf = m as f64;
            aux.insert("threshold".into(), c * t * mf.sqrt() * (E * big_n as f64 / mf).ln());
            thm3_value(t, m, big_n)
        }
        BoundId::Thm4 => {
            let t = p.get("t")?;
            let m = p.int("m")?;
            let big_n = p.int("N")?;
            let c = p.or("C", 1.0)?;
            let upper = p.or("sigma_upper", 0.0)? != 0.0;
            constants.insert("C".into(), c);
            if t < 1.0 {
                return domain(id, format!("t = {t} must be at least 1"));
            }
            if m > big_n {
                return domain(id, format!("m = {m} exceeds N = {big_n}"));
            }
            let (value, m0, inv) = thm4_value(t, m, big_n, query.profile.as_ref(), upper, &mut flags)?;
            aux.insert("m0".into(), m0 as f64);
            aux.insert("sigma_inverse".into(), inv);
            aux.insert("threshold".into(), c * t * (m as f64).sqrt() * (E * big_n as f64 / m as f64).ln());
            value
        }
        BoundId::Thm5 => {
            let t = p.get("t")?;
            let l = p.int("l")?;
            let big_n = p.int("N")?;
            let c = p.or("C", 1.0)?;
            let upper = p.or("sigma_upper", 0.0)? != 0.0;
            constants.insert("C".into(), c);
            if l > big_n {
                return domain(id, format!("l = {l} exceeds N = {big_n}"));
            }
            if c <= 0.0 {
                return domain(id, format!("C = {c} must be positive"));
            }
            let floor = c * (E * big_n as f64 / l as f64).ln();
            if t < floor {
                return domain(id, format!("premise t >= C log(eN/l) = {floor} violated by t = {t}"));
            }
            let inv = sigma_inv(id, query.profile.as_ref(), upper, t * (l as f64).sqrt() / c, &mut flags)?;
            aux.insert("sigma_inverse".into(), inv);
            (-inv).exp()
        }
        BoundId::Cor6 => {
            let t = p.get("t")?;
            let m = p.int("m")?;
            let big_n = p.int("N")?;
            let b = p.get("b")?;
            let x_inf = p.or("x_inf", 0.0)?;
            let x_norm = p.or("x_norm", 0.0)?;
            let c = p.or("C", 1.0)?;
            constants.insert("C".into(), c);
            if t < 1.0 {
                return domain(id, format!("t = {t} must be at least 1"));
            }
            if m > big_n {
                return domain(id, format!("m = {m} exceeds N = {big_n}"));
            }
            if x_norm > 1.0 {
                return domain(id, format!("|x| = {x_norm} must be at most 1"));
            }
            let lower = x_inf.max(1.0 / (m as f64).sqrt());
            if !(b <= 1.0 && b >= lower) {
                return domain(id, format!("premise 1 >= b >= max(|x|_inf, 1/sqrt(m)) = {lower} violated by b = {b}"));
            }
            let mf = m as f64;
            aux.insert("threshold".into(), c * t * mf.sqrt() * (E * big_n as f64 / mf).ln());
            cor6_value(t, m, big_n, b)
        }
        BoundId::Thm7 => {
            let t = p.get("t")?;
            let k = p.int("k")?;
            let m = p.int("m")?;
            let n = p.int("n")?;
            let big_n = p.int("N")?;
            let c = p.or("C", 1.0)?;
            constants.insert("C".into(), c);
            if t < 1.0 {
                return domain(id, format!("t = {t} must be at least 1"));
            }
            let lambda = lambda_threshold(k, m, n, big_n).map_err(|e| Error::Domain(format!("{id}: {e}")))?;
            aux.insert("lambda".into(), lambda);
            aux.insert("threshold".into(), c * t * lambda);
            thm7_value(t, lambda, m)
        }
        BoundId::Thm8Lhs => {
            let m = p.int("m")?;
            let big_n = p.int("N")?;
            let n = p.int("n")?;
            let c = p.or("c", 1.0)?;
            constants.insert("c".into(), c);
            if n > big_n {
                return domain(id, format!("n = {n} exceeds N = {big_n}"));
            }
            let lhs = m as f64 * (2.0 * big_n as f64 / n as f64).ln().powi(2) * (3.0 * m as f64).ln().ln();
            aux.insert("ratio_to_n".into(), lhs / n as f64);
            aux.insert("holds".into(), if lhs <= c * n as f64 { 1.0 } else { 0.0 });
            lhs
        }
        BoundId::SigmaWeighted => {
            let pp = p.get("p")?;
            let x_norm = p.get("x_norm")?;
            let x_inf = p.get("x_inf")?;
            let c = p.or("C", 1.0)?;
            constants.insert("C".into(), c);
            if pp < 1.0 {
                return domain(id, format!("p = {pp} must be at least 1"));
            }
            if x_norm < 0.0 || x_inf < 0.0 || x_inf > x_norm {
                return domain(id, "norms must satisfy 0 <= |x|_inf <= |x|".into());
            }
            c * (pp.sqrt() * x_norm + pp * x_inf)
        }
    };

    Ok(BoundValue {
        bound_id: id,
        value,
        aux,
        constants,
        flags,
    })
}

/// Unchecked formula bodies, shared with constant fitting where they are
/// evaluated off the `t >= 1` domain.
pub(crate) fn thm3_value(t: f64, m: usize, big_n: usize) -> f64 {
    let mf = m as f64;
    (-t * mf.sqrt() / (E * mf).ln().sqrt() * (E * big_n as f64 / mf).ln()).exp()
}

pub(crate) fn cor6_value(t: f64, m: usize, big_n: usize, b: f64) -> f64 {
    let mf = m as f64;
    (-(t * mf.sqrt() * (E * big_n as f64 / mf).ln()) / (b * (E * E * b * b * mf).ln().sqrt())).exp()
}

pub(crate) fn thm7_value(t: f64, lambda: f64, m: usize) -> f64 {
    (-t * lambda / (3.0 * m as f64).ln().sqrt()).exp()
}

/// (bound, m₀, σ⁻¹ of the m₀ argument).
pub(crate) fn thm4_value(
    t: f64,
    m: usize,
    big_n: usize,
    profile: Option<&SigmaProfile>,
    upper: bool,
    flags: &mut Vec<String>,
) -> Result<(f64, usize, f64)> {
    let mf = m as f64;
    let level = t * mf.sqrt() * (E * big_n as f64 / mf).ln();
    let inv = sigma_inv(BoundId::Thm4, profile, upper, level, flags)?;
    let m0 = match m0_scan(inv, m, big_n) {
        Some(v) => v,
        None => {
            flags.push("m0_set_empty_using_1".into());
            1
        }
    };
    let arg = level / (E * mf / m0 as f64).ln().sqrt();
    let mut scratch = Vec::new();
    let p = sigma_inv(BoundId::Thm4, profile, upper, arg, &mut scratch)?;
    for f in scratch {
        if !flags.contains(&f) {
            flags.push(f);
        }
    }
    Ok(((-p).exp(), m0, inv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tails::sigma::SigmaMethod;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn eval(q: BoundQuery) -> BoundValue {
        evaluate_bound(&q).unwrap()
    }

    #[test]
    fn lemma1_example() {
        let v = eval(BoundQuery::new(BoundId::Lemma1).with("T", 1.0).with("theta", 0.5).with("B", 1.0).with("n", 8.0));
        assert_relative_eq!(v.value, 1.0 - (-0.75f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(v.value, 0.5276, epsilon = 1e-4);
    }

    #[test]
    fn cor6_example() {
        let v = eval(BoundQuery::new(BoundId::Cor6).with("t", 1.0).with("m", 4.0).with("N", 16.0).with("b", 1.0));
        let direct = (-(2.0 * (4.0 * E).ln()) / (4.0 * E * E).ln().sqrt()).exp();
        assert_relative_eq!(v.value, direct, max_relative = 1e-14);
        assert!((v.value - 0.0747).abs() < 2e-4, "{}", v.value);
    }

    #[test]
    fn thm8_example() {
        let v = eval(BoundQuery::new(BoundId::Thm8Lhs).with("m", 10.0).with("N", 1024.0).with("n", 512.0));
        let direct = 10.0 * 4f64.ln().powi(2) * 30f64.ln().ln();
        assert_relative_eq!(v.value, direct, max_relative = 1e-14);
        assert!((v.value - 23.525).abs() < 5e-3, "{}", v.value);
        assert_relative_eq!(v.aux["ratio_to_n"], direct / 512.0, max_relative = 1e-14);
    }

    #[test]
    fn thm4_m0_with_linear_profile() {
        // σ(p) = p, so σ⁻¹(10) = 10; k log(16e/k) <= 10 holds up to k = 4.
        let grid: Vec<f64> = (1..=40).map(f64::from).collect();
        let prof = SigmaProfile::from_values(grid.clone(), grid, SigmaMethod::ClosedForm).unwrap();
        let (m, big_n) = (8usize, 16usize);
        let t = 10.0 / ((m as f64).sqrt() * (E * big_n as f64 / m as f64).ln());
        let v = eval(
            BoundQuery::new(BoundId::Thm4)
                .with("t", t.max(1.0))
                .with("m", m as f64)
                .with("N", big_n as f64)
                .with_profile(prof),
        );
        let brute = (1..=m).filter(|&k| k as f64 * (16.0 * E / k as f64).ln() <= 10.0).max().unwrap();
        assert_eq!(brute, 4);
        assert_eq!(v.aux["m0"], brute as f64);
        assert!(v.value > 0.0 && v.value <= 1.0);
    }

    #[test]
    fn thm5_domain_and_value() {
        let q = BoundQuery::new(BoundId::Thm5).with("l", 1.0).with("N", 16.0).with("sigma_upper", 1.0);
        let err = evaluate_bound(&q.clone().with("t", 2.0)).unwrap_err();
        assert!(matches!(err, Error::Domain(ref s) if s.contains("premise")));
        let v = eval(q.with("t", 5.0));
        assert_relative_eq!(v.value, (-5.0f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn missing_and_out_of_domain_parameters() {
        let err = evaluate_bound(&BoundQuery::new(BoundId::Thm3).with("t", 2.0).with("m", 2.0)).unwrap_err();
        assert!(matches!(err, Error::Argument(ref s) if s.contains("`N`")));
        let err = evaluate_bound(&BoundQuery::new(BoundId::Thm3).with("t", 0.5).with("m", 2.0).with("N", 4.0)).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
        let err = evaluate_bound(
            &BoundQuery::new(BoundId::Cor6).with("t", 1.0).with("m", 4.0).with("N", 16.0).with("b", 0.4),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
        let err = evaluate_bound(&BoundQuery::new(BoundId::Thm4).with("t", 1.0).with("m", 2.0).with("N", 4.0)).unwrap_err();
        assert!(matches!(err, Error::Argument(_)));
        assert!("thm9".parse::<BoundId>().is_err());
    }

    #[test]
    fn eq2_premise_reports_slack() {
        let v = eval(
            BoundQuery::new(BoundId::Eq2Premise)
                .with("m", 2.0)
                .with("N", 64.0)
                .with("n", 4096.0)
                .with("theta", 0.5)
                .with("B", 1.0),
        );
        assert_eq!(v.value, 1.0);
        assert_eq!(v.constants["C"], E);
        assert_relative_eq!(v.aux["slack"], v.aux["rhs"] - v.aux["lhs"], max_relative = 1e-14);
    }

    #[test]
    fn sigma_weighted_and_thm7() {
        let v = eval(BoundQuery::new(BoundId::SigmaWeighted).with("p", 4.0).with("x_norm", 1.0).with("x_inf", 0.5));
        assert_relative_eq!(v.value, 2.0 + 2.0, max_relative = 1e-14);
        let v = eval(BoundQuery::new(BoundId::Thm7).with("t", 1.0).with("k", 2.0).with("m", 4.0).with("n", 8.0).with("N", 16.0));
        assert_relative_eq!(v.value, (-v.aux["lambda"] / 12f64.ln().sqrt()).exp(), max_relative = 1e-14);
    }

    proptest! {
        #[test]
        fn m0_scan_matches_brute_force(u in 0.0f64..200.0, m in 1usize..60, extra in 0usize..100) {
            let big_n = m + extra;
            let brute = (1..=m).filter(|&k| k as f64 * (E * big_n as f64 / k as f64).ln() <= u).max();
            prop_assert_eq!(m0_scan(u, m, big_n), brute);
        }

        #[test]
        fn thm3_and_thm4_are_probabilities_decreasing_in_t(t in 1.0f64..5.0, dt in 0.01f64..2.0, m in 1usize..20, extra in 0usize..50) {
            let big_n = m + extra;
            let q = |t: f64, id| BoundQuery::new(id).with("t", t).with("m", m as f64).with("N", big_n as f64).with("sigma_upper", 1.0);
            for id in [BoundId::Thm3, BoundId::Thm4] {
                let a = evaluate_bound(&q(t, id)).unwrap().value;
                let b = evaluate_bound(&q(t + dt, id)).unwrap().value;
                prop_assert!(a > 0.0 && a <= 1.0);
                prop_assert!(b < a, "{id}: {b} !< {a}");
            }
        }
    }
}
