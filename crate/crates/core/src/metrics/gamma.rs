//! Γ_{k,m}: the largest operator norm of a `k x m` submatrix.
//!
//! For a fixed row set `I` and column support `J`, the supremum over unit `y`
//! supported on `J` of `Σ_{i∈I} ⟨Y_i, y⟩²` is the top eigenvalue of
//! `A_{I,J}ᵀ A_{I,J}`, so `Γ_{k,m}` is a max of `s_max(A_{I,J})` over all
//! pairs. The exact routine enumerates pairs; the heuristic alternates row
//! selection with a truncated power step and is always a lower bound.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combin::{binomial, binomial_u64, next_combination, rank_blocks, unrank};
use crate::error::{arg, Error, Result};
use crate::matrix::{dot, sym_max_eig, sym_top_eigenpair, Matrix};
use crate::metrics::order::{top_indices, top_m_energy_unchecked};
use crate::rng::RandomStream;

pub const DEFAULT_GAMMA_CAP: u64 = 10_000_000;

const MAX_ITERATIONS: usize = 200;
const IMPROVEMENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMethod {
    Exact,
    Heuristic,
}

/// A value of Γ_{k,m} with the witness that reproduces it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaCertificate {
    pub value: f64,
    #[serde(rename = "I")]
    pub row_set: Vec<usize>,
    #[serde(rename = "J")]
    pub support: Vec<usize>,
    #[serde(rename = "y")]
    pub direction: Vec<f64>,
    pub method: GammaMethod,
}

impl GammaCertificate {
    /// `sqrt(Σ_{i∈I} ⟨Y_i, y⟩²)` recomputed from the matrix.
    pub fn recompute(&self, a: &Matrix) -> f64 {
        self.row_set
            .iter()
            .map(|&i| dot(a.row(i), &self.direction).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Relative mismatch between `value²` and the recomputed sum of squares.
    pub fn reproduction_error(&self, a: &Matrix) -> f64 {
        let v2 = self.value * self.value;
        let r2 = self.recompute(a).powi(2);
        (v2 - r2).abs() / v2.max(f64::MIN_POSITIVE)
    }
}

fn check_sizes(a: &Matrix, k: usize, m: usize) -> Result<()> {
    if k == 0 || k > a.rows() {
        return arg(format!("k = {k} must lie in 1..={}", a.rows()));
    }
    if m == 0 || m > a.cols() {
        return arg(format!("m = {m} must lie in 1..={}", a.cols()));
    }
    Ok(())
}

/// Top singular pair of `A_{I,J}`: returns (s_max, y embedded in R^N).
fn certify(a: &Matrix, rows: &[usize], support: &[usize]) -> (f64, Vec<f64>) {
    let m = support.len();
    let mut g = vec![0.0; m * m];
    for &i in rows {
        let r = a.row(i);
        for (p, &jp) in support.iter().enumerate() {
            for (q, &jq) in support.iter().enumerate() {
                g[p * m + q] += r[jp] * r[jq];
            }
        }
    }
    let (_, v) = sym_top_eigenpair(&g, m);
    let mut y = vec![0.0; a.cols()];
    for (p, &j) in support.iter().enumerate() {
        y[j] = v[p];
    }
    // fix the sign so the witness is deterministic
    if let Some(first) = y.iter().copied().find(|v| *v != 0.0) {
        if first < 0.0 {
            y.iter_mut().for_each(|v| *v = -*v);
        }
    }
    let value = rows.iter().map(|&i| dot(a.row(i), &y).powi(2)).sum::<f64>().sqrt();
    (value, y)
}

#[derive(Clone)]
struct Pair {
    value2: f64,
    rows: Vec<usize>,
    cols: Vec<usize>,
}

impl Pair {
    fn better(self, other: Pair) -> Pair {
        match other.value2.total_cmp(&self.value2) {
            std::cmp::Ordering::Greater => other,
            std::cmp::Ordering::Less => self,
            std::cmp::Ordering::Equal => {
                if (&other.rows, &other.cols) < (&self.rows, &self.cols) {
                    other
                } else {
                    self
                }
            }
        }
    }
}

/// Best inner pair for a fixed outer index set, given the outer Gram matrix
/// `gram` (`dim x dim`) on the inner index space.
fn scan_inner(gram: &[f64], dim: usize, size: usize, buf: &mut Vec<f64>) -> (f64, Vec<usize>) {
    let mut inner: Vec<usize> = (0..size).collect();
    let mut best = (f64::NEG_INFINITY, inner.clone());
    loop {
        buf.clear();
        for &r in &inner {
            for &c in &inner {
                buf.push(gram[r * dim + c]);
            }
        }
        let v = sym_max_eig(buf, size);
        if v > best.0 {
            best = (v, inner.clone());
        }
        if !next_combination(&mut inner, dim) {
            break;
        }
    }
    best
}

/// Exact Γ_{k,m} by enumeration of every `(I, J)` pair.
pub fn gamma_km_exact(a: &Matrix, k: usize, m: usize) -> Result<GammaCertificate> {
    gamma_km_exact_with_cap(a, k, m, DEFAULT_GAMMA_CAP)
}

pub fn gamma_km_exact_with_cap(a: &Matrix, k: usize, m: usize, cap: u64) -> Result<GammaCertificate> {
    check_sizes(a, k, m)?;
    let (n, big_n) = (a.rows(), a.cols());
    let pairs = binomial(n, k) * binomial(big_n, m);
    if pairs > cap as f64 {
        return Err(Error::TooLarge {
            count: pairs,
            cap,
            hint: "use gamma_km_heuristic",
        });
    }
    // Enumerate the larger side in the outer loop so each outer step amortizes
    // one Gram product over many small eigenproblems.
    let rows_outer = k > m;
    let (outer_dim, outer_size) = if rows_outer { (n, k) } else { (big_n, m) };
    let (inner_dim, inner_size) = if rows_outer { (big_n, m) } else { (n, k) };
    let total = binomial_u64(outer_dim, outer_size).expect("under cap");

    let best = rank_blocks(total, 64)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(start, end)| {
            let mut outer = unrank(outer_dim, outer_size, start);
            let mut gram = vec![0.0; inner_dim * inner_dim];
            let mut buf = Vec::new();
            let mut best: Option<Pair> = None;
            for step in start..end {
                if step > start {
                    next_combination(&mut outer, outer_dim);
                }
                // Gram of the outer slice on the inner index space
                for p in 0..inner_dim {
                    for q in p..inner_dim {
                        let s: f64 = if rows_outer {
                            outer.iter().map(|&i| a.get(i, p) * a.get(i, q)).sum()
                        } else {
                            outer.iter().map(|&j| a.get(p, j) * a.get(q, j)).sum()
                        };
                        gram[p * inner_dim + q] = s;
                        gram[q * inner_dim + p] = s;
                    }
                }
                let (v, inner) = scan_inner(&gram, inner_dim, inner_size, &mut buf);
                let cand = if rows_outer {
                    Pair { value2: v, rows: outer.clone(), cols: inner }
                } else {
                    Pair { value2: v, rows: inner, cols: outer.clone() }
                };
                best = Some(match best {
                    None => cand,
                    Some(b) => b.better(cand),
                });
            }
            best.expect("non-empty block")
        })
        .reduce_with(Pair::better)
        .expect("at least one pair");

    let (value, direction) = certify(a, &best.rows, &best.cols);
    Ok(GammaCertificate {
        value,
        row_set: best.rows,
        support: best.cols,
        direction,
        method: GammaMethod::Exact,
    })
}

struct Candidate {
    value: f64,
    rows: Vec<usize>,
    cols: Vec<usize>,
    direction: Vec<f64>,
}

/// Sparse unit vector keeping the `m` largest-magnitude coordinates of `v`.
fn hard_threshold(v: &[f64], m: usize) -> Option<(Vec<usize>, Vec<f64>)> {
    let mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    let support = top_indices(&mags, m);
    let norm = support.iter().map(|&j| v[j] * v[j]).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    let mut y = vec![0.0; v.len()];
    for &j in &support {
        y[j] = v[j] / norm;
    }
    Some((support, y))
}

fn select_rows(a: &Matrix, y: &[f64], k: usize) -> (f64, Vec<usize>, Vec<f64>) {
    let proj = a.mul_vec(y);
    let sq: Vec<f64> = proj.iter().map(|p| p * p).collect();
    let rows = top_indices(&sq, k);
    let obj = rows.iter().map(|&i| sq[i]).sum::<f64>();
    (obj, rows, proj)
}

/// One restart: alternating maximization from `y0`, then exact polishing of
/// the best `(I, J)` pair reached.
fn climb(a: &Matrix, k: usize, m: usize, y0: Vec<f64>) -> Option<Candidate> {
    let (_, mut y) = hard_threshold(&y0, m)?;
    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    let mut prev = f64::NEG_INFINITY;
    for _ in 0..MAX_ITERATIONS {
        let (obj, rows, proj) = select_rows(a, &y, k);
        let support: Vec<usize> = top_indices(&y.iter().map(|v| v.abs()).collect::<Vec<_>>(), m);
        if best.as_ref().is_none_or(|b| obj > b.0) {
            best = Some((obj, rows.clone(), support));
        }
        if obj - prev < IMPROVEMENT_TOL {
            break;
        }
        prev = obj;
        // power step restricted to the selected rows
        let mut v = vec![0.0; a.cols()];
        for &i in &rows {
            let r = a.row(i);
            for (vj, rj) in v.iter_mut().zip(r) {
                *vj += proj[i] * rj;
            }
        }
        match hard_threshold(&v, m) {
            Some((_, next)) => y = next,
            None => break,
        }
    }

    let (_, mut rows, mut cols) = best?;
    let (mut value, mut direction) = certify(a, &rows, &cols);
    // Alternate exact support eigenvectors with row reselection until stable.
    for _ in 0..MAX_ITERATIONS {
        let (obj, new_rows, _) = select_rows(a, &direction, k);
        if obj.sqrt() <= value * (1.0 + IMPROVEMENT_TOL) {
            break;
        }
        let (v2, d2) = certify(a, &new_rows, &cols);
        if v2 <= value {
            break;
        }
        rows = new_rows;
        value = v2;
        direction = d2;
        let mags: Vec<f64> = direction.iter().map(|v| v.abs()).collect();
        cols = top_indices(&mags, m);
    }
    Some(Candidate { value, rows, cols, direction })
}

/// Certified lower bound on Γ_{k,m} by alternating maximization with
/// hard-thresholded power steps. Restart `r` draws its random start from
/// `stream.child(r)`.
pub fn gamma_km_heuristic(
    a: &Matrix,
    k: usize,
    m: usize,
    restarts: usize,
    stream: &RandomStream,
) -> Result<GammaCertificate> {
    gamma_km_heuristic_warm(a, k, m, restarts, stream, None)
}

/// As [`gamma_km_heuristic`], additionally starting from `warm` when given.
pub fn gamma_km_heuristic_warm(
    a: &Matrix,
    k: usize,
    m: usize,
    restarts: usize,
    stream: &RandomStream,
    warm: Option<&[f64]>,
) -> Result<GammaCertificate> {
    check_sizes(a, k, m)?;
    let restarts = restarts.max(1);
    let (n, big_n) = (a.rows(), a.cols());

    // Deterministic starts: rows in decreasing order of their top-m energy,
    // for up to half of the restart budget; the rest are random.
    let mut energy: Vec<(f64, usize)> = (0..n).map(|i| (top_m_energy_unchecked(a.row(i), m), i)).collect();
    energy.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    let row_starts = restarts.div_ceil(2).min(n);

    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(restarts + 1);
    if let Some(w) = warm {
        if w.len() != big_n {
            return arg(format!("warm start has length {}, expected {big_n}", w.len()));
        }
        starts.push(w.to_vec());
    }
    starts.extend(energy.iter().take(row_starts).map(|&(_, i)| a.row(i).to_vec()));
    for r in row_starts..restarts {
        let mut rng = stream.child(r as u64).rng();
        starts.push((0..big_n).map(|_| StandardNormal.sample(&mut rng)).collect());
    }

    let best = starts
        .into_iter()
        .filter_map(|y0| climb(a, k, m, y0))
        .fold(None::<Candidate>, |acc, c| match acc {
            Some(b) if b.value >= c.value => Some(b),
            _ => Some(c),
        });

    let cand = match best {
        Some(c) => c,
        None => {
            // all starts degenerate (e.g. zero matrix)
            let rows: Vec<usize> = (0..k).collect();
            let cols: Vec<usize> = (0..m).collect();
            let (value, direction) = certify(a, &rows, &cols);
            Candidate { value, rows, cols, direction }
        }
    };
    Ok(GammaCertificate {
        value: cand.value,
        row_set: cand.rows,
        support: cand.cols,
        direction: cand.direction,
        method: GammaMethod::Heuristic,
    })
}

/// Γ_{k,m} by the requested method; heuristic runs use `restarts` restarts.
pub fn gamma_km(
    a: &Matrix,
    k: usize,
    m: usize,
    method: GammaMethod,
    restarts: usize,
    stream: &RandomStream,
) -> Result<GammaCertificate> {
    match method {
        GammaMethod::Exact => gamma_km_exact(a, k, m),
        GammaMethod::Heuristic => gamma_km_heuristic(a, k, m, restarts, stream),
    }
}
