//! Dense row-major matrices, CSV I/O and the small symmetric eigen helpers
//! used by the enumeration kernels.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};

/// An `rows x cols` matrix of finite reals stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return arg(format!("matrix must be non-empty, got {rows}x{cols}"));
        }
        if data.len() != rows * cols {
            return arg(format!(
                "matrix data has {} entries, expected {}",
                data.len(),
                rows * cols
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return arg(format!(
                "non-finite entry at ({}, {})",
                pos / cols,
                pos % cols
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.as_ref().len() != cols {
                return arg(format!("row {i} has {} entries, expected {cols}", r.as_ref().len()));
            }
            data.extend_from_slice(r.as_ref());
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { rows: n, cols: n, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    /// Column Gram matrix `AᵀA` (cols x cols), row-major.
    pub fn column_gram(&self) -> Vec<f64> {
        let a = self.to_dmatrix();
        let g = a.tr_mul(&a);
        // g is symmetric, so its column-major storage is also row-major.
        g.as_slice().to_vec()
    }

    /// Row Gram matrix `AAᵀ` (rows x rows), row-major.
    pub fn row_gram(&self) -> Vec<f64> {
        let a = self.to_dmatrix();
        let g = &a * a.transpose();
        g.as_slice().to_vec()
    }

    /// Writes one row per line with 17 significant digits per entry.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut line = String::new();
        for i in 0..self.rows {
            line.clear();
            for (j, v) in self.row(i).iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                write!(line, "{v:.16e}").expect("string write");
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split(',')
                .map(|tok| {
                    tok.trim().parse::<f64>().map_err(|e| {
                        Error::Parse(format!("line {}: `{}`: {e}", lineno + 1, tok.trim()))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Largest singular value, via the symmetric eigensolve of the smaller Gram
/// matrix.
pub fn operator_norm(a: &Matrix) -> f64 {
    let (gram, d) = if a.rows() <= a.cols() {
        (a.row_gram(), a.rows())
    } else {
        (a.column_gram(), a.cols())
    };
    sym_extremes(&gram, d).1.max(0.0).sqrt()
}

/// (λmin, λmax) of a symmetric `d x d` row-major matrix.
pub fn sym_extremes(s: &[f64], d: usize) -> (f64, f64) {
    match d {
        1 => (s[0], s[0]),
        2 => {
            let (a, b, c) = (s[0], s[1], s[3]);
            let mean = 0.5 * (a + c);
            let r = (0.5 * (a - c)).hypot(b);
            (mean - r, mean + r)
        }
        _ => {
            let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, s));
            eig.eigenvalues
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                })
        }
    }
}

/// Largest eigenvalue of a symmetric `d x d` row-major matrix.
#[inline]
pub fn sym_max_eig(s: &[f64], d: usize) -> f64 {
    match d {
        1 => s[0],
        2 => {
            let (a, b, c) = (s[0], s[1], s[3]);
            0.5 * (a + c) + (0.5 * (a - c)).hypot(b)
        }
        _ => sym_extremes(s, d).1,
    }
}

/// Largest eigenpair of a symmetric `d x d` row-major matrix; the vector has
/// unit norm.
pub fn sym_top_eigenpair(s: &[f64], d: usize) -> (f64, Vec<f64>) {
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, s));
    let (idx, &val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, &f64)>, (i, v)| match best {
            Some((_, b)) if *b >= *v => best,
            _ => Some((i, v)),
        })
        .expect("non-empty");
    let v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
    (val, v)
}
