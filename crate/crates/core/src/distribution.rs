//! Probability values and the entropy calculus. All information quantities are in bits.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type RealMatrix = DMatrix<f64>;
/// Nonnegative matrix of arbitrary total mass.
pub type MassMatrix = DMatrix<f64>;

/// Tolerance on the total mass of a distribution and on stochastic row sums.
pub const SUM_TOL: f64 = 1e-12;
/// Information values in `(-INFO_TOL, 0)` are float noise and clamp to zero.
pub const INFO_TOL: f64 = 1e-10;

pub(crate) fn clamp_bits(x: f64) -> f64 {
    if x < 0.0 && x > -INFO_TOL {
        0.0
    } else {
        x
    }
}

fn check_entries(p: &DMatrix<f64>) -> Result<()> {
    for i in 0..p.nrows() {
        for j in 0..p.ncols() {
            let v = p[(i, j)];
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
            if v < 0.0 {
                return Err(Error::NegativeEntry { row: i, col: j, value: v });
            }
        }
    }
    Ok(())
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let m = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    if m == 0 || n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Ragged);
    }
    Ok(DMatrix::from_fn(m, n, |i, j| rows[i][j]))
}

/// Joint distribution of a pair: a nonnegative matrix with unit total mass.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution {
    p: DMatrix<f64>,
}

impl JointDistribution {
    pub fn new(p: DMatrix<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::Ragged);
        }
        check_entries(&p)?;
        let sum = p.sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::SumNotOne { sum, deviation: sum - 1.0 });
        }
        Ok(Self { p })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(matrix_from_rows(rows)?)
    }

    /// Scales a nonnegative matrix to unit mass. Used for ingestion only; `new` never rescales.
    pub fn normalized(p: DMatrix<f64>) -> Result<Self> {
        check_entries(&p)?;
        let sum = p.sum();
        if sum <= 0.0 {
            return Err(Error::EmptySupport);
        }
        Self::new(p / sum)
    }

    /// Clips float noise below zero and rescales. For matrices produced by the construction.
    pub(crate) fn settle(mut p: DMatrix<f64>) -> Result<Self> {
        p.iter_mut().for_each(|v| {
            if *v < 0.0 && *v > -1e-13 {
                *v = 0.0
            }
        });
        let sum = p.sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::SumNotOne { sum, deviation: sum - 1.0 });
        }
        Self::new(p / sum)
    }

    pub fn uniform(m: usize, n: usize) -> Self {
        Self { p: DMatrix::from_element(m, n, 1.0 / (m * n) as f64) }
    }

    pub fn product(row: &[f64], col: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_fn(row.len(), col.len(), |i, j| row[i] * col[j]))
    }

    pub fn rows(&self) -> usize {
        self.p.nrows()
    }

    pub fn cols(&self) -> usize {
        self.p.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.p
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[(i, j)]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows()).map(|i| self.p.row(i).iter().copied().collect()).collect()
    }

    pub fn row_marginal(&self) -> Vec<f64> {
        (0..self.rows()).map(|i| self.p.row(i).sum()).collect()
    }

    pub fn col_marginal(&self) -> Vec<f64> {
        (0..self.cols()).map(|j| self.p.column(j).sum()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self { p: self.p.transpose() }
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.p.iter().all(|&v| v > 0.0)
    }

    pub fn to_joint(&self) -> Joint {
        let (m, n) = self.p.shape();
        let mut p = Vec::with_capacity(m * n);
        for i in 0..m {
            for j in 0..n {
                p.push(self.p[(i, j)]);
            }
        }
        Joint { dims: vec![m, n], p }
    }

    pub fn entropy(&self) -> f64 {
        entropy(self.p.as_slice())
    }

    pub fn mutual_information(&self) -> f64 {
        mutual_information(self)
    }
}

impl fmt::Display for JointDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows() {
            let row: Vec<String> = self.p.row(i).iter().map(|v| format!("{v:.6}")).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

pub fn validate_distribution(grid: &[Vec<f64>]) -> Result<JointDistribution> {
    JointDistribution::from_rows(grid)
}

/// Row-stochastic matrix: nonnegative with unit row sums.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticMatrix {
    s: DMatrix<f64>,
}

impl StochasticMatrix {
    pub fn new(s: DMatrix<f64>) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::Ragged);
        }
        check_entries(&s)?;
        for i in 0..s.nrows() {
            let sum = s.row(i).sum();
            if (sum - 1.0).abs() > SUM_TOL {
                return Err(Error::SumNotOne { sum, deviation: sum - 1.0 });
            }
        }
        Ok(Self { s })
    }

    /// Clips negative float noise and renormalizes each row.
    pub(crate) fn settle(mut s: DMatrix<f64>) -> Result<Self> {
        for i in 0..s.nrows() {
            let mut row = s.row_mut(i);
            row.iter_mut().for_each(|v| *v = v.max(0.0));
            let sum = row.sum();
            if sum <= 0.0 {
                return Err(Error::SumNotOne { sum, deviation: sum - 1.0 });
            }
            row /= sum;
        }
        Self::new(s)
    }

    pub fn identity(n: usize) -> Self {
        Self { s: DMatrix::identity(n, n) }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn rows(&self) -> usize {
        self.s.nrows()
    }

    pub fn cols(&self) -> usize {
        self.s.ncols()
    }
}

/// Probability tensor over several discrete axes, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    dims: Vec<usize>,
    p: Vec<f64>,
}

impl Joint {
    pub fn new(dims: Vec<usize>, p: Vec<f64>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::ShapeMismatch(format!("axis sizes {dims:?}")));
        }
        let len: usize = dims.iter().product();
        if len != p.len() {
            return Err(Error::ShapeMismatch(format!("{} entries for axes {dims:?}", p.len())));
        }
        if let Some(k) = p.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: k, col: 0 });
        }
        if let Some(k) = p.iter().position(|&v| v < 0.0) {
            return Err(Error::NegativeEntry { row: k, col: 0, value: p[k] });
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::SumNotOne { sum, deviation: sum - 1.0 });
        }
        Ok(Self { dims, p })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    /// Sums out every axis not in `keep`; kept axes appear in the order given.
    pub fn marginal(&self, keep: &[usize]) -> Result<Joint> {
        let rank = self.dims.len();
        for (k, &axis) in keep.iter().enumerate() {
            if axis >= rank || keep[..k].contains(&axis) {
                return Err(Error::BadAxis { axis, rank });
            }
        }
        if keep.is_empty() {
            return Ok(Joint { dims: vec![1], p: vec![self.p.iter().sum()] });
        }
        let out_dims: Vec<usize> = keep.iter().map(|&a| self.dims[a]).collect();
        let mut out = vec![0.0; out_dims.iter().product()];
        let mut idx = vec![0usize; rank];
        for &v in &self.p {
            let mut flat = 0;
            for &a in keep {
                flat = flat * self.dims[a] + idx[a];
            }
            out[flat] += v;
            for a in (0..rank).rev() {
                idx[a] += 1;
                if idx[a] < self.dims[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        Ok(Joint { dims: out_dims, p: out })
    }

    pub fn entropy(&self) -> f64 {
        entropy(&self.p)
    }

    /// The two-axis joint as a matrix.
    pub fn to_distribution(&self) -> Result<JointDistribution> {
        if self.dims.len() != 2 {
            return Err(Error::ShapeMismatch(format!("expected 2 axes, found {}", self.dims.len())));
        }
        let (m, n) = (self.dims[0], self.dims[1]);
        Ok(JointDistribution { p: DMatrix::from_row_slice(m, n, &self.p) })
    }

    pub fn total_variation(&self, other: &Joint) -> Result<f64> {
        if self.dims != other.dims {
            return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(0.5 * self.p.iter().zip(&other.p).map(|(a, b)| (a - b).abs()).sum::<f64>())
    }
}

/// Shannon entropy in bits with `0 log 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    let h: f64 = p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.log2()).sum();
    h.max(0.0)
}

/// H(row | col).
pub fn conditional_entropy(j: &JointDistribution) -> f64 {
    clamp_bits(j.entropy() - entropy(&j.col_marginal()))
}

pub fn mutual_information(j: &JointDistribution) -> f64 {
    clamp_bits(entropy(&j.row_marginal()) + entropy(&j.col_marginal()) - j.entropy())
}

/// I(X:Y|Z) for a joint over axes (X, Y, Z).
pub fn conditional_mutual_information(j: &Joint) -> Result<f64> {
    if j.dims.len() != 3 {
        return Err(Error::ShapeMismatch(format!("expected 3 axes, found {}", j.dims.len())));
    }
    let hxz = j.marginal(&[0, 2])?.entropy();
    let hyz = j.marginal(&[1, 2])?.entropy();
    let hz = j.marginal(&[2])?.entropy();
    Ok(clamp_bits(hxz + hyz - j.entropy() - hz))
}

pub fn total_variation(d1: &JointDistribution, d2: &JointDistribution) -> Result<f64> {
    if d1.p.shape() != d2.p.shape() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", d1.p.shape(), d2.p.shape())));
    }
    Ok(0.5 * d1.p.iter().zip(d2.p.iter()).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Conditional distribution of a third variable given each cell `(a, b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaCoupling {
    rows: usize,
    cols: usize,
    range: usize,
    q: Vec<f64>,
}

impl GammaCoupling {
    /// `q[(a * cols + b) * range + g]` is the probability of `g` given `(a, b)`.
    pub fn new(rows: usize, cols: usize, range: usize, q: Vec<f64>) -> Result<Self> {
        if range == 0 || q.len() != rows * cols * range {
            return Err(Error::ShapeMismatch(format!(
                "{} coupling entries for {rows}x{cols} cells and range {range}",
                q.len()
            )));
        }
        for a in 0..rows {
            for b in 0..cols {
                let cell = &q[(a * cols + b) * range..(a * cols + b + 1) * range];
                let sum: f64 = cell.iter().sum();
                if cell.iter().any(|&v| v < 0.0 || !v.is_finite()) || (sum - 1.0).abs() > SUM_TOL {
                    return Err(Error::InvalidCoupling { row: a, col: b, sum });
                }
            }
        }
        Ok(Self { rows, cols, range, q })
    }

    pub fn deterministic(rows: usize, cols: usize, range: usize, f: impl Fn(usize, usize) -> usize) -> Result<Self> {
        let mut q = vec![0.0; rows * cols * range];
        for a in 0..rows {
            for b in 0..cols {
                let g = f(a, b);
                if g >= range {
                    return Err(Error::BadMap(a * cols + b));
                }
                q[(a * cols + b) * range + g] = 1.0;
            }
        }
        Ok(Self { rows, cols, range, q })
    }

    pub fn range(&self) -> usize {
        self.range
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn prob(&self, a: usize, b: usize, g: usize) -> f64 {
        self.q[(a * self.cols + b) * self.range + g]
    }
}

/// Joint over `(a, b, gamma)` with `p(a, b, g) = j(a, b) q(g | a, b)`.
pub fn couple_gamma(j: &JointDistribution, g: &GammaCoupling) -> Result<Joint> {
    if (j.rows(), j.cols()) != g.shape() {
        return Err(Error::ShapeMismatch(format!("{}x{} joint vs {}x{} coupling", j.rows(), j.cols(), g.rows, g.cols)));
    }
    let r = g.range;
    let mut p = Vec::with_capacity(j.rows() * j.cols() * r);
    for a in 0..j.rows() {
        for b in 0..j.cols() {
            let w = j.get(a, b);
            p.extend((0..r).map(|k| w * g.prob(a, b, k)));
        }
    }
    Ok(Joint { dims: vec![j.rows(), j.cols(), r], p })
}

/// Named information quantities in bits.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct InfoReport {
    values: BTreeMap<String, f64>,
}

impl InfoReport {
    pub fn insert(&mut self, label: impl Into<String>, bits: f64) {
        self.values.insert(label.into(), clamp_bits(bits));
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.values.get(label).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.values.iter().map(|(k, &v)| (k.as_str(), v))
    }
}

/// Entropy summary of a joint and a coupled gamma.
pub fn gamma_report(j: &JointDistribution, g: &GammaCoupling) -> Result<InfoReport> {
    let t = couple_gamma(j, g)?;
    let h = |axes: &[usize]| t.marginal(axes).map(|m| m.entropy());
    let mut report = InfoReport::default();
    let hg = h(&[2])?;
    let ha = h(&[0])?;
    let hb = h(&[1])?;
    let hab = h(&[0, 1])?;
    report.insert("H(g)", hg);
    report.insert("H(g|a)", h(&[0, 2])? - ha);
    report.insert("H(g|b)", h(&[1, 2])? - hb);
    report.insert("H(g|ab)", t.entropy() - hab);
    Ok(report)
}
