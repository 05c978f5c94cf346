//! Fixed design matrices, sparse parameter vectors, mutual coherence and the
//! weighted L1 geometry built on column norms.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack allowed when checking the separability inequality.
pub const SEPARABILITY_SLACK: f64 = 1e-9;

/// Coherence values within this distance of 1 are reported as exactly 1.
pub const COHERENCE_SNAP: f64 = 1e-12;

/// Dense parameter vector whose support is always derived from its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SparseParam {
    values: Vec<f64>,
}

impl SparseParam {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(p: usize) -> Self {
        Self { values: vec![0.0; p] }
    }

    /// Builds a length-`p` vector from `(index, value)` pairs.
    pub fn from_entries(p: usize, entries: &[(usize, f64)]) -> Self {
        let mut values = vec![0.0; p];
        for &(j, v) in entries {
            values[j] = v;
        }
        Self { values }
    }

    pub fn unit(p: usize, j: usize) -> Self {
        Self::from_entries(p, &[(j, 1.0)])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, j: usize) -> f64 {
        self.values[j]
    }

    /// Sorted indices of the nonzero coordinates.
    pub fn support(&self) -> Vec<usize> {
        self.values.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, _)| j).collect()
    }

    /// The L0 "norm", `|spt(u)|`.
    pub fn support_size(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn norm1(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn norm2(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &SparseParam) -> SparseParam {
        assert_eq!(self.len(), other.len(), "length mismatch");
        SparseParam::new(self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &SparseParam) -> SparseParam {
        assert_eq!(self.len(), other.len(), "length mismatch");
        SparseParam::new(self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, s: f64) -> SparseParam {
        SparseParam::new(self.values.iter().map(|v| v * s).collect())
    }

    /// `(1 - s) * self + s * other`.
    pub fn lerp(&self, other: &SparseParam, s: f64) -> SparseParam {
        assert_eq!(self.len(), other.len(), "length mismatch");
        SparseParam::new(self.values.iter().zip(&other.values).map(|(a, b)| (1.0 - s) * a + s * b).collect())
    }

    /// Exact bitwise equality, used for duplicate detection in point sets.
    pub fn bit_eq(&self, other: &SparseParam) -> bool {
        self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits() || (*a == 0.0 && *b == 0.0))
    }
}

impl From<Vec<f64>> for SparseParam {
    fn from(values: Vec<f64>) -> Self {
        Self::new(values)
    }
}

/// Which column norm `||V_j||_s` to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ColumnNorm {
    /// `s`-norm for a finite `s >= 1`.
    L(u32),
    Inf,
}

/// A fixed `n x p` design with cached column norms.
pub struct DesignMatrix {
    data: DMatrix<f64>,
    norm_inf: Vec<f64>,
    norm_1: Vec<f64>,
    norm_2: Vec<f64>,
    finite_norms: Mutex<HashMap<u32, Arc<Vec<f64>>>>,
    coherence: OnceLock<f64>,
}

impl Clone for DesignMatrix {
    fn clone(&self) -> Self {
        Self::from_validated(self.data.clone())
    }
}

impl std::fmt::Debug for DesignMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DesignMatrix").field("n", &self.n()).field("p", &self.p()).finish()
    }
}

impl PartialEq for DesignMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.data == other.data
    }
}

fn scaled_norm(col: impl Iterator<Item = f64> + Clone, s: u32) -> f64 {
    let m = col.clone().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    if m == 0.0 {
        return 0.0;
    }
    let sum: f64 = col.map(|x| (x.abs() / m).powi(s as i32)).sum();
    m * sum.powf(1.0 / s as f64)
}

impl DesignMatrix {
    /// Wraps a matrix; fails if any column is identically zero.
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::EmptyDesign);
        }
        if let Some(bad) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::Parse(format!("non-finite entry at ({}, {})", bad % data.nrows(), bad / data.nrows())));
        }
        for (j, col) in data.column_iter().enumerate() {
            if col.iter().all(|x| *x == 0.0) {
                return Err(Error::ZeroColumn(j));
            }
        }
        Ok(Self::from_validated(data))
    }

    fn from_validated(data: DMatrix<f64>) -> Self {
        let norm_inf = data.column_iter().map(|c| c.iter().fold(0.0_f64, |a, x| a.max(x.abs()))).collect();
        let norm_1 = data.column_iter().map(|c| c.iter().map(|x| x.abs()).sum()).collect();
        let norm_2 = data.column_iter().map(|c| scaled_norm(c.iter().copied(), 2)).collect();
        Self { data, norm_inf, norm_1, norm_2, finite_norms: Mutex::new(HashMap::new()), coherence: OnceLock::new() }
    }

    /// Builds from row-major rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyDesign);
        }
        let p = rows[0].len();
        if let Some(i) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::Dimension(format!("row {i} has {} entries, expected {p}", rows[i].len())));
        }
        Self::new(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
    }

    /// Parses a header-less, comma-separated, row-major matrix.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("row {i}: {s:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let f =
            std::fs::File::open(path.as_ref()).map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_csv_reader(f)
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    /// `X_i^T u` for one row.
    pub fn row_dot(&self, i: usize, u: &SparseParam) -> f64 {
        u.values().iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, v)| self.data[(i, j)] * v).sum()
    }

    /// The linear predictor `X u`.
    pub fn apply(&self, u: &SparseParam) -> Vec<f64> {
        assert_eq!(u.len(), self.p(), "parameter length must equal p");
        let mut out = vec![0.0; self.n()];
        for (j, &v) in u.values().iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.data[(i, j)] * v;
            }
        }
        out
    }

    /// `||V_j||_s` for column `j`.
    pub fn column_norm(&self, j: usize, norm: ColumnNorm) -> f64 {
        match norm {
            ColumnNorm::Inf => self.norm_inf[j],
            ColumnNorm::L(1) => self.norm_1[j],
            ColumnNorm::L(2) => self.norm_2[j],
            ColumnNorm::L(s) => self.finite_norms(s)[j],
        }
    }

    /// All column norms for a given `s`, computed once and cached.
    pub fn column_norms(&self, norm: ColumnNorm) -> Arc<Vec<f64>> {
        match norm {
            ColumnNorm::Inf => Arc::new(self.norm_inf.clone()),
            ColumnNorm::L(1) => Arc::new(self.norm_1.clone()),
            ColumnNorm::L(2) => Arc::new(self.norm_2.clone()),
            ColumnNorm::L(s) => self.finite_norms(s),
        }
    }

    fn finite_norms(&self, s: u32) -> Arc<Vec<f64>> {
        assert!(s >= 1, "norm index must be at least 1");
        let mut cache = self.finite_norms.lock().expect("norm cache poisoned");
        cache
            .entry(s)
            .or_insert_with(|| Arc::new(self.data.column_iter().map(|c| scaled_norm(c.iter().copied(), s)).collect()))
            .clone()
    }

    pub fn max_column_norm(&self, norm: ColumnNorm) -> f64 {
        self.column_norms(norm).iter().fold(0.0, |a, &b| a.max(b))
    }

    pub fn min_column_norm(&self, norm: ColumnNorm) -> f64 {
        self.column_norms(norm).iter().fold(f64::INFINITY, |a, &b| a.min(b))
    }

    /// `n^{-1/(2k)} max_j ||V_j||_{2k}`, the per-order design factor in the series constants.
    pub fn series_norm_factor(&self, k: usize) -> f64 {
        let s = 2 * k as u32;
        self.max_column_norm(ColumnNorm::L(s)) * (self.n() as f64).powf(-1.0 / s as f64)
    }

    /// Mutual coherence: the largest absolute cosine between distinct columns.
    pub fn coherence(&self) -> Result<f64> {
        if self.p() < 2 {
            return Err(Error::SingleColumn);
        }
        Ok(*self.coherence.get_or_init(|| self.compute_coherence()))
    }

    /// Coherence with the single-column case mapped to 0.
    pub fn coherence_or_zero(&self) -> f64 {
        self.coherence().unwrap_or(0.0)
    }

    fn compute_coherence(&self) -> f64 {
        let p = self.p();
        let mut best = 0.0_f64;
        for a in 0..p {
            let va = self.data.column(a);
            for b in (a + 1)..p {
                let c = va.dot(&self.data.column(b)).abs() / (self.norm_2[a] * self.norm_2[b]);
                if c > best {
                    best = c;
                }
            }
        }
        if best > 1.0 - COHERENCE_SNAP {
            1.0
        } else {
            best
        }
    }

    /// Support-size budget `n(nu) = (1 - nu)(1 + 1/mu)`, `+inf` for orthogonal designs.
    pub fn capacity(&self, nu: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&nu) {
            return Err(Error::OutOfRange(format!("nu = {nu} must lie in [0, 1]")));
        }
        let mu = self.coherence_or_zero();
        if mu == 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok((1.0 - nu) * (1.0 + 1.0 / mu))
    }

    /// `||u||_{1,s} = sum_j |u_j| ||V_j||_s`.
    pub fn weighted_l1_norm(&self, u: &SparseParam, norm: ColumnNorm) -> f64 {
        let w = self.column_norms(norm);
        u.values().iter().zip(w.iter()).map(|(v, w)| v.abs() * w).sum()
    }

    /// Checks `||Xu||^2 >= nu (1 + mu) sum_j u_j^2 ||V_j||_2^2` for `|spt(u)| <= n(nu)`.
    pub fn separability_lower_bound(&self, u: &SparseParam, nu: f64) -> Result<Separability> {
        let capacity = self.capacity(nu)?;
        let support = u.support_size();
        if support as f64 > capacity {
            return Err(Error::SupportExceedsCapacity { support, capacity });
        }
        let mu = self.coherence_or_zero();
        let lhs: f64 = self.apply(u).iter().map(|x| x * x).sum();
        let weighted: f64 = u.values().iter().zip(&self.norm_2).map(|(v, w)| v * v * w * w).sum();
        let rhs = nu * (1.0 + mu) * weighted;
        Ok(Separability { lhs, rhs, holds: lhs >= rhs - SEPARABILITY_SLACK * rhs })
    }

    /// `R = sqrt(n) max_j ||V_j||_2 / min_j ||V_j||_2^2`.
    pub fn condition_ratio(&self) -> f64 {
        let max = self.max_column_norm(ColumnNorm::L(2));
        let min = self.min_column_norm(ColumnNorm::L(2));
        (self.n() as f64).sqrt() * max / (min * min)
    }

    /// Recodes a 0/1 design to `2X - 1` plus an all-ones column, and maps the
    /// parameter so that every linear predictor is unchanged.
    pub fn binary_augment(&self, beta: &SparseParam) -> Result<(DesignMatrix, SparseParam)> {
        if beta.len() != self.p() {
            return Err(Error::Dimension(format!("beta has length {}, expected {}", beta.len(), self.p())));
        }
        for j in 0..self.p() {
            for i in 0..self.n() {
                let x = self.data[(i, j)];
                if x != 0.0 && x != 1.0 {
                    return Err(Error::NonBinary { row: i, col: j });
                }
            }
        }
        let (n, p) = (self.n(), self.p());
        let aug = DMatrix::from_fn(n, p + 1, |i, j| if j < p { 2.0 * self.data[(i, j)] - 1.0 } else { 1.0 });
        let mut b: Vec<f64> = beta.values().iter().map(|v| v / 2.0).collect();
        b.push(beta.values().iter().sum::<f64>() / 2.0);
        Ok((DesignMatrix::from_validated(aug), SparseParam::new(b)))
    }
}

/// `C(p, k)` as a float.
pub fn binomial(p: usize, k: usize) -> f64 {
    if k > p {
        return 0.0;
    }
    let k = k.min(p - k);
    (0..k).fold(1.0, |acc, i| acc * (p - i) as f64 / (i + 1) as f64).round()
}

/// All `k`-subsets of `0..p` in lexicographic order.
pub fn subsets(p: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > p {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        while i > 0 && idx[i - 1] == p - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Outcome of a separability check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Separability {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(rows: &[&[f64]]) -> DesignMatrix {
        DesignMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn zero_column_rejected() {
        let err = DesignMatrix::from_rows(&[vec![1.0, 0.0], vec![2.0, 0.0]]).unwrap_err();
        assert_eq!(err, Error::ZeroColumn(1));
    }

    #[test]
    fn coherence_examples() {
        assert_eq!(design(&[&[1.0, 0.0], &[0.0, 1.0]]).coherence().unwrap(), 0.0);
        assert_eq!(design(&[&[1.0, 1.0], &[2.0, 2.0]]).coherence().unwrap(), 1.0);
        let x = design(&[&[1.0, 1.0], &[1.0, -1.0], &[1.0, 1.0]]);
        assert!((x.coherence().unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(design(&[&[1.0], &[2.0]]).coherence().unwrap_err(), Error::SingleColumn);
    }

    #[test]
    fn capacity_examples() {
        let x = design(&[&[1.0, 1.0], &[1.0, -1.0], &[1.0, 1.0]]);
        assert!((x.capacity(0.0).unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(x.capacity(1.0).unwrap(), 0.0);
        assert!(x.capacity(1.5).is_err());
        assert!(x.capacity(-0.1).is_err());
        let eye = design(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(eye.capacity(0.3).unwrap(), f64::INFINITY);
    }

    #[test]
    fn weighted_norm_examples() {
        // ||V_1||_inf = 2
        let x = design(&[&[2.0, 0.0], &[1.0, 1.0]]);
        assert_eq!(x.weighted_l1_norm(&SparseParam::zeros(2), ColumnNorm::Inf), 0.0);
        assert_eq!(x.weighted_l1_norm(&SparseParam::unit(2, 0), ColumnNorm::Inf), 2.0);
        // ||V_1||_2 = 3, ||V_2||_2 = 1
        let y = design(&[&[3.0, 0.0], &[0.0, 1.0]]);
        let u = SparseParam::new(vec![1.0, -2.0]);
        assert!((y.weighted_l1_norm(&u, ColumnNorm::L(2)) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn large_even_norms_do_not_overflow() {
        let x = design(&[&[1e200, 1.0], &[3e199, 2.0]]);
        let n = x.column_norm(0, ColumnNorm::L(120));
        assert!(n.is_finite() && n >= 1e200 && n <= 1e200 * 2f64.powf(1.0 / 120.0));
    }

    #[test]
    fn separability_zero_and_capacity_error() {
        let x = design(&[&[1.0, 1.0], &[1.0, -1.0], &[1.0, 1.0]]);
        let s = x.separability_lower_bound(&SparseParam::zeros(2), 0.5).unwrap();
        assert_eq!((s.lhs, s.rhs, s.holds), (0.0, 0.0, true));
        // n(0.9) = 0.1 * 4 = 0.4 < 2
        let err = x.separability_lower_bound(&SparseParam::new(vec![1.0, 1.0]), 0.9).unwrap_err();
        assert!(matches!(err, Error::SupportExceedsCapacity { support: 2, .. }));
    }

    #[test]
    fn separability_orthonormal() {
        let x = design(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let u = SparseParam::new(vec![0.5, -2.0, 1.0]);
        for nu in [0.0, 0.5, 1.0] {
            let s = x.separability_lower_bound(&u, nu).unwrap();
            assert!((s.lhs - 5.25).abs() < 1e-14);
            assert!((s.rhs - nu * 5.25).abs() < 1e-14);
            assert!(s.holds);
        }
    }

    #[test]
    fn condition_ratio_examples() {
        let pm = design(&[&[1.0, -1.0], &[-1.0, -1.0], &[1.0, 1.0], &[1.0, -1.0]]);
        assert!((pm.condition_ratio() - 1.0).abs() < 1e-15);
        // ||V_1||_2 = 2, ||V_2||_2 = 1, n = 4: R = 2 * 2 / 1
        let x = design(&[&[2.0, 0.0], &[0.0, 1.0], &[0.0, 0.0], &[0.0, 0.0]]);
        assert!((x.condition_ratio() - 4.0).abs() < 1e-15);
        let scaled = DesignMatrix::new(x.matrix() * 2.5).unwrap();
        assert!((scaled.condition_ratio() - 4.0 / 2.5).abs() < 1e-14);
    }

    #[test]
    fn binary_augment_examples() {
        let x = design(&[&[1.0]]);
        let (xa, ba) = x.binary_augment(&SparseParam::new(vec![2.0])).unwrap();
        assert_eq!(xa.matrix().as_slice(), &[1.0, 1.0]);
        assert_eq!(ba.values(), &[1.0, 1.0]);
        assert_eq!(xa.row_dot(0, &ba), 2.0);

        let x = design(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let (_, b0) = x.binary_augment(&SparseParam::zeros(2)).unwrap();
        assert!(b0.is_zero());

        let bad = design(&[&[1.0, 0.5], &[0.0, 1.0]]);
        assert_eq!(bad.binary_augment(&SparseParam::zeros(2)).unwrap_err(), Error::NonBinary { row: 0, col: 1 });
    }

    #[test]
    fn csv_round_trip() {
        let x = DesignMatrix::from_csv_reader("1, 2.5\n-3,4e-1\n".as_bytes()).unwrap();
        assert_eq!((x.n(), x.p()), (2, 2));
        assert_eq!(x.get(0, 1), 2.5);
        assert_eq!(x.get(1, 1), 0.4);
        assert!(DesignMatrix::from_csv_reader("1,2\n3\n".as_bytes()).is_err());
        assert!(DesignMatrix::from_csv_reader("1,a\n".as_bytes()).is_err());
    }

    #[test]
    fn subset_enumeration() {
        assert_eq!(subsets(4, 2), vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(subsets(3, 0), vec![Vec::<usize>::new()]);
        assert!(subsets(2, 3).is_empty());
        for (p, k) in [(8, 3), (20, 2), (6, 6)] {
            assert_eq!(subsets(p, k).len() as f64, binomial(p, k));
        }
        assert_eq!(binomial(50, 25), 126410606437752.0);
    }

    #[test]
    fn support_is_recomputed() {
        let u = SparseParam::new(vec![0.0, -1.0, 0.0, 3.0]);
        assert_eq!(u.support(), vec![1, 3]);
        assert_eq!(u.support_size(), 2);
        let v = u.sub(&SparseParam::from_entries(4, &[(3, 3.0)]));
        assert_eq!(v.support(), vec![1]);
    }
}
