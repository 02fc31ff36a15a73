//! Dense matrices and the handful of kernels the compressors are built from.
//!
//! Everything is `f64`, row-major. Single precision only appears on the wire.
//! Matrix products and Gram–Schmidt passes add to a per-thread
//! multiply-accumulate counter ([`mac_count`]) so callers can measure how
//! work scales with shape and rank.

use std::cell::Cell;
use std::fmt;
use std::ops::{Add, Sub};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Largest `min(rows, cols)` accepted by [`exact_svd`].
pub const ORACLE_CAP: usize = 512;

thread_local! {
    static MACS: Cell<u64> = const { Cell::new(0) };
}

/// Multiply-accumulate operations performed on this thread since the last reset.
pub fn mac_count() -> u64 {
    MACS.with(Cell::get)
}

pub fn reset_mac_count() {
    MACS.with(|c| c.set(0));
}

#[inline]
fn add_macs(n: u64) {
    MACS.with(|c| c.set(c.get().wrapping_add(n)));
}

/// Seed for every random draw in the crate. Equal seeds give bit-identical output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// Derives an independent child seed for a numbered sub-stream.
    pub fn derive(self, stream: u64) -> RngSeed {
        RngSeed(splitmix64(
            self.0 ^ splitmix64(stream.wrapping_add(0x5851_f42d_4c95_7f2d)),
        ))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

impl From<u64> for RngSeed {
    fn from(v: u64) -> Self {
        RngSeed(v)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Dense real matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(6) {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            write!(f, "{:?}", &row[..row.len().min(6)])?;
            if i + 1 < self.rows {
                write!(f, "; ")?;
            }
        }
        if self.rows > 6 {
            write!(f, "...")?;
        }
        write!(f, "]")
    }
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Mat {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from external data, rejecting empty shapes, wrong
    /// lengths and non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Mat> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyShape { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(Error::BadLength {
                rows,
                cols,
                len: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols,
                col: pos % cols,
            });
        }
        Ok(Mat { rows, cols, data })
    }

    /// Convenience constructor for literals; panics on ragged or non-finite input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Mat {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let data: Vec<f64> = rows
            .iter()
            .flat_map(|r| {
                assert_eq!(r.as_ref().len(), cols, "ragged rows");
                r.as_ref().iter().copied()
            })
            .collect();
        Mat::from_vec(rows.len(), cols, data).expect("invalid matrix literal")
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Mat {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Mat {
        let cols = columns.len();
        let mut m = Mat::zeros(rows, cols);
        for (j, c) in columns.iter().enumerate() {
            debug_assert_eq!(c.len(), rows);
            for (i, v) in c.iter().enumerate() {
                m.data[i * cols + j] = *v;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn min_dim(&self) -> usize {
        self.rows.min(self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    /// First `k` columns.
    pub fn leading_cols(&self, k: usize) -> Mat {
        assert!(k <= self.cols);
        Mat::from_fn(self.rows, k, |i, j| self.get(i, j))
    }

    /// Selects rows by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Mat {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Mat {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(pos) => Err(Error::NonFinite {
                row: pos / self.cols,
                col: pos % self.cols,
            }),
            None => Ok(()),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn fro_norm(&self) -> f64 {
        fro_norm(self)
    }

    pub fn fro_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn scale(&self, s: f64) -> Mat {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale_in_place(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Mat) -> Result<()> {
        self.same_shape("axpy", other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    fn same_shape(&self, op: &'static str, other: &Mat) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(self.mismatch(op, other));
        }
        Ok(())
    }

    fn mismatch(&self, op: &'static str, other: &Mat) -> Error {
        Error::DimensionMismatch {
            op,
            left_rows: self.rows,
            left_cols: self.cols,
            right_rows: other.rows,
            right_cols: other.cols,
        }
    }

    pub fn try_add(&self, other: &Mat) -> Result<Mat> {
        self.same_shape("add", other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn try_sub(&self, other: &Mat) -> Result<Mat> {
        self.same_shape("sub", other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    fn zip_with(&self, other: &Mat, f: impl Fn(f64, f64) -> f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// `self * b`.
    pub fn matmul(&self, b: &Mat) -> Result<Mat> {
        matmul(self, b)
    }

    /// `self^T * b` without materializing the transpose.
    pub fn t_matmul(&self, b: &Mat) -> Result<Mat> {
        if self.rows != b.rows {
            return Err(self.mismatch("t_matmul", b));
        }
        let (k, m, n) = (self.rows, self.cols, b.cols);
        let mut out = vec![0.0; m * n];
        for p in 0..k {
            let arow = self.row(p);
            let brow = b.row(p);
            for (i, &a) in arow.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let orow = &mut out[i * n..(i + 1) * n];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += a * bv;
                }
            }
        }
        add_macs((k * m * n) as u64);
        Ok(Mat {
            rows: m,
            cols: n,
            data: out,
        })
    }

    /// `self * b^T` without materializing the transpose.
    pub fn matmul_t(&self, b: &Mat) -> Result<Mat> {
        if self.cols != b.cols {
            return Err(self.mismatch("matmul_t", b));
        }
        let (m, n, k) = (self.rows, b.rows, self.cols);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let arow = self.row(i);
            for j in 0..n {
                out[i * n + j] = dot(arow, b.row(j));
            }
        }
        add_macs((m * n * k) as u64);
        Ok(Mat {
            rows: m,
            cols: n,
            data: out,
        })
    }
}

impl Add for &Mat {
    type Output = Mat;
    fn add(self, rhs: &Mat) -> Mat {
        self.try_add(rhs).expect("shape mismatch in +")
    }
}

impl Sub for &Mat {
    type Output = Mat;
    fn sub(self, rhs: &Mat) -> Mat {
        self.try_sub(rhs).expect("shape mismatch in -")
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Standard matrix product with `f64` accumulation.
pub fn matmul(a: &Mat, b: &Mat) -> Result<Mat> {
    if a.cols != b.rows {
        return Err(a.mismatch("matmul", b));
    }
    let (m, k, n) = (a.rows, a.cols, b.cols);
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for (p, &av) in a.row(i).iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            for (o, &bv) in orow.iter_mut().zip(b.row(p)) {
                *o += av * bv;
            }
        }
    }
    add_macs((m * k * n) as u64);
    Ok(Mat {
        rows: m,
        cols: n,
        data: out,
    })
}

pub fn fro_norm(a: &Mat) -> f64 {
    // scaled accumulation keeps tiny and huge entries from under/overflowing
    let scale = a.max_abs();
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let s: f64 = a.data.iter().map(|v| (v / scale) * (v / scale)).sum();
    scale * s.sqrt()
}

/// i.i.d. standard normal matrix; a pure function of `(rows, cols, seed)`.
pub fn gaussian(rows: usize, cols: usize, seed: RngSeed) -> Mat {
    let mut rng = seed.rng();
    let data = (0..rows * cols).map(|_| StandardNormal.sample(&mut rng)).collect();
    Mat { rows, cols, data }
}

const DEFICIENT_REL: f64 = 1e-10;

/// Column-orthonormal basis for the span of `a` (thin-QR `Q` factor).
///
/// Modified Gram–Schmidt with one re-orthogonalization pass. Columns that
/// are (numerically) dependent on earlier ones, including zero columns, are
/// replaced by deterministic random directions orthogonal to everything
/// before them, so the result always has `a.cols()` orthonormal columns.
pub fn orthonormalize(a: &Mat) -> Result<Mat> {
    let (m, k) = a.shape();
    if m < k {
        return Err(Error::WideMatrix { rows: m, cols: k });
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let mut v = a.column(j);
        let orig = norm(&v);
        if orig > 0.0 && orig.is_finite() {
            project_out(&mut v, &basis);
            let nv = norm(&v);
            if nv > DEFICIENT_REL * orig {
                v.iter_mut().for_each(|x| *x /= nv);
                basis.push(v);
                continue;
            }
        }
        basis.push(random_orthogonal_direction(m, k, j, &basis));
    }
    Ok(Mat::from_columns(m, &basis))
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for _pass in 0..2 {
        for q in basis {
            let c = dot(q, v);
            for (x, qi) in v.iter_mut().zip(q) {
                *x -= c * qi;
            }
        }
    }
    add_macs((4 * basis.len() * v.len()) as u64);
}

fn random_orthogonal_direction(m: usize, k: usize, j: usize, basis: &[Vec<f64>]) -> Vec<f64> {
    let base = RngSeed(((m as u64) << 40) ^ ((k as u64) << 20) ^ j as u64);
    for attempt in 0u64.. {
        let mut v = gaussian(m, 1, base.derive(attempt)).into_vec();
        let orig = norm(&v);
        project_out(&mut v, basis);
        let nv = norm(&v);
        if nv > 1e-6 * orig {
            v.iter_mut().for_each(|x| *x /= nv);
            return v;
        }
    }
    unreachable!()
}

/// Thin SVD `a = u * diag(s) * v^T` with `s` non-increasing.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Mat,
    pub s: Vec<f64>,
    pub v: Mat,
}

impl Svd {
    /// Optimal rank-`r` Frobenius residual `sqrt(sum_{i>r} s_i^2)`.
    pub fn tail_norm(&self, r: usize) -> f64 {
        self.s.iter().skip(r).map(|s| s * s).sum::<f64>().sqrt()
    }

    pub fn reconstruct(&self) -> Mat {
        let mut us = self.u.clone();
        for i in 0..us.rows {
            for (j, s) in self.s.iter().enumerate() {
                us.data[i * us.cols + j] *= s;
            }
        }
        us.matmul_t(&self.v).expect("svd factor shapes")
    }
}

/// Exact thin SVD, for tests and benchmarks only. See [`exact_svd_capped`].
pub fn exact_svd(a: &Mat) -> Result<Svd> {
    exact_svd_capped(a, ORACLE_CAP)
}

/// One-sided Jacobi: rotates column pairs of `a` until they are mutually
/// orthogonal, which diagonalizes the Gram matrix `a^T a` implicitly.
/// Rejects inputs whose smaller dimension exceeds `cap`.
pub fn exact_svd_capped(a: &Mat, cap: usize) -> Result<Svd> {
    let dim = a.min_dim();
    if dim > cap {
        return Err(Error::OracleCapExceeded { dim, cap });
    }
    if a.rows < a.cols {
        let t = exact_svd_capped(&a.transpose(), cap)?;
        return Ok(Svd { u: t.v, s: t.s, v: t.u });
    }
    let (m, n) = a.shape();
    let mut cols = a.columns();
    let mut vcols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut vcols, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let sig: Vec<f64> = cols.iter().map(|c| norm(c)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sig[j].total_cmp(&sig[i]).then(i.cmp(&j)));
    let smax = order.first().map_or(0.0, |&i| sig[i]);
    let tol = smax * (m as f64) * f64::EPSILON;

    let mut ucols = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let mut vsorted = Vec::with_capacity(n);
    for &i in &order {
        let sv = sig[i];
        if sv > tol && sv > 0.0 {
            ucols.push(cols[i].iter().map(|x| x / sv).collect());
        } else {
            ucols.push(vec![0.0; m]);
        }
        s.push(sv);
        vsorted.push(vcols[i].clone());
    }
    let u = orthonormalize(&Mat::from_columns(m, &ucols))?;
    Ok(Svd {
        u,
        s,
        v: Mat::from_columns(n, &vsorted),
    })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let (cp, cq) = (&mut lo[p], &mut hi[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xv, yv) = (*x, *y);
        *x = c * xv - s * yv;
        *y = s * xv + c * yv;
    }
}

/// `U * diag(sigmas) * V^T` with random orthonormal `U` (m x k) and `V` (n x k).
pub fn planted(m: usize, n: usize, sigmas: &[f64], seed: RngSeed) -> Mat {
    let k = sigmas.len();
    assert!(k <= m.min(n), "planted spectrum longer than min dimension");
    let u = orthonormalize(&gaussian(m, k, seed.derive(1))).expect("m >= k");
    let v = orthonormalize(&gaussian(n, k, seed.derive(2))).expect("n >= k");
    let mut us = u;
    for i in 0..m {
        for (j, s) in sigmas.iter().enumerate() {
            us.data[i * k + j] *= s;
        }
    }
    us.matmul_t(&v).expect("planted shapes")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triple_loop(a: &Mat, b: &Mat) -> Mat {
        Mat::from_fn(a.rows(), b.cols(), |i, j| {
            (0..a.cols()).map(|p| a.get(i, p) * b.get(p, j)).sum()
        })
    }

    fn max_diff(a: &Mat, b: &Mat) -> f64 {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
    }

    fn gram_defect(q: &Mat) -> f64 {
        (&q.t_matmul(q).unwrap() - &Mat::identity(q.cols())).fro_norm()
    }

    #[test]
    fn identity_times_a() {
        let a = gaussian(3, 4, RngSeed(1));
        assert_eq!(matmul(&Mat::identity(3), &a).unwrap(), a);
    }

    #[test]
    fn small_product_by_hand() {
        let a = Mat::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let b = Mat::from_rows(&[[0.0], [1.0]]);
        assert_eq!(matmul(&a, &b).unwrap(), Mat::from_rows(&[[2.0], [4.0]]));
    }

    #[test]
    fn random_product_matches_triple_loop() {
        let a = gaussian(7, 5, RngSeed(2));
        let b = gaussian(5, 3, RngSeed(3));
        assert!(max_diff(&matmul(&a, &b).unwrap(), &triple_loop(&a, &b)) < 1e-12);
        assert!(max_diff(&a.transpose().t_matmul(&b).unwrap(), &triple_loop(&a, &b)) < 1e-12);
        assert!(max_diff(&a.matmul_t(&b.transpose()).unwrap(), &triple_loop(&a, &b)) < 1e-12);
    }

    #[test]
    fn matmul_rejects_mismatch() {
        let err = matmul(&Mat::zeros(2, 3), &Mat::zeros(2, 3)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { op: "matmul", .. }));
    }

    #[test]
    fn from_vec_validates() {
        assert!(matches!(
            Mat::from_vec(2, 2, vec![1.0, f64::NAN, 0.0, 0.0]),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
        assert!(matches!(Mat::from_vec(2, 2, vec![1.0]), Err(Error::BadLength { .. })));
        assert!(matches!(Mat::from_vec(0, 2, vec![]), Err(Error::EmptyShape { .. })));
    }

    #[test]
    fn orthonormalize_normalizes_single_column() {
        let q = orthonormalize(&Mat::from_rows(&[[3.0], [4.0]])).unwrap();
        let sign = q.get(0, 0).signum();
        assert!((q.get(0, 0) * sign - 0.6).abs() < 1e-15);
        assert!((q.get(1, 0) * sign - 0.8).abs() < 1e-15);
    }

    #[test]
    fn orthonormalize_is_idempotent_up_to_sign() {
        let q = orthonormalize(&gaussian(20, 5, RngSeed(4))).unwrap();
        let q2 = orthonormalize(&q).unwrap();
        for j in 0..5 {
            let s = q.column(j).iter().zip(q2.column(j)).map(|(a, b)| a * b).sum::<f64>();
            assert!((s.abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn orthonormalize_random_tall() {
        let a = gaussian(50, 8, RngSeed(5));
        let q = orthonormalize(&a).unwrap();
        assert!(gram_defect(&q) < 1e-10);
        let proj = q.matmul(&q.t_matmul(&a).unwrap()).unwrap();
        assert!((&proj - &a).fro_norm() < 1e-9);
    }

    #[test]
    fn orthonormalize_repairs_deficient_columns() {
        let a = gaussian(10, 1, RngSeed(6));
        let dup = Mat::from_fn(10, 3, |i, j| if j == 2 { 0.0 } else { a.get(i, 0) });
        let q = orthonormalize(&dup).unwrap();
        assert!(gram_defect(&q) < 1e-10);
        let q0 = orthonormalize(&Mat::zeros(6, 4)).unwrap();
        assert!(gram_defect(&q0) < 1e-10);
        // pure function, also in the repair path
        assert_eq!(q0, orthonormalize(&Mat::zeros(6, 4)).unwrap());
    }

    #[test]
    fn orthonormalize_rejects_wide() {
        assert!(matches!(
            orthonormalize(&Mat::zeros(2, 3)),
            Err(Error::WideMatrix { .. })
        ));
    }

    #[test]
    fn gaussian_determinism_and_moments() {
        assert_eq!(gaussian(4, 5, RngSeed(9)), gaussian(4, 5, RngSeed(9)));
        assert_ne!(gaussian(4, 5, RngSeed(9)), gaussian(4, 5, RngSeed(10)));
        let g = gaussian(100, 100, RngSeed(11));
        let n = g.as_slice().len() as f64;
        let mean = g.as_slice().iter().sum::<f64>() / n;
        let var = g.as_slice().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!(var > 0.9 && var < 1.1, "var {var}");
    }

    #[test]
    fn fro_norm_cases() {
        assert_eq!(fro_norm(&Mat::zeros(3, 3)), 0.0);
        assert_eq!(fro_norm(&Mat::from_rows(&[[3.0, 4.0]])), 5.0);
        let g = gaussian(13, 17, RngSeed(12));
        let naive = g.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((fro_norm(&g) - naive).abs() < 1e-12 * naive);
    }

    #[test]
    fn svd_of_diagonal() {
        let d = Mat::from_rows(&[[3.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]]);
        let svd = exact_svd(&d).unwrap();
        assert_eq!(svd.s, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn svd_of_constructed_rank_two() {
        let u = orthonormalize(&gaussian(6, 2, RngSeed(13))).unwrap();
        let v = orthonormalize(&gaussian(5, 2, RngSeed(14))).unwrap();
        let a = Mat::from_fn(6, 5, |i, j| {
            5.0 * u.get(i, 0) * v.get(j, 0) + 2.0 * u.get(i, 1) * v.get(j, 1)
        });
        let svd = exact_svd(&a).unwrap();
        assert!((svd.s[0] - 5.0).abs() < 1e-12);
        assert!((svd.s[1] - 2.0).abs() < 1e-12);
        for s in &svd.s[2..] {
            assert!(s.abs() < 1e-12);
        }
        assert!(gram_defect(&svd.u) < 1e-10);
        assert!(gram_defect(&svd.v) < 1e-10);
    }

    #[test]
    fn svd_reconstructs_wide_and_tall() {
        for (m, n) in [(20, 12), (12, 20), (1, 7), (9, 1)] {
            let a = gaussian(m, n, RngSeed((m * 100 + n) as u64));
            let svd = exact_svd(&a).unwrap();
            let rec = svd.reconstruct();
            assert!((&rec - &a).fro_norm() < 1e-8 * a.fro_norm());
            assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn svd_cap_enforced() {
        let err = exact_svd_capped(&Mat::zeros(10, 10), 5).unwrap_err();
        assert_eq!(err, Error::OracleCapExceeded { dim: 10, cap: 5 });
    }

    #[test]
    fn planted_spectrum_is_recovered() {
        let sig = [4.0, 2.0, 1.0, 0.5];
        let a = planted(12, 9, &sig, RngSeed(15));
        let svd = exact_svd(&a).unwrap();
        for (est, want) in svd.s.iter().zip(sig) {
            assert!((est - want).abs() < 1e-12);
        }
    }

    #[test]
    fn mac_counter_tracks_products() {
        reset_mac_count();
        matmul(&Mat::zeros(3, 4), &Mat::zeros(4, 5)).unwrap();
        assert_eq!(mac_count(), 60);
    }
}
