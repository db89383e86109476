//! Dense linear algebra used by the removal pipeline.
//!
//! The SVD is a Householder QR reduction followed by one-sided (Hestenes)
//! Jacobi on the triangular factor. Everything runs in a fixed operation
//! order, so results are bitwise reproducible regardless of how many
//! threads rayon is given.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Sweep budget for the one-sided Jacobi iteration.
pub const MAX_SWEEPS: usize = 100;

/// Column updates below this many flops stay on the calling thread.
const PAR_THRESHOLD: usize = 1 << 16;

/// Row-major dense matrix of finite `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(Error::InvalidMatrix(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows.saturating_mul(cols),
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidMatrix(format!(
                "non-finite entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Skips validation; callers guarantee the shape and finiteness.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(rows * cols, data.len());
        Matrix { rows, cols, data }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::InvalidMatrix(format!(
                    "row {i} has {} columns, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Matrix::new(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix::from_raw(rows, cols, vec![0.0; rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                out.push(self.get(i, j));
            }
        }
        Matrix::from_raw(self.cols, self.rows, out)
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::dimension(self.cols, other.rows));
        }
        let mut out = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            let dst = &mut out[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                for (d, &b) in dst.iter_mut().zip(other.row(k)) {
                    *d += a * b;
                }
            }
        }
        Ok(Matrix::from_raw(self.rows, other.cols, out))
    }

    /// First `k` columns as a new matrix.
    pub fn leading_columns(&self, k: usize) -> Matrix {
        let k = k.min(self.cols);
        let mut out = Vec::with_capacity(self.rows * k);
        for row in self.row_iter() {
            out.extend_from_slice(&row[..k]);
        }
        Matrix::from_raw(self.rows, k, out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    /// Largest absolute deviation of `selfᵀ·self` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for p in 0..self.cols {
            for q in p..self.cols {
                let dot: f64 = self.row_iter().map(|r| r[p] * r[q]).sum();
                let target = if p == q { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Thin singular value decomposition `M = U·diag(sigma)·Vᵀ`.
///
/// `sigma` is sorted in descending order and every right singular vector is
/// oriented so its largest-magnitude entry is non-negative (first such entry
/// on ties); the matching left vector is flipped with it.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    /// n×k left singular vectors.
    pub u: Matrix,
    /// k singular values, descending.
    pub sigma: Vec<f64>,
    /// d×k right singular vectors.
    pub v: Matrix,
}

impl SvdResult {
    pub fn rank_bound(&self) -> usize {
        self.sigma.len()
    }

    /// `U·diag(sigma)·Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let (n, k) = self.u.shape();
        let d = self.v.rows();
        let mut out = vec![0.0; n * d];
        for i in 0..n {
            for j in 0..d {
                out[i * d + j] = (0..k)
                    .map(|c| self.u.get(i, c) * self.sigma[c] * self.v.get(j, c))
                    .sum();
            }
        }
        Matrix::from_raw(n, d, out)
    }
}

pub fn svd(m: &Matrix) -> Result<SvdResult> {
    let (u, sigma, v) = decompose(m, true)?;
    Ok(SvdResult {
        u: u.expect("left vectors requested"),
        sigma,
        v,
    })
}

/// Singular values and right singular vectors only; `v` is bitwise equal to
/// `svd(m).v`.
pub fn svd_right(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let (_, sigma, v) = decompose(m, false)?;
    Ok((sigma, v))
}

fn decompose(m: &Matrix, want_u: bool) -> Result<(Option<Matrix>, Vec<f64>, Matrix)> {
    let (n, d) = m.shape();
    if n == 0 || d == 0 {
        return Err(Error::InvalidMatrix(format!(
            "SVD needs at least one row and column, got {n}x{d}"
        )));
    }
    if n >= d {
        let tall = ColMajor::from_matrix(m);
        let f = tall_svd(tall, want_u)?;
        let mut u = f.u;
        let mut v = f.v;
        orient(&mut v, u.as_mut());
        Ok((u.map(ColMajor::into_matrix), f.sigma, v.into_matrix()))
    } else {
        // Mᵀ = U'ΣV'ᵀ, so M = V'ΣU'ᵀ: the roles of the factors swap.
        let tall = ColMajor::from_matrix(&m.transpose());
        let f = tall_svd(tall, true)?;
        let mut v = f.u.expect("left vectors requested");
        let mut u = f.v;
        orient(&mut v, Some(&mut u));
        Ok((Some(u.into_matrix()), f.sigma, v.into_matrix()))
    }
}

/// Column-major working storage for the factorization kernels.
struct ColMajor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ColMajor {
    fn from_matrix(m: &Matrix) -> Self {
        let t = m.transpose();
        ColMajor {
            rows: m.rows,
            cols: m.cols,
            data: t.data,
        }
    }

    fn identity(n: usize) -> Self {
        ColMajor {
            rows: n,
            cols: n,
            data: Matrix::identity(n).data,
        }
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    fn two_cols_mut(&mut self, p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
        debug_assert!(p < q);
        let (lo, hi) = self.data.split_at_mut(q * self.rows);
        (&mut lo[p * self.rows..(p + 1) * self.rows], &mut hi[..self.rows])
    }

    fn negate_col(&mut self, j: usize) {
        for x in self.col_mut(j) {
            *x = -*x;
        }
    }

    fn into_matrix(self) -> Matrix {
        Matrix::from_raw(self.cols, self.rows, self.data).transpose()
    }
}

struct TallSvd {
    u: Option<ColMajor>,
    sigma: Vec<f64>,
    v: ColMajor,
}

/// Householder reflector `I - tau·w·wᵀ` acting on rows `start..`.
struct Reflector {
    start: usize,
    w: Vec<f64>,
    tau: f64,
}

impl Reflector {
    fn apply(&self, col: &mut [f64]) {
        if self.tau == 0.0 {
            return;
        }
        let tail = &mut col[self.start..];
        let s = self.tau * dot(&self.w, tail);
        for (x, w) in tail.iter_mut().zip(&self.w) {
            *x -= s * w;
        }
    }
}

fn apply_to_columns(h: &Reflector, cols: &mut [f64], rows: usize) {
    let ncols = cols.len() / rows.max(1);
    if (rows - h.start) * ncols >= PAR_THRESHOLD {
        cols.par_chunks_mut(rows).for_each(|c| h.apply(c));
    } else {
        cols.chunks_mut(rows).for_each(|c| h.apply(c));
    }
}

/// In-place Householder QR of an n×k matrix (n ≥ k); returns R (k×k) and
/// the reflectors.
fn householder_qr(mut a: ColMajor) -> (ColMajor, Vec<Reflector>) {
    let (n, k) = (a.rows, a.cols);
    let mut reflectors = Vec::with_capacity(k);
    for j in 0..k {
        let x = &a.col(j)[j..];
        let xnorm = norm(x);
        let reflector = if xnorm == 0.0 {
            Reflector {
                start: j,
                w: Vec::new(),
                tau: 0.0,
            }
        } else {
            let alpha = if x[0] >= 0.0 { -xnorm } else { xnorm };
            let mut w = x.to_vec();
            w[0] -= alpha;
            let wnorm2 = dot(&w, &w);
            let tau = if wnorm2 == 0.0 { 0.0 } else { 2.0 / wnorm2 };
            Reflector { start: j, w, tau }
        };
        reflector.apply(a.col_mut(j));
        let rest = &mut a.data[(j + 1) * n..];
        apply_to_columns(&reflector, rest, n);
        reflectors.push(reflector);
    }
    let mut r = ColMajor {
        rows: k,
        cols: k,
        data: vec![0.0; k * k],
    };
    for j in 0..k {
        for i in 0..=j {
            r.data[j * k + i] = a.data[j * n + i];
        }
    }
    (r, reflectors)
}

fn tall_svd(a: ColMajor, want_u: bool) -> Result<TallSvd> {
    let n = a.rows;
    let (mut w, reflectors) = householder_qr(a);
    let k = w.cols;
    let mut v = ColMajor::identity(k);
    one_sided_jacobi(&mut w, &mut v)?;

    let norms: Vec<f64> = (0..k).map(|j| norm(w.col(j))).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();

    let mut v_sorted = ColMajor {
        rows: k,
        cols: k,
        data: Vec::with_capacity(k * k),
    };
    for &j in &order {
        v_sorted.data.extend_from_slice(v.col(j));
    }

    let u = if want_u {
        let mut ur = ColMajor {
            rows: k,
            cols: k,
            data: vec![0.0; k * k],
        };
        let cutoff = sigma[0] * k as f64 * f64::EPSILON;
        let mut null_cols = Vec::new();
        for (dst, &j) in order.iter().enumerate() {
            if norms[j] > cutoff && norms[j] > 0.0 {
                for (x, y) in ur.col_mut(dst).iter_mut().zip(w.col(j)) {
                    *x = y / norms[j];
                }
            } else {
                null_cols.push(dst);
            }
        }
        complete_orthonormal(&mut ur, &null_cols);

        // U = Q·[U_r; 0]
        let mut u = ColMajor {
            rows: n,
            cols: k,
            data: vec![0.0; n * k],
        };
        for j in 0..k {
            u.col_mut(j)[..k].copy_from_slice(ur.col(j));
        }
        for h in reflectors.iter().rev() {
            apply_to_columns(h, &mut u.data, n);
        }
        Some(u)
    } else {
        None
    };

    Ok(TallSvd { u, sigma, v: v_sorted })
}

/// Hestenes one-sided Jacobi: rotates column pairs of `w` until all are
/// mutually orthogonal, accumulating the rotations into `v`.
fn one_sided_jacobi(w: &mut ColMajor, v: &mut ColMajor) -> Result<()> {
    let k = w.cols;
    let tol = (w.rows.max(1) as f64) * f64::EPSILON;
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..k.saturating_sub(1) {
            for q in p + 1..k {
                let (wp, wq) = w.two_cols_mut(p, q);
                let alpha = dot(wp, wp);
                let beta = dot(wq, wq);
                let gamma = dot(wp, wq);
                if gamma == 0.0 || alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.abs() <= tol * alpha.sqrt() * beta.sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta.abs() > 1e150 {
                    1.0 / (2.0 * zeta)
                } else {
                    zeta.signum() / (zeta.abs() + zeta.hypot(1.0))
                };
                let c = 1.0 / t.hypot(1.0);
                let s = c * t;
                rotate(wp, wq, c, s);
                let (vp, vq) = v.two_cols_mut(p, q);
                rotate(vp, vq, c, s);
            }
        }
        if !rotated {
            return Ok(());
        }
    }
    Err(Error::NumericalFailure { sweeps: MAX_SWEEPS })
}

fn rotate(xp: &mut [f64], xq: &mut [f64], c: f64, s: f64) {
    for (a, b) in xp.iter_mut().zip(xq.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Fills the listed columns with unit vectors orthogonal to every other
/// column. Candidates are standard basis vectors, picking the one with the
/// largest residual.
fn complete_orthonormal(m: &mut ColMajor, fill: &[usize]) {
    let n = m.rows;
    let mut filled: Vec<usize> = (0..m.cols).filter(|j| !fill.contains(j)).collect();
    for &target in fill {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            for _ in 0..2 {
                for &j in &filled {
                    let c = dot(m.col(j), &e);
                    for (x, y) in e.iter_mut().zip(m.col(j)) {
                        *x -= c * y;
                    }
                }
            }
            let r = norm(&e);
            if best.as_ref().is_none_or(|(b, _)| r > *b) {
                best = Some((r, e));
            }
        }
        let (r, e) = best.expect("n >= 1");
        for (x, y) in m.col_mut(target).iter_mut().zip(&e) {
            *x = y / r;
        }
        filled.push(target);
    }
}

/// Orients every column of `v` so its largest-|entry| is non-negative,
/// flipping the matching column of `u`.
fn orient(v: &mut ColMajor, mut u: Option<&mut ColMajor>) {
    for j in 0..v.cols {
        if needs_flip(v.col(j)) {
            v.negate_col(j);
            if let Some(u) = u.as_deref_mut() {
                u.negate_col(j);
            }
        }
    }
}

fn needs_flip(col: &[f64]) -> bool {
    let mut best = 0usize;
    for (i, x) in col.iter().enumerate() {
        if x.abs() > col[best].abs() {
            best = i;
        }
    }
    col.get(best).is_some_and(|&x| x < 0.0)
}

/// Applies the largest-|entry|-non-negative orientation to each column.
pub fn orient_columns(m: &Matrix) -> Matrix {
    let mut c = ColMajor::from_matrix(m);
    orient(&mut c, None);
    c.into_matrix()
}

/// `v - B·(Bᵀ·v)` for a basis `B` (d×r) with orthonormal columns.
pub fn project_out(v: &[f64], basis: &Matrix) -> Result<Vec<f64>> {
    let coeffs = basis_coefficients(v, basis)?;
    Ok(subtract_combination(v, basis, &coeffs, 1.0))
}

/// The removal formula with the `‖v‖₂` denominator taken literally:
/// `v - B·(Bᵀ·v)/‖v‖₂`. Agrees with [`project_out`] only on unit vectors.
pub fn project_out_paper(v: &[f64], basis: &Matrix) -> Result<Vec<f64>> {
    let coeffs = basis_coefficients(v, basis)?;
    let len = norm(v);
    if len == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(subtract_combination(v, basis, &coeffs, len))
}

fn basis_coefficients(v: &[f64], basis: &Matrix) -> Result<Vec<f64>> {
    if basis.rows() != v.len() {
        return Err(Error::dimension(basis.rows(), v.len()));
    }
    let r = basis.cols();
    let mut coeffs = vec![0.0; r];
    for (row, &x) in basis.row_iter().zip(v) {
        for (c, &b) in coeffs.iter_mut().zip(row) {
            *c += b * x;
        }
    }
    Ok(coeffs)
}

fn subtract_combination(v: &[f64], basis: &Matrix, coeffs: &[f64], scale: f64) -> Vec<f64> {
    if coeffs.is_empty() {
        return v.to_vec();
    }
    v.iter()
        .zip(basis.row_iter())
        .map(|(&x, row)| x - dot(row, coeffs) / scale)
        .collect()
}

/// Principal component scores: centers the columns, then returns the first
/// `k` columns of `U·diag(sigma)` from the SVD of the centered data.
pub fn pca_project(m: &Matrix, k: usize) -> Result<Matrix> {
    let (n, d) = m.shape();
    if n < 2 {
        return Err(Error::InvalidMatrix(format!("PCA needs at least two rows, got {n}")));
    }
    let max = n.min(d);
    if k == 0 || k > max {
        return Err(Error::Rank { requested: k, max });
    }
    let centered = center_columns(m);
    let f = svd(&centered)?;
    let mut out = Vec::with_capacity(n * k);
    for i in 0..n {
        for c in 0..k {
            out.push(f.u.get(i, c) * f.sigma[c]);
        }
    }
    Ok(Matrix::from_raw(n, k, out))
}

pub fn column_means(m: &Matrix) -> Vec<f64> {
    let mut means = vec![0.0; m.cols()];
    for row in m.row_iter() {
        for (acc, x) in means.iter_mut().zip(row) {
            *acc += x;
        }
    }
    let n = m.rows().max(1) as f64;
    means.iter_mut().for_each(|x| *x /= n);
    means
}

pub fn center_columns(m: &Matrix) -> Matrix {
    let means = column_means(m);
    let mut data = Vec::with_capacity(m.data.len());
    for row in m.row_iter() {
        data.extend(row.iter().zip(&means).map(|(x, mu)| x - mu));
    }
    Matrix::from_raw(m.rows, m.cols, data)
}

/// Modified Gram-Schmidt with one re-orthogonalization pass. Fails if a
/// column is numerically dependent on the ones before it.
pub fn orthonormalize_columns(m: &Matrix) -> Result<Matrix> {
    let mut c = ColMajor::from_matrix(m);
    for j in 0..c.cols {
        for _ in 0..2 {
            for p in 0..j {
                let (prev, cur) = c.two_cols_mut(p, j);
                let proj = dot(prev, cur);
                for (x, y) in cur.iter_mut().zip(prev.iter()) {
                    *x -= proj * y;
                }
            }
        }
        let len = norm(c.col(j));
        if len <= 1e-8 {
            return Err(Error::InvalidMatrix(format!(
                "column {j} is linearly dependent on earlier columns"
            )));
        }
        c.col_mut(j).iter_mut().for_each(|x| *x /= len);
    }
    Ok(c.into_matrix())
}
