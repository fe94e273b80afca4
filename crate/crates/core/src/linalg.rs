//! Dense containers and the small numerical kernels the rest of the crate
//! builds on: a row-major [`Matrix`], an N-way [`DenseTensor`], a one-sided
//! Jacobi SVD, Schatten (quasi-)norms, outer products and Shannon entropy.
//!
//! Everything here targets desk-scale problems (dimensions up to a few dozen),
//! so the algorithms favour accuracy and simplicity over asymptotic speed.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Sweep cap for the Jacobi SVD.
pub const SVD_MAX_SWEEPS: usize = 100;
/// Relative off-diagonal threshold below which a column pair is considered orthogonal.
pub const SVD_TOLERANCE: f64 = 1e-14;

/// Dense real matrix stored in row-major order.
///
/// Entries are finite at construction time. Arithmetic helpers do not re-check
/// finiteness; callers that can overflow (training loops) use [`Matrix::is_finite`].
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return domain(format!("matrix dimensions must be positive, got {rows}x{cols}"));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows. Panics on ragged input.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self::new(r, c, rows.iter().flat_map(|row| row.iter().copied()).collect())
    }

    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self::from_vec_unchecked(rows, cols, vec![0.0; rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::from_vec_unchecked(rows, cols, data)
    }

    /// `rows x cols` matrix with `diag` on the main diagonal (truncated or zero-padded).
    pub fn rect_diag(rows: usize, cols: usize, diag: &[f64]) -> Self {
        let mut m = Self::zeros(rows, cols);
        for (i, &d) in diag.iter().enumerate().take(rows.min(cols)) {
            m.data[i * cols + i] = d;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[cfg(test)]
    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
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

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Matrix product `self * rhs`. Panics when inner dimensions differ.
    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "matmul: {}x{} times {}x{}", self.rows, self.cols, rhs.rows, rhs.cols);
        let mut out = vec![0.0; self.rows * rhs.cols];
        for i in 0..self.rows {
            let out_row = &mut out[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Matrix::from_vec_unchecked(self.rows, rhs.cols, out)
    }

    /// `selfᵀ * rhs` without materialising the transpose.
    pub fn t_matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.rows, rhs.rows, "t_matmul: row counts differ");
        let mut out = vec![0.0; self.cols * rhs.cols];
        for k in 0..self.rows {
            let lhs_row = self.row(k);
            let rhs_row = rhs.row(k);
            for (i, &a) in lhs_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Matrix::from_vec_unchecked(self.cols, rhs.cols, out)
    }

    /// `self * rhsᵀ` without materialising the transpose.
    pub fn matmul_t(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.cols, "matmul_t: column counts differ");
        let mut out = Vec::with_capacity(self.rows * rhs.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..rhs.rows {
                out.push(dot(a, rhs.row(j)));
            }
        }
        Matrix::from_vec_unchecked(self.rows, rhs.rows, out)
    }

    fn zip_with(&self, rhs: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        assert_eq!(self.shape(), rhs.shape(), "elementwise op on mismatched shapes");
        let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect();
        Matrix::from_vec_unchecked(self.rows, self.cols, data)
    }

    pub fn add(&self, rhs: &Matrix) -> Matrix {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Matrix) -> Matrix {
        self.zip_with(rhs, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix::from_vec_unchecked(self.rows, self.cols, self.data.iter().map(|x| x * s).collect())
    }

    /// In-place `self -= s * rhs`.
    pub fn sub_scaled_assign(&mut self, s: f64, rhs: &Matrix) {
        assert_eq!(self.shape(), rhs.shape());
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= s * b;
        }
    }

    /// Frobenius inner product `<self, rhs>`.
    pub fn inner(&self, rhs: &Matrix) -> f64 {
        assert_eq!(self.shape(), rhs.shape());
        dot(&self.data, &rhs.data)
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    /// Leading `k x k` block.
    pub fn top_left(&self, k: usize) -> Matrix {
        assert!(k <= self.rows && k <= self.cols);
        Matrix::from_fn(k, k, |i, j| self.get(i, j))
    }

    /// Determinant of a square matrix via LU with partial pivoting.
    pub fn det(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::Dimension(format!("determinant of non-square {}x{} matrix", self.rows, self.cols)));
        }
        let n = self.rows;
        if n == 1 {
            return Ok(self.data[0]);
        }
        if n == 2 {
            return Ok(self.data[0] * self.data[3] - self.data[1] * self.data[2]);
        }
        let mut a = self.data.clone();
        let mut det = 1.0;
        for k in 0..n {
            let (p, pmax) =
                (k..n)
                    .map(|i| (i, a[i * n + k].abs()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax == 0.0 {
                return Ok(0.0);
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                det = -det;
            }
            let pivot = a[k * n + k];
            det *= pivot;
            for i in k + 1..n {
                let f = a[i * n + k] / pivot;
                for j in k + 1..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
            }
        }
        Ok(det)
    }

    /// Determinant of the leading `min(rows, cols)` square block.
    pub fn leading_det(&self) -> f64 {
        let k = self.rows.min(self.cols);
        self.top_left(k).det().expect("square block")
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Dense N-way array with entries in lexicographic (last index fastest) order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return domain(format!("tensor dimensions must be a non-empty list of positive sizes, got {dims:?}"));
        }
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(Error::Dimension(format!("tensor of shape {dims:?} needs {len} entries, got {}", data.len())));
        }
        if let Some(index) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        assert!(!dims.is_empty() && !dims.contains(&0));
        let len = dims.iter().product();
        Self { dims, data: vec![0.0; len] }
    }

    pub(crate) fn from_vec_unchecked(dims: Vec<usize>, data: Vec<f64>) -> Self {
        Self { dims, data }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn linear_index(&self, index: &[usize]) -> usize {
        linear_index(&self.dims, index)
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.linear_index(index)]
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn scale(&self, s: f64) -> DenseTensor {
        Self::from_vec_unchecked(self.dims.clone(), self.data.iter().map(|x| x * s).collect())
    }

    /// Frobenius distance to another tensor of the same shape.
    pub fn distance(&self, other: &DenseTensor) -> f64 {
        assert_eq!(self.dims, other.dims);
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }

    /// Views an order-2 tensor as a matrix.
    pub fn to_matrix(&self) -> Option<Matrix> {
        (self.order() == 2).then(|| Matrix::from_vec_unchecked(self.dims[0], self.dims[1], self.data.clone()))
    }
}

/// Row-major position of `index` in a tensor of shape `dims`.
pub fn linear_index(dims: &[usize], index: &[usize]) -> usize {
    assert_eq!(dims.len(), index.len(), "index order mismatch");
    index.iter().zip(dims).fold(0, |acc, (&i, &d)| {
        assert!(i < d, "index {i} out of range {d}");
        acc * d + i
    })
}

/// Inverse of the lexicographic linearisation.
pub fn unravel_index(dims: &[usize], mut flat: usize) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for (slot, &d) in out.iter_mut().zip(dims).rev() {
        *slot = flat % d;
        flat /= d;
    }
    out
}

/// Thin SVD: `min(rows, cols)` triplets, singular values non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    pub u_vectors: Vec<Vec<f64>>,
    pub sigmas: Vec<f64>,
    pub v_vectors: Vec<Vec<f64>>,
}

impl SvdResult {
    pub fn rank_one(&self, r: usize) -> Matrix {
        let (u, v) = (&self.u_vectors[r], &self.v_vectors[r]);
        Matrix::from_fn(u.len(), v.len(), |i, j| u[i] * v[j])
    }

    pub fn reconstruct(&self) -> Matrix {
        let (m, n) = (self.u_vectors[0].len(), self.v_vectors[0].len());
        let mut out = Matrix::zeros(m, n);
        for (r, &s) in self.sigmas.iter().enumerate() {
            let (u, v) = (&self.u_vectors[r], &self.v_vectors[r]);
            for i in 0..m {
                for j in 0..n {
                    out.data[i * n + j] += s * u[i] * v[j];
                }
            }
        }
        out
    }
}

/// Full thin SVD by one-sided (Hestenes) Jacobi with cyclic sweeps.
pub fn svd(m: &Matrix) -> Result<SvdResult> {
    if m.rows() < m.cols() {
        let t = svd(&m.transpose()).map_err(|e| match e {
            Error::SvdNoConvergence { sweeps, .. } => Error::SvdNoConvergence { sweeps, input: Box::new(m.clone()) },
            other => other,
        })?;
        let mut out = SvdResult { u_vectors: t.v_vectors, sigmas: t.sigmas, v_vectors: t.u_vectors };
        fix_signs(&mut out);
        return Ok(out);
    }

    let (rows, n) = m.shape();
    // Columns of the working copy, stored contiguously.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    // Columns this small are rounding noise; rotating them against anything never settles.
    let negligible = f64::EPSILON * f64::EPSILON * cols.iter().map(|c| dot(c, c)).sum::<f64>();
    let mut converged = n == 1;
    for _ in 0..SVD_MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || alpha.min(beta) <= negligible || gamma.abs() <= SVD_TOLERANCE * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut cols, p, q, c, s);
                rotate_pair(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        return Err(Error::SvdNoConvergence { sweeps: SVD_MAX_SWEEPS, input: Box::new(m.clone()) });
    }

    let mut order: Vec<(f64, usize)> = cols.iter().enumerate().map(|(j, c)| (norm2(c), j)).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut sigmas = Vec::with_capacity(n);
    let mut u_vectors: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut v_vectors = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (r, &(s, j)) in order.iter().enumerate() {
        sigmas.push(s);
        v_vectors.push(v[j].clone());
        if s > 0.0 {
            u_vectors.push(cols[j].iter().map(|x| x / s).collect());
        } else {
            u_vectors.push(vec![0.0; rows]);
            missing.push(r);
        }
    }
    complete_orthonormal(&mut u_vectors, &missing);

    let mut out = SvdResult { u_vectors, sigmas, v_vectors };
    fix_signs(&mut out);
    Ok(out)
}

fn rotate_pair(vecs: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = vecs.split_at_mut(q);
    let (a, b) = (&mut head[p], &mut tail[0]);
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Fills the listed slots with unit vectors orthogonal to every other slot.
fn complete_orthonormal(vecs: &mut [Vec<f64>], missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let dim = vecs[0].len();
    for &slot in missing {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for e in 0..dim {
            let mut cand = vec![0.0; dim];
            cand[e] = 1.0;
            // two passes of Gram-Schmidt
            for _ in 0..2 {
                for (k, other) in vecs.iter().enumerate() {
                    if k == slot || (missing.contains(&k) && norm2(other) == 0.0) {
                        continue;
                    }
                    let proj = dot(&cand, other);
                    for (c, o) in cand.iter_mut().zip(other) {
                        *c -= proj * o;
                    }
                }
            }
            let nrm = norm2(&cand);
            if best.as_ref().is_none_or(|(b, _)| nrm > *b) {
                best = Some((nrm, cand));
            }
        }
        let (nrm, cand) = best.expect("dimension is positive");
        vecs[slot] = cand.into_iter().map(|x| x / nrm).collect();
    }
}

/// Largest-magnitude entry of every left vector made non-negative.
fn fix_signs(svd: &mut SvdResult) {
    for (u, v) in svd.u_vectors.iter_mut().zip(svd.v_vectors.iter_mut()) {
        let pivot = u.iter().fold(0.0f64, |best, &x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            u.iter_mut().for_each(|x| *x = -*x);
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Singular values only.
pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    if m.shape() == (2, 2) {
        let (s1, s2) = svd2x2_analytic(m);
        return Ok(vec![s1, s2]);
    }
    Ok(svd(m)?.sigmas)
}

/// Closed-form singular values of a 2x2 matrix from the eigenvalues of its Gram
/// matrix. The larger root comes from the quadratic formula, written as
/// `(|s₊| + |s₋|) / 2`; the smaller one uses `σ₁σ₂ = |det|` to avoid cancellation.
pub fn svd2x2_analytic(m: &Matrix) -> (f64, f64) {
    assert_eq!(m.shape(), (2, 2), "svd2x2_analytic needs a 2x2 matrix");
    let (a, b, c, d) = (m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1));
    let s_plus = (a + d).hypot(b - c);
    let s_minus = (a - d).hypot(b + c);
    let sigma1 = 0.5 * (s_plus + s_minus);
    if sigma1 == 0.0 {
        return (0.0, 0.0);
    }
    let sigma2 = ((a * d - b * c).abs() / sigma1).min(sigma1);
    (sigma1, sigma2)
}

/// Schatten exponent; `p = ∞` (spectral norm) is its own variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SchattenP {
    Finite(f64),
    Infinity,
}

impl SchattenP {
    pub const NUCLEAR: SchattenP = SchattenP::Finite(1.0);
    pub const FROBENIUS: SchattenP = SchattenP::Finite(2.0);
    pub const SPECTRAL: SchattenP = SchattenP::Infinity;

    pub fn validate(self) -> Result<Self> {
        match self {
            SchattenP::Finite(p) if !(p > 0.0) || !p.is_finite() => {
                domain(format!("Schatten exponent must lie in (0, inf], got {p}"))
            }
            other => Ok(other),
        }
    }

    /// Constant of the weakened triangle inequality: 1 for p >= 1, 2^(1/p - 1) below.
    pub fn triangle_constant(self) -> f64 {
        match self {
            SchattenP::Finite(p) if p < 1.0 => 2f64.powf(1.0 / p - 1.0),
            _ => 1.0,
        }
    }
}

impl fmt::Display for SchattenP {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchattenP::Finite(p) => write!(f, "{p}"),
            SchattenP::Infinity => write!(f, "inf"),
        }
    }
}

/// Schatten (quasi-)norm from precomputed singular values.
pub fn schatten_from_sigmas(sigmas: &[f64], p: SchattenP) -> Result<f64> {
    let top = sigmas.iter().fold(0.0f64, |m, &s| m.max(s));
    match p.validate()? {
        SchattenP::Infinity => Ok(top),
        SchattenP::Finite(_) if top == 0.0 => Ok(0.0),
        SchattenP::Finite(p) => {
            let sum: f64 = sigmas.iter().map(|&s| (s / top).powf(p)).sum();
            Ok(top * sum.powf(1.0 / p))
        }
    }
}

pub fn schatten_norm(m: &Matrix, p: SchattenP) -> Result<f64> {
    p.validate()?;
    schatten_from_sigmas(&singular_values(m)?, p)
}

/// Outer product `v¹ ⊗ v² ⊗ … ⊗ vᴺ`.
pub fn outer_product(vectors: &[Vec<f64>]) -> Result<DenseTensor> {
    if vectors.is_empty() {
        return domain("outer product of an empty list");
    }
    if vectors.iter().any(Vec::is_empty) {
        return domain("outer product factor vectors must be non-empty");
    }
    let dims: Vec<usize> = vectors.iter().map(Vec::len).collect();
    let mut data = vec![1.0];
    for v in vectors {
        data = data.iter().flat_map(|&acc| v.iter().map(move |&x| acc * x)).collect();
    }
    DenseTensor::new(dims, data)
}

/// Shannon entropy `-Σ ρ ln ρ` (natural log, `0 ln 0 = 0`).
pub fn shannon_entropy(dist: &[f64]) -> Result<f64> {
    if dist.iter().any(|&p| !(p >= 0.0)) {
        return domain("entropy: distribution has a negative or NaN entry");
    }
    let total: f64 = dist.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return domain(format!("entropy: distribution sums to {total}, not 1"));
    }
    Ok(-dist.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>())
}
