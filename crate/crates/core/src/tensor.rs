//! Dense K-order tensors, row-major matrices and the SVD/QR primitives the
//! TT routines are built on.
//!
//! Everything is stored row-major with the last index varying fastest. The
//! same ordering is used by [`DenseTensor::reshape`], [`DenseTensor::matricize`]
//! and the on-disk container, so no routine ever transposes implicitly.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Mode sizes `(I_1, ..., I_K)` of a tensor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidShape("order must be at least 1".into()));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidShape(format!("mode {pos} has size 0")));
        }
        dims.iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidShape(format!("element count of {dims:?} overflows")))?;
        Ok(Self(dims))
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn num_elements(&self) -> usize {
        self.0.iter().product()
    }

    /// Row-major linear offset of a multi-index.
    pub fn offset(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.0.len() || index.iter().zip(&self.0).any(|(&i, &d)| i >= d) {
            return Err(Error::IndexOutOfRange {
                index: index.to_vec(),
                shape: self.0.clone(),
            });
        }
        Ok(index.iter().zip(&self.0).fold(0, |acc, (&i, &d)| acc * d + i))
    }

    /// Inverse of [`Shape::offset`].
    pub fn unravel(&self, mut offset: usize) -> Vec<usize> {
        let mut index = vec![0; self.0.len()];
        for (slot, &d) in index.iter_mut().zip(&self.0).rev() {
            *slot = offset % d;
            offset /= d;
        }
        index
    }
}

impl TryFrom<&[usize]> for Shape {
    type Error = Error;

    fn try_from(dims: &[usize]) -> Result<Self> {
        Shape::new(dims.to_vec())
    }
}

/// An uncompressed K-order tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.num_elements() {
            return Err(Error::ShapeMismatch(format!(
                "shape {:?} needs {} entries, got {}",
                shape.dims(),
                shape.num_elements(),
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("dense tensor data".into()));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        let n = shape.num_elements();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    /// Builds a tensor by evaluating `f` at every multi-index.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let data = (0..shape.num_elements()).map(|off| f(&shape.unravel(off))).collect();
        Self::new(shape, data)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.data[self.shape.offset(index)?])
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius(&self.data)
    }

    /// Relabels the data with a new shape; the flat buffer is untouched.
    pub fn reshape(&self, new_shape: Shape) -> Result<DenseTensor> {
        if new_shape.num_elements() != self.shape.num_elements() {
            return Err(Error::ShapeMismatch(format!(
                "cannot reshape {:?} into {:?}",
                self.shape.dims(),
                new_shape.dims()
            )));
        }
        Ok(DenseTensor {
            shape: new_shape,
            data: self.data.clone(),
        })
    }

    /// Unfolds modes `1..=split` into rows and the remaining modes into columns.
    pub fn matricize(&self, split: usize) -> Result<Matrix> {
        let order = self.shape.order();
        if split == 0 || split >= order {
            return Err(Error::SplitOutOfRange { split, order });
        }
        let rows = self.shape.dims()[..split].iter().product();
        let cols = self.shape.dims()[split..].iter().product();
        Matrix::new(rows, cols, self.data.clone())
    }

    /// Folds a matrix back into a tensor; the inverse of [`DenseTensor::matricize`].
    pub fn dematricize(m: &Matrix, shape: Shape) -> Result<DenseTensor> {
        if m.rows * m.cols != shape.num_elements() {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix cannot fold into {:?}",
                m.rows,
                m.cols,
                shape.dims()
            )));
        }
        DenseTensor::new(shape, m.data.clone())
    }

    /// Reorders modes: output mode `k` is input mode `perm[k]`.
    pub fn permute(&self, perm: &[usize]) -> Result<DenseTensor> {
        let dims = self.shape.dims();
        let order = dims.len();
        let mut seen = vec![false; order];
        if perm.len() != order
            || perm
                .iter()
                .any(|&p| p >= order || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::InvalidShape(format!(
                "{perm:?} is not a permutation of 0..{order}"
            )));
        }
        let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
        let mut in_strides = vec![1usize; order];
        for k in (0..order.saturating_sub(1)).rev() {
            in_strides[k] = in_strides[k + 1] * dims[k + 1];
        }
        let strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
        let n = self.data.len();
        let mut out = Vec::with_capacity(n);
        let mut idx = vec![0usize; order];
        let mut src = 0usize;
        for _ in 0..n {
            out.push(self.data[src]);
            for k in (0..order).rev() {
                idx[k] += 1;
                src += strides[k];
                if idx[k] < new_dims[k] {
                    break;
                }
                src -= strides[k] * new_dims[k];
                idx[k] = 0;
            }
        }
        DenseTensor::new(Shape::new(new_dims)?, out)
    }
}

pub(crate) fn frobenius(data: &[f64]) -> f64 {
    data.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidShape(format!("{rows}x{cols} matrix")));
        }
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
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
        Self { rows, cols, data }
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

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius(&self.data)
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let b = &other.data[k * other.cols..(k + 1) * other.cols];
                for (r, &bv) in row.iter_mut().zip(b) {
                    *r += a * bv;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix applied to length-{} vector",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok(self
            .data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    fn from_nalgebra(m: &DMatrix<f64>) -> Matrix {
        Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

/// Result of [`svd_truncated`]: `m ≈ u · diag(s) · v`.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// `rows × r`, orthonormal columns.
    pub u: Matrix,
    /// `r` singular values, non-increasing.
    pub s: Vec<f64>,
    /// `r × cols`, orthonormal rows.
    pub v: Matrix,
    /// Root-sum-square of the dropped singular values.
    pub discarded_energy: f64,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `u · diag(s) · v`
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        scale_columns(&mut us, &self.s);
        us.matmul(&self.v).expect("factor shapes agree")
    }

    /// `diag(s) · v`, the factor carried into the next core during a sweep.
    pub fn sv(&self) -> Matrix {
        let mut sv = self.v.clone();
        for (row, &s) in sv.data.chunks_exact_mut(self.v.cols).zip(&self.s) {
            row.iter_mut().for_each(|x| *x *= s);
        }
        sv
    }
}

fn scale_columns(m: &mut Matrix, scale: &[f64]) {
    let cols = m.cols;
    for row in m.data.chunks_exact_mut(cols) {
        for (x, &s) in row.iter_mut().zip(scale) {
            *x *= s;
        }
    }
}

/// Best rank-`r` approximation with `r = min(max_rank, numerical rank)`, never
/// below 1.
///
/// Singular values below `σ_max · max(rows, cols) · ε` count as zero. Each left
/// singular vector is sign-normalized so its first non-negligible entry is
/// positive, with the matching row of `v` flipped alongside.
pub fn svd_truncated(m: &Matrix, max_rank: usize) -> Result<TruncatedSvd> {
    if max_rank == 0 {
        return Err(Error::InvalidRanks("max_rank must be at least 1".into()));
    }
    if m.data.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalFailure("SVD input contains non-finite values".into()));
    }
    let full = full_svd(m)?;
    let (u_full, sigma, v_full) = (full.0, full.1, full.2);

    let tol = sigma.first().copied().unwrap_or(0.0) * (m.rows.max(m.cols) as f64) * f64::EPSILON;
    let numerical_rank = sigma.iter().take_while(|&&s| s > tol).count();
    let r = max_rank.min(numerical_rank).max(1);
    let discarded_energy = sigma[r..].iter().map(|s| s * s).sum::<f64>().sqrt();

    let u = Matrix::from_fn(m.rows, r, |i, j| u_full.get(i, j));
    let v = Matrix::from_fn(r, m.cols, |i, j| v_full.get(i, j));
    let mut out = TruncatedSvd {
        u,
        s: sigma[..r].to_vec(),
        v,
        discarded_energy,
    };
    normalize_signs(&mut out);
    Ok(out)
}

/// Thin SVD sorted by non-increasing singular value.
///
/// One-sided (Hestenes) Jacobi on the columns of the taller orientation. Very
/// tall inputs are first reduced with a Householder QR so the rotations act on
/// the small triangular factor.
fn full_svd(m: &Matrix) -> Result<(Matrix, Vec<f64>, Matrix)> {
    if m.rows < m.cols {
        let (u, s, v) = full_svd(&m.transpose())?;
        return Ok((v.transpose(), s, u.transpose()));
    }
    if m.rows > 2 * m.cols {
        let (q, r) = qr_thin(m)?;
        let (ur, s, v) = jacobi_svd(&r)?;
        return Ok((q.matmul(&ur)?, s, v));
    }
    jacobi_svd(m)
}

/// Jacobi SVD for `rows ≥ cols`; returns `u` (`rows × cols`), `σ`, `v` (`cols × cols`).
fn jacobi_svd(m: &Matrix) -> Result<(Matrix, Vec<f64>, Matrix)> {
    let (rows, n) = (m.rows, m.cols);
    let mut a: Vec<Vec<f64>> = (0..n).map(|j| (0..rows).map(|i| m.get(i, j)).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    // off-diagonal tolerance relative to the column norms
    let tol = f64::EPSILON * rows as f64;
    // columns at rounding level carry no information and can rotate forever
    let floor = (f64::EPSILON * m.frobenius_norm()).powi(2);
    let mut converged = false;
    for _ in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&a[p], &a[p]);
                let beta = dot(&a[q], &a[q]);
                let gamma = dot(&a[p], &a[q]);
                if alpha <= floor || beta <= floor || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for cols in [&mut a, &mut v] {
                    let (lo, hi) = cols.split_at_mut(q);
                    for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                        let (xp, yq) = (*x, *y);
                        *x = c * xp - s * yq;
                        *y = s * xp + c * yq;
                    }
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NumericalFailure(format!(
            "SVD of {}x{} matrix did not converge",
            rows, n
        )));
    }
    let sigma: Vec<f64> = a.iter().map(|c| dot(c, c).sqrt()).collect();
    if sigma.iter().any(|s| !s.is_finite()) {
        return Err(Error::NumericalFailure(
            "SVD produced non-finite singular values".into(),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| sigma[y].total_cmp(&sigma[x]));
    let tiny = sigma.iter().copied().fold(0.0, f64::max) * f64::EPSILON * rows as f64;
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    for &j in &order {
        let col = if sigma[j] > tiny && sigma[j] > 0.0 {
            a[j].iter().map(|x| x / sigma[j]).collect()
        } else {
            orthonormal_complement(&u_cols, rows)
        };
        u_cols.push(col);
    }
    let u = Matrix::from_fn(rows, n, |i, j| u_cols[j][i]);
    let vt = Matrix::from_fn(n, n, |i, j| v[order[i]][j]);
    Ok((u, order.iter().map(|&j| sigma[j]).collect(), vt))
}

/// A unit vector orthogonal to every column in `basis`.
fn orthonormal_complement(basis: &[Vec<f64>], rows: usize) -> Vec<f64> {
    for e in 0..rows {
        let mut x: Vec<f64> = (0..rows).map(|i| if i == e { 1.0 } else { 0.0 }).collect();
        for _ in 0..2 {
            for b in basis {
                let d: f64 = b.iter().zip(&x).map(|(p, q)| p * q).sum();
                x.iter_mut().zip(b).for_each(|(xi, bi)| *xi -= d * bi);
            }
        }
        let n = frobenius(&x);
        if n > 0.5 {
            return x.iter().map(|v| v / n).collect();
        }
    }
    vec![0.0; rows]
}

fn normalize_signs(svd: &mut TruncatedSvd) {
    let (rows, r, cols) = (svd.u.rows, svd.u.cols, svd.v.cols);
    for j in 0..r {
        let lead = (0..rows).map(|i| svd.u.get(i, j)).find(|x| x.abs() > 1e-12);
        if matches!(lead, Some(x) if x < 0.0) {
            for i in 0..rows {
                svd.u.data[i * r + j] = -svd.u.data[i * r + j];
            }
            for x in &mut svd.v.data[j * cols..(j + 1) * cols] {
                *x = -*x;
            }
        }
    }
}

/// Thin QR: `m = q · r` with `q` of size `rows × min(rows, cols)`.
pub fn qr_thin(m: &Matrix) -> Result<(Matrix, Matrix)> {
    if m.data.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalFailure("QR input contains non-finite values".into()));
    }
    let qr = nalgebra::linalg::QR::new(m.to_nalgebra());
    Ok((Matrix::from_nalgebra(&qr.q()), Matrix::from_nalgebra(&qr.r())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(dims: &[usize], seed: u64) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = Shape::new(dims.to_vec()).unwrap();
        let data = (0..shape.num_elements()).map(|_| rng.random_range(-1.0..1.0)).collect();
        DenseTensor::new(shape, data).unwrap()
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    /// Singular values from the eigenvalues of `mᵀm`, by cyclic Jacobi rotations.
    fn jacobi_singular_values(m: &Matrix) -> Vec<f64> {
        let n = m.cols();
        let mut a = m.transpose().matmul(m).unwrap();
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a.get(i, j).powi(2))
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a.get(p, q);
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a.get(k, p), a.get(k, q));
                        a.set(k, p, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a.get(p, k), a.get(q, k));
                        a.set(p, k, c * apk - s * aqk);
                        a.set(q, k, s * apk + c * aqk);
                    }
                }
            }
        }
        let mut s: Vec<f64> = (0..n).map(|i| a.get(i, i).max(0.0).sqrt()).collect();
        s.sort_by(|x, y| y.total_cmp(x));
        s
    }

    #[test]
    fn frobenius_norm_of_zero_and_ones() {
        let z = DenseTensor::zeros(Shape::new(vec![3, 4]).unwrap());
        assert_eq!(z.frobenius_norm(), 0.0);
        let ones = DenseTensor::new(Shape::new(vec![2, 2]).unwrap(), vec![1.0; 4]).unwrap();
        assert_eq!(ones.frobenius_norm(), 2.0);
    }

    #[test]
    fn frobenius_norm_matches_loop_oracle() {
        let t = random_tensor(&[4, 5, 6], 3);
        let mut acc = 0.0;
        for i in 0..4 {
            for j in 0..5 {
                for k in 0..6 {
                    acc += t.get(&[i, j, k]).unwrap().powi(2);
                }
            }
        }
        let oracle = acc.sqrt();
        assert!((t.frobenius_norm() - oracle).abs() <= 1e-14 * oracle);
    }

    #[test]
    fn shape_rejects_zero_dims_and_overflow() {
        assert!(Shape::new(vec![]).is_err());
        assert!(Shape::new(vec![2, 0]).is_err());
        assert!(Shape::new(vec![usize::MAX, 2]).is_err());
    }

    #[test]
    fn dense_rejects_wrong_length_and_nan() {
        let s = Shape::new(vec![2, 2]).unwrap();
        assert!(matches!(
            DenseTensor::new(s.clone(), vec![0.0; 3]),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(
            DenseTensor::new(s, vec![0.0, f64::NAN, 0.0, 0.0]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn reshape_is_relabeling() {
        let t = random_tensor(&[2, 6], 1);
        let r = t.reshape(Shape::new(vec![3, 4]).unwrap()).unwrap();
        assert_eq!(r.data(), t.data());
        let back = r.reshape(t.shape().clone()).unwrap();
        assert_eq!(back, t);
        let flat = random_tensor(&[1, 12], 2);
        let v = flat.reshape(Shape::new(vec![12]).unwrap()).unwrap();
        assert_eq!(v.data(), flat.data());
        assert_eq!(v.frobenius_norm(), flat.frobenius_norm());
        assert!(matches!(
            t.reshape(Shape::new(vec![5]).unwrap()),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn matricize_bookkeeping() {
        let t = random_tensor(&[2, 3, 4], 4);
        let m1 = t.matricize(1).unwrap();
        assert_eq!((m1.rows(), m1.cols()), (2, 12));
        let m2 = t.matricize(2).unwrap();
        assert_eq!((m2.rows(), m2.cols()), (6, 4));
        assert_eq!(m2.get(4, 3), t.get(&[1, 1, 3]).unwrap());
        assert_eq!(DenseTensor::dematricize(&m2, t.shape().clone()).unwrap(), t);
        assert!(matches!(t.matricize(0), Err(Error::SplitOutOfRange { .. })));
        assert!(matches!(t.matricize(3), Err(Error::SplitOutOfRange { .. })));
    }

    #[test]
    fn permute_moves_entries() {
        let t = random_tensor(&[2, 3, 4], 5);
        let p = t.permute(&[2, 0, 1]).unwrap();
        assert_eq!(p.shape().dims(), &[4, 2, 3]);
        for off in 0..t.data().len() {
            let idx = t.shape().unravel(off);
            assert_eq!(p.get(&[idx[2], idx[0], idx[1]]).unwrap(), t.data()[off]);
        }
        assert!(t.permute(&[0, 0, 1]).is_err());
    }

    #[test]
    fn svd_of_identity() {
        let svd = svd_truncated(&Matrix::identity(3), 3).unwrap();
        assert_eq!(svd.rank(), 3);
        for s in &svd.s {
            assert!((s - 1.0).abs() < 1e-14);
        }
        assert_eq!(svd.discarded_energy, 0.0);
    }

    #[test]
    fn svd_of_rank_one() {
        let u = [1.0, -2.0, 0.5, 3.0];
        let v = [0.3, 0.7, -1.1];
        let m = Matrix::from_fn(4, 3, |i, j| u[i] * v[j]);
        let svd = svd_truncated(&m, 1).unwrap();
        let err = Matrix::new(
            4,
            3,
            svd.reconstruct()
                .data()
                .iter()
                .zip(m.data())
                .map(|(a, b)| a - b)
                .collect(),
        )
        .unwrap()
        .frobenius_norm();
        assert!(err <= 1e-12 * m.frobenius_norm());
        // Numerical rank caps the result even with a generous max_rank.
        assert_eq!(svd_truncated(&m, 3).unwrap().rank(), 1);
    }

    #[test]
    fn svd_truncation_error_matches_jacobi_oracle() {
        let m = random_matrix(8, 6, 11);
        let sigma = jacobi_singular_values(&m);
        let expected = (sigma[3].powi(2) + sigma[4].powi(2) + sigma[5].powi(2)).sqrt();
        let svd = svd_truncated(&m, 3).unwrap();
        let recon = svd.reconstruct();
        let err = recon
            .data()
            .iter()
            .zip(m.data())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!((err - expected).abs() <= 1e-10 * expected, "{err} vs {expected}");
        assert!((svd.discarded_energy - expected).abs() <= 1e-10 * expected);
        for (a, b) in svd.s.iter().zip(&sigma) {
            assert!((a - b).abs() <= 1e-10 * sigma[0]);
        }
    }

    #[test]
    fn svd_full_rank_reproduces_input() {
        for seed in 0..10 {
            let m = random_matrix(5 + seed as usize % 3, 7, seed);
            let svd = svd_truncated(&m, 10).unwrap();
            let err: f64 = svd
                .reconstruct()
                .data()
                .iter()
                .zip(m.data())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(err <= 1e-10 * m.frobenius_norm());
        }
    }

    #[test]
    fn svd_beats_random_projections() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let m = random_matrix(9, 7, 5);
        let r = 3;
        let best = svd_truncated(&m, r).unwrap().discarded_energy;
        for _ in 0..100 {
            // Project columns onto a random r-dimensional subspace.
            let basis = Matrix::from_fn(9, r, |_, _| rng.random_range(-1.0..1.0));
            let (q, _) = qr_thin(&basis).unwrap();
            let proj = q.matmul(&q.transpose().matmul(&m).unwrap()).unwrap();
            let err = proj
                .data()
                .iter()
                .zip(m.data())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(best <= err + 1e-12);
        }
    }

    #[test]
    fn svd_signs_are_normalized() {
        let m = random_matrix(6, 4, 21);
        let svd = svd_truncated(&m, 4).unwrap();
        for j in 0..svd.rank() {
            let lead = (0..6).map(|i| svd.u.get(i, j)).find(|x| x.abs() > 1e-12).unwrap();
            assert!(lead > 0.0);
        }
    }

    #[test]
    fn svd_of_sparse_rank_one() {
        let m = Matrix::new(
            4,
            4,
            vec![1., 0., 0., 1., 0., 0., 0., 0., 0., 0., 0., 0., 1., 0., 0., 1.],
        )
        .unwrap();
        let svd = svd_truncated(&m, 4).unwrap();
        assert_eq!(svd.rank(), 1);
        assert!((svd.s[0] - 2.0).abs() <= 1e-12);
        let r = svd.reconstruct();
        assert!(r.data().iter().zip(m.data()).all(|(a, b)| (a - b).abs() <= 1e-12));
    }

    #[test]
    fn svd_of_nearly_rank_one() {
        let row = [
            -0.065126854260,
            0.129116549584,
            -0.552278912210,
            0.195863952377,
            -3.0e-15,
        ];
        let scale = [1.0, -0.8733, -0.0806, -0.9879];
        let m = Matrix::from_fn(4, 5, |i, j| scale[i] * row[j] + if i == j { 1e-15 } else { 0.0 });
        let svd = svd_truncated(&m, 4).unwrap();
        let s0: f64 = row.iter().map(|x| x * x).sum::<f64>().sqrt() * scale.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((svd.s[0] - s0).abs() <= 1e-12);
        let r = svd_truncated(&m, 1).unwrap().reconstruct();
        assert!(r.data().iter().zip(m.data()).all(|(a, b)| (a - b).abs() <= 1e-13));
    }

    #[test]
    fn svd_of_tall_and_wide_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (rows, cols) in [(40, 6), (6, 40), (7, 7)] {
            let m = Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
            let svd = svd_truncated(&m, rows.min(cols)).unwrap();
            let r = svd.reconstruct();
            assert!(r.data().iter().zip(m.data()).all(|(a, b)| (a - b).abs() <= 1e-12));
            let utu = svd.u.transpose().matmul(&svd.u).unwrap();
            let k = svd.rank();
            assert!((0..k).all(|i| (0..k).all(|j| (utu.get(i, j) - f64::from(u8::from(i == j))).abs() <= 1e-12)));
        }
    }

    #[test]
    fn svd_completes_basis_for_zero_columns() {
        let m = Matrix::new(3, 2, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let (u, s, _) = full_svd(&m).unwrap();
        assert_eq!(s, vec![1.0, 0.0]);
        let utu = u.transpose().matmul(&u).unwrap();
        assert!((utu.get(1, 1) - 1.0).abs() <= 1e-15 && utu.get(0, 1).abs() <= 1e-15);
    }

    #[test]
    fn svd_of_zero_matrix_keeps_rank_one() {
        let svd = svd_truncated(&Matrix::zeros(3, 2), 2).unwrap();
        assert_eq!(svd.rank(), 1);
        assert_eq!(svd.s[0], 0.0);
        assert!(svd.reconstruct().data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn svd_rejects_non_finite() {
        let mut m = Matrix::zeros(2, 2);
        m.set(0, 0, f64::INFINITY);
        assert!(matches!(svd_truncated(&m, 1), Err(Error::NumericalFailure(_))));
        assert!(svd_truncated(&Matrix::identity(2), 0).is_err());
    }

    #[test]
    fn qr_reconstructs() {
        let m = random_matrix(7, 3, 8);
        let (q, r) = qr_thin(&m).unwrap();
        assert_eq!((q.rows(), q.cols(), r.rows(), r.cols()), (7, 3, 3, 3));
        let back = q.matmul(&r).unwrap();
        for (a, b) in back.data().iter().zip(m.data()) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
