use rand::Rng;
use rand_distr::StandardNormal;

use super::rank::{RankCap, RankProfile};
use crate::error::{Error, Result};
use crate::tensor::{qr_thin, svd_truncated, DenseTensor, Matrix, Shape};

/// A 3-order TT core stored as `(I_k, R_{k-1}, R_k)`, row-major.
///
/// Slice `i` is the `R_{k-1} × R_k` matrix `𝒲_k(i)` and is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct TTCore3 {
    mode_size: usize,
    left_rank: usize,
    right_rank: usize,
    data: Vec<f64>,
}

impl TTCore3 {
    pub fn new(mode_size: usize, left_rank: usize, right_rank: usize, data: Vec<f64>) -> Result<Self> {
        if mode_size == 0 || left_rank == 0 || right_rank == 0 {
            return Err(Error::InvalidShape(format!(
                "core dims ({mode_size}, {left_rank}, {right_rank}) must be positive"
            )));
        }
        if data.len() != mode_size * left_rank * right_rank {
            return Err(Error::ShapeMismatch(format!(
                "core ({mode_size}, {left_rank}, {right_rank}) needs {} entries, got {}",
                mode_size * left_rank * right_rank,
                data.len()
            )));
        }
        Ok(Self {
            mode_size,
            left_rank,
            right_rank,
            data,
        })
    }

    pub fn mode_size(&self) -> usize {
        self.mode_size
    }

    pub fn left_rank(&self) -> usize {
        self.left_rank
    }

    pub fn right_rank(&self) -> usize {
        self.right_rank
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub(crate) fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// `𝒲_k(i)` as a row-major `R_{k-1} × R_k` block.
    pub fn slice(&self, i: usize) -> &[f64] {
        let n = self.left_rank * self.right_rank;
        &self.data[i * n..(i + 1) * n]
    }

    #[inline]
    fn at(&self, i: usize, a: usize, b: usize) -> f64 {
        self.data[(i * self.left_rank + a) * self.right_rank + b]
    }

    /// `(R_{k-1}·I_k) × R_k` unfolding, row index `a·I_k + i`.
    pub(crate) fn left_unfolding(&self) -> Matrix {
        let (n, rl, rr) = (self.mode_size, self.left_rank, self.right_rank);
        Matrix::from_fn(rl * n, rr, |row, b| self.at(row % n, row / n, b))
    }

    pub(crate) fn from_left_unfolding(m: &Matrix, mode_size: usize) -> Result<Self> {
        let (rl, rr) = (m.rows() / mode_size, m.cols());
        let mut data = vec![0.0; m.rows() * rr];
        for a in 0..rl {
            for i in 0..mode_size {
                for b in 0..rr {
                    data[(i * rl + a) * rr + b] = m.get(a * mode_size + i, b);
                }
            }
        }
        Self::new(mode_size, rl, rr, data)
    }

    /// `R_{k-1} × (I_k·R_k)` unfolding, column index `i·R_k + b`.
    pub(crate) fn right_unfolding(&self) -> Matrix {
        let (n, rl, rr) = (self.mode_size, self.left_rank, self.right_rank);
        Matrix::from_fn(rl, n * rr, |a, col| self.at(col / rr, a, col % rr))
    }

    pub(crate) fn from_right_unfolding(m: &Matrix, mode_size: usize) -> Result<Self> {
        let (rl, rr) = (m.rows(), m.cols() / mode_size);
        let mut data = vec![0.0; rl * m.cols()];
        for a in 0..rl {
            for i in 0..mode_size {
                for b in 0..rr {
                    data[(i * rl + a) * rr + b] = m.get(a, i * rr + b);
                }
            }
        }
        Self::new(mode_size, rl, rr, data)
    }

    /// `M · 𝒲_k(i)` for every slice; `m` is `p × R_{k-1}`.
    pub(crate) fn mul_left(&self, m: &Matrix) -> TTCore3 {
        let (n, rl, rr, p) = (self.mode_size, self.left_rank, self.right_rank, m.rows());
        let mut data = vec![0.0; n * p * rr];
        for i in 0..n {
            for r in 0..p {
                let out = &mut data[(i * p + r) * rr..(i * p + r + 1) * rr];
                for a in 0..rl {
                    let c = m.get(r, a);
                    for (o, &x) in out.iter_mut().zip(&self.data[(i * rl + a) * rr..(i * rl + a + 1) * rr]) {
                        *o += c * x;
                    }
                }
            }
        }
        TTCore3::new(n, p, rr, data).expect("consistent dims")
    }

    /// `𝒲_k(i) · M` for every slice; `m` is `R_k × q`.
    pub(crate) fn mul_right(&self, m: &Matrix) -> TTCore3 {
        let (n, rl, rr, q) = (self.mode_size, self.left_rank, self.right_rank, m.cols());
        let mut data = vec![0.0; n * rl * q];
        for ia in 0..n * rl {
            let src = &self.data[ia * rr..(ia + 1) * rr];
            let out = &mut data[ia * q..(ia + 1) * q];
            for (b, &x) in src.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                for (o, c) in out.iter_mut().zip(&m.data()[b * q..(b + 1) * q]) {
                    *o += x * c;
                }
            }
        }
        TTCore3::new(n, rl, q, data).expect("consistent dims")
    }
}

/// A K-order tensor in TT format: `𝒲(i_1..i_K) = 𝒲_1(i_1) ⋯ 𝒲_K(i_K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TTVector {
    shape: Shape,
    cores: Vec<TTCore3>,
}

impl TTVector {
    pub fn new(cores: Vec<TTCore3>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::InvalidShape("a TT tensor needs at least one core".into()));
        }
        if cores[0].left_rank != 1 || cores[cores.len() - 1].right_rank != 1 {
            return Err(Error::InvalidRanks("boundary ranks must be 1".into()));
        }
        for (k, pair) in cores.windows(2).enumerate() {
            if pair[0].right_rank != pair[1].left_rank {
                return Err(Error::InvalidRanks(format!(
                    "core {k} has right rank {} but core {} has left rank {}",
                    pair[0].right_rank,
                    k + 1,
                    pair[1].left_rank
                )));
            }
        }
        if cores.iter().flat_map(|c| &c.data).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("TT core data".into()));
        }
        let shape = Shape::new(cores.iter().map(|c| c.mode_size).collect())?;
        Ok(Self { shape, cores })
    }

    /// Random cores with standard-normal entries.
    pub fn random<R: Rng + ?Sized>(shape: &Shape, ranks: &RankProfile, rng: &mut R) -> Result<Self> {
        if ranks.order() != shape.order() {
            return Err(Error::InvalidRanks(format!(
                "rank profile {ranks} does not match order {}",
                shape.order()
            )));
        }
        let cores = shape
            .dims()
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                let (rl, rr) = (ranks.ranks()[k], ranks.ranks()[k + 1]);
                let data = (0..n * rl * rr).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                TTCore3::new(n, rl, rr, data)
            })
            .collect::<Result<_>>()?;
        Self::new(cores)
    }

    /// All-zero tensor with every rank 1.
    pub fn zeros(shape: &Shape) -> Self {
        let cores = shape
            .dims()
            .iter()
            .map(|&n| TTCore3::new(n, 1, 1, vec![0.0; n]).expect("positive dims"))
            .collect();
        Self::new(cores).expect("valid zero train")
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn cores(&self) -> &[TTCore3] {
        &self.cores
    }

    pub fn cores_mut(&mut self) -> &mut [TTCore3] {
        &mut self.cores
    }

    pub(crate) fn into_cores(self) -> Vec<TTCore3> {
        self.cores
    }

    pub fn ranks(&self) -> RankProfile {
        let mut r = vec![1];
        r.extend(self.cores.iter().map(|c| c.right_rank));
        RankProfile::new(r).expect("validated at construction")
    }

    /// Total number of stored core entries.
    pub fn param_count(&self) -> usize {
        self.cores.iter().map(|c| c.data.len()).sum()
    }

    /// Evaluates one entry as the chained product of core slices.
    pub fn element(&self, index: &[usize]) -> Result<f64> {
        self.shape.offset(index)?;
        let mut row = self.cores[0].slice(index[0]).to_vec();
        for (core, &i) in self.cores.iter().zip(index).skip(1) {
            let slice = core.slice(i);
            let rr = core.right_rank;
            let mut next = vec![0.0; rr];
            for (a, &x) in row.iter().enumerate() {
                for (n, &w) in next.iter_mut().zip(&slice[a * rr..(a + 1) * rr]) {
                    *n += x * w;
                }
            }
            row = next;
        }
        Ok(row[0])
    }

    /// Dense reconstruction. Memory is `∏ I_k`; intended for desk-scale sizes.
    pub fn full(&self) -> DenseTensor {
        // acc: (I_1⋯I_k) × R_k, row-major over the visited indices
        let first = &self.cores[0];
        let mut acc = first.data.clone();
        let mut rows = first.mode_size;
        let mut rank = first.right_rank;
        for core in &self.cores[1..] {
            let (n, rr) = (core.mode_size, core.right_rank);
            let mut next = vec![0.0; rows * n * rr];
            for p in 0..rows {
                let lhs = &acc[p * rank..(p + 1) * rank];
                for i in 0..n {
                    let out = &mut next[(p * n + i) * rr..(p * n + i + 1) * rr];
                    let slice = core.slice(i);
                    for (a, &x) in lhs.iter().enumerate() {
                        if x == 0.0 {
                            continue;
                        }
                        for (o, &w) in out.iter_mut().zip(&slice[a * rr..(a + 1) * rr]) {
                            *o += x * w;
                        }
                    }
                }
            }
            acc = next;
            rows *= n;
            rank = rr;
        }
        DenseTensor::new(self.shape.clone(), acc).expect("finite cores give finite entries")
    }

    /// Left-to-right sequential truncated SVD (TT-SVD).
    pub fn from_dense(t: &DenseTensor, cap: &RankCap) -> Result<Self> {
        Self::decompose(t, cap).map(|(tt, _)| tt)
    }

    /// TT-SVD that also returns the discarded energy of every truncation step.
    ///
    /// The reconstruction error equals the root-sum-square of those energies.
    pub fn decompose(t: &DenseTensor, cap: &RankCap) -> Result<(Self, Vec<f64>)> {
        let dims = t.shape().dims();
        let order = dims.len();
        cap.validate(order)?;
        let mut cores = Vec::with_capacity(order);
        let mut energies = Vec::with_capacity(order.saturating_sub(1));
        let mut rank = 1;
        let mut rest: usize = dims.iter().product();
        let mut carry = Matrix::new(1, rest, t.data().to_vec())?;
        for (k, &n) in dims.iter().enumerate().take(order - 1) {
            rest /= n;
            let unfolding = Matrix::new(rank * n, rest, carry.into_data())?;
            let svd = svd_truncated(&unfolding, cap.cap_at(k + 1, order)?)?;
            cores.push(TTCore3::from_left_unfolding(&svd.u, n)?);
            energies.push(svd.discarded_energy);
            rank = svd.rank();
            carry = svd.sv();
        }
        let last = Matrix::new(rank * dims[order - 1], 1, carry.into_data())?;
        cores.push(TTCore3::from_left_unfolding(&last, dims[order - 1])?);
        Ok((Self::new(cores)?, energies))
    }

    /// Sum in TT format by block-diagonal core concatenation; ranks add.
    pub fn add(&self, other: &TTVector) -> Result<TTVector> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "cannot add {:?} and {:?}",
                self.shape.dims(),
                other.shape.dims()
            )));
        }
        let order = self.order();
        if order == 1 {
            let data = self.cores[0]
                .data
                .iter()
                .zip(&other.cores[0].data)
                .map(|(a, b)| a + b)
                .collect();
            return Self::new(vec![TTCore3::new(self.shape.dims()[0], 1, 1, data)?]);
        }
        let cores = self
            .cores
            .iter()
            .zip(&other.cores)
            .enumerate()
            .map(|(k, (a, b))| {
                let n = a.mode_size;
                let first = k == 0;
                let last = k == order - 1;
                let rl = if first { 1 } else { a.left_rank + b.left_rank };
                let rr = if last { 1 } else { a.right_rank + b.right_rank };
                // offsets of b's block inside the result
                let (ol, or) = (if first { 0 } else { a.left_rank }, if last { 0 } else { a.right_rank });
                let mut data = vec![0.0; n * rl * rr];
                for i in 0..n {
                    for x in 0..a.left_rank {
                        for y in 0..a.right_rank {
                            data[(i * rl + x) * rr + y] = a.at(i, x, y);
                        }
                    }
                    for x in 0..b.left_rank {
                        for y in 0..b.right_rank {
                            data[(i * rl + x + ol) * rr + y + or] = b.at(i, x, y);
                        }
                    }
                }
                TTCore3::new(n, rl, rr, data)
            })
            .collect::<Result<_>>()?;
        Self::new(cores)
    }

    /// Scales the first core only.
    pub fn scale(&self, c: f64) -> TTVector {
        let mut out = self.clone();
        out.cores[0].data.iter_mut().for_each(|x| *x *= c);
        out
    }

    /// `⟨self, other⟩` by left-to-right contraction of the rank interfaces.
    pub fn dot(&self, other: &TTVector) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "cannot contract {:?} with {:?}",
                self.shape.dims(),
                other.shape.dims()
            )));
        }
        // gram: R^a_k × R^b_k
        let mut gram = vec![1.0];
        for (a, b) in self.cores.iter().zip(&other.cores) {
            let (ra, rb) = (a.right_rank, b.right_rank);
            let mut next = vec![0.0; ra * rb];
            for i in 0..a.mode_size {
                let (sa, sb) = (a.slice(i), b.slice(i));
                // tmp = gramᵀ·A(i) : R^b_{k-1} × R^a_k
                let mut tmp = vec![0.0; b.left_rank * ra];
                for x in 0..a.left_rank {
                    for y in 0..b.left_rank {
                        let g = gram[x * b.left_rank + y];
                        if g == 0.0 {
                            continue;
                        }
                        for (t, &w) in tmp[y * ra..(y + 1) * ra].iter_mut().zip(&sa[x * ra..(x + 1) * ra]) {
                            *t += g * w;
                        }
                    }
                }
                for y in 0..b.left_rank {
                    for p in 0..ra {
                        let t = tmp[y * ra + p];
                        if t == 0.0 {
                            continue;
                        }
                        for (n, &w) in next[p * rb..(p + 1) * rb].iter_mut().zip(&sb[y * rb..(y + 1) * rb]) {
                            *n += t * w;
                        }
                    }
                }
            }
            gram = next;
        }
        Ok(gram[0])
    }

    /// Frobenius norm without densifying.
    ///
    /// Uses a right-to-left QR sweep so the result is accurate even when the
    /// train represents a difference of nearly equal tensors.
    pub fn norm(&self) -> f64 {
        match self.right_orthogonalize() {
            Ok(tt) => crate::tensor::frobenius(&tt.cores[0].data),
            // QR only fails on non-finite data, which construction rules out.
            Err(_) => self.dot(self).unwrap_or(0.0).max(0.0).sqrt(),
        }
    }

    /// Makes cores `2..K` right-orthonormal; the first core then carries the norm.
    pub fn right_orthogonalize(&self) -> Result<TTVector> {
        let mut cores = self.cores.clone();
        for k in (1..cores.len()).rev() {
            let n = cores[k].mode_size;
            let (q, r) = qr_thin(&cores[k].right_unfolding().transpose())?;
            cores[k] = TTCore3::from_right_unfolding(&q.transpose(), n)?;
            cores[k - 1] = cores[k - 1].mul_right(&r.transpose());
        }
        Self::new(cores)
    }

    /// Makes cores `1..K-1` left-orthonormal; the last core then carries the norm.
    pub fn left_orthogonalize(&self) -> Result<TTVector> {
        let mut cores = self.cores.clone();
        for k in 0..cores.len() - 1 {
            let n = cores[k].mode_size;
            let (q, r) = qr_thin(&cores[k].left_unfolding())?;
            cores[k] = TTCore3::from_left_unfolding(&q, n)?;
            cores[k + 1] = cores[k + 1].mul_left(&r);
        }
        Self::new(cores)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shape(d: &[usize]) -> Shape {
        Shape::new(d.to_vec()).unwrap()
    }

    fn ranks(r: &[usize]) -> RankProfile {
        RankProfile::new(r.to_vec()).unwrap()
    }

    /// Cores with 𝒲(i₁,i₂,i₃) = i₁ + i₂ + i₃.
    fn index_sum_train(n: usize) -> TTVector {
        let c1: Vec<f64> = (0..n).flat_map(|i| [i as f64, 1.0]).collect();
        let c2: Vec<f64> = (0..n).flat_map(|i| [1.0, 0.0, i as f64, 1.0]).collect();
        let c3: Vec<f64> = (0..n).flat_map(|i| [1.0, i as f64]).collect();
        TTVector::new(vec![
            TTCore3::new(n, 1, 2, c1).unwrap(),
            TTCore3::new(n, 2, 2, c2).unwrap(),
            TTCore3::new(n, 2, 1, c3).unwrap(),
        ])
        .unwrap()
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        diff / crate::tensor::frobenius(b).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn index_sum_elements() {
        let w = index_sum_train(4);
        assert_eq!(w.element(&[1, 2, 3]).unwrap(), 6.0);
        assert_eq!(w.element(&[0, 0, 0]).unwrap(), 0.0);
        assert!(matches!(w.element(&[4, 0, 0]), Err(Error::IndexOutOfRange { .. })));
        assert!(w.element(&[0, 0]).is_err());
    }

    #[test]
    fn index_sum_full() {
        let full = index_sum_train(4).full();
        for off in 0..64 {
            let idx = full.shape().unravel(off);
            assert_eq!(full.data()[off], (idx[0] + idx[1] + idx[2]) as f64);
        }
    }

    #[test]
    fn index_sum_norm_by_enumeration() {
        let w = index_sum_train(2);
        assert!((w.norm() - 24f64.sqrt()).abs() < 1e-14);
        assert!((w.dot(&w).unwrap() - 24.0).abs() < 1e-12);
    }

    #[test]
    fn element_matches_full_on_random_trains() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = TTVector::random(&shape(&[3, 4, 2, 3]), &ranks(&[1, 2, 3, 2, 1]), &mut rng).unwrap();
        let full = w.full();
        for off in 0..full.data().len() {
            let idx = full.shape().unravel(off);
            let e = w.element(&idx).unwrap();
            let f = full.data()[off];
            assert!((e - f).abs() <= 1e-12 * f.abs().max(1e-12));
        }
    }

    #[test]
    fn single_core_full_is_the_core() {
        let core = TTCore3::new(5, 1, 1, vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let w = TTVector::new(vec![core]).unwrap();
        assert_eq!(w.full().data(), &[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(w.ranks().ranks(), &[1, 1]);
    }

    #[test]
    fn construction_checks_chain() {
        let a = TTCore3::new(2, 1, 2, vec![0.0; 4]).unwrap();
        let b = TTCore3::new(2, 3, 1, vec![0.0; 6]).unwrap();
        assert!(matches!(TTVector::new(vec![a.clone(), b]), Err(Error::InvalidRanks(_))));
        assert!(TTVector::new(vec![a]).is_err());
        assert!(TTCore3::new(2, 1, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn tt_svd_recovers_index_sum() {
        let t = index_sum_train(4).full();
        let tt = TTVector::from_dense(&t, &RankCap::Profile(ranks(&[1, 2, 2, 1]))).unwrap();
        assert_eq!(tt.ranks().ranks(), &[1, 2, 2, 1]);
        assert!(rel_err(tt.full().data(), t.data()) <= 1e-10);
    }

    #[test]
    fn tt_svd_separable_is_rank_one() {
        let (a, b, c) = ([1.0, -2.0, 0.5], [0.3, 1.2], [2.0, -1.0, 0.7, 0.1]);
        let t = DenseTensor::from_fn(shape(&[3, 2, 4]), |i| a[i[0]] * b[i[1]] * c[i[2]]).unwrap();
        let tt = TTVector::from_dense(&t, &RankCap::Profile(ranks(&[1, 1, 1, 1]))).unwrap();
        assert!(rel_err(tt.full().data(), t.data()) <= 1e-10);
    }

    #[test]
    fn tt_svd_full_ranks_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let data = (0..60).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let t = DenseTensor::new(shape(&[3, 4, 5]), data).unwrap();
        let tt = TTVector::from_dense(&t, &RankCap::Max(100)).unwrap();
        assert!(rel_err(tt.full().data(), t.data()) <= 1e-10);
    }

    #[test]
    fn tt_svd_error_equals_discarded_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data = (0..64).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let t = DenseTensor::new(shape(&[4, 4, 4]), data).unwrap();
        let (tt, energies) = TTVector::decompose(&t, &RankCap::Profile(ranks(&[1, 2, 2, 1]))).unwrap();
        let predicted = energies.iter().map(|e| e * e).sum::<f64>().sqrt();
        let actual = rel_err(tt.full().data(), t.data()) * t.frobenius_norm();
        assert!((predicted - actual).abs() <= 1e-10 * actual);
    }

    #[test]
    fn add_doubles_and_cancels() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = TTVector::random(&shape(&[3, 4, 3]), &ranks(&[1, 2, 2, 1]), &mut rng).unwrap();
        let twice = a.add(&a).unwrap();
        let expected: Vec<f64> = a.full().data().iter().map(|x| 2.0 * x).collect();
        assert!(rel_err(twice.full().data(), &expected) <= 1e-12);
        let zero = a.add(&a.scale(-1.0)).unwrap();
        assert!(max_abs_diff(zero.full().data(), &vec![0.0; 36]) <= 1e-10 * a.norm());
    }

    #[test]
    fn add_concatenates_ranks() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = shape(&[3, 4, 3]);
        let a = TTVector::random(&s, &ranks(&[1, 2, 2, 1]), &mut rng).unwrap();
        let b = TTVector::random(&s, &ranks(&[1, 3, 1, 1]), &mut rng).unwrap();
        let c = a.add(&b).unwrap();
        assert_eq!(c.ranks().ranks(), &[1, 5, 3, 1]);
        let expected: Vec<f64> = a
            .full()
            .data()
            .iter()
            .zip(b.full().data())
            .map(|(x, y)| x + y)
            .collect();
        assert!(rel_err(c.full().data(), &expected) <= 1e-12);
        let other = TTVector::random(&shape(&[3, 4, 2]), &ranks(&[1, 1, 1, 1]), &mut rng).unwrap();
        assert!(matches!(a.add(&other), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn add_single_core() {
        let a = TTVector::new(vec![TTCore3::new(3, 1, 1, vec![1.0, 2.0, 3.0]).unwrap()]).unwrap();
        let b = a.scale(2.0);
        assert_eq!(a.add(&b).unwrap().full().data(), &[3.0, 6.0, 9.0]);
    }

    #[test]
    fn scale_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = TTVector::random(&shape(&[2, 3, 4]), &ranks(&[1, 2, 3, 1]), &mut rng).unwrap();
        assert_eq!(a.scale(1.0), a);
        assert!(a.scale(0.0).full().data().iter().all(|&x| x == 0.0));
        let expected: Vec<f64> = a.full().data().iter().map(|x| -2.5 * x).collect();
        assert!(rel_err(a.scale(-2.5).full().data(), &expected) <= 1e-12);
    }

    #[test]
    fn norm_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = shape(&[3, 5, 4, 2]);
        assert_eq!(TTVector::zeros(&s).norm(), 0.0);
        for _ in 0..10 {
            let a = TTVector::random(&s, &ranks(&[1, 3, 4, 2, 1]), &mut rng).unwrap();
            let dense = a.full().frobenius_norm();
            assert!((a.norm() - dense).abs() <= 1e-10 * dense);
            assert!((a.dot(&a).unwrap().sqrt() - dense).abs() <= 1e-10 * dense);
        }
    }

    #[test]
    fn orthogonalization_preserves_tensor() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = TTVector::random(&shape(&[3, 4, 5]), &ranks(&[1, 3, 4, 1]), &mut rng).unwrap();
        let full = a.full();
        for b in [a.right_orthogonalize().unwrap(), a.left_orthogonalize().unwrap()] {
            assert!(rel_err(b.full().data(), full.data()) <= 1e-12);
        }
        let right = a.right_orthogonalize().unwrap();
        let gram = right.cores()[2]
            .right_unfolding()
            .matmul(&right.cores()[2].right_unfolding().transpose())
            .unwrap();
        for i in 0..gram.rows() {
            for j in 0..gram.cols() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((gram.get(i, j) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn param_count_sums_cores() {
        let w = index_sum_train(4);
        assert_eq!(w.param_count(), 8 + 16 + 8);
    }
}
