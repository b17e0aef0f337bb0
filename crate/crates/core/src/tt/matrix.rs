use nalgebra::DMatrix;
use rand::Rng;

use super::rank::{ModeFactorization, RankCap, RankProfile};
use super::vector::{TTCore3, TTVector};
use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, Matrix, Shape};

/// A 4-order operator core stored as `(J_k, I_k, R_{k-1}, R_k)`, row-major.
///
/// Fusing `(j_k, i_k)` into one index `j_k·I_k + i_k` turns it into a
/// [`TTCore3`] over a mode of size `J_k·I_k` without moving any data.
#[derive(Debug, Clone, PartialEq)]
pub struct TTCore4 {
    out_mode: usize,
    in_mode: usize,
    left_rank: usize,
    right_rank: usize,
    data: Vec<f64>,
}

impl TTCore4 {
    pub fn new(out_mode: usize, in_mode: usize, left_rank: usize, right_rank: usize, data: Vec<f64>) -> Result<Self> {
        if out_mode == 0 || in_mode == 0 || left_rank == 0 || right_rank == 0 {
            return Err(Error::InvalidShape(format!(
                "core dims ({out_mode}, {in_mode}, {left_rank}, {right_rank}) must be positive"
            )));
        }
        let n = out_mode * in_mode * left_rank * right_rank;
        if data.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "core ({out_mode}, {in_mode}, {left_rank}, {right_rank}) needs {n} entries, got {}",
                data.len()
            )));
        }
        Ok(Self {
            out_mode,
            in_mode,
            left_rank,
            right_rank,
            data,
        })
    }

    pub fn out_mode(&self) -> usize {
        self.out_mode
    }

    pub fn in_mode(&self) -> usize {
        self.in_mode
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
}

/// TT representation of a linear map `ℝ^{∏I_k} → ℝ^{∏J_k}`.
///
/// Entry `W[(j_1..j_K), (i_1..i_K)] = ∏_k 𝒲_k(j_k, i_k)`; rows and columns of
/// the implied dense matrix are row-major over the output and input
/// multi-indices respectively.
#[derive(Debug, Clone, PartialEq)]
pub struct TTMatrix {
    in_shape: Shape,
    out_shape: Shape,
    cores: Vec<TTCore4>,
}

impl TTMatrix {
    pub fn new(cores: Vec<TTCore4>) -> Result<Self> {
        // chain and boundary checks are shared with the fused view
        TTVector::new(cores.iter().map(fuse_core).collect::<Result<_>>()?)?;
        let in_shape = Shape::new(cores.iter().map(|c| c.in_mode).collect())?;
        let out_shape = Shape::new(cores.iter().map(|c| c.out_mode).collect())?;
        Ok(Self {
            in_shape,
            out_shape,
            cores,
        })
    }

    /// Random cores with standard-normal entries.
    pub fn random<R: Rng + ?Sized>(
        in_f: &ModeFactorization,
        out_f: &ModeFactorization,
        ranks: &RankProfile,
        rng: &mut R,
    ) -> Result<Self> {
        check_factor_orders(in_f, out_f)?;
        let fused = Shape::new(in_f.factors().iter().zip(out_f.factors()).map(|(i, j)| i * j).collect())?;
        let tt = TTVector::random(&fused, ranks, rng)?;
        Self::from_fused(tt, in_f.factors(), out_f.factors())
    }

    /// Seeded uniform init in `±sqrt(6 / (fan_in + fan_out))` per core slice,
    /// where a slice `𝒲_k(j, i)` has fan-in `R_{k-1}` and fan-out `R_k`.
    pub fn glorot<R: Rng + ?Sized>(
        in_f: &ModeFactorization,
        out_f: &ModeFactorization,
        ranks: &RankProfile,
        rng: &mut R,
    ) -> Result<Self> {
        check_factor_orders(in_f, out_f)?;
        if ranks.order() != in_f.len() {
            return Err(Error::InvalidRanks(format!(
                "rank profile {ranks} does not match {} modes",
                in_f.len()
            )));
        }
        let cores = (0..in_f.len())
            .map(|k| {
                let (j, i) = (out_f.factors()[k], in_f.factors()[k]);
                let (rl, rr) = (ranks.ranks()[k], ranks.ranks()[k + 1]);
                let bound = (6.0 / (rl + rr) as f64).sqrt();
                let data = (0..j * i * rl * rr).map(|_| rng.random_range(-bound..bound)).collect();
                TTCore4::new(j, i, rl, rr, data)
            })
            .collect::<Result<_>>()?;
        Self::new(cores)
    }

    pub fn in_shape(&self) -> &Shape {
        &self.in_shape
    }

    pub fn out_shape(&self) -> &Shape {
        &self.out_shape
    }

    pub fn in_dim(&self) -> usize {
        self.in_shape.num_elements()
    }

    pub fn out_dim(&self) -> usize {
        self.out_shape.num_elements()
    }

    pub fn cores(&self) -> &[TTCore4] {
        &self.cores
    }

    pub fn cores_mut(&mut self) -> &mut [TTCore4] {
        &mut self.cores
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn ranks(&self) -> RankProfile {
        let mut r = vec![1];
        r.extend(self.cores.iter().map(|c| c.right_rank));
        RankProfile::new(r).expect("validated at construction")
    }

    /// `Σ_k J_k·I_k·R_{k-1}·R_k`
    pub fn param_count(&self) -> usize {
        self.cores.iter().map(|c| c.data.len()).sum()
    }

    /// Fuses each `(j_k, i_k)` pair into one mode of size `J_k·I_k`.
    pub fn to_fused(&self) -> TTVector {
        TTVector::new(self.cores.iter().map(|c| fuse_core(c).expect("valid core")).collect())
            .expect("valid operator train")
    }

    /// Splits the fused modes of `tt` back into `(J_k, I_k)` pairs.
    pub fn from_fused(tt: TTVector, in_modes: &[usize], out_modes: &[usize]) -> Result<Self> {
        if in_modes.len() != tt.order() || out_modes.len() != tt.order() {
            return Err(Error::ShapeMismatch(format!(
                "{} fused modes but {} input and {} output factors",
                tt.order(),
                in_modes.len(),
                out_modes.len()
            )));
        }
        let cores = tt
            .into_cores()
            .into_iter()
            .zip(in_modes.iter().zip(out_modes))
            .map(|(core, (&i, &j))| {
                if core.mode_size() != i * j {
                    return Err(Error::ShapeMismatch(format!(
                        "fused mode {} is not {j}x{i}",
                        core.mode_size()
                    )));
                }
                let (rl, rr) = (core.left_rank(), core.right_rank());
                TTCore4::new(j, i, rl, rr, core.into_data())
            })
            .collect::<Result<_>>()?;
        Self::new(cores)
    }

    /// TT decomposition of a dense `∏J × ∏I` matrix.
    ///
    /// The matrix is viewed as `(J_1..J_K, I_1..I_K)`, interleaved into
    /// `(J_1, I_1, J_2, I_2, ...)`, fused pairwise and passed to TT-SVD.
    pub fn from_dense(w: &Matrix, in_f: &ModeFactorization, out_f: &ModeFactorization, cap: &RankCap) -> Result<Self> {
        Self::decompose(w, in_f, out_f, cap).map(|(m, _)| m)
    }

    /// [`TTMatrix::from_dense`] plus the per-step discarded energies.
    pub fn decompose(
        w: &Matrix,
        in_f: &ModeFactorization,
        out_f: &ModeFactorization,
        cap: &RankCap,
    ) -> Result<(Self, Vec<f64>)> {
        check_factor_orders(in_f, out_f)?;
        if w.rows() != out_f.product() || w.cols() != in_f.product() {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix does not match factorizations {:?} (out) / {:?} (in)",
                w.rows(),
                w.cols(),
                out_f.factors(),
                in_f.factors()
            )));
        }
        let k = in_f.len();
        let mut dims = out_f.factors().to_vec();
        dims.extend_from_slice(in_f.factors());
        let t = DenseTensor::new(Shape::new(dims)?, w.data().to_vec())?;
        let perm: Vec<usize> = (0..k).flat_map(|m| [m, k + m]).collect();
        let paired = t.permute(&perm)?;
        let fused_shape = Shape::new(in_f.factors().iter().zip(out_f.factors()).map(|(i, j)| i * j).collect())?;
        let (tt, energies) = TTVector::decompose(&paired.reshape(fused_shape)?, cap)?;
        Ok((Self::from_fused(tt, in_f.factors(), out_f.factors())?, energies))
    }

    /// Dense `∏J × ∏I` matrix. Memory is `∏I·∏J`; desk-scale only.
    pub fn full(&self) -> Matrix {
        let k = self.order();
        let fused = self.to_fused().full();
        let mut dims = Vec::with_capacity(2 * k);
        for c in &self.cores {
            dims.push(c.out_mode);
            dims.push(c.in_mode);
        }
        let paired = fused
            .reshape(Shape::new(dims).expect("positive dims"))
            .expect("same size");
        let perm: Vec<usize> = (0..k).map(|m| 2 * m).chain((0..k).map(|m| 2 * m + 1)).collect();
        let split = paired.permute(&perm).expect("valid permutation");
        Matrix::new(self.out_dim(), self.in_dim(), split.into_data()).expect("consistent size")
    }

    /// `y = W·x` by mode-wise contraction; the dense matrix is never formed.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.apply_batch(x, 1)
    }

    /// Applies the operator to `batch` row-major input vectors.
    pub fn apply_batch(&self, x: &[f64], batch: usize) -> Result<Vec<f64>> {
        Ok(self.contract_forward(x, batch)?.pop().expect("at least one stage"))
    }

    /// Runs the contraction and keeps every intermediate stage.
    ///
    /// Stage `k` (0-based, `k ≤ K`) is a row-major array of shape
    /// `(B·J_1⋯J_k, R_k, I_{k+1}⋯I_K)`; stage 0 is the input and stage `K` is the
    /// `(B, ∏J)` output.
    pub(crate) fn contract_forward(&self, x: &[f64], batch: usize) -> Result<Vec<Vec<f64>>> {
        if batch == 0 || x.len() != batch * self.in_dim() {
            return Err(Error::ShapeMismatch(format!(
                "expected {batch} input vectors of length {}, got {} values",
                self.in_dim(),
                x.len()
            )));
        }
        let mut stages = Vec::with_capacity(self.order() + 1);
        stages.push(x.to_vec());
        let mut prefix = batch;
        let mut suffix = self.in_dim();
        for core in &self.cores {
            suffix /= core.in_mode;
            let z = stages.last().expect("non-empty");
            let y = core.weight_matrix() * gather_input(core, z, prefix, suffix);
            stages.push(scatter_output(core, &y, prefix, suffix));
            prefix *= core.out_mode;
        }
        Ok(stages)
    }

    /// Reverse-mode pass through [`TTMatrix::contract_forward`].
    ///
    /// Returns the gradient for every core (same layout as the core data) and
    /// the gradient with respect to the input batch.
    pub(crate) fn contract_backward(
        &self,
        stages: &[Vec<f64>],
        grad_out: &[f64],
        batch: usize,
    ) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut prefixes = vec![batch];
        for c in &self.cores {
            prefixes.push(prefixes.last().unwrap() * c.out_mode);
        }
        let mut suffixes = vec![self.in_dim()];
        for c in &self.cores {
            suffixes.push(suffixes.last().unwrap() / c.in_mode);
        }
        let mut core_grads = vec![Vec::new(); self.order()];
        let mut grad = grad_out.to_vec();
        for k in (0..self.order()).rev() {
            let core = &self.cores[k];
            let (prefix, q) = (prefixes[k], suffixes[k + 1]);
            let g = gather_output(core, &grad, prefix, q);
            let z = gather_input(core, &stages[k], prefix, q);
            core_grads[k] = core.unpack_weight_matrix(&(&g * z.transpose()));
            grad = scatter_input(core, &(core.weight_matrix().transpose() * g), prefix, q);
        }
        (core_grads, grad)
    }
}

// A contraction step maps a stage laid out as (p, a, i, s) to one laid out as
// (p, j, b, s). As a product it is W[(j,b), (a,i)] · Z[(a,i), (p,s)].

impl TTCore4 {
    fn weight_matrix(&self) -> DMatrix<f64> {
        let (inn, rl, rr) = (self.in_mode, self.left_rank, self.right_rank);
        DMatrix::from_fn(self.out_mode * rr, rl * inn, |row, col| {
            let (j, b, a, i) = (row / rr, row % rr, col / inn, col % inn);
            self.data[((j * inn + i) * rl + a) * rr + b]
        })
    }

    fn unpack_weight_matrix(&self, m: &DMatrix<f64>) -> Vec<f64> {
        let (inn, rl, rr) = (self.in_mode, self.left_rank, self.right_rank);
        let mut out = vec![0.0; self.data.len()];
        for (idx, v) in out.iter_mut().enumerate() {
            let (b, a, i, j) = (idx % rr, idx / rr % rl, idx / (rr * rl) % inn, idx / (rr * rl * inn));
            *v = m[(j * rr + b, a * inn + i)];
        }
        out
    }
}

fn gather_input(core: &TTCore4, z: &[f64], prefix: usize, q: usize) -> DMatrix<f64> {
    let (inn, rl) = (core.in_mode, core.left_rank);
    DMatrix::from_fn(rl * inn, prefix * q, |row, col| {
        z[((col / q * rl + row / inn) * inn + row % inn) * q + col % q]
    })
}

fn scatter_input(core: &TTCore4, m: &DMatrix<f64>, prefix: usize, q: usize) -> Vec<f64> {
    let (inn, rl) = (core.in_mode, core.left_rank);
    let mut z = vec![0.0; prefix * rl * inn * q];
    for (idx, v) in z.iter_mut().enumerate() {
        let (s, i, a, p) = (idx % q, idx / q % inn, idx / (q * inn) % rl, idx / (q * inn * rl));
        *v = m[(a * inn + i, p * q + s)];
    }
    z
}

fn gather_output(core: &TTCore4, y: &[f64], prefix: usize, q: usize) -> DMatrix<f64> {
    let (jn, rr) = (core.out_mode, core.right_rank);
    DMatrix::from_fn(jn * rr, prefix * q, |row, col| {
        y[((col / q * jn + row / rr) * rr + row % rr) * q + col % q]
    })
}

fn scatter_output(core: &TTCore4, m: &DMatrix<f64>, prefix: usize, q: usize) -> Vec<f64> {
    let (jn, rr) = (core.out_mode, core.right_rank);
    let mut y = vec![0.0; prefix * jn * rr * q];
    for (idx, v) in y.iter_mut().enumerate() {
        let (s, b, j, p) = (idx % q, idx / q % rr, idx / (q * rr) % jn, idx / (q * rr * jn));
        *v = m[(j * rr + b, p * q + s)];
    }
    y
}

fn check_factor_orders(in_f: &ModeFactorization, out_f: &ModeFactorization) -> Result<()> {
    if in_f.len() != out_f.len() {
        return Err(Error::ShapeMismatch(format!(
            "input factorization has {} modes, output has {}",
            in_f.len(),
            out_f.len()
        )));
    }
    Ok(())
}

fn fuse_core(c: &TTCore4) -> Result<TTCore3> {
    TTCore3::new(c.out_mode * c.in_mode, c.left_rank, c.right_rank, c.data.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn f(v: &[usize]) -> ModeFactorization {
        ModeFactorization::new(v.to_vec()).unwrap()
    }

    fn rel(a: &[f64], b: &[f64]) -> f64 {
        let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        d / crate::tensor::frobenius(b).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn identity_operator() {
        let id = Matrix::identity(4);
        let tt = TTMatrix::from_dense(&id, &f(&[2, 2]), &f(&[2, 2]), &RankCap::Max(4)).unwrap();
        assert_eq!(tt.ranks().ranks(), &[1, 1, 1]);
        let x = [0.3, -1.0, 2.5, 7.0];
        let y = tt.matvec(&x).unwrap();
        for (a, b) in y.iter().zip(&x) {
            assert!((a - b).abs() <= 1e-10);
        }
        assert!(tt.matvec(&[0.0; 4]).unwrap().iter().all(|&v| v == 0.0));
        assert!(matches!(tt.matvec(&[0.0; 3]), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn rank_one_operator_is_exact() {
        // Kronecker product of two 4x4 matrices has TT-ranks {1, 1, 1}
        let a = Matrix::from_fn(4, 4, |i, j| ((i * 4 + j) as f64 * 0.37).sin() + 0.1);
        let b = Matrix::from_fn(4, 4, |i, j| ((i * 4 + j) as f64 * 0.91).cos());
        let m = Matrix::from_fn(16, 16, |r, c| a.get(r / 4, c / 4) * b.get(r % 4, c % 4));
        let tt = TTMatrix::from_dense(&m, &f(&[4, 4]), &f(&[4, 4]), &RankCap::Max(1)).unwrap();
        assert!(rel(tt.full().data(), m.data()) <= 1e-10);
    }

    #[test]
    fn full_rank_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = Matrix::from_fn(6, 6, |_, _| rng.random_range(-1.0..1.0));
        let tt = TTMatrix::from_dense(&m, &f(&[2, 3]), &f(&[3, 2]), &RankCap::Max(100)).unwrap();
        assert!(rel(tt.full().data(), m.data()) <= 1e-10);
        assert!(TTMatrix::from_dense(&m, &f(&[3, 3]), &f(&[3, 2]), &RankCap::Max(2)).is_err());
        assert!(TTMatrix::from_dense(&m, &f(&[6]), &f(&[3, 2]), &RankCap::Max(2)).is_err());
    }

    #[test]
    fn matvec_matches_dense_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ranks = RankProfile::new(vec![1, 2, 1]).unwrap();
        let tt = TTMatrix::random(&f(&[2, 3]), &f(&[3, 2]), &ranks, &mut rng).unwrap();
        let dense = tt.full();
        assert_eq!((dense.rows(), dense.cols()), (6, 6));
        for _ in 0..10 {
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y = tt.matvec(&x).unwrap();
            assert!(rel(&y, &dense.matvec(&x).unwrap()) <= 1e-12);
        }
    }

    #[test]
    fn batch_rows_are_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ranks = RankProfile::new(vec![1, 3, 2, 1]).unwrap();
        let tt = TTMatrix::random(&f(&[2, 2, 3]), &f(&[3, 1, 2]), &ranks, &mut rng).unwrap();
        let xs: Vec<f64> = (0..3 * 12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ys = tt.apply_batch(&xs, 3).unwrap();
        for b in 0..3 {
            let y = tt.matvec(&xs[b * 12..(b + 1) * 12]).unwrap();
            assert!(rel(&ys[b * 6..(b + 1) * 6], &y) <= 1e-14);
        }
    }

    #[test]
    fn param_count_of_2048_layer_geometry() {
        let modes = f(&[8, 4, 8, 8]);
        let big = TTMatrix::random(
            &modes,
            &modes,
            &RankProfile::new(vec![1, 12, 12, 12, 1]).unwrap(),
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        assert_eq!(big.param_count(), 13056);
        let small = TTMatrix::random(
            &modes,
            &modes,
            &RankProfile::new(vec![1, 3, 4, 3, 1]).unwrap(),
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        assert_eq!(small.param_count(), 1344);
        let tiny = TTMatrix::random(
            &f(&[2, 2]),
            &f(&[2, 2]),
            &RankProfile::new(vec![1, 1, 1]).unwrap(),
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        assert_eq!(tiny.param_count(), 8);
    }

    #[test]
    fn uniform_geometry_param_count_formula() {
        // K cores of n×n modes and interior rank r: 2·n²·r + (K−2)·n²·r²
        let (n, r) = (3, 4);
        for k in 2..6 {
            let modes = f(&vec![n; k]);
            let tt = TTMatrix::random(
                &modes,
                &modes,
                &RankProfile::uniform(k, r).unwrap(),
                &mut ChaCha8Rng::seed_from_u64(1),
            )
            .unwrap();
            assert_eq!(tt.param_count(), 2 * n * n * r + (k - 2) * n * n * r * r);
        }
    }

    #[test]
    fn backward_matches_transpose_product() {
        // For a linear map, d⟨g, Wx⟩/dx = Wᵀg.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ranks = RankProfile::new(vec![1, 2, 3, 1]).unwrap();
        let tt = TTMatrix::random(&f(&[2, 3, 2]), &f(&[2, 2, 3]), &ranks, &mut rng).unwrap();
        let x: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let stages = tt.contract_forward(&x, 1).unwrap();
        let (_, gx) = tt.contract_backward(&stages, &g, 1);
        let expected = tt.full().transpose().matvec(&g).unwrap();
        assert!(rel(&gx, &expected) <= 1e-12);
    }
}
