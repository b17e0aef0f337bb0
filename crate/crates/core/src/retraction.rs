//! Rank reduction of TT tensors and operators.
//!
//! Two variants are provided:
//!
//! * [`retract_orthogonal`] right-orthogonalizes the train with QR, then sweeps
//!   left to right with truncated SVDs. Both sides of every truncation are
//!   orthonormal, so the error is exactly the root-sum-square of the
//!   discarded singular values. This is the retraction used by [`crate::rgd`].
//! * [`retract_literal`] performs the single left-to-right truncation sweep
//!   with the running-rank rule `r̂_{k+1} = min(r_max, n_k·m_k·r̂_{k+1},
//!   ⌊r_k·r_{k+1} / r̂_{k+1}⌋)` and no orthogonalization pass. Its discarded
//!   energies are not an error bound.
//!
//! Operators are rounded through their fused view, where `(j_k, i_k)` forms a
//! single mode of size `J_k·I_k`.

use crate::error::{Error, Result};
use crate::tensor::svd_truncated;
use crate::tt::{RankCap, RankProfile, TTCore3, TTMatrix, TTVector};

/// Anything that can be rounded through a [`TTVector`] view.
pub trait Retractable: Sized {
    fn to_train(&self) -> TTVector;
    /// Rebuilds `Self` from a train over the same (fused) modes.
    fn with_train(&self, train: TTVector) -> Result<Self>;
}

impl Retractable for TTVector {
    fn to_train(&self) -> TTVector {
        self.clone()
    }

    fn with_train(&self, train: TTVector) -> Result<Self> {
        if train.shape() != self.shape() {
            return Err(Error::ShapeMismatch("train shape changed during rounding".into()));
        }
        Ok(train)
    }
}

impl Retractable for TTMatrix {
    fn to_train(&self) -> TTVector {
        self.to_fused()
    }

    fn with_train(&self, train: TTVector) -> Result<Self> {
        TTMatrix::from_fused(train, self.in_shape().dims(), self.out_shape().dims())
    }
}

/// What a rounding pass did.
#[derive(Debug, Clone, PartialEq)]
pub struct RetractReport {
    pub input_ranks: RankProfile,
    pub output_ranks: RankProfile,
    /// Root-sum-square of the singular values dropped at each of the `K − 1`
    /// truncation steps.
    pub per_core_discarded_energy: Vec<f64>,
    /// `sqrt(Σ ε_k²) / ‖input‖`, or 0 for a zero input.
    pub total_relative_error_estimate: f64,
}

impl RetractReport {
    /// `sqrt(Σ ε_k²)`
    pub fn discarded_norm(&self) -> f64 {
        self.per_core_discarded_energy.iter().map(|e| e * e).sum::<f64>().sqrt()
    }
}

/// Quasi-optimal TT rounding: QR sweep right to left, SVD sweep left to right.
pub fn retract_orthogonal<T: Retractable>(w: &T, target: &RankCap) -> Result<(T, RetractReport)> {
    let train = w.to_train();
    let order = train.order();
    target.validate(order)?;
    let input_ranks = train.ranks();

    let ortho = train.right_orthogonalize()?;
    let norm = crate::tensor::frobenius(ortho.cores()[0].data());
    let mut cores: Vec<TTCore3> = ortho.cores().to_vec();
    let mut energies = Vec::with_capacity(order.saturating_sub(1));
    for k in 0..order - 1 {
        let n = cores[k].mode_size();
        let svd = svd_truncated(&cores[k].left_unfolding(), target.cap_at(k + 1, order)?)?;
        energies.push(svd.discarded_energy);
        cores[k] = TTCore3::from_left_unfolding(&svd.u, n)?;
        cores[k + 1] = cores[k + 1].mul_left(&svd.sv());
    }
    finish(w, cores, input_ranks, energies, norm)
}

/// Single truncation sweep with the running-rank rule and no orthogonalization.
///
/// At step `k` the current core (with the previous carry absorbed) is unfolded
/// as `(r̂_k·n_k·m_k) × r_{k+1}` and truncated to
/// `r̂_{k+1} = min(r_max, n_k·m_k·r̂_{k+1}, ⌊r_k·r_{k+1}/r̂_{k+1}⌋)`, where the
/// right-hand `r̂_{k+1}` is its initial value 1. The left singular vectors
/// become the new core and `Σ̂·V̂` is carried into core `k + 1`. The final
/// boundary rank is always 1.
pub fn retract_literal<T: Retractable>(w: &T, r_max: usize) -> Result<(T, RetractReport)> {
    if r_max == 0 {
        return Err(Error::InvalidRanks("r_max must be at least 1".into()));
    }
    let train = w.to_train();
    let order = train.order();
    let input_ranks = train.ranks();
    let r = input_ranks.ranks().to_vec();
    let mut r_hat = vec![1usize; order + 1];

    let mut cores: Vec<TTCore3> = train.cores().to_vec();
    let mut energies = Vec::with_capacity(order.saturating_sub(1));
    for k in 0..order - 1 {
        let nm = cores[k].mode_size();
        r_hat[k + 1] = r_max.min(nm * r_hat[k + 1]).min(r[k] * r[k + 1] / r_hat[k + 1]);
        let svd = svd_truncated(&cores[k].left_unfolding(), r_hat[k + 1])?;
        r_hat[k + 1] = svd.rank();
        energies.push(svd.discarded_energy);
        cores[k] = TTCore3::from_left_unfolding(&svd.u, nm)?;
        cores[k + 1] = cores[k + 1].mul_left(&svd.sv());
    }
    let norm = train.norm();
    finish(w, cores, input_ranks, energies, norm)
}

fn finish<T: Retractable>(
    w: &T,
    cores: Vec<TTCore3>,
    input_ranks: RankProfile,
    energies: Vec<f64>,
    norm: f64,
) -> Result<(T, RetractReport)> {
    let out = TTVector::new(cores)?;
    let output_ranks = out.ranks();
    let mut report = RetractReport {
        input_ranks,
        output_ranks,
        per_core_discarded_energy: energies,
        total_relative_error_estimate: 0.0,
    };
    if norm > 0.0 {
        report.total_relative_error_estimate = report.discarded_norm() / norm;
    }
    Ok((w.with_train(out)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{DenseTensor, Shape};
    use crate::tt::ModeFactorization;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn shape(d: &[usize]) -> Shape {
        Shape::new(d.to_vec()).unwrap()
    }

    fn ranks(r: &[usize]) -> RankProfile {
        RankProfile::new(r.to_vec()).unwrap()
    }

    fn dist(a: &DenseTensor, b: &DenseTensor) -> f64 {
        a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn within_cap_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = TTVector::random(&shape(&[3, 4, 3]), &ranks(&[1, 2, 2, 1]), &mut rng).unwrap();
        let full = w.full();
        let (lit, rep) = retract_literal(&w, 2).unwrap();
        assert_eq!(rep.output_ranks.ranks(), &[1, 2, 2, 1]);
        assert!(dist(&lit.full(), &full) <= 1e-10 * full.frobenius_norm());
        let (orth, rep) = retract_orthogonal(&w, &RankCap::Profile(ranks(&[1, 2, 2, 1]))).unwrap();
        assert_eq!(rep.output_ranks.ranks(), &[1, 2, 2, 1]);
        assert!(dist(&orth.full(), &full) <= 1e-10 * full.frobenius_norm());
    }

    #[test]
    fn recompresses_doubled_train() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = TTVector::random(&shape(&[4, 5, 4]), &ranks(&[1, 2, 2, 1]), &mut rng).unwrap();
        let doubled = a.add(&a).unwrap();
        assert_eq!(doubled.ranks().ranks(), &[1, 4, 4, 1]);
        let expected = a.scale(2.0).full();
        for (out, _) in [
            retract_literal(&doubled, 2).unwrap(),
            retract_orthogonal(&doubled, &RankCap::Max(2)).unwrap(),
        ] {
            assert!(out.ranks().le(&ranks(&[1, 2, 2, 1])));
            assert!(dist(&out.full(), &expected) <= 1e-10 * expected.frobenius_norm());
        }
    }

    #[test]
    fn orthogonal_error_is_accounted() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let w = TTVector::random(&shape(&[4, 5, 6, 3]), &ranks(&[1, 4, 5, 3, 1]), &mut rng).unwrap();
            let (out, rep) = retract_orthogonal(&w, &RankCap::Max(2)).unwrap();
            assert!(out.ranks().le(&RankProfile::uniform(4, 2).unwrap()));
            let err = dist(&out.full(), &w.full());
            let bound = rep.discarded_norm();
            assert!(err <= 1.0001 * bound + 1e-12, "{err} > {bound}");
            assert!((err - bound).abs() <= 1e-8 * bound);
        }
    }

    #[test]
    fn orthogonal_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = TTVector::random(&shape(&[5, 5, 5]), &ranks(&[1, 5, 5, 1]), &mut rng).unwrap();
        let cap = RankCap::Profile(ranks(&[1, 2, 3, 1]));
        let (once, _) = retract_orthogonal(&w, &cap).unwrap();
        let (twice, _) = retract_orthogonal(&once, &cap).unwrap();
        let f1 = once.full();
        assert!(dist(&twice.full(), &f1) <= 1e-12 * f1.frobenius_norm());
    }

    #[test]
    fn orthogonal_error_monotone_in_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let w = TTVector::random(&shape(&[4, 4, 4, 4]), &ranks(&[1, 4, 6, 4, 1]), &mut rng).unwrap();
            let full = w.full();
            let mut prev = f64::INFINITY;
            for r in 1..=6 {
                let (out, _) = retract_orthogonal(&w, &RankCap::Max(r)).unwrap();
                let err = dist(&out.full(), &full);
                assert!(err <= prev + 1e-12);
                prev = err;
            }
        }
    }

    #[test]
    fn noisy_index_sum_recovers_rank_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let t = DenseTensor::from_fn(shape(&[4, 4, 4]), |i| {
            (i[0] + i[1] + i[2]) as f64 + 1e-8 * rng.sample::<f64, _>(StandardNormal)
        })
        .unwrap();
        let w = TTVector::from_dense(&t, &RankCap::Max(16)).unwrap();
        let (out, _) = retract_orthogonal(&w, &RankCap::Profile(ranks(&[1, 2, 2, 1]))).unwrap();
        assert!(dist(&out.full(), &t) <= 1e-6 * t.frobenius_norm());
    }

    #[test]
    fn rank_one_target_matches_dense_tt_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let w = TTVector::random(&shape(&[3, 4, 5]), &ranks(&[1, 3, 4, 1]), &mut rng).unwrap();
            let full = w.full();
            let (out, _) = retract_orthogonal(&w, &RankCap::Max(1)).unwrap();
            let oracle = TTVector::from_dense(&full, &RankCap::Max(1)).unwrap();
            let (e, o) = (dist(&out.full(), &full), dist(&oracle.full(), &full));
            assert!((e - o).abs() <= 0.05 * o, "{e} vs {o}");
        }
    }

    #[test]
    fn operators_round_through_fused_view() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = ModeFactorization::new(vec![2, 3, 2]).unwrap();
        let m = TTMatrix::random(&f, &f, &ranks(&[1, 3, 3, 1]), &mut rng).unwrap();
        let (out, rep) = retract_orthogonal(&m, &RankCap::Max(2)).unwrap();
        assert_eq!(out.in_shape(), m.in_shape());
        assert!(out.ranks().le(&RankProfile::uniform(3, 2).unwrap()));
        let err = out
            .full()
            .data()
            .iter()
            .zip(m.full().data())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1.0001 * rep.discarded_norm() + 1e-12);
        let (lit, _) = retract_literal(&m, 2).unwrap();
        assert!(lit.ranks().le(&RankProfile::uniform(3, 2).unwrap()));
    }

    #[test]
    fn invalid_targets() {
        let w = TTVector::zeros(&shape(&[2, 2]));
        assert!(retract_literal(&w, 0).is_err());
        assert!(retract_orthogonal(&w, &RankCap::Max(0)).is_err());
        assert!(retract_orthogonal(&w, &RankCap::Profile(ranks(&[1, 1, 1, 1]))).is_err());
        let (z, rep) = retract_orthogonal(&w, &RankCap::Max(1)).unwrap();
        assert_eq!(z.norm(), 0.0);
        assert_eq!(rep.total_relative_error_estimate, 0.0);
    }
}
