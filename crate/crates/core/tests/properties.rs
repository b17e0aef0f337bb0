//! Randomized algebraic properties of the dense and TT kernels, each checked
//! against plain dense arithmetic.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ttrank_core::retraction::retract_orthogonal;
use ttrank_core::tensor::{DenseTensor, Shape};
use ttrank_core::tt::{ModeFactorization, RankCap, RankProfile, TTMatrix, TTVector};

fn dims() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..5, 2..5)
}

fn ranks_for(order: usize, r: usize) -> RankProfile {
    let mut v = vec![r; order + 1];
    v[0] = 1;
    v[order] = 1;
    RankProfile::new(v).unwrap()
}

fn random_tt(d: &[usize], r: usize, seed: u64) -> TTVector {
    TTVector::random(
        &Shape::new(d.to_vec()).unwrap(),
        &ranks_for(d.len(), r),
        &mut ChaCha8Rng::seed_from_u64(seed),
    )
    .unwrap()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matricize_round_trips(d in dims(), seed in any::<u64>(), split in 0usize..6) {
        let shape = Shape::new(d.clone()).unwrap();
        let t = random_tt(&d, 2, seed).full();
        let split = 1 + split % (d.len() - 1);
        prop_assert!(t.matricize(0).is_err() && t.matricize(d.len()).is_err());
        let m = t.matricize(split).unwrap();
        prop_assert_eq!(m.rows(), d[..split].iter().product::<usize>());
        let back = DenseTensor::dematricize(&m, shape).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn permute_then_inverse_is_identity(d in dims(), seed in any::<u64>(), rot in 0usize..4) {
        let t = random_tt(&d, 2, seed).full();
        let k = d.len();
        let perm: Vec<usize> = (0..k).map(|i| (i + rot) % k).collect();
        let mut inv = vec![0; k];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let p = t.permute(&perm).unwrap();
        let permuted: Vec<usize> = perm.iter().map(|&i| d[i]).collect();
        prop_assert_eq!(p.shape().dims(), permuted.as_slice());
        prop_assert_eq!(p.permute(&inv).unwrap(), t);
    }

    #[test]
    fn tt_svd_without_cap_is_exact(d in dims(), seed in any::<u64>(), r in 1usize..4) {
        let t = random_tt(&d, r, seed).full();
        let tt = TTVector::from_dense(&t, &RankCap::Max(usize::MAX)).unwrap();
        prop_assert!(dist(tt.full().data(), t.data()) <= 1e-10 * norm(t.data()).max(1.0));
    }

    #[test]
    fn sums_scales_dots_and_norms_match_dense(d in dims(), s1 in any::<u64>(), s2 in any::<u64>(), c in -3.0f64..3.0) {
        let (a, b) = (random_tt(&d, 2, s1), random_tt(&d, 3, s2));
        let (fa, fb) = (a.full(), b.full());
        let sum = a.add(&b.scale(c)).unwrap().full();
        let want: Vec<f64> = fa.data().iter().zip(fb.data()).map(|(x, y)| x + c * y).collect();
        prop_assert!(dist(sum.data(), &want) <= 1e-10 * norm(&want).max(1.0));
        let dot: f64 = fa.data().iter().zip(fb.data()).map(|(x, y)| x * y).sum();
        prop_assert!((a.dot(&b).unwrap() - dot).abs() <= 1e-10 * (norm(fa.data()) * norm(fb.data())).max(1.0));
        prop_assert!((a.norm() - norm(fa.data())).abs() <= 1e-10 * norm(fa.data()).max(1.0));
    }

    #[test]
    fn operator_matvec_is_linear_and_matches_dense(
        ins in prop::collection::vec(1usize..4, 3),
        outs in prop::collection::vec(1usize..4, 3),
        seed in any::<u64>(),
        alpha in -2.0f64..2.0,
        beta in -2.0f64..2.0,
    ) {
        let (fi, fo) = (ModeFactorization::new(ins).unwrap(), ModeFactorization::new(outs).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = TTMatrix::random(&fi, &fo, &ranks_for(3, 2), &mut rng).unwrap();
        let n = w.in_dim();
        let x: Vec<f64> = (0..n).map(|i| ((seed as usize + 7 * i) % 13) as f64 - 6.0).collect();
        let y: Vec<f64> = (0..n).map(|i| ((seed as usize + 5 * i) % 11) as f64 - 5.0).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + beta * b).collect();
        let (wx, wy, wxy) = (w.matvec(&x).unwrap(), w.matvec(&y).unwrap(), w.matvec(&xy).unwrap());
        let lin: Vec<f64> = wx.iter().zip(&wy).map(|(a, b)| alpha * a + beta * b).collect();
        prop_assert!(dist(&wxy, &lin) <= 1e-9 * norm(&lin).max(1.0));
        let dense = w.full().matvec(&x).unwrap();
        prop_assert!(dist(&wx, &dense) <= 1e-9 * norm(&dense).max(1.0));
    }

    #[test]
    fn rounding_respects_cap_and_accounts_its_error(d in dims(), seed in any::<u64>(), cap in 1usize..3) {
        let t = random_tt(&d, 4, seed);
        let (r, rep) = retract_orthogonal(&t, &RankCap::Max(cap)).unwrap();
        prop_assert!(r.ranks().max_rank() <= cap);
        let err = dist(r.full().data(), t.full().data());
        prop_assert!((err - rep.discarded_norm()).abs() <= 1e-8 * norm(t.full().data()).max(1.0));
    }
}
