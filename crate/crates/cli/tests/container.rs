//! Container round trips over random payloads of every kind.

use proptest::prelude::*;
use ttrank::container::Payload;
use ttrank_core::nn::{Activation, DenseLayer, Layer, LossKind, Network, TTLayer};
use ttrank_core::tensor::{DenseTensor, Matrix, Shape};
use ttrank_core::tt::{TTCore3, TTCore4, TTMatrix, TTVector};

/// Finite doubles across many magnitudes, plus signed zeros and subnormals.
fn value() -> impl Strategy<Value = f64> {
    prop_oneof![
        8 => any::<f64>().prop_filter("finite", |v| v.is_finite()),
        1 => Just(-0.0),
        1 => Just(f64::MIN_POSITIVE / 8.0),
    ]
}

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(value(), n)
}

fn dense() -> impl Strategy<Value = Payload> {
    prop::collection::vec(1usize..5, 1..4).prop_flat_map(|dims| {
        let n = dims.iter().product();
        values(n).prop_map(move |v| Payload::Dense(DenseTensor::new(Shape::new(dims.clone()).unwrap(), v).unwrap()))
    })
}

/// Mode sizes and a matching rank profile with both ends 1.
fn train_shape() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (1usize..4).prop_flat_map(|k| {
        (
            prop::collection::vec(1usize..4, k),
            prop::collection::vec(1usize..4, k.saturating_sub(1)),
        )
            .prop_map(|(modes, inner)| {
                let mut ranks = vec![1];
                ranks.extend(inner);
                ranks.push(1);
                (modes, ranks)
            })
    })
}

fn tt_vector() -> impl Strategy<Value = TTVector> {
    train_shape().prop_flat_map(|(modes, ranks)| {
        let sizes: Vec<usize> = (0..modes.len()).map(|k| modes[k] * ranks[k] * ranks[k + 1]).collect();
        let total = sizes.iter().sum();
        values(total).prop_map(move |v| {
            let mut at = 0;
            let cores = (0..modes.len())
                .map(|k| {
                    let c = TTCore3::new(modes[k], ranks[k], ranks[k + 1], v[at..at + sizes[k]].to_vec()).unwrap();
                    at += sizes[k];
                    c
                })
                .collect();
            TTVector::new(cores).unwrap()
        })
    })
}

fn tt_matrix() -> impl Strategy<Value = TTMatrix> {
    train_shape().prop_flat_map(|(outs, ranks)| {
        let k = outs.len();
        (prop::collection::vec(1usize..4, k), Just(outs), Just(ranks)).prop_flat_map(|(ins, outs, ranks)| {
            let sizes: Vec<usize> = (0..ins.len())
                .map(|k| outs[k] * ins[k] * ranks[k] * ranks[k + 1])
                .collect();
            let total = sizes.iter().sum();
            values(total).prop_map(move |v| {
                let mut at = 0;
                let cores = (0..ins.len())
                    .map(|k| {
                        let c = TTCore4::new(outs[k], ins[k], ranks[k], ranks[k + 1], v[at..at + sizes[k]].to_vec())
                            .unwrap();
                        at += sizes[k];
                        c
                    })
                    .collect();
                TTMatrix::new(cores).unwrap()
            })
        })
    })
}

fn network() -> impl Strategy<Value = Payload> {
    (tt_matrix(), 1usize..4, any::<bool>()).prop_flat_map(|(w, outputs, ce)| {
        let (d_in, d_out) = (w.in_dim(), w.out_dim());
        (values(d_out), values(outputs * d_out), values(outputs)).prop_map(move |(b1, w2, b2)| {
            let tt = TTLayer::new(w.clone(), b1, Activation::Relu).unwrap();
            let head = if ce {
                Activation::SoftmaxAtLoss
            } else {
                Activation::Identity
            };
            let dense = DenseLayer::new(Matrix::new(outputs, d_out, w2).unwrap(), b2, head).unwrap();
            let loss = if ce { LossKind::CrossEntropy } else { LossKind::Mae };
            assert_eq!(d_in, tt.weight.in_dim());
            Payload::Network(Network::new(vec![Layer::TT(tt), Layer::Dense(dense)], loss).unwrap())
        })
    })
}

fn payload() -> impl Strategy<Value = Payload> {
    prop_oneof![
        dense(),
        tt_vector().prop_map(Payload::TTVector),
        tt_matrix().prop_map(Payload::TTMatrix),
        network(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn round_trip_is_bit_exact(p in payload()) {
        let bytes = p.encode();
        let back = Payload::decode(&bytes).unwrap();
        prop_assert_eq!(back.encode(), bytes);
        prop_assert_eq!(back, p);
    }

    #[test]
    fn every_truncation_is_rejected(p in payload(), cut in any::<prop::sample::Index>()) {
        let bytes = p.encode();
        let len = cut.index(bytes.len());
        let err = Payload::decode(&bytes[..len]).unwrap_err();
        prop_assert!(err.to_string().contains("corrupt container"));
        prop_assert_eq!(err.exit_code(), 3);
    }
}

#[test]
fn trailing_bytes_and_bad_magic_are_rejected() {
    let p = Payload::Dense(DenseTensor::new(Shape::new(vec![2]).unwrap(), vec![1.0, 2.0]).unwrap());
    let mut bytes = p.encode();
    bytes.extend_from_slice(&[0; 8]);
    assert!(Payload::decode(&bytes).is_err());
    let mut bytes = p.encode();
    bytes[0] = b'X';
    assert!(Payload::decode(&bytes).is_err());
}

#[test]
fn layout_is_magic_length_json_then_le_doubles() {
    let p = Payload::Dense(DenseTensor::new(Shape::new(vec![2]).unwrap(), vec![1.5, -2.0]).unwrap());
    let bytes = p.encode();
    assert_eq!(&bytes[..5], b"TTRZ1");
    let len = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let meta: serde_json::Value = serde_json::from_slice(&bytes[9..9 + len]).unwrap();
    assert_eq!(meta["kind"], "dense");
    assert_eq!(meta["format_version"], 1);
    assert_eq!(meta["shape"], serde_json::json!([2]));
    assert_eq!(
        &bytes[9 + len..],
        [1.5f64.to_le_bytes(), (-2.0f64).to_le_bytes()].concat()
    );
}
