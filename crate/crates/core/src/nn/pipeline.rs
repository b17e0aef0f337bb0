use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::train::{evaluate, train, Metrics, TrainConfig, TrainTrace};
use super::{Activation, Dataset, DenseLayer, Layer, LossKind, Network, TTLayer};
use crate::error::{Error, Result};
use crate::rgd::{rgd_compress, ConvergenceTrace, RgdConfig};
use crate::tensor::Matrix;
use crate::tt::{ModeFactorization, RankProfile, TTMatrix};

/// Shape of one layer, independent of its weights.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Dense {
        inputs: usize,
        outputs: usize,
        activation: Activation,
    },
    TT {
        in_factors: ModeFactorization,
        out_factors: ModeFactorization,
        activation: Activation,
    },
}

/// Layer shapes plus loss; instantiated at given TT-ranks by [`Architecture::build`].
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub layers: Vec<LayerSpec>,
    pub loss: LossKind,
}

impl Architecture {
    /// Random network: TT cores and dense weights uniform in
    /// `±sqrt(6 / (fan_in + fan_out))`, zero biases. Every TT layer gets `ranks`.
    pub fn build(&self, ranks: &RankProfile, seed: u64) -> Result<Network> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = self
            .layers
            .iter()
            .map(|spec| match spec {
                LayerSpec::Dense {
                    inputs,
                    outputs,
                    activation,
                } => {
                    if *inputs == 0 || *outputs == 0 {
                        return Err(Error::InvalidShape("dense layer needs positive sizes".into()));
                    }
                    let bound = (6.0 / (inputs + outputs) as f64).sqrt();
                    let w = Matrix::from_fn(*outputs, *inputs, |_, _| rng.random_range(-bound..bound));
                    Ok(Layer::Dense(DenseLayer::new(w, vec![0.0; *outputs], *activation)?))
                }
                LayerSpec::TT {
                    in_factors,
                    out_factors,
                    activation,
                } => {
                    let w = TTMatrix::glorot(in_factors, out_factors, ranks, &mut rng)?;
                    let bias = vec![0.0; w.out_dim()];
                    Ok(Layer::TT(TTLayer::new(w, bias, *activation)?))
                }
            })
            .collect::<Result<_>>()?;
        Network::new(layers, self.loss)
    }

    /// Architecture of an existing network.
    pub fn of(net: &Network) -> Architecture {
        let layers = net
            .layers()
            .iter()
            .map(|l| match l {
                Layer::Dense(d) => LayerSpec::Dense {
                    inputs: d.weight.cols(),
                    outputs: d.weight.rows(),
                    activation: d.activation,
                },
                Layer::TT(t) => LayerSpec::TT {
                    in_factors: ModeFactorization::new(t.weight.in_shape().dims().to_vec()).expect("valid operator"),
                    out_factors: ModeFactorization::new(t.weight.out_shape().dims().to_vec()).expect("valid operator"),
                    activation: t.activation,
                },
            })
            .collect();
        Architecture {
            layers,
            loss: net.loss_kind(),
        }
    }
}

/// Metrics on the training set and, if one was given, the validation set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageMetrics {
    pub train: Metrics,
    pub val: Option<Metrics>,
}

fn stage(net: &Network, data: &Dataset, val: Option<&Dataset>) -> Result<StageMetrics> {
    Ok(StageMetrics {
        train: evaluate(net, data)?,
        val: val.map(|v| evaluate(net, v)).transpose()?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LrReport {
    /// `(layer index, trace)` for every TT layer.
    pub layer_traces: Vec<(usize, ConvergenceTrace)>,
    /// TT core counts per TT layer before and after rank reduction.
    pub tt_params_before: Vec<usize>,
    pub tt_params_after: Vec<usize>,
    /// Whole-network parameter counts including biases and dense layers.
    pub params_before: usize,
    pub params_after: usize,
    pub original: StageMetrics,
    pub truncated: StageMetrics,
    pub fine_tuned: StageMetrics,
    pub fine_tune_trace: TrainTrace,
}

/// Reduces every TT layer to `target_ranks` with [`rgd_compress`], then fine-tunes.
pub fn build_lr_network(
    net: &Network,
    target_ranks: &RankProfile,
    rgd: &RgdConfig,
    fine_tune: &TrainConfig,
    data: &Dataset,
    val: Option<&Dataset>,
) -> Result<(Network, LrReport)> {
    let original = stage(net, data, val)?;
    let cfg = RgdConfig {
        target_ranks: target_ranks.clone(),
        ..rgd.clone()
    };
    let mut lr = net.clone();
    let mut layer_traces = Vec::new();
    let (mut before, mut after) = (Vec::new(), Vec::new());
    for (k, layer) in lr.layers_mut().iter_mut().enumerate() {
        if let Layer::TT(t) = layer {
            before.push(t.weight.param_count());
            let (w, trace) = rgd_compress(&t.weight, &cfg)?;
            t.weight = w;
            after.push(t.weight.param_count());
            layer_traces.push((k, trace));
        }
    }
    if layer_traces.is_empty() {
        return Err(Error::Config("the network has no TT layers to compress".into()));
    }
    let truncated = stage(&lr, data, val)?;
    let (tuned, fine_tune_trace) = train(&lr, data, val, fine_tune)?;
    let fine_tuned = stage(&tuned, data, val)?;
    let report = LrReport {
        layer_traces,
        tt_params_before: before,
        tt_params_after: after,
        params_before: net.param_count(),
        params_after: tuned.param_count(),
        original,
        truncated,
        fine_tuned,
        fine_tune_trace,
    };
    Ok((tuned, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareConfig {
    pub large_ranks: RankProfile,
    pub small_ranks: RankProfile,
    /// Training of the large-rank network before compression.
    pub pretrain: TrainConfig,
    /// Training given to both small-rank networks.
    pub budget: TrainConfig,
    pub rgd: RgdConfig,
    /// Seed for the random initial weights of both networks.
    pub init_seed: u64,
}

/// One trained small-rank network.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub params: usize,
    pub trace: TrainTrace,
    pub final_metrics: StageMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    /// Small-rank network trained from a random start.
    pub random_init: RunSummary,
    /// Small-rank network obtained from the pretrained large-rank one.
    pub lr_init: RunSummary,
    pub pretrained: StageMetrics,
    pub lr: LrReport,
}

/// Trains a randomly initialized small-rank network and, with the same budget,
/// fine-tunes the low-rank network derived from a pretrained large-rank one.
pub fn compare_init(
    arch: &Architecture,
    cfg: &CompareConfig,
    data: &Dataset,
    val: Option<&Dataset>,
) -> Result<CompareReport> {
    let small = arch.build(&cfg.small_ranks, cfg.init_seed)?;
    let (small_trained, small_trace) = train(&small, data, val, &cfg.budget)?;
    let random_init = RunSummary {
        params: small_trained.param_count(),
        trace: small_trace,
        final_metrics: stage(&small_trained, data, val)?,
    };

    let large = arch.build(&cfg.large_ranks, cfg.init_seed)?;
    let (large_trained, _) = train(&large, data, val, &cfg.pretrain)?;
    let pretrained = stage(&large_trained, data, val)?;
    let (lr_net, lr) = build_lr_network(&large_trained, &cfg.small_ranks, &cfg.rgd, &cfg.budget, data, val)?;
    let lr_init = RunSummary {
        params: lr_net.param_count(),
        trace: lr.fine_tune_trace.clone(),
        final_metrics: lr.fine_tuned,
    };
    Ok(CompareReport {
        random_init,
        lr_init,
        pretrained,
        lr,
    })
}
