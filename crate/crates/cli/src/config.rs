//! Run configuration files: flat TOML `key = value` pairs.
//!
//! ```toml
//! layers = ["tt", "tt", "dense"]
//! widths = [64, 64, 64, 4]
//! factors = [[4, 2, 2, 4], [4, 2, 2, 4], [4, 2, 2, 4], []]
//! activations = ["relu", "relu", "softmax"]
//! loss = "ce"
//! ranks = [1, 12, 12, 12, 1]
//! target_ranks = [1, 3, 4, 3, 1]
//! optimizer = "adam"
//! lr = 0.005
//! epochs = 40
//! batch = 32
//! seed = 7
//! ```
//!
//! `widths[k]` and `widths[k + 1]` are the input and output sizes of layer
//! `k`; a TT layer factorizes them as `factors[k]` and `factors[k + 1]`.
//! Command-line flags override keys read from the file.

use std::path::Path;

use serde::{Deserialize, Serialize};
use ttrank_core::nn::{Activation, Architecture, LayerSpec, LossKind, Optimizer, TrainConfig};
use ttrank_core::rgd::{RgdConfig, Smoothness};
use ttrank_core::tt::{ModeFactorization, RankProfile};

use crate::error::{CliError, CliResult};
use crate::fsio;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layers: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub widths: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factors: Option<Vec<Vec<usize>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub activations: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss: Option<String>,
    /// TT-ranks of freshly built networks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ranks: Option<Vec<usize>>,
    /// TT-ranks after rank reduction.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_ranks: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub freeze_non_tt: Option<bool>,
    /// Training of the large-rank network in `compare`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pretrain_lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pretrain_epochs: Option<usize>,
    /// RGD step size and step count for rank reduction.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

pub const DEFAULT_LR: f64 = 0.01;
pub const DEFAULT_EPOCHS: usize = 10;
pub const DEFAULT_BATCH: usize = 32;
pub const DEFAULT_STEPS: usize = 10;

/// Offset between the pretraining seed and the seed of the training budget.
pub const BUDGET_SEED_OFFSET: u64 = 100;

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let bytes = fsio::read_bytes(path)?;
        let text = String::from_utf8(bytes).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// Loads `path` if given, then applies `overrides`.
    pub fn resolve(path: Option<&Path>, overrides: RunConfig) -> CliResult<Self> {
        let base = path.map(Self::load).transpose()?.unwrap_or_default();
        Ok(base.merge(overrides))
    }

    /// Keys set in `other` replace those in `self`.
    pub fn merge(self, other: RunConfig) -> RunConfig {
        RunConfig {
            layers: other.layers.or(self.layers),
            widths: other.widths.or(self.widths),
            factors: other.factors.or(self.factors),
            activations: other.activations.or(self.activations),
            loss: other.loss.or(self.loss),
            ranks: other.ranks.or(self.ranks),
            target_ranks: other.target_ranks.or(self.target_ranks),
            optimizer: other.optimizer.or(self.optimizer),
            lr: other.lr.or(self.lr),
            epochs: other.epochs.or(self.epochs),
            batch: other.batch.or(self.batch),
            seed: other.seed.or(self.seed),
            freeze_non_tt: other.freeze_non_tt.or(self.freeze_non_tt),
            pretrain_lr: other.pretrain_lr.or(self.pretrain_lr),
            pretrain_epochs: other.pretrain_epochs.or(self.pretrain_epochs),
            eta: other.eta.or(self.eta),
            steps: other.steps.or(self.steps),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn loss_kind(&self) -> CliResult<LossKind> {
        parse_loss(self.loss.as_deref().unwrap_or("ce"))
    }

    pub fn architecture(&self) -> CliResult<Architecture> {
        let kinds = self.layers.as_ref().ok_or_else(|| missing("layers"))?;
        let widths = self.widths.as_ref().ok_or_else(|| missing("widths"))?;
        let loss = self.loss_kind()?;
        if kinds.is_empty() || widths.len() != kinds.len() + 1 {
            return Err(CliError::Usage(format!(
                "config: {} layers need {} widths, got {}",
                kinds.len(),
                kinds.len() + 1,
                widths.len()
            )));
        }
        let activations: Vec<Activation> = match &self.activations {
            Some(a) if a.len() != kinds.len() => {
                return Err(CliError::Usage(format!(
                    "config: {} activations for {} layers",
                    a.len(),
                    kinds.len()
                )))
            }
            Some(a) => a.iter().map(|s| parse_activation(s)).collect::<CliResult<_>>()?,
            None => (0..kinds.len())
                .map(|k| match (k + 1 == kinds.len(), loss) {
                    (false, _) => Activation::Relu,
                    (true, LossKind::CrossEntropy) => Activation::SoftmaxAtLoss,
                    (true, LossKind::Mae) => Activation::Identity,
                })
                .collect(),
        };
        let factor = |k: usize| -> CliResult<ModeFactorization> {
            let f = self
                .factors
                .as_ref()
                .and_then(|f| f.get(k))
                .ok_or_else(|| CliError::Usage(format!("config: TT layers need factors for width {k}")))?;
            Ok(ModeFactorization::for_dim(f.clone(), widths[k])?)
        };
        let layers = kinds
            .iter()
            .enumerate()
            .map(|(k, kind)| match kind.as_str() {
                "dense" => Ok(LayerSpec::Dense {
                    inputs: widths[k],
                    outputs: widths[k + 1],
                    activation: activations[k],
                }),
                "tt" => {
                    let (in_factors, out_factors) = (factor(k)?, factor(k + 1)?);
                    if in_factors.len() != out_factors.len() {
                        return Err(CliError::Usage(format!(
                            "config: TT layer {k} pairs {} input factors with {} output factors",
                            in_factors.len(),
                            out_factors.len()
                        )));
                    }
                    Ok(LayerSpec::TT {
                        in_factors,
                        out_factors,
                        activation: activations[k],
                    })
                }
                other => Err(CliError::Usage(format!(
                    "config: unknown layer type {other:?} (dense, tt)"
                ))),
            })
            .collect::<CliResult<_>>()?;
        Ok(Architecture { layers, loss })
    }

    pub fn ranks(&self) -> CliResult<RankProfile> {
        Ok(RankProfile::new(self.ranks.clone().ok_or_else(|| missing("ranks"))?)?)
    }

    pub fn target_ranks(&self) -> CliResult<RankProfile> {
        Ok(RankProfile::new(
            self.target_ranks.clone().ok_or_else(|| missing("target_ranks"))?,
        )?)
    }

    pub fn optimizer(&self) -> CliResult<Optimizer> {
        match self.optimizer.as_deref().unwrap_or("sgd") {
            "sgd" => Ok(Optimizer::Sgd),
            "adam" => Ok(Optimizer::adam()),
            other => Err(CliError::Usage(format!("unknown optimizer {other:?} (sgd, adam)"))),
        }
    }

    pub fn train_config(&self) -> CliResult<TrainConfig> {
        let cfg = TrainConfig {
            optimizer: self.optimizer()?,
            learning_rate: self.lr.unwrap_or(DEFAULT_LR),
            batch_size: self.batch.unwrap_or(DEFAULT_BATCH),
            epochs: self.epochs.unwrap_or(DEFAULT_EPOCHS),
            seed: self.seed(),
            freeze_non_tt: self.freeze_non_tt.unwrap_or(false),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Large-rank training in `compare`; falls back to the main training keys.
    pub fn pretrain_config(&self) -> CliResult<TrainConfig> {
        let base = self.train_config()?;
        let cfg = TrainConfig {
            learning_rate: self.pretrain_lr.unwrap_or(base.learning_rate),
            epochs: self.pretrain_epochs.unwrap_or(base.epochs),
            ..base
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// RGD settings with `H = 1`, the smoothness of the distance loss.
    pub fn rgd_config(&self) -> CliResult<RgdConfig> {
        let cfg = RgdConfig {
            eta: self.eta.unwrap_or(1.0),
            max_steps: self.steps.unwrap_or(DEFAULT_STEPS),
            smoothness: Smoothness::Known(1.0),
            ..RgdConfig::new(self.target_ranks()?)
        };
        cfg.validate(1.0)?;
        Ok(cfg)
    }
}

fn missing(key: &str) -> CliError {
    CliError::Usage(format!("config: missing key {key:?}"))
}

pub fn parse_activation(s: &str) -> CliResult<Activation> {
    match s {
        "relu" => Ok(Activation::Relu),
        "identity" => Ok(Activation::Identity),
        "softmax" => Ok(Activation::SoftmaxAtLoss),
        other => Err(CliError::Usage(format!(
            "unknown activation {other:?} (relu, identity, softmax)"
        ))),
    }
}

pub fn activation_name(a: Activation) -> &'static str {
    match a {
        Activation::Relu => "relu",
        Activation::Identity => "identity",
        Activation::SoftmaxAtLoss => "softmax",
    }
}

pub fn parse_loss(s: &str) -> CliResult<LossKind> {
    match s {
        "mae" => Ok(LossKind::Mae),
        "ce" => Ok(LossKind::CrossEntropy),
        other => Err(CliError::Usage(format!("unknown loss {other:?} (mae, ce)"))),
    }
}

pub fn loss_name(l: LossKind) -> &'static str {
    match l {
        LossKind::Mae => "mae",
        LossKind::CrossEntropy => "ce",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BLOBS: &str = r#"
layers = ["tt", "dense"]
widths = [8, 8, 3]
factors = [[2, 2, 2], [2, 2, 2], []]
ranks = [1, 2, 2, 1]
lr = 0.1
"#;

    #[test]
    fn parses_and_builds() {
        let cfg = RunConfig::from_toml(BLOBS).unwrap();
        let arch = cfg.architecture().unwrap();
        assert_eq!(arch.layers.len(), 2);
        assert_eq!(arch.loss, LossKind::CrossEntropy);
        let net = arch.build(&cfg.ranks().unwrap(), 1).unwrap();
        assert_eq!((net.in_dim(), net.out_dim()), (8, 3));
        assert_eq!(net.layers()[1].activation(), Activation::SoftmaxAtLoss);
    }

    #[test]
    fn flags_override_file_keys() {
        let cfg = RunConfig::from_toml(BLOBS).unwrap().merge(RunConfig {
            lr: Some(0.5),
            epochs: Some(3),
            ..RunConfig::default()
        });
        let t = cfg.train_config().unwrap();
        assert_eq!((t.learning_rate, t.epochs, t.batch_size), (0.5, 3, DEFAULT_BATCH));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(RunConfig::from_toml("colour = 1").is_err());
        let cfg = RunConfig::from_toml(BLOBS).unwrap();
        let bad_widths = RunConfig {
            widths: Some(vec![8, 3]),
            ..cfg.clone()
        };
        assert!(bad_widths.architecture().is_err());
        let bad_factors = RunConfig {
            factors: Some(vec![vec![2, 4], vec![2, 2, 2], vec![]]),
            ..cfg.clone()
        };
        assert!(bad_factors.architecture().is_err());
        let bad_opt = RunConfig {
            optimizer: Some("lbfgs".into()),
            ..cfg
        };
        assert!(bad_opt.train_config().is_err());
    }
}
