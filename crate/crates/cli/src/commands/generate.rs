use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::json;
use ttrank_core::nn::Dataset;
use ttrank_core::tensor::{DenseTensor, Shape};
use ttrank_core::tt::{ModeFactorization, RankProfile, TTMatrix, TTVector};

use super::{emit, join, Outcome};
use crate::container::Payload;
use crate::error::{CliError, CliResult};
use crate::fsio;

#[derive(Debug, Subcommand)]
pub enum GenerateCommand {
    /// Dense tensor: standard normal, identity, or the expansion of a random TT.
    Dense(DenseArgs),
    /// TT vector with standard-normal cores.
    TtVector(TtVectorArgs),
    /// TT operator with standard-normal cores.
    TtMatrix(TtMatrixArgs),
    /// Labelled Gaussian cluster dataset, split into train and validation CSVs.
    Blobs(BlobsArgs),
}

#[derive(Debug, Args)]
pub struct DenseArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub shape: Vec<usize>,
    /// Identity matrix (square two-mode shape only).
    #[arg(long, conflicts_with = "ranks")]
    pub identity: bool,
    /// Expand a random TT with these ranks, giving an exactly low-rank tensor.
    #[arg(long, value_delimiter = ',')]
    pub ranks: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TtVectorArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub shape: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub ranks: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TtMatrixArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub in_factors: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub out_factors: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub ranks: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct BlobsArgs {
    #[arg(long, default_value_t = 200)]
    pub per_class: usize,
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    /// Cluster centers per class.
    #[arg(long, default_value_t = 3)]
    pub clusters: usize,
    #[arg(long, default_value_t = 64)]
    pub features: usize,
    #[arg(long, default_value_t = 0.6)]
    pub spread: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fraction of rows in the training split.
    #[arg(long, default_value_t = 0.75)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 1)]
    pub split_seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long)]
    pub val_output: PathBuf,
}

pub fn run(cmd: &GenerateCommand, out: &mut dyn Write) -> CliResult<Outcome> {
    match cmd {
        GenerateCommand::Dense(a) => dense(a, out),
        GenerateCommand::TtVector(a) => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let t = TTVector::random(
                &Shape::new(a.shape.clone())?,
                &RankProfile::new(a.ranks.clone())?,
                &mut rng,
            )?;
            written(
                Payload::TTVector(t),
                a.seed,
                &a.output,
                json!({"shape": a.shape, "ranks": a.ranks}),
                out,
            )
        }
        GenerateCommand::TtMatrix(a) => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let t = TTMatrix::random(
                &ModeFactorization::new(a.in_factors.clone())?,
                &ModeFactorization::new(a.out_factors.clone())?,
                &RankProfile::new(a.ranks.clone())?,
                &mut rng,
            )?;
            let config = json!({"in_factors": a.in_factors, "out_factors": a.out_factors, "ranks": a.ranks});
            written(Payload::TTMatrix(t), a.seed, &a.output, config, out)
        }
        GenerateCommand::Blobs(a) => blobs(a, out),
    }
}

fn dense(a: &DenseArgs, out: &mut dyn Write) -> CliResult<Outcome> {
    let shape = Shape::new(a.shape.clone())?;
    let t = if a.identity {
        if a.shape.len() != 2 || a.shape[0] != a.shape[1] {
            return Err(CliError::Usage(format!(
                "identity needs a square shape, got {}",
                join(&a.shape)
            )));
        }
        DenseTensor::from_fn(shape, |ix| if ix[0] == ix[1] { 1.0 } else { 0.0 })?
    } else if let Some(r) = &a.ranks {
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        TTVector::random(&shape, &RankProfile::new(r.clone())?, &mut rng)?.full()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        let n = shape.num_elements();
        DenseTensor::new(shape, (0..n).map(|_| rng.sample(StandardNormal)).collect())?
    };
    let config = json!({"shape": a.shape, "identity": a.identity, "ranks": a.ranks});
    written(Payload::Dense(t), a.seed, &a.output, config, out)
}

fn written(p: Payload, seed: u64, path: &Path, config: serde_json::Value, out: &mut dyn Write) -> CliResult<Outcome> {
    p.write(path)?;
    emit(
        out,
        format!("wrote {} ({} params) to {}", p.kind(), p.param_count(), path.display()),
    )?;
    Ok(Outcome {
        config,
        seed: Some(seed),
        inputs: vec![],
        outputs: vec![path.to_path_buf()],
        violation: None,
    })
}

fn blobs(a: &BlobsArgs, out: &mut dyn Write) -> CliResult<Outcome> {
    let data = Dataset::blob_mixture(a.per_class, a.classes, a.clusters, a.features, a.spread, a.seed)?;
    let (train, val) = data.split(a.train_fraction, a.split_seed)?;
    fsio::write_atomic(&a.output, &fsio::dataset_csv(&train)?)?;
    fsio::write_atomic(&a.val_output, &fsio::dataset_csv(&val)?)?;
    emit(
        out,
        format!("wrote {} training rows to {}", train.len(), a.output.display()),
    )?;
    emit(
        out,
        format!("wrote {} validation rows to {}", val.len(), a.val_output.display()),
    )?;
    Ok(Outcome {
        config: json!({
            "per_class": a.per_class,
            "classes": a.classes,
            "clusters": a.clusters,
            "features": a.features,
            "spread": a.spread,
            "train_fraction": a.train_fraction,
            "split_seed": a.split_seed,
        }),
        seed: Some(a.seed),
        inputs: vec![],
        outputs: vec![a.output.clone(), a.val_output.clone()],
        violation: None,
    })
}
