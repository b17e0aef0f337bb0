use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use serde_json::json;
use ttrank_core::tensor::Matrix;
use ttrank_core::tt::{ModeFactorization, RankCap, RankProfile, TTMatrix, TTVector};

use super::{emit, join, Outcome};
use crate::container::Payload;
use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// Dense container.
    pub input: PathBuf,
    /// Factorization of the column count; with `--out-factors`, decompose as a TT operator.
    #[arg(long, value_delimiter = ',', requires = "out_factors")]
    pub in_factors: Option<Vec<usize>>,
    /// Factorization of the row count.
    #[arg(long, value_delimiter = ',', requires = "in_factors")]
    pub out_factors: Option<Vec<usize>>,
    /// Rank cap per position, `K + 1` values with both ends 1.
    #[arg(long, value_delimiter = ',', conflicts_with = "max_rank")]
    pub ranks: Option<Vec<usize>>,
    /// Same cap on every interior rank; exact decomposition when neither cap is given.
    #[arg(long)]
    pub max_rank: Option<usize>,
    #[arg(short, long)]
    pub output: PathBuf,
}

pub fn cap(ranks: &Option<Vec<usize>>, max_rank: Option<usize>) -> CliResult<RankCap> {
    Ok(match (ranks, max_rank) {
        (Some(r), _) => RankCap::Profile(RankProfile::new(r.clone())?),
        (None, Some(m)) => RankCap::Max(m),
        (None, None) => RankCap::Max(usize::MAX),
    })
}

pub fn run(a: &DecomposeArgs, out: &mut dyn Write) -> CliResult<Outcome> {
    let Payload::Dense(dense) = Payload::read(&a.input)? else {
        return Err(CliError::Usage(format!(
            "{}: decompose needs a dense container",
            a.input.display()
        )));
    };
    let cap = cap(&a.ranks, a.max_rank)?;
    let norm = dense.frobenius_norm();
    let (payload, energies, diff) = match (&a.in_factors, &a.out_factors) {
        (Some(fi), Some(fo)) => {
            let dims = dense.shape().dims();
            if dims.len() != 2 {
                return Err(CliError::Usage(format!(
                    "operator factors need a matrix, got shape {}",
                    join(dims)
                )));
            }
            let w = Matrix::new(dims[0], dims[1], dense.data().to_vec())?;
            let (in_f, out_f) = (ModeFactorization::new(fi.clone())?, ModeFactorization::new(fo.clone())?);
            let (tt, energies) = TTMatrix::decompose(&w, &in_f, &out_f, &cap)?;
            let diff = distance(tt.full().data(), w.data());
            (Payload::TTMatrix(tt), energies, diff)
        }
        _ => {
            let (tt, energies) = TTVector::decompose(&dense, &cap)?;
            let diff = distance(tt.full().data(), dense.data());
            (Payload::TTVector(tt), energies, diff)
        }
    };
    let before = dense.data().len();
    let after = payload.param_count();
    let ranks = match &payload {
        Payload::TTVector(t) => t.ranks(),
        Payload::TTMatrix(t) => t.ranks(),
        _ => unreachable!("decompose produces TT payloads"),
    };
    payload.write(&a.output)?;

    emit(out, format!("kind: {}", payload.kind()))?;
    emit(out, format!("ranks: {ranks}"))?;
    emit(out, format!("dense params: {before}"))?;
    emit(out, format!("params: {after}"))?;
    emit(out, format!("compression ratio: {:.1}×", before as f64 / after as f64))?;
    emit(
        out,
        format!(
            "discarded energy: {}",
            join(&energies.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>())
        ),
    )?;
    emit(out, format!("reconstruction error: {diff:.3e}"))?;
    emit(
        out,
        format!(
            "relative reconstruction error: {:.3e}",
            if norm > 0.0 { diff / norm } else { 0.0 }
        ),
    )?;

    Ok(Outcome {
        config: json!({
            "in_factors": a.in_factors,
            "out_factors": a.out_factors,
            "ranks": a.ranks,
            "max_rank": a.max_rank,
        }),
        seed: None,
        inputs: vec![a.input.clone()],
        outputs: vec![a.output.clone()],
        violation: None,
    })
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
