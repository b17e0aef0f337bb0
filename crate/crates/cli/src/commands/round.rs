use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde_json::json;
use ttrank_core::retraction::{retract_literal, retract_orthogonal, RetractReport, Retractable};
use ttrank_core::tt::RankCap;

use super::decompose::cap;
use super::{emit, Outcome};
use crate::container::Payload;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RoundMode {
    /// Single left-to-right truncation sweep.
    Literal,
    /// Orthogonalize right to left, then truncate left to right.
    Orthogonal,
    /// Run both and compare.
    Both,
}

#[derive(Debug, Args)]
pub struct RoundArgs {
    /// TT vector or TT operator container.
    pub input: PathBuf,
    #[arg(long, conflicts_with = "ranks")]
    pub max_rank: Option<usize>,
    /// Rank cap per position, `K + 1` values (orthogonal mode only).
    #[arg(long, value_delimiter = ',')]
    pub ranks: Option<Vec<usize>>,
    #[arg(long, value_enum, default_value = "orthogonal")]
    pub mode: RoundMode,
    /// Output path; with `--mode both`, `.literal` and `.orthogonal` are
    /// inserted before the extension.
    #[arg(short, long)]
    pub output: PathBuf,
}

/// `dir/name.ext` → `dir/name.tag.ext`.
pub fn tagged(path: &Path, tag: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{tag}"),
    };
    path.with_file_name(name)
}

pub fn run(a: &RoundArgs, out: &mut dyn Write) -> CliResult<Outcome> {
    if a.max_rank.is_none() && a.ranks.is_none() {
        return Err(CliError::Usage("round needs --max-rank or --ranks".into()));
    }
    if a.mode != RoundMode::Orthogonal && a.max_rank.is_none() {
        return Err(CliError::Usage("literal rounding takes a single --max-rank".into()));
    }
    let payload = Payload::read(&a.input)?;
    let cap = cap(&a.ranks, a.max_rank)?;
    let outputs = match payload {
        Payload::TTVector(t) => round_all(&t, &cap, a, out)?,
        Payload::TTMatrix(t) => round_all(&t, &cap, a, out)?,
        other => {
            return Err(CliError::Usage(format!(
                "{}: round needs a tt_vector or tt_matrix, got {}",
                a.input.display(),
                other.kind()
            )))
        }
    };
    Ok(Outcome {
        config: json!({
            "max_rank": a.max_rank,
            "ranks": a.ranks,
            "mode": format!("{:?}", a.mode).to_lowercase(),
        }),
        seed: None,
        inputs: vec![a.input.clone()],
        outputs,
        violation: None,
    })
}

fn round_all<T>(w: &T, cap: &RankCap, a: &RoundArgs, out: &mut dyn Write) -> CliResult<Vec<PathBuf>>
where
    T: Retractable + Into<Payload>,
{
    let modes: &[RoundMode] = match a.mode {
        RoundMode::Both => &[RoundMode::Literal, RoundMode::Orthogonal],
        RoundMode::Literal => &[RoundMode::Literal],
        RoundMode::Orthogonal => &[RoundMode::Orthogonal],
    };
    let input = w.to_train();
    let norm = input.norm();
    let mut rendered = Vec::new();
    for &mode in modes {
        let (rounded, report) = match mode {
            RoundMode::Literal => retract_literal(w, a.max_rank.expect("checked above"))?,
            _ => retract_orthogonal(w, cap)?,
        };
        let error = input.add(&rounded.to_train().scale(-1.0))?.norm();
        let name = if mode == RoundMode::Literal {
            "literal"
        } else {
            "orthogonal"
        };
        let path = if a.mode == RoundMode::Both {
            tagged(&a.output, name)
        } else {
            a.output.clone()
        };
        rounded.into().write(&path)?;
        render(out, name, &report, error, norm)?;
        rendered.push((name, error, path));
    }
    if let [(_, lit, _), (_, orth, _)] = rendered.as_slice() {
        emit(out, "comparison:")?;
        emit(out, format!("  literal error: {lit:.6e}"))?;
        emit(out, format!("  orthogonal error: {orth:.6e}"))?;
        let verdict = if lit > orth {
            format!("orthogonal lower by a factor {:.3}", lit / orth.max(f64::MIN_POSITIVE))
        } else if lit < orth {
            "literal lower".to_string()
        } else {
            "equal".to_string()
        };
        emit(out, format!("  {verdict}"))?;
    }
    Ok(rendered.into_iter().map(|(_, _, p)| p).collect())
}

fn render(out: &mut dyn Write, mode: &str, r: &RetractReport, error: f64, norm: f64) -> CliResult<()> {
    emit(out, format!("mode: {mode}"))?;
    emit(out, format!("  input ranks: {}", r.input_ranks))?;
    emit(out, format!("  output ranks: {}", r.output_ranks))?;
    emit(out, "  boundary  input  output  discarded energy")?;
    for (k, e) in r.per_core_discarded_energy.iter().enumerate() {
        emit(
            out,
            format!(
                "  {:>8}  {:>5}  {:>6}  {e:.6e}",
                k + 1,
                r.input_ranks.ranks()[k + 1],
                r.output_ranks.ranks()[k + 1]
            ),
        )?;
    }
    emit(out, format!("  discarded norm: {:.6e}", r.discarded_norm()))?;
    emit(out, format!("  error: {error:.6e}"))?;
    emit(
        out,
        format!("  relative error: {:.6e}", if norm > 0.0 { error / norm } else { 0.0 }),
    )
}
