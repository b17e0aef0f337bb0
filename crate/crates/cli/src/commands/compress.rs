use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use clap::Args;
use serde_json::json;
use ttrank_core::retraction::Retractable;
use ttrank_core::rgd::{
    check_gradient_dominated, check_theorem1_bounds, rgd_compress, smoothness_constant, BoundReport, ConvergenceTrace,
    RgdConfig, Smoothness,
};
use ttrank_core::tt::RankProfile;

use super::{emit, Outcome};
use crate::container::Payload;
use crate::error::{CliError, CliResult};
use crate::fsio;

/// Reference value `ℒ*` for the bound checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossStar {
    /// Smallest loss seen on the trace.
    Best,
    Zero,
    Value(f64),
}

impl LossStar {
    pub fn resolve(self, trace: &ConvergenceTrace) -> f64 {
        match self {
            LossStar::Best => trace.best_loss(),
            LossStar::Zero => 0.0,
            LossStar::Value(v) => v,
        }
    }
}

impl FromStr for LossStar {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "best" => Ok(LossStar::Best),
            "zero" => Ok(LossStar::Zero),
            v => v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .map(LossStar::Value)
                .ok_or_else(|| format!("expected best, zero or a number, got {v:?}")),
        }
    }
}

fn parse_smoothness(s: &str) -> Result<Smoothness, String> {
    match s {
        "auto" => Ok(Smoothness::Auto),
        v => v
            .parse::<f64>()
            .map(Smoothness::Known)
            .map_err(|_| format!("expected auto or a number, got {v:?}")),
    }
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    /// TT vector or TT operator container.
    pub input: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub target_ranks: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    /// Maximum number of steps `T`.
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
    /// Smoothness constant `H`, or `auto` to estimate it.
    #[arg(long, default_value = "1", value_parser = parse_smoothness)]
    pub smoothness: Smoothness,
    /// Stop once the squared gradient norm falls to this value.
    #[arg(long)]
    pub stop_tol: Option<f64>,
    /// Check the gradient-norm and domination inequalities on the trace.
    #[arg(long)]
    pub check_bounds: bool,
    /// Domination constant `τ`.
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    /// `ℒ*` for the checks: `best`, `zero` or a number.
    #[arg(long, default_value = "zero")]
    pub loss_star: LossStar,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Trace file; defaults to the output path with `.trace` appended.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

pub fn run(a: &CompressArgs, out: &mut dyn Write) -> CliResult<Outcome> {
    let cfg = RgdConfig {
        eta: a.eta,
        max_steps: a.steps,
        target_ranks: RankProfile::new(a.target_ranks.clone())?,
        smoothness: a.smoothness,
        stop_tol: a.stop_tol,
    };
    if let Smoothness::Known(h) = cfg.smoothness {
        cfg.validate(h)?;
    }
    let payload = Payload::read(&a.input)?;
    let trace_path = a.trace.clone().unwrap_or_else(|| fsio::sibling(&a.output, ".trace"));
    let violation = match payload {
        Payload::TTVector(t) => compress(&t, &cfg, a, &trace_path, out)?,
        Payload::TTMatrix(t) => compress(&t, &cfg, a, &trace_path, out)?,
        other => {
            return Err(CliError::Usage(format!(
                "{}: compress needs a tt_vector or tt_matrix, got {}",
                a.input.display(),
                other.kind()
            )))
        }
    };
    Ok(Outcome {
        config: json!({
            "target_ranks": a.target_ranks,
            "eta": a.eta,
            "steps": a.steps,
            "smoothness": format!("{:?}", a.smoothness),
            "stop_tol": a.stop_tol,
            "check_bounds": a.check_bounds,
            "tau": a.tau,
            "loss_star": format!("{:?}", a.loss_star),
        }),
        seed: None,
        inputs: vec![a.input.clone()],
        outputs: vec![a.output.clone(), trace_path],
        violation,
    })
}

fn compress<T>(
    w: &T,
    cfg: &RgdConfig,
    a: &CompressArgs,
    trace_path: &std::path::Path,
    out: &mut dyn Write,
) -> CliResult<Option<String>>
where
    T: Retractable + Clone + Into<Payload>,
{
    let h = smoothness_constant(cfg, w)?;
    let (params_before, ranks_before) = (w.to_train().param_count(), w.to_train().ranks());
    let (result, trace) = rgd_compress(w, cfg)?;
    let (params_after, ranks_after) = (result.to_train().param_count(), result.to_train().ranks());
    result.into().write(&a.output)?;
    fsio::write_atomic(trace_path, trace.to_text().as_bytes())?;

    emit(out, format!("smoothness H: {h}"))?;
    emit(out, format!("ranks: {ranks_before} -> {ranks_after}"))?;
    emit(out, format!("params: {params_before} -> {params_after}"))?;
    emit(out, format!("steps: {}", trace.len()))?;
    emit(out, format!("initial loss: {:.6e}", trace.records()[0].loss))?;
    emit(out, format!("final loss: {:.6e}", trace.final_loss()))?;
    emit(out, format!("trace: {}", trace_path.display()))?;
    if !a.check_bounds {
        return Ok(None);
    }
    let report = bound_report(&trace, h, cfg.eta, a.tau, a.loss_star)?;
    let loss_star = a.loss_star.resolve(&trace);
    emit(out, format!("bound checks (ℒ* = {loss_star:e}, τ = {}):", a.tau))?;
    let mut failed = Vec::new();
    for (name, c) in report.checks() {
        let verdict = if c.ok { "PASS" } else { "FAIL" };
        emit(
            out,
            format!(
                "{verdict} {name}: observed={:e} bound={:e} slack={:e}",
                c.observed, c.bound, c.slack
            ),
        )?;
        if !c.ok {
            failed.push(name);
        }
    }
    Ok((!failed.is_empty()).then(|| format!("bound check failed: {}", failed.join(", "))))
}

/// Gradient-norm bounds and the domination inequality on one trace.
pub fn bound_report(
    trace: &ConvergenceTrace,
    h: f64,
    eta: f64,
    tau: f64,
    loss_star: LossStar,
) -> CliResult<BoundReport> {
    let loss_star = loss_star.resolve(trace);
    let t1 = check_theorem1_bounds(trace, h, eta, loss_star)?;
    let dom = check_gradient_dominated(trace, tau, loss_star)?;
    Ok(t1.merge(dom))
}
