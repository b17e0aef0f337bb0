use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use ttrank_core::nn::{
    build_lr_network, compare_init, CompareConfig, Dataset, LayerSpec, LossKind, Metrics, Network, StageMetrics,
    TrainConfig, TrainTrace,
};
use ttrank_core::rgd::ConvergenceTrace;

use super::{emit, Outcome};
use crate::config::{RunConfig, BUDGET_SEED_OFFSET};
use crate::container::Payload;
use crate::error::{CliError, CliResult};
use crate::fsio;

/// Config file plus the keys that may be overridden on the command line.
#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `sgd` or `adam`.
    #[arg(long)]
    pub optimizer: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub ranks: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub target_ranks: Option<Vec<usize>>,
    /// RGD step size for rank reduction.
    #[arg(long)]
    pub eta: Option<f64>,
    /// RGD step count for rank reduction.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Train only TT cores.
    #[arg(long)]
    pub freeze_non_tt: bool,
}

impl ConfigArgs {
    fn resolve(&self) -> CliResult<RunConfig> {
        RunConfig::resolve(
            self.config.as_deref(),
            RunConfig {
                lr: self.lr,
                epochs: self.epochs,
                batch: self.batch,
                seed: self.seed,
                optimizer: self.optimizer.clone(),
                ranks: self.ranks.clone(),
                target_ranks: self.target_ranks.clone(),
                eta: self.eta,
                steps: self.steps,
                freeze_non_tt: self.freeze_non_tt.then_some(true),
                ..RunConfig::default()
            },
        )
    }

    fn inputs(&self) -> Vec<PathBuf> {
        self.config.iter().cloned().collect()
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Training CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Validation CSV, evaluated after every epoch.
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Start from this network instead of building one from the config.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Trained network; the epoch trace goes to `<output>.trace`.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildLrArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Trained network whose TT layers are reduced.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Fine-tuned low-rank network; per-layer RGD traces go to
    /// `<output>.layer<k>.trace` and the report to `<output>.report`.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub val: PathBuf,
    /// Runs with seeds `seed, seed + 1, ...`.
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
    /// Report file.
    #[arg(short, long)]
    pub output: PathBuf,
}

fn load_network(path: &Path) -> CliResult<Network> {
    match Payload::read(path)? {
        Payload::Network(n) => Ok(n),
        other => Err(CliError::Usage(format!(
            "{}: expected a network, got {}",
            path.display(),
            other.kind()
        ))),
    }
}

fn load_data(path: &Path, net_out: usize, loss: LossKind) -> CliResult<Dataset> {
    fsio::read_dataset(path, (loss == LossKind::CrossEntropy).then_some(net_out))
}

fn config_json(cfg: &RunConfig) -> serde_json::Value {
    serde_json::to_value(cfg).expect("config serializes")
}

pub fn metrics_text(prefix: &str, m: &Metrics) -> String {
    let mut s = format!("{prefix}_loss={:e}", m.loss);
    if let Some(a) = m.accuracy {
        s.push_str(&format!(" {prefix}_accuracy={a:e}"));
    }
    s
}

fn stage_text(s: &StageMetrics) -> String {
    let mut t = metrics_text("train", &s.train);
    if let Some(v) = &s.val {
        t.push(' ');
        t.push_str(&metrics_text("val", v));
    }
    t
}

/// One `epoch=… train_loss=…` line per epoch.
pub fn epoch_trace_text(trace: &TrainTrace) -> String {
    trace
        .epochs
        .iter()
        .map(|e| {
            let s = StageMetrics {
                train: e.train,
                val: e.val,
            };
            format!("epoch={} {}\n", e.epoch, stage_text(&s))
        })
        .collect()
}

pub fn train(a: &TrainArgs, out: &mut dyn Write) -> CliResult<Outcome> {
    let cfg = a.cfg.resolve()?;
    let tc = cfg.train_config()?;
    let net = match &a.model {
        Some(p) => load_network(p)?,
        None => cfg.architecture()?.build(&cfg.ranks()?, cfg.seed())?,
    };
    let data = load_data(&a.data, net.out_dim(), net.loss_kind())?;
    let val = a
        .val
        .as_deref()
        .map(|p| load_data(p, net.out_dim(), net.loss_kind()))
        .transpose()?;
    let (trained, trace) = ttrank_core::nn::train(&net, &data, val.as_ref(), &tc)?;
    let trace_path = fsio::sibling(&a.output, ".trace");
    Payload::Network(trained.clone()).write(&a.output)?;
    fsio::write_atomic(&trace_path, epoch_trace_text(&trace).as_bytes())?;

    emit(out, format!("params: {}", trained.param_count()))?;
    emit(out, format!("epochs: {}", trace.epochs.len()))?;
    if let Some(last) = trace.last() {
        emit(
            out,
            format!(
                "final: {}",
                stage_text(&StageMetrics {
                    train: last.train,
                    val: last.val
                })
            ),
        )?;
    }
    let mut inputs = a.cfg.inputs();
    inputs.extend(a.model.iter().cloned());
    inputs.push(a.data.clone());
    inputs.extend(a.val.iter().cloned());
    Ok(Outcome {
        config: config_json(&cfg),
        seed: Some(tc.seed),
        inputs,
        outputs: vec![a.output.clone(), trace_path],
        violation: None,
    })
}

pub fn evaluate(a: &EvaluateArgs, out: &mut dyn Write) -> CliResult<Outcome> {
    let net = load_network(&a.model)?;
    let data = load_data(&a.data, net.out_dim(), net.loss_kind())?;
    let m = ttrank_core::nn::evaluate(&net, &data)?;
    emit(out, format!("samples: {}", data.len()))?;
    emit(out, format!("loss: {:e}", m.loss))?;
    if let Some(acc) = m.accuracy {
        emit(out, format!("accuracy: {acc:e}"))?;
    }
    Ok(Outcome::default())
}

/// Fraction of the truncation-induced drop won back by fine-tuning, on
/// accuracy for classifiers and on loss otherwise.
pub fn recovery(original: &Metrics, truncated: &Metrics, tuned: &Metrics) -> Option<f64> {
    let (o, t, f) = match (original.accuracy, truncated.accuracy, tuned.accuracy) {
        (Some(o), Some(t), Some(f)) => (o, t, f),
        _ => (-original.loss, -truncated.loss, -tuned.loss),
    };
    (o > t).then(|| (f - t) / (o - t))
}

fn trace_summary(t: &ConvergenceTrace) -> String {
    format!(
        "steps={} initial_loss={:e} final_loss={:e} ranks={}",
        t.len(),
        t.records()[0].loss,
        t.final_loss(),
        t.final_ranks()
    )
}

pub fn build_lr(a: &BuildLrArgs, out: &mut dyn Write) -> CliResult<Outcome> {
    let cfg = a.cfg.resolve()?;
    let rgd = cfg.rgd_config()?;
    let tc = cfg.train_config()?;
    let net = load_network(&a.model)?;
    let data = load_data(&a.data, net.out_dim(), net.loss_kind())?;
    let val = a
        .val
        .as_deref()
        .map(|p| load_data(p, net.out_dim(), net.loss_kind()))
        .transpose()?;
    let (lr, rep) = build_lr_network(&net, &rgd.target_ranks, &rgd, &tc, &data, val.as_ref())?;

    let mut lines = Vec::new();
    for ((k, trace), (before, after)) in rep
        .layer_traces
        .iter()
        .zip(rep.tt_params_before.iter().zip(&rep.tt_params_after))
    {
        lines.push(format!(
            "layer={k} tt_params={before}->{after} {}",
            trace_summary(trace)
        ));
    }
    lines.push(format!("params={}->{}", rep.params_before, rep.params_after));
    lines.push(format!("original {}", stage_text(&rep.original)));
    lines.push(format!("truncated {}", stage_text(&rep.truncated)));
    lines.push(format!("fine_tuned {}", stage_text(&rep.fine_tuned)));
    match recovery(&rep.original.train, &rep.truncated.train, &rep.fine_tuned.train) {
        Some(r) => lines.push(format!("recovered={r:e}")),
        None => lines.push("recovered=none (truncation caused no drop)".into()),
    }
    let report: String = lines.iter().map(|l| format!("{l}\n")).collect();

    let mut outputs = vec![a.output.clone()];
    Payload::Network(lr).write(&a.output)?;
    for (k, trace) in &rep.layer_traces {
        let p = fsio::sibling(&a.output, &format!(".layer{k}.trace"));
        fsio::write_atomic(&p, trace.to_text().as_bytes())?;
        outputs.push(p);
    }
    let report_path = fsio::sibling(&a.output, ".report");
    fsio::write_atomic(&report_path, report.as_bytes())?;
    outputs.push(report_path);
    for l in &lines {
        emit(out, l)?;
    }

    let mut inputs = a.cfg.inputs();
    inputs.push(a.model.clone());
    inputs.push(a.data.clone());
    inputs.extend(a.val.iter().cloned());
    Ok(Outcome {
        config: config_json(&cfg),
        seed: Some(tc.seed),
        inputs,
        outputs,
        violation: None,
    })
}

/// Score used to rank runs: validation accuracy, or negated loss for regression.
fn score(m: &StageMetrics) -> f64 {
    let v = m.val.as_ref().unwrap_or(&m.train);
    v.accuracy.unwrap_or(-v.loss)
}

pub fn compare(a: &CompareArgs, out: &mut dyn Write) -> CliResult<Outcome> {
    if a.runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    let cfg = a.cfg.resolve()?;
    let arch = cfg.architecture()?;
    let base = cfg.seed();
    let out_dim = match arch.layers.last().expect("non-empty architecture") {
        LayerSpec::Dense { outputs, .. } => *outputs,
        LayerSpec::TT { out_factors, .. } => out_factors.product(),
    };
    let data = load_data(&a.data, out_dim, arch.loss)?;
    let val = load_data(&a.val, out_dim, arch.loss)?;

    let mut lines = Vec::new();
    let (mut random, mut lowrank) = (Vec::new(), Vec::new());
    let mut wins = 0;
    for run in 0..a.runs {
        let seed = base + run as u64;
        let cc = CompareConfig {
            large_ranks: cfg.ranks()?,
            small_ranks: cfg.target_ranks()?,
            pretrain: TrainConfig {
                seed,
                ..cfg.pretrain_config()?
            },
            budget: TrainConfig {
                seed: seed + BUDGET_SEED_OFFSET,
                ..cfg.train_config()?
            },
            rgd: cfg.rgd_config()?,
            init_seed: seed,
        };
        let rep = compare_init(&arch, &cc, &data, Some(&val))?;
        let (r, l) = (score(&rep.random_init.final_metrics), score(&rep.lr_init.final_metrics));
        if l >= r {
            wins += 1;
        }
        random.push(r);
        lowrank.push(l);
        lines.push(format!(
            "run={run} seed={seed} params={} pretrained {} | random_init {} | lr_init {}",
            rep.lr_init.params,
            stage_text(&rep.pretrained),
            stage_text(&rep.random_init.final_metrics),
            stage_text(&rep.lr_init.final_metrics)
        ));
    }
    let metric = if arch.loss == LossKind::CrossEntropy {
        "val_accuracy"
    } else {
        "neg_val_loss"
    };
    for (name, v) in [("random_init", &random), ("lr_init", &lowrank)] {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let best = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        lines.push(format!("{name} mean_{metric}={mean:e} best_{metric}={best:e}"));
    }
    lines.push(format!("lr_init_at_least_random={wins}/{}", a.runs));
    let report: String = lines.iter().map(|l| format!("{l}\n")).collect();
    fsio::write_atomic(&a.output, report.as_bytes())?;
    for l in &lines {
        emit(out, l)?;
    }
    let mut inputs = a.cfg.inputs();
    inputs.push(a.data.clone());
    inputs.push(a.val.clone());
    Ok(Outcome {
        config: config_json(&cfg),
        seed: Some(base),
        inputs,
        outputs: vec![a.output.clone()],
        violation: None,
    })
}
