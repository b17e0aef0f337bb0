use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::tt::RankProfile;

/// State of one iterate `𝒲̂^(t)` before step `t` is taken.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub step: usize,
    pub loss: f64,
    pub grad_norm_sq: f64,
    pub ranks: RankProfile,
}

/// Per-step history of an [`super::rgd_compress`] run.
///
/// Serialized as one `key=value` line per record followed by a `final` line:
///
/// ```text
/// step=0 loss=1.25e1 grad_norm_sq=2.5e1 ranks=1,3,3,1
/// final loss=1.25e1 ranks=1,3,3,1
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTrace {
    records: Vec<TraceRecord>,
    final_loss: f64,
    final_ranks: RankProfile,
}

impl ConvergenceTrace {
    pub fn new(records: Vec<TraceRecord>, final_loss: f64, final_ranks: RankProfile) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Data("a trace needs at least one record".into()));
        }
        for r in &records {
            if !(r.loss.is_finite() && r.grad_norm_sq.is_finite()) {
                return Err(Error::NonFinite(format!("trace record {}", r.step)));
            }
            if r.grad_norm_sq < 0.0 || r.loss < 0.0 {
                return Err(Error::Data(format!("negative value in trace record {}", r.step)));
            }
        }
        if !(final_loss.is_finite() && final_loss >= 0.0) {
            return Err(Error::Data(format!("invalid final loss {final_loss}")));
        }
        Ok(Self {
            records,
            final_loss,
            final_ranks,
        })
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    pub fn grad_norms_sq(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.grad_norm_sq).collect()
    }

    /// Loss of the returned iterate.
    pub fn final_loss(&self) -> f64 {
        self.final_loss
    }

    pub fn final_ranks(&self) -> &RankProfile {
        &self.final_ranks
    }

    /// Smallest loss seen, including the returned iterate.
    pub fn best_loss(&self) -> f64 {
        self.records.iter().map(|r| r.loss).fold(self.final_loss, f64::min)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            writeln!(
                s,
                "step={} loss={:e} grad_norm_sq={:e} ranks={}",
                r.step, r.loss, r.grad_norm_sq, r.ranks
            )
            .expect("writing to a String");
        }
        writeln!(s, "final loss={:e} ranks={}", self.final_loss, self.final_ranks).expect("writing to a String");
        s
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(self.to_text().as_bytes())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut records = Vec::new();
        let mut fin = None;
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = |what: &str| Error::Data(format!("trace line {}: {what}", n + 1));
            if fin.is_some() {
                return Err(bad("content after the final line"));
            }
            let mut fields = line.split_whitespace();
            let head = fields.next().ok_or_else(|| bad("empty"))?;
            let mut kv = std::collections::HashMap::new();
            for f in fields {
                let (k, v) = f.split_once('=').ok_or_else(|| bad("expected key=value"))?;
                kv.insert(k, v);
            }
            let float = |k: &str| -> Result<f64> {
                kv.get(k)
                    .ok_or_else(|| bad(&format!("missing {k}")))?
                    .parse()
                    .map_err(|_| bad(&format!("bad {k}")))
            };
            let ranks = || -> Result<RankProfile> {
                let v = kv.get("ranks").ok_or_else(|| bad("missing ranks"))?;
                let r = v
                    .split(',')
                    .map(|x| x.parse().map_err(|_| bad("bad ranks")))
                    .collect::<Result<_>>()?;
                RankProfile::new(r)
            };
            if head == "final" {
                fin = Some((float("loss")?, ranks()?));
            } else {
                let step = head
                    .strip_prefix("step=")
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad("expected step=<n> or final"))?;
                records.push(TraceRecord {
                    step,
                    loss: float("loss")?,
                    grad_norm_sq: float("grad_norm_sq")?,
                    ranks: ranks()?,
                });
            }
        }
        let (final_loss, final_ranks) = fin.ok_or_else(|| Error::Data("trace has no final line".into()))?;
        Self::new(records, final_loss, final_ranks)
    }

    pub fn read_from<R: BufRead>(mut r: R) -> Result<Self> {
        let mut s = String::new();
        r.read_to_string(&mut s)
            .map_err(|e| Error::Data(format!("reading trace: {e}")))?;
        Self::from_text(&s)
    }
}
