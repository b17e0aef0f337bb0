use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{LossKind, Network};
use crate::error::{Error, Result};

/// Supervision for a batch: real-valued targets or integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// Row-major `n × dim` values.
    Values {
        values: Vec<f64>,
        dim: usize,
    },
    Labels {
        labels: Vec<usize>,
        classes: usize,
    },
}

impl Targets {
    pub(super) fn check(&self, net: &Network, batch: usize) -> Result<()> {
        match (net.loss_kind(), self) {
            (LossKind::Mae, Targets::Values { values, dim }) => {
                if *dim != net.out_dim() || values.len() != batch * dim {
                    return Err(Error::LabelMismatch(format!(
                        "{} target values of width {dim} for {batch} samples and {} outputs",
                        values.len(),
                        net.out_dim()
                    )));
                }
            }
            (LossKind::CrossEntropy, Targets::Labels { labels, classes }) => {
                if *classes != net.out_dim() || labels.len() != batch {
                    return Err(Error::LabelMismatch(format!(
                        "{} labels over {classes} classes for {batch} samples and {} outputs",
                        labels.len(),
                        net.out_dim()
                    )));
                }
                if let Some(l) = labels.iter().find(|&&l| l >= *classes) {
                    return Err(Error::LabelMismatch(format!(
                        "label {l} out of range for {classes} classes"
                    )));
                }
            }
            (LossKind::Mae, _) => return Err(Error::LabelMismatch("MAE needs real-valued targets".into())),
            (LossKind::CrossEntropy, _) => {
                return Err(Error::LabelMismatch("cross-entropy needs integer labels".into()))
            }
        }
        Ok(())
    }

    fn select(&self, idx: &[usize]) -> Targets {
        match self {
            Targets::Values { values, dim } => Targets::Values {
                values: idx
                    .iter()
                    .flat_map(|&i| &values[i * dim..(i + 1) * dim])
                    .copied()
                    .collect(),
                dim: *dim,
            },
            Targets::Labels { labels, classes } => Targets::Labels {
                labels: idx.iter().map(|&i| labels[i]).collect(),
                classes: *classes,
            },
        }
    }
}

/// Row-major feature matrix with matching targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<f64>,
    features: usize,
    targets: Targets,
}

impl Dataset {
    pub fn new(inputs: Vec<f64>, features: usize, targets: Targets) -> Result<Self> {
        if features == 0 || inputs.is_empty() || !inputs.len().is_multiple_of(features) {
            return Err(Error::Data(format!(
                "{} values do not form rows of {features} features",
                inputs.len()
            )));
        }
        let n = inputs.len() / features;
        let ok = match &targets {
            Targets::Values { values, dim } => *dim > 0 && values.len() == n * dim,
            Targets::Labels { labels, classes } => labels.len() == n && labels.iter().all(|l| l < classes),
        };
        if !ok {
            return Err(Error::Data(format!("targets do not match {n} samples")));
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset features".into()));
        }
        Ok(Self {
            inputs,
            features,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.features
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    /// Rows `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> Dataset {
        let f = self.features;
        Dataset {
            inputs: idx
                .iter()
                .flat_map(|&i| &self.inputs[i * f..(i + 1) * f])
                .copied()
                .collect(),
            features: f,
            targets: self.targets.select(idx),
        }
    }

    /// Seeded shuffle, then the first `⌈fraction·n⌉` rows go to the first part.
    pub fn split(&self, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        let n = self.len();
        let k = (fraction * n as f64).ceil() as usize;
        if !(0.0..=1.0).contains(&fraction) || k == 0 || k >= n {
            return Err(Error::Config(format!(
                "split fraction {fraction} leaves an empty part of {n} rows"
            )));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Ok((self.select(&idx[..k]), self.select(&idx[k..])))
    }

    /// Isotropic Gaussian clusters with centers drawn from `N(0, I)`.
    ///
    /// Each sample is `center[class] + spread·N(0, I)`; classes are interleaved.
    pub fn gaussian_blobs(per_class: usize, classes: usize, features: usize, spread: f64, seed: u64) -> Result<Self> {
        Self::blob_mixture(per_class, classes, 1, features, spread, seed)
    }

    /// Like [`Dataset::gaussian_blobs`] with `clusters` centers per class, so
    /// classes are not linearly separable once `clusters > 1`.
    ///
    /// Sample `s` of class `c` comes from cluster `s mod clusters`.
    pub fn blob_mixture(
        per_class: usize,
        classes: usize,
        clusters: usize,
        features: usize,
        spread: f64,
        seed: u64,
    ) -> Result<Self> {
        if per_class == 0 || classes < 2 || clusters == 0 || features == 0 || spread.is_nan() || spread < 0.0 {
            return Err(Error::Config(
                "blobs need samples, at least two classes, clusters, features and spread ≥ 0".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers: Vec<f64> = (0..classes * clusters * features)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        let mut inputs = Vec::with_capacity(per_class * classes * features);
        let mut labels = Vec::with_capacity(per_class * classes);
        for s in 0..per_class {
            for c in 0..classes {
                let center = &centers[(c * clusters + s % clusters) * features..][..features];
                for &m in center {
                    let noise: f64 = rng.sample(StandardNormal);
                    inputs.push(m + spread * noise);
                }
                labels.push(c);
            }
        }
        Self::new(inputs, features, Targets::Labels { labels, classes })
    }

    /// Reads `x0..xn,y0..ym` (regression) or `x0..xn,label` (classification).
    ///
    /// For labels, the class count is `max label + 1` unless `classes` is given.
    pub fn read_csv<R: Read>(reader: R, classes: Option<usize>) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Data(format!("CSV header: {e}")))?
            .clone();
        let names: Vec<&str> = headers.iter().map(str::trim).collect();
        let features = names.iter().take_while(|h| h.starts_with('x')).count();
        let is_labels = names.len() == features + 1 && names[features] == "label";
        let outputs = names.len() - features;
        for (k, h) in names.iter().enumerate() {
            let want = if k < features {
                format!("x{k}")
            } else if is_labels {
                "label".to_string()
            } else {
                format!("y{}", k - features)
            };
            if *h != want {
                return Err(Error::Data(format!("CSV column {k} is {h:?}, expected {want:?}")));
            }
        }
        if features == 0 || outputs == 0 {
            return Err(Error::Data("CSV needs x columns and y or label columns".into()));
        }
        let (mut inputs, mut ys, mut labels) = (Vec::new(), Vec::new(), Vec::new());
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Data(format!("CSV row {}: {e}", line + 2)))?;
            if rec.len() != names.len() {
                return Err(Error::Data(format!("CSV row {} has {} fields", line + 2, rec.len())));
            }
            for (k, field) in rec.iter().enumerate() {
                let field = field.trim();
                let bad = || Error::Data(format!("CSV row {} column {k}: cannot parse {field:?}", line + 2));
                if k >= features && is_labels {
                    labels.push(field.parse::<usize>().map_err(|_| bad())?);
                } else {
                    let v = field.parse::<f64>().map_err(|_| bad())?;
                    if k < features {
                        inputs.push(v)
                    } else {
                        ys.push(v)
                    }
                }
            }
        }
        let targets = if is_labels {
            let classes = classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
            Targets::Labels { labels, classes }
        } else {
            Targets::Values {
                values: ys,
                dim: outputs,
            }
        };
        Self::new(inputs, features, targets)
    }

    /// Writes the format read by [`Dataset::read_csv`], floats in shortest
    /// round-trip form.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let io = |e: csv::Error| Error::Data(format!("writing CSV: {e}"));
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.features).map(|k| format!("x{k}")).collect();
        match &self.targets {
            Targets::Values { dim, .. } => header.extend((0..*dim).map(|k| format!("y{k}"))),
            Targets::Labels { .. } => header.push("label".into()),
        }
        w.write_record(&header).map_err(io)?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.inputs[i * self.features..(i + 1) * self.features]
                .iter()
                .map(|v| v.to_string())
                .collect();
            match &self.targets {
                Targets::Values { values, dim } => {
                    row.extend(values[i * dim..(i + 1) * dim].iter().map(|v| v.to_string()))
                }
                Targets::Labels { labels, .. } => row.push(labels[i].to_string()),
            }
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Data(format!("writing CSV: {e}")))
    }
}
