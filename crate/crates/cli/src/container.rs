//! The `TTRZ1` binary container.
//!
//! Layout: the five magic bytes `TTRZ1`, a little-endian `u32` byte length,
//! that many bytes of UTF-8 JSON metadata, then the payload as little-endian
//! `f64` values in the order the metadata declares. Dense data is row-major;
//! TT cores follow one another in train order, each in its stored layout;
//! a network stores each layer's weight followed by its bias.

use std::path::Path;

use serde::{Deserialize, Serialize};
use ttrank_core::nn::{DenseLayer, Layer, Network, TTLayer};
use ttrank_core::tensor::{DenseTensor, Matrix, Shape};
use ttrank_core::tt::{TTCore3, TTCore4, TTMatrix, TTVector};

use crate::config::{activation_name, loss_name, parse_activation, parse_loss};
use crate::error::{CliError, CliResult};
use crate::fsio;

pub const MAGIC: &[u8; 5] = b"TTRZ1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Dense(DenseTensor),
    TTVector(TTVector),
    TTMatrix(TTMatrix),
    Network(Network),
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    #[serde(flatten)]
    body: Body,
    /// Number of `f64` values in the payload.
    values: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Body {
    Dense {
        shape: Vec<usize>,
    },
    TtVector {
        shape: Vec<usize>,
        ranks: Vec<usize>,
    },
    TtMatrix {
        in_factors: Vec<usize>,
        out_factors: Vec<usize>,
        ranks: Vec<usize>,
    },
    Network {
        loss: String,
        layers: Vec<LayerMeta>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LayerMeta {
    Dense {
        inputs: usize,
        outputs: usize,
        activation: String,
    },
    Tt {
        in_factors: Vec<usize>,
        out_factors: Vec<usize>,
        ranks: Vec<usize>,
        activation: String,
    },
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Dense(_) => "dense",
            Payload::TTVector(_) => "tt_vector",
            Payload::TTMatrix(_) => "tt_matrix",
            Payload::Network(_) => "network",
        }
    }

    /// Stored floating-point values.
    pub fn param_count(&self) -> usize {
        match self {
            Payload::Dense(t) => t.data().len(),
            Payload::TTVector(t) => t.param_count(),
            Payload::TTMatrix(t) => t.param_count(),
            Payload::Network(n) => n.param_count(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut values: Vec<f64> = Vec::with_capacity(self.param_count());
        let body = match self {
            Payload::Dense(t) => {
                values.extend_from_slice(t.data());
                Body::Dense {
                    shape: t.shape().dims().to_vec(),
                }
            }
            Payload::TTVector(t) => {
                t.cores().iter().for_each(|c| values.extend_from_slice(c.data()));
                Body::TtVector {
                    shape: t.shape().dims().to_vec(),
                    ranks: t.ranks().ranks().to_vec(),
                }
            }
            Payload::TTMatrix(t) => {
                push_operator(t, &mut values);
                Body::TtMatrix {
                    in_factors: t.in_shape().dims().to_vec(),
                    out_factors: t.out_shape().dims().to_vec(),
                    ranks: t.ranks().ranks().to_vec(),
                }
            }
            Payload::Network(n) => {
                let layers = n
                    .layers()
                    .iter()
                    .map(|l| match l {
                        Layer::Dense(d) => {
                            values.extend_from_slice(d.weight.data());
                            values.extend_from_slice(&d.bias);
                            LayerMeta::Dense {
                                inputs: d.weight.cols(),
                                outputs: d.weight.rows(),
                                activation: activation_name(d.activation).into(),
                            }
                        }
                        Layer::TT(t) => {
                            push_operator(&t.weight, &mut values);
                            values.extend_from_slice(&t.bias);
                            LayerMeta::Tt {
                                in_factors: t.weight.in_shape().dims().to_vec(),
                                out_factors: t.weight.out_shape().dims().to_vec(),
                                ranks: t.weight.ranks().ranks().to_vec(),
                                activation: activation_name(t.activation).into(),
                            }
                        }
                    })
                    .collect();
                Body::Network {
                    loss: loss_name(n.loss_kind()).into(),
                    layers,
                }
            }
        };
        let header = Header {
            format_version: FORMAT_VERSION,
            body,
            values: values.len(),
        };
        let meta = serde_json::to_vec(&header).expect("metadata serializes");
        let mut out = Vec::with_capacity(MAGIC.len() + 4 + meta.len() + 8 * values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(&meta);
        values.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        out
    }

    pub fn decode(bytes: &[u8]) -> CliResult<Payload> {
        let rest = bytes
            .strip_prefix(MAGIC)
            .ok_or_else(|| corrupt("missing TTRZ1 magic"))?;
        if rest.len() < 4 {
            return Err(corrupt("truncated metadata length"));
        }
        let (len, rest) = rest.split_at(4);
        let len = u32::from_le_bytes(len.try_into().expect("four bytes")) as usize;
        if rest.len() < len {
            return Err(corrupt("truncated metadata"));
        }
        let (meta, data) = rest.split_at(len);
        let header: Header = serde_json::from_slice(meta).map_err(|e| corrupt(&format!("metadata: {e}")))?;
        if header.format_version != FORMAT_VERSION {
            return Err(corrupt(&format!(
                "unsupported format version {}",
                header.format_version
            )));
        }
        if Some(data.len()) != header.values.checked_mul(8) {
            return Err(corrupt(&format!(
                "payload has {} bytes, metadata declares {} values",
                data.len(),
                header.values
            )));
        }
        let mut values = Reader {
            values: data
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes"))),
        };
        let payload = build(header.body, &mut values).map_err(|e| corrupt(&e.to_string()))?;
        if values.values.next().is_some() {
            return Err(corrupt("payload longer than the metadata implies"));
        }
        Ok(payload)
    }

    pub fn read(path: &Path) -> CliResult<Payload> {
        let bytes = fsio::read_bytes(path)?;
        Payload::decode(&bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        fsio::write_atomic(path, &self.encode())
    }
}

fn corrupt(msg: &str) -> CliError {
    CliError::Io(format!("corrupt container: {msg}"))
}

fn push_operator(t: &TTMatrix, values: &mut Vec<f64>) {
    t.cores().iter().for_each(|c| values.extend_from_slice(c.data()));
}

struct Reader<I> {
    values: I,
}

impl<I: Iterator<Item = f64>> Reader<I> {
    fn take(&mut self, n: usize) -> CliResult<Vec<f64>> {
        let v: Vec<f64> = self.values.by_ref().take(n).collect();
        if v.len() != n {
            return Err(corrupt("payload shorter than the metadata implies"));
        }
        Ok(v)
    }
}

fn check_ranks(ranks: &[usize], order: usize) -> CliResult<()> {
    if ranks.len() != order + 1 {
        return Err(corrupt(&format!("{} ranks for {order} cores", ranks.len())));
    }
    Ok(())
}

fn read_operator<I: Iterator<Item = f64>>(
    in_f: &[usize],
    out_f: &[usize],
    ranks: &[usize],
    r: &mut Reader<I>,
) -> CliResult<TTMatrix> {
    if in_f.len() != out_f.len() {
        return Err(corrupt("input and output factorizations differ in length"));
    }
    check_ranks(ranks, in_f.len())?;
    let cores = (0..in_f.len())
        .map(|k| {
            let n = out_f[k] * in_f[k] * ranks[k] * ranks[k + 1];
            Ok(TTCore4::new(out_f[k], in_f[k], ranks[k], ranks[k + 1], r.take(n)?)?)
        })
        .collect::<CliResult<_>>()?;
    Ok(TTMatrix::new(cores)?)
}

fn build<I: Iterator<Item = f64>>(body: Body, r: &mut Reader<I>) -> CliResult<Payload> {
    Ok(match body {
        Body::Dense { shape } => {
            let shape = Shape::new(shape)?;
            let n = shape.num_elements();
            Payload::Dense(DenseTensor::new(shape, r.take(n)?)?)
        }
        Body::TtVector { shape, ranks } => {
            check_ranks(&ranks, shape.len())?;
            let cores = shape
                .iter()
                .enumerate()
                .map(|(k, &n)| {
                    Ok(TTCore3::new(
                        n,
                        ranks[k],
                        ranks[k + 1],
                        r.take(n * ranks[k] * ranks[k + 1])?,
                    )?)
                })
                .collect::<CliResult<_>>()?;
            Payload::TTVector(TTVector::new(cores)?)
        }
        Body::TtMatrix {
            in_factors,
            out_factors,
            ranks,
        } => Payload::TTMatrix(read_operator(&in_factors, &out_factors, &ranks, r)?),
        Body::Network { loss, layers } => {
            let layers = layers
                .into_iter()
                .map(|meta| {
                    Ok(match meta {
                        LayerMeta::Dense {
                            inputs,
                            outputs,
                            activation,
                        } => {
                            let w = Matrix::new(outputs, inputs, r.take(inputs * outputs)?)?;
                            Layer::Dense(DenseLayer::new(w, r.take(outputs)?, parse_activation(&activation)?)?)
                        }
                        LayerMeta::Tt {
                            in_factors,
                            out_factors,
                            ranks,
                            activation,
                        } => {
                            let w = read_operator(&in_factors, &out_factors, &ranks, r)?;
                            let bias = r.take(w.out_dim())?;
                            Layer::TT(TTLayer::new(w, bias, parse_activation(&activation)?)?)
                        }
                    })
                })
                .collect::<CliResult<_>>()?;
            Payload::Network(Network::new(layers, parse_loss(&loss)?)?)
        }
    })
}

/// Human-readable description for `ttrank info`.
pub fn describe(p: &Payload) -> Vec<String> {
    let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    let mut lines = vec![format!("kind: {}", p.kind())];
    match p {
        Payload::Dense(t) => {
            lines.push(format!("shape: {}", list(t.shape().dims())));
            lines.push(format!("elements: {}", t.data().len()));
        }
        Payload::TTVector(t) => {
            lines.push(format!("shape: {}", list(t.shape().dims())));
            lines.push(format!("ranks: {}", t.ranks()));
            lines.push(format!("elements: {}", t.shape().num_elements()));
        }
        Payload::TTMatrix(t) => {
            lines.push(format!("in_factors: {} ({})", list(t.in_shape().dims()), t.in_dim()));
            lines.push(format!("out_factors: {} ({})", list(t.out_shape().dims()), t.out_dim()));
            lines.push(format!("ranks: {}", t.ranks()));
            lines.push(format!("dense_params: {}", t.in_dim() * t.out_dim()));
        }
        Payload::Network(n) => {
            lines.push(format!("loss: {}", loss_name(n.loss_kind())));
            for (k, l) in n.layers().iter().enumerate() {
                lines.push(match l {
                    Layer::Dense(d) => format!(
                        "layer {k}: dense {}->{} {} params={}",
                        d.weight.cols(),
                        d.weight.rows(),
                        activation_name(d.activation),
                        l.param_count()
                    ),
                    Layer::TT(t) => format!(
                        "layer {k}: tt {}->{} in_factors={} out_factors={} ranks={} {} params={}",
                        t.weight.in_dim(),
                        t.weight.out_dim(),
                        list(t.weight.in_shape().dims()),
                        list(t.weight.out_shape().dims()),
                        t.weight.ranks(),
                        activation_name(t.activation),
                        l.param_count()
                    ),
                });
            }
        }
    }
    lines.push(format!("params: {}", p.param_count()));
    lines
}

impl From<TTVector> for Payload {
    fn from(t: TTVector) -> Self {
        Payload::TTVector(t)
    }
}

impl From<TTMatrix> for Payload {
    fn from(t: TTMatrix) -> Self {
        Payload::TTMatrix(t)
    }
}

impl From<Network> for Payload {
    fn from(n: Network) -> Self {
        Payload::Network(n)
    }
}
