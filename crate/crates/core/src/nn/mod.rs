//! Dense and TT layers, networks with exact backpropagation, training, and
//! the dense → TT → low-rank TT conversion pipeline.

mod data;
mod pipeline;
mod train;

pub use data::{Dataset, Targets};
pub use pipeline::{
    build_lr_network, compare_init, Architecture, CompareConfig, CompareReport, LayerSpec, LrReport, RunSummary,
    StageMetrics,
};
pub use train::{evaluate, train, EpochMetrics, Metrics, Optimizer, TrainConfig, TrainTrace};

use crate::error::{Error, Result};
use crate::tensor::Matrix;
use crate::tt::{ModeFactorization, RankCap, TTMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
    /// Identity in the forward pass; the cross-entropy loss applies the softmax.
    SoftmaxAtLoss,
}

impl Activation {
    fn apply(self, z: &mut [f64]) {
        if self == Activation::Relu {
            z.iter_mut().for_each(|v| *v = v.max(0.0));
        }
    }

    /// Multiplies `grad` by the derivative at pre-activation `z` (ReLU'(0) = 0).
    fn backprop(self, z: &[f64], grad: &mut [f64]) {
        if self == Activation::Relu {
            grad.iter_mut().zip(z).for_each(|(g, &v)| {
                if v <= 0.0 {
                    *g = 0.0
                }
            });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Mae,
    CrossEntropy,
}

/// `activation(W·x + b)` with a dense `out × in` weight.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weight: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::ShapeMismatch(format!(
                "bias of length {} for a {}x{} weight",
                bias.len(),
                weight.rows(),
                weight.cols()
            )));
        }
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }
}

/// `activation(𝒲·x + b)` with the weight held as a TT operator.
#[derive(Debug, Clone, PartialEq)]
pub struct TTLayer {
    pub weight: TTMatrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl TTLayer {
    pub fn new(weight: TTMatrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weight.out_dim() {
            return Err(Error::ShapeMismatch(format!(
                "bias of length {} for an operator with {} outputs",
                bias.len(),
                weight.out_dim()
            )));
        }
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    /// TT-decomposes the weight of a dense layer; bias and activation are kept.
    pub fn from_dense(
        layer: &DenseLayer,
        in_f: &ModeFactorization,
        out_f: &ModeFactorization,
        cap: &RankCap,
    ) -> Result<Self> {
        let weight = TTMatrix::from_dense(&layer.weight, in_f, out_f, cap)?;
        Self::new(weight, layer.bias.clone(), layer.activation)
    }

    /// Dense layer with the reconstructed weight.
    pub fn to_dense(&self) -> DenseLayer {
        DenseLayer {
            weight: self.weight.full(),
            bias: self.bias.clone(),
            activation: self.activation,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(DenseLayer),
    TT(TTLayer),
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        match self {
            Layer::Dense(l) => l.weight.cols(),
            Layer::TT(l) => l.weight.in_dim(),
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            Layer::Dense(l) => l.weight.rows(),
            Layer::TT(l) => l.weight.out_dim(),
        }
    }

    pub fn activation(&self) -> Activation {
        match self {
            Layer::Dense(l) => l.activation,
            Layer::TT(l) => l.activation,
        }
    }

    pub fn bias(&self) -> &[f64] {
        match self {
            Layer::Dense(l) => &l.bias,
            Layer::TT(l) => &l.bias,
        }
    }

    /// Weight entries (dense) or core entries (TT) plus the bias.
    pub fn param_count(&self) -> usize {
        match self {
            Layer::Dense(l) => l.weight.data().len() + l.bias.len(),
            Layer::TT(l) => l.weight.param_count() + l.bias.len(),
        }
    }

    /// Pre-activations for a row-major batch.
    fn affine(&self, x: &[f64], batch: usize) -> Result<Vec<f64>> {
        let (i, o) = (self.in_dim(), self.out_dim());
        if x.len() != batch * i {
            return Err(Error::ShapeMismatch(format!(
                "expected {batch}x{i} inputs, got {} values",
                x.len()
            )));
        }
        let mut z = match self {
            Layer::Dense(l) => {
                let w = l.weight.data();
                let mut z = vec![0.0; batch * o];
                for (zr, xr) in z.chunks_exact_mut(o).zip(x.chunks_exact(i)) {
                    for (zv, wr) in zr.iter_mut().zip(w.chunks_exact(i)) {
                        *zv = wr.iter().zip(xr).map(|(a, b)| a * b).sum();
                    }
                }
                z
            }
            Layer::TT(l) => l.weight.apply_batch(x, batch)?,
        };
        for zr in z.chunks_exact_mut(o) {
            zr.iter_mut().zip(self.bias()).for_each(|(v, b)| *v += b);
        }
        Ok(z)
    }

    /// `activation(affine(x))`
    pub fn forward_batch(&self, x: &[f64], batch: usize) -> Result<Vec<f64>> {
        let mut z = self.affine(x, batch)?;
        self.activation().apply(&mut z);
        Ok(z)
    }

    /// Parameter groups in a fixed order: weight (or cores `1..K`), then bias.
    fn params(&self) -> Vec<&[f64]> {
        match self {
            Layer::Dense(l) => vec![l.weight.data(), &l.bias],
            Layer::TT(l) => l
                .weight
                .cores()
                .iter()
                .map(|c| c.data())
                .chain([l.bias.as_slice()])
                .collect(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Layer::Dense(l) => vec![l.weight.data_mut(), &mut l.bias],
            Layer::TT(l) => l
                .weight
                .cores_mut()
                .iter_mut()
                .map(|c| c.data_mut())
                .chain([l.bias.as_mut_slice()])
                .collect(),
        }
    }
}

/// Kind of a parameter group, used to freeze parts of a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    DenseWeight,
    TTCore,
    Bias,
}

/// Gradients laid out like [`Network::params`].
pub type Gradients = Vec<Vec<f64>>;

/// An ordered stack of dense and TT layers with one loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    loss_kind: LossKind,
}

impl Network {
    pub fn new(layers: Vec<Layer>, loss_kind: LossKind) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidShape("a network needs at least one layer".into()));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::ShapeMismatch(format!(
                    "layer {k} outputs {} values but layer {} expects {}",
                    pair[0].out_dim(),
                    k + 1,
                    pair[1].in_dim()
                )));
            }
        }
        for (k, l) in layers.iter().enumerate() {
            if l.activation() == Activation::SoftmaxAtLoss
                && (k + 1 != layers.len() || loss_kind != LossKind::CrossEntropy)
            {
                return Err(Error::Config(
                    "softmax-at-loss is only valid on the output layer of a cross-entropy net".into(),
                ));
            }
        }
        Ok(Self { layers, loss_kind })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn loss_kind(&self) -> LossKind {
        self.loss_kind
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Same network with every TT layer replaced by its reconstructed dense twin.
    pub fn densify(&self) -> Network {
        let layers = self
            .layers
            .iter()
            .map(|l| match l {
                Layer::TT(t) => Layer::Dense(t.to_dense()),
                d => d.clone(),
            })
            .collect();
        Network {
            layers,
            loss_kind: self.loss_kind,
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward_batch(x, 1)
    }

    /// Output-layer values for a row-major batch (logits for cross-entropy).
    pub fn forward_batch(&self, x: &[f64], batch: usize) -> Result<Vec<f64>> {
        let mut a = x.to_vec();
        for l in &self.layers {
            a = l.forward_batch(&a, batch)?;
        }
        Ok(a)
    }

    /// Class probabilities for a cross-entropy net, raw outputs otherwise.
    pub fn predict_batch(&self, x: &[f64], batch: usize) -> Result<Vec<f64>> {
        let mut y = self.forward_batch(x, batch)?;
        if self.loss_kind == LossKind::CrossEntropy {
            y.chunks_exact_mut(self.out_dim()).for_each(softmax_in_place);
        }
        Ok(y)
    }

    /// Every trainable parameter group, in a fixed order.
    pub fn params(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    /// Kinds of the groups returned by [`Network::params`].
    pub fn param_kinds(&self) -> Vec<ParamKind> {
        self.layers
            .iter()
            .flat_map(|l| match l {
                Layer::Dense(_) => vec![ParamKind::DenseWeight, ParamKind::Bias],
                Layer::TT(t) => {
                    let mut v = vec![ParamKind::TTCore; t.weight.order()];
                    v.push(ParamKind::Bias);
                    v
                }
            })
            .collect()
    }

    /// Mean loss over the batch and its gradient for every parameter group.
    ///
    /// MAE averages `|y − ŷ|` over all output entries and uses the subgradient
    /// with `sign(0) = 0`. Cross-entropy averages `−log softmax(z)_label` over
    /// samples.
    pub fn loss_and_gradients(&self, x: &[f64], targets: &Targets, batch: usize) -> Result<(f64, Gradients)> {
        targets.check(self, batch)?;
        // forward, keeping what the backward pass needs
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut stages = Vec::with_capacity(self.layers.len());
        let mut a = x.to_vec();
        if a.len() != batch * self.in_dim() {
            return Err(Error::ShapeMismatch(format!(
                "expected {batch}x{} inputs, got {} values",
                self.in_dim(),
                a.len()
            )));
        }
        for l in &self.layers {
            let z = match l {
                Layer::TT(t) => {
                    let s = t.weight.contract_forward(&a, batch)?;
                    let mut z = s[s.len() - 1].clone();
                    for zr in z.chunks_exact_mut(t.bias.len()) {
                        zr.iter_mut().zip(&t.bias).for_each(|(v, b)| *v += b);
                    }
                    stages.push(Some(s));
                    z
                }
                Layer::Dense(_) => {
                    stages.push(None);
                    l.affine(&a, batch)?
                }
            };
            let mut out = z.clone();
            l.activation().apply(&mut out);
            inputs.push(std::mem::replace(&mut a, out));
            pre.push(z);
        }

        let (loss, mut delta) = output_loss(self.loss_kind, &a, targets, self.out_dim(), batch);

        let mut grads: Vec<Vec<Vec<f64>>> = Vec::with_capacity(self.layers.len());
        for (k, l) in self.layers.iter().enumerate().rev() {
            l.activation().backprop(&pre[k], &mut delta);
            let (o, i) = (l.out_dim(), l.in_dim());
            let mut db = vec![0.0; o];
            for dr in delta.chunks_exact(o) {
                db.iter_mut().zip(dr).for_each(|(b, d)| *b += d);
            }
            let x_in = &inputs[k];
            let (mut groups, dx) = match l {
                Layer::Dense(d) => {
                    let mut dw = vec![0.0; o * i];
                    let mut dx = vec![0.0; batch * i];
                    for (b, dr) in delta.chunks_exact(o).enumerate() {
                        let xr = &x_in[b * i..(b + 1) * i];
                        let dxr = &mut dx[b * i..(b + 1) * i];
                        for (r, &dv) in dr.iter().enumerate() {
                            if dv == 0.0 {
                                continue;
                            }
                            dw[r * i..(r + 1) * i]
                                .iter_mut()
                                .zip(xr)
                                .for_each(|(w, x)| *w += dv * x);
                            let wr = &d.weight.data()[r * i..(r + 1) * i];
                            dxr.iter_mut().zip(wr).for_each(|(g, w)| *g += dv * w);
                        }
                    }
                    (vec![dw], dx)
                }
                Layer::TT(t) => {
                    let s = stages[k].as_ref().expect("stages kept for TT layers");
                    t.weight.contract_backward(s, &delta, batch)
                }
            };
            groups.push(db);
            grads.push(groups);
            delta = dx;
        }
        grads.reverse();
        Ok((loss, grads.into_iter().flatten().collect()))
    }
}

fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    z.iter_mut().for_each(|v| *v /= s);
}

/// Loss value and its gradient with respect to the network output.
fn output_loss(kind: LossKind, y: &[f64], targets: &Targets, out: usize, batch: usize) -> (f64, Vec<f64>) {
    match (kind, targets) {
        (LossKind::Mae, Targets::Values { values, .. }) => {
            let n = (batch * out) as f64;
            let loss = y.iter().zip(values).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
            let grad = y
                .iter()
                .zip(values)
                .map(|(a, b)| {
                    let d = a - b;
                    if d > 0.0 {
                        1.0 / n
                    } else if d < 0.0 {
                        -1.0 / n
                    } else {
                        0.0
                    }
                })
                .collect();
            (loss, grad)
        }
        (LossKind::CrossEntropy, Targets::Labels { labels, .. }) => {
            let mut grad = y.to_vec();
            let mut loss = 0.0;
            for (g, &label) in grad.chunks_exact_mut(out).zip(labels) {
                let m = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + g.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                loss += lse - g[label];
                g.iter_mut().for_each(|v| *v = (*v - lse).exp() / batch as f64);
                g[label] -= 1.0 / batch as f64;
            }
            (loss / batch as f64, grad)
        }
        _ => unreachable!("targets checked against the loss kind"),
    }
}
