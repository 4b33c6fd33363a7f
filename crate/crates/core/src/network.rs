//! Dense feedforward regressor: ReLU hidden layers, a single linear output
//! unit, inverted dropout, and hand-derived backpropagation including L1/L2
//! weight-penalty gradients.
//!
//! Layer `l` computes `z = a·W + b` with `W` of shape `in_dim × out_dim`,
//! then `a' = g(z)`, then (train mode only) `a' ⊙ mask` where surviving
//! entries of the mask equal `1/(1 − rate)`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Normalizer, SampleRecord, NUM_FEATURES};
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{Matrix, ShapeError, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Linear => z,
        }
    }

    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    /// Dropout rate applied to this layer's output in train mode.
    pub dropout_after: f64,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation, dropout_after: f64) -> Self {
        LayerSpec {
            in_dim,
            out_dim,
            activation,
            dropout_after,
        }
    }

    /// `hidden` ReLU layers of `units` each, every one followed by dropout
    /// at `dropout`, then the linear scalar output.
    pub fn stack(inputs: usize, units: usize, hidden: usize, dropout: f64) -> Vec<LayerSpec> {
        let mut specs = Vec::with_capacity(hidden + 1);
        let mut prev = inputs;
        for _ in 0..hidden {
            specs.push(LayerSpec::new(prev, units, Activation::Relu, dropout));
            prev = units;
        }
        specs.push(LayerSpec::new(prev, 1, Activation::Linear, 0.0));
        specs
    }
}

pub fn validate_specs(specs: &[LayerSpec]) -> Result<()> {
    let Some(last) = specs.last() else {
        return Err(Error::Contract("network needs at least one layer".into()));
    };
    for (l, s) in specs.iter().enumerate() {
        if s.in_dim == 0 || s.out_dim == 0 {
            return Err(ShapeError::new("layer spec", format!("layer {l}"), "zero width").into());
        }
        if !(0.0..1.0).contains(&s.dropout_after) {
            return Err(Error::Contract(format!(
                "layer {l}: dropout rate {} not in [0, 1)",
                s.dropout_after
            )));
        }
    }
    for (l, w) in specs.windows(2).enumerate() {
        if w[0].out_dim != w[1].in_dim {
            return Err(ShapeError::new(
                "layer chain",
                format!("layer {l} out {}", w[0].out_dim),
                format!("layer {} in {}", l + 1, w[1].in_dim),
            )
            .into());
        }
    }
    if last.activation != Activation::Linear || last.out_dim != 1 || last.dropout_after != 0.0 {
        return Err(Error::Contract(
            "final layer must be linear with a single output and no dropout".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    specs: Vec<LayerSpec>,
    weights: Vec<Matrix>,
    biases: Vec<Vector>,
}

impl Network {
    /// Weights drawn from `N(0, 2/in_dim)`, biases zero.
    pub fn init(specs: &[LayerSpec], seed: u64) -> Result<Self> {
        validate_specs(specs)?;
        let mut rng = rng::seeded(seed);
        let mut weights = Vec::with_capacity(specs.len());
        for s in specs {
            let normal = Normal::new(0.0, (2.0 / s.in_dim as f64).sqrt())
                .expect("finite positive std");
            let data = (0..s.in_dim * s.out_dim)
                .map(|_| normal.sample(&mut rng))
                .collect();
            weights.push(Matrix::new(s.in_dim, s.out_dim, data)?);
        }
        let biases = specs.iter().map(|s| Vector::zeros(s.out_dim)).collect();
        Ok(Network {
            specs: specs.to_vec(),
            weights,
            biases,
        })
    }

    pub fn from_parts(specs: Vec<LayerSpec>, weights: Vec<Matrix>, biases: Vec<Vector>) -> Result<Self> {
        validate_specs(&specs)?;
        if weights.len() != specs.len() || biases.len() != specs.len() {
            return Err(ShapeError::new(
                "Network::from_parts",
                format!("{} layers", specs.len()),
                format!("{} weights, {} biases", weights.len(), biases.len()),
            )
            .into());
        }
        for (l, s) in specs.iter().enumerate() {
            if weights[l].rows() != s.in_dim || weights[l].cols() != s.out_dim {
                return Err(ShapeError::new("layer weights", format!("{}x{}", s.in_dim, s.out_dim), weights[l].shape()).into());
            }
            if biases[l].len() != s.out_dim {
                return Err(ShapeError::new("layer bias", s.out_dim, biases[l].len()).into());
            }
        }
        Ok(Network {
            specs,
            weights,
            biases,
        })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vector] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Matrix] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Vector] {
        &mut self.biases
    }

    pub fn input_dim(&self) -> usize {
        self.specs[0].in_dim
    }

    pub fn num_params(&self) -> usize {
        self.specs.iter().map(|s| s.in_dim * s.out_dim + s.out_dim).sum()
    }

    /// Parameter tensors in canonical order `W₀, b₀, W₁, b₁, …`.
    pub fn param_slices(&self) -> impl Iterator<Item = &[f64]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
    }

    pub fn param_slices_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w.as_mut_slice(), b.as_mut_slice()])
    }

    /// Hash of every parameter's bit pattern.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for s in self.param_slices() {
            for x in s {
                h = (h ^ x.to_bits()).wrapping_mul(0x0000_0100_0000_01b3);
                h ^= h >> 29;
            }
        }
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Inference,
}

#[derive(Debug, Clone)]
struct LayerCache {
    pre: Matrix,
    /// Post-activation output after dropout.
    out: Matrix,
    mask: Option<Matrix>,
}

/// Everything `backward` needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    mode: Mode,
    fingerprint: u64,
    input: Matrix,
    layers: Vec<LayerCache>,
}

impl ForwardCache {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Dropout mask applied after `layer`, if any.
    pub fn mask(&self, layer: usize) -> Option<&Matrix> {
        self.layers.get(layer).and_then(|l| l.mask.as_ref())
    }

    /// Output of `layer` as seen by the next layer.
    pub fn activation(&self, layer: usize) -> &Matrix {
        &self.layers[layer].out
    }
}

pub fn forward(net: &Network, x: &Matrix, mode: Mode, dropout_seed: u64) -> Result<(Vector, ForwardCache)> {
    if x.cols() != net.input_dim() {
        return Err(ShapeError::new("forward", x.shape(), format!("{} inputs", net.input_dim())).into());
    }
    let mut rng = rng::seeded(dropout_seed);
    let mut layers: Vec<LayerCache> = Vec::with_capacity(net.specs.len());
    for (l, spec) in net.specs.iter().enumerate() {
        let prev = if l == 0 { x } else { &layers[l - 1].out };
        let mut pre = prev.matmul(&net.weights[l])?;
        pre.add_row_broadcast_in_place(&net.biases[l])?;
        let mut out = pre.elementwise(|z| spec.activation.apply(z));
        let mask = if mode == Mode::Train && spec.dropout_after > 0.0 {
            let keep = 1.0 - spec.dropout_after;
            let scale = 1.0 / keep;
            let mut m = Matrix::zeros(out.rows(), out.cols());
            for v in m.as_mut_slice() {
                if rng.random::<f64>() < keep {
                    *v = scale;
                }
            }
            out = out.hadamard(&m)?;
            Some(m)
        } else {
            None
        };
        layers.push(LayerCache { pre, out, mask });
    }
    let pred = layers.last().expect("validated non-empty").out.column_vector()?;
    Ok((
        pred,
        ForwardCache {
            mode,
            fingerprint: net.fingerprint(),
            input: x.clone(),
            layers,
        },
    ))
}

/// Inference-mode forward pass without keeping activations.
pub fn predict(net: &Network, x: &Matrix) -> Result<Vector> {
    if x.cols() != net.input_dim() {
        return Err(ShapeError::new("predict", x.shape(), format!("{} inputs", net.input_dim())).into());
    }
    let mut a = x.clone();
    for (l, spec) in net.specs.iter().enumerate() {
        let mut z = a.matmul(&net.weights[l])?;
        z.add_row_broadcast_in_place(&net.biases[l])?;
        z.map_in_place(|v| spec.activation.apply(v));
        a = z;
    }
    Ok(a.column_vector()?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    #[default]
    Mse,
    Mae,
}

fn check_lengths(op: &'static str, pred: &Vector, target: &Vector) -> Result<()> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(ShapeError::new(op, pred.len(), target.len()).into());
    }
    Ok(())
}

/// Mean of `(target − pred)²`.
pub fn loss_mse(pred: &Vector, target: &Vector) -> Result<f64> {
    check_lengths("loss_mse", pred, target)?;
    let sum: f64 = pred.iter().zip(target.iter()).map(|(p, t)| (t - p) * (t - p)).sum();
    Ok(sum / pred.len() as f64)
}

/// Mean of `|target − pred|`.
pub fn loss_mae(pred: &Vector, target: &Vector) -> Result<f64> {
    check_lengths("loss_mae", pred, target)?;
    let sum: f64 = pred.iter().zip(target.iter()).map(|(p, t)| (t - p).abs()).sum();
    Ok(sum / pred.len() as f64)
}

impl LossKind {
    pub fn value(self, pred: &Vector, target: &Vector) -> Result<f64> {
        match self {
            LossKind::Mse => loss_mse(pred, target),
            LossKind::Mae => loss_mae(pred, target),
        }
    }

    fn gradient(self, pred: f64, target: f64, n: f64) -> f64 {
        let r = pred - target;
        match self {
            LossKind::Mse => 2.0 * r / n,
            LossKind::Mae => sign(r) / n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RegConfig {
    pub l1: f64,
    pub l2: f64,
}

impl RegConfig {
    pub const NONE: RegConfig = RegConfig { l1: 0.0, l2: 0.0 };

    pub fn validate(&self) -> Result<()> {
        if self.l1 >= 0.0 && self.l2 >= 0.0 {
            Ok(())
        } else {
            Err(Error::config(format!("penalty coefficients must be non-negative: {self:?}")))
        }
    }

    pub fn is_off(&self) -> bool {
        self.l1 == 0.0 && self.l2 == 0.0
    }
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `l2·Σ w² + l1·Σ |w|` over all weight matrices. Biases are not penalized.
pub fn penalty(net: &Network, reg: &RegConfig) -> f64 {
    if reg.is_off() {
        return 0.0;
    }
    let (mut sq, mut abs) = (0.0, 0.0);
    for w in &net.weights {
        for &x in w.as_slice() {
            sq += x * x;
            abs += x.abs();
        }
    }
    reg.l2 * sq + reg.l1 * abs
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vector>,
}

impl GradientSet {
    pub fn zeros_like(net: &Network) -> Self {
        GradientSet {
            weights: net.weights.iter().map(|w| Matrix::zeros(w.rows(), w.cols())).collect(),
            biases: net.biases.iter().map(|b| Vector::zeros(b.len())).collect(),
        }
    }

    /// Same canonical order as [`Network::param_slices`].
    pub fn slices(&self) -> impl Iterator<Item = &[f64]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
    }

    pub fn is_congruent(&self, net: &Network) -> bool {
        self.weights.len() == net.weights.len()
            && self.biases.len() == net.biases.len()
            && self.slices().zip(net.param_slices()).all(|(g, p)| g.len() == p.len())
    }
}

/// Gradients of `MSE + penalty` with respect to every parameter.
pub fn backward(net: &Network, cache: &ForwardCache, target: &Vector, reg: &RegConfig) -> Result<(GradientSet, f64)> {
    backward_with_loss(net, cache, target, reg, LossKind::Mse)
}

/// As [`backward`] with a selectable data loss. Returns the gradients and
/// the objective value `loss + penalty`. Dropout masks are replayed from
/// the cache; the L1 subgradient at zero is zero.
pub fn backward_with_loss(
    net: &Network,
    cache: &ForwardCache,
    target: &Vector,
    reg: &RegConfig,
    loss: LossKind,
) -> Result<(GradientSet, f64)> {
    if cache.mode != Mode::Train {
        return Err(Error::Contract("backward needs a train-mode forward cache".into()));
    }
    if cache.layers.len() != net.specs.len() || cache.fingerprint != net.fingerprint() {
        return Err(Error::Contract(
            "forward cache does not belong to the current network parameters".into(),
        ));
    }
    let out = &cache.layers.last().expect("non-empty").out;
    if out.rows() != target.len() {
        return Err(ShapeError::new("backward", out.shape(), target.len()).into());
    }
    let pred = out.column_vector()?;
    let n = target.len() as f64;
    let objective = loss.value(&pred, target)? + penalty(net, reg);

    let seed: Vec<f64> = pred
        .iter()
        .zip(target.iter())
        .map(|(&p, &t)| loss.gradient(p, t, n))
        .collect();
    // The output layer is linear, so dL/dz equals dL/dpred.
    let mut delta = Matrix::new(target.len(), 1, seed)?;

    let depth = net.specs.len();
    let mut gw = Vec::with_capacity(depth);
    let mut gb = Vec::with_capacity(depth);
    for l in (0..depth).rev() {
        let prev = if l == 0 { &cache.input } else { &cache.layers[l - 1].out };
        let mut dw = prev.t_matmul(&delta)?;
        if !reg.is_off() {
            for (g, &w) in dw.as_mut_slice().iter_mut().zip(net.weights[l].as_slice()) {
                *g += 2.0 * reg.l2 * w + reg.l1 * sign(w);
            }
        }
        gw.push(dw);
        gb.push(delta.column_sums());
        if l > 0 {
            let below = &cache.layers[l - 1];
            let act = net.specs[l - 1].activation;
            let mut d_prev = delta.matmul_t(&net.weights[l])?;
            if let Some(mask) = &below.mask {
                d_prev = d_prev.hadamard(mask)?;
            }
            for (d, &z) in d_prev.as_mut_slice().iter_mut().zip(below.pre.as_slice()) {
                *d *= act.derivative(z);
            }
            delta = d_prev;
        }
    }
    gw.reverse();
    gb.reverse();
    Ok((
        GradientSet {
            weights: gw,
            biases: gb,
        },
        objective,
    ))
}

/// SOC estimates in percent for raw measurement rows, clamped to `[0, 100]`.
pub fn predict_soc(net: &Network, norm: &Normalizer, raw: &[SampleRecord]) -> Result<Vector> {
    if net.input_dim() != NUM_FEATURES {
        return Err(Error::Contract(format!(
            "network takes {} inputs; SOC prediction needs {NUM_FEATURES}",
            net.input_dim()
        )));
    }
    if raw.is_empty() {
        return Ok(Vector::default());
    }
    let x = norm.apply_records(raw)?;
    let y = predict(net, &x)?;
    Ok(y.iter().map(|v| v.clamp(0.0, 100.0)).collect())
}
