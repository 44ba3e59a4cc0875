//! Dense ReLU networks with backpropagation, masked MSE loss and RMSprop.
//!
//! Weight matrices are stored `(inputs, outputs)` so a batch laid out as
//! `(samples, features)` propagates with a single matrix product per layer.
//!
//! # Parameter file layout
//!
//! All integers are little-endian `u32`, all parameters little-endian `f64`.
//!
//! ```text
//! magic       4 bytes  b"QNET"
//! version     u32      currently 1
//! n_sizes     u32      number of layer sizes (layers + 1)
//! sizes       u32 * n_sizes
//! per layer   weights (inputs x outputs, row-major) then bias (outputs)
//! ```

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use thiserror::Error;

/// Input, hidden and output widths of the Q-network.
pub const Q_NETWORK_LAYERS: [usize; 4] = [5, 128, 64, 7];

pub const FORMAT_MAGIC: &[u8; 4] = b"QNET";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum NeuralError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("non-finite {what} during training")]
    NonFinite { what: &'static str },
    #[error("architecture mismatch: expected {expected:?}, found {found:?}")]
    ArchitectureMismatch { expected: Vec<usize>, found: Vec<usize> },
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated parameter data at byte offset {offset}: needed {needed} more bytes")]
    Truncated { offset: usize, needed: usize },
    #[error("{extra} trailing bytes after offset {offset}")]
    TrailingBytes { offset: usize, extra: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: Array2::zeros((inputs, outputs)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.ncols()
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(self.bias.iter())
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.bias.iter_mut())
    }
}

/// Multi-layer perceptron: ReLU hidden layers, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// The Q-function approximator, `5 -> 128 -> 64 -> 7`.
pub type QNetwork = Mlp;

/// Per-parameter gradients, shaped like the network.
pub type Gradients = Vec<Dense>;

fn sizes_of(layers: &[Dense]) -> Vec<usize> {
    let mut sizes = Vec::with_capacity(layers.len() + 1);
    if let Some(first) = layers.first() {
        sizes.push(first.inputs());
    }
    sizes.extend(layers.iter().map(Dense::outputs));
    sizes
}

impl Mlp {
    /// He-uniform weights `U(-sqrt(6/fan_in), sqrt(6/fan_in))`, zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "a network needs at least input and output sizes");
        let layers = sizes
            .windows(2)
            .map(|w| {
                let limit = (6.0 / w[0] as f64).sqrt();
                Dense {
                    weights: Array2::from_shape_simple_fn((w[0], w[1]), || rng.gen_range(-limit..limit)),
                    bias: Array1::zeros(w[1]),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn q_network<R: Rng + ?Sized>(rng: &mut R) -> QNetwork {
        Self::new(&Q_NETWORK_LAYERS, rng)
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "a network needs at least input and output sizes");
        Self {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        }
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self, NeuralError> {
        if layers.is_empty() {
            return Err(NeuralError::Dimension("network has no layers".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(NeuralError::Dimension(format!(
                    "layer {i} emits {} values but layer {} expects {}",
                    pair[0].outputs(),
                    i + 1,
                    pair[1].inputs()
                )));
            }
        }
        if let Some((i, l)) = layers.iter().enumerate().find(|(_, l)| l.bias.len() != l.outputs()) {
            return Err(NeuralError::Dimension(format!(
                "layer {i} bias has {} entries for {} outputs",
                l.bias.len(),
                l.outputs()
            )));
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn sizes(&self) -> Vec<usize> {
        sizes_of(&self.layers)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameters in file order: per layer, row-major weights then bias.
    pub fn flat_params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.params().copied()).collect()
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(Dense::params_mut)
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.params().all(|v| v.is_finite()))
    }

    /// Batched forward pass over rows of `input`.
    pub fn forward(&self, input: ArrayView2<f64>) -> Result<Array2<f64>, NeuralError> {
        self.check_input(input)?;
        Ok(self.activations(input).pop().expect("at least one layer"))
    }

    pub fn forward_one(&self, input: &[f64]) -> Result<Vec<f64>, NeuralError> {
        let view = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| NeuralError::Dimension(e.to_string()))?;
        Ok(self.forward(view)?.into_raw_vec_and_offset().0)
    }

    fn check_input(&self, input: ArrayView2<f64>) -> Result<(), NeuralError> {
        if input.ncols() != self.input_dim() {
            return Err(NeuralError::Dimension(format!(
                "input has {} features, network expects {}",
                input.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Output of every layer; hidden outputs are post-ReLU.
    fn activations(&self, input: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let last = self.layers.len() - 1;
        let mut outs: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = match outs.last() {
                Some(prev) => prev.dot(&layer.weights),
                None => input.dot(&layer.weights),
            };
            z += &layer.bias;
            if i < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            outs.push(z);
        }
        outs
    }

    /// Mean squared error between `targets` and the outputs selected by
    /// `actions`, with its gradient with respect to every parameter.
    pub fn loss_and_gradients(
        &self,
        batch: ArrayView2<f64>,
        targets: &[f64],
        actions: &[usize],
    ) -> Result<(f64, Gradients), NeuralError> {
        self.check_input(batch)?;
        let n = batch.nrows();
        if n == 0 {
            return Err(NeuralError::EmptyBatch);
        }
        if targets.len() != n || actions.len() != n {
            return Err(NeuralError::Dimension(format!(
                "batch of {n} rows with {} targets and {} actions",
                targets.len(),
                actions.len()
            )));
        }
        if let Some(&a) = actions.iter().find(|&&a| a >= self.output_dim()) {
            return Err(NeuralError::Dimension(format!(
                "action {a} outside {} outputs",
                self.output_dim()
            )));
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(NeuralError::NonFinite { what: "target" });
        }

        let acts = self.activations(batch);
        let output = acts.last().expect("at least one layer");
        let mut delta = Array2::<f64>::zeros(output.raw_dim());
        let mut loss = 0.0;
        for (row, (&a, &y)) in actions.iter().zip(targets).enumerate() {
            let err = output[[row, a]] - y;
            loss += err * err;
            delta[[row, a]] = 2.0 * err / n as f64;
        }
        loss /= n as f64;
        if !loss.is_finite() {
            return Err(NeuralError::NonFinite { what: "loss" });
        }

        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let weights = if i == 0 {
                batch.t().dot(&delta)
            } else {
                acts[i - 1].t().dot(&delta)
            };
            let grad = Dense {
                weights,
                bias: delta.sum_axis(Axis(0)),
            };
            if i > 0 {
                let mut upstream = delta.dot(&self.layers[i].weights.t());
                ndarray::Zip::from(&mut upstream)
                    .and(&acts[i - 1])
                    .for_each(|d, &h| {
                        if h <= 0.0 {
                            *d = 0.0;
                        }
                    });
                delta = upstream;
            }
            grads.push(grad);
        }
        grads.reverse();
        if grads.iter().any(|g| g.params().any(|v| !v.is_finite())) {
            return Err(NeuralError::NonFinite { what: "gradient" });
        }
        Ok((loss, grads))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let sizes = self.sizes();
        let mut buf = Vec::with_capacity(12 + 4 * sizes.len() + 8 * self.parameter_count());
        buf.extend_from_slice(FORMAT_MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
        for s in &sizes {
            buf.extend_from_slice(&(*s as u32).to_le_bytes());
        }
        for v in self.flat_params() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf
    }

    /// Decodes a parameter file. When `expected` is given the header sizes
    /// must match it exactly.
    pub fn from_bytes(bytes: &[u8], expected: Option<&[usize]>) -> Result<Self, NeuralError> {
        let mut reader = ByteReader { bytes, offset: 0 };
        let magic: [u8; 4] = reader.take(4)?.try_into().expect("4 bytes");
        if &magic != FORMAT_MAGIC {
            return Err(NeuralError::BadMagic(magic));
        }
        let version = reader.u32()?;
        if version != FORMAT_VERSION {
            return Err(NeuralError::UnsupportedVersion(version));
        }
        let count = reader.u32()? as usize;
        let sizes = (0..count)
            .map(|_| reader.u32().map(|s| s as usize))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(exp) = expected {
            if exp != sizes.as_slice() {
                return Err(NeuralError::ArchitectureMismatch {
                    expected: exp.to_vec(),
                    found: sizes,
                });
            }
        }
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(NeuralError::Dimension(format!("invalid layer sizes {sizes:?}")));
        }
        let mut net = Mlp::zeros(&sizes);
        let needed = 8 * net.parameter_count();
        let data = reader.take(needed)?;
        for (p, chunk) in net.params_mut().zip(data.chunks_exact(8)) {
            *p = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        }
        if reader.offset != bytes.len() {
            return Err(NeuralError::TrailingBytes {
                offset: reader.offset,
                extra: bytes.len() - reader.offset,
            });
        }
        Ok(net)
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NeuralError> {
        let available = self.bytes.len() - self.offset;
        if available < n {
            return Err(NeuralError::Truncated {
                offset: self.offset,
                needed: n - available,
            });
        }
        let out = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, NeuralError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

/// RMSprop with a per-parameter running average of squared gradients:
/// `v <- decay * v + (1 - decay) * g^2`, `p <- p - lr * g / (sqrt(v) + eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsProp {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
    square_avg: Vec<Dense>,
}

impl RmsProp {
    pub fn new(net: &Mlp, learning_rate: f64, decay: f64, epsilon: f64) -> Self {
        let sizes = net.sizes();
        Self {
            learning_rate,
            decay,
            epsilon,
            square_avg: Mlp::zeros(&sizes).layers,
        }
    }

    pub fn square_avg(&self) -> impl Iterator<Item = &f64> {
        self.square_avg.iter().flat_map(Dense::params)
    }

    pub fn apply(&mut self, net: &mut Mlp, grads: &[Dense]) -> Result<(), NeuralError> {
        if sizes_of(grads) != net.sizes() || sizes_of(&self.square_avg) != net.sizes() {
            return Err(NeuralError::ArchitectureMismatch {
                expected: net.sizes(),
                found: sizes_of(grads),
            });
        }
        let (lr, decay, eps) = (self.learning_rate, self.decay, self.epsilon);
        let grad_iter = grads.iter().flat_map(Dense::params);
        let avg_iter = self.square_avg.iter_mut().flat_map(Dense::params_mut);
        for ((p, &g), v) in net.params_mut().zip(grad_iter).zip(avg_iter) {
            *v = decay * *v + (1.0 - decay) * g * g;
            *p -= lr * g / (v.sqrt() + eps);
        }
        Ok(())
    }
}

/// One optimisation step on the masked MSE loss. Returns the loss measured
/// before the update.
pub fn train_step(
    net: &mut Mlp,
    opt: &mut RmsProp,
    batch_obs: ArrayView2<f64>,
    targets: &[f64],
    actions: &[usize],
) -> Result<f64, NeuralError> {
    let (loss, grads) = net.loss_and_gradients(batch_obs, targets, actions)?;
    opt.apply(net, &grads)?;
    if !net.is_finite() {
        return Err(NeuralError::NonFinite { what: "parameter" });
    }
    Ok(loss)
}

/// Copies every parameter of `main` into `target`.
pub fn sync_target(main: &Mlp, target: &mut Mlp) -> Result<(), NeuralError> {
    if main.sizes() != target.sizes() {
        return Err(NeuralError::ArchitectureMismatch {
            expected: main.sizes(),
            found: target.sizes(),
        });
    }
    target.layers.clone_from(&main.layers);
    Ok(())
}
