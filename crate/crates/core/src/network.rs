//! Multilayer perceptron: state, forward pass, losses, and delta
//! backpropagation through either the transposed weights or a frozen
//! random matrix.
//!
//! Weight matrix `k` has shape `(n_{k-1} + 1) x n_k`; the extra last row is
//! the bias, fed by a constant-1 input column so bias updates flow through
//! the same per-synapse kernel as everything else.

use crate::error::{Error, Result};
use crate::numerics::{elementwise_map, matmul, transpose, Matrix};
use crate::rng::SeededRng;
use serde::Serialize;
use std::io::{Read, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative from the stored trace: sigmoid' from the activation
    /// value, relu' from the pre-activation (0 at exactly z == 0).
    #[inline]
    pub fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Activation::Sigmoid => write!(f, "sigmoid"),
            Activation::Relu => write!(f, "relu"),
        }
    }
}

/// How deltas travel backwards: through the forward weights' transpose or
/// through a fixed random matrix drawn at init.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BackwardMode {
    Transposed,
    Const,
}

impl std::fmt::Display for BackwardMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BackwardMode::Transposed => write!(f, "transposed"),
            BackwardMode::Const => write!(f, "const"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layer_sizes: Vec<usize>,
    /// One `(n_prev + 1) x n_k` matrix per layer; last row is the bias.
    weights: Vec<Matrix>,
    /// Fixed backward matrices (`n_prev x n_k`, no bias row); never trained.
    backward: Option<Vec<Matrix>>,
    hidden_activation: Activation,
    output_activation: Activation,
}

/// Per-layer pre-activations and activations for one minibatch;
/// `activations[0]` is the input batch.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub pre_activations: Vec<Matrix>,
    pub activations: Vec<Matrix>,
}

impl ForwardTrace {
    pub fn outputs(&self) -> &Matrix {
        self.activations
            .last()
            .expect("trace has at least the input batch")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Mse,
    CrossEntropy,
}

impl Network {
    /// Weights i.i.d. uniform in `[-a, a]` with `a = 1 / sqrt(n_prev)`,
    /// bias rows zero. With `const_backward` a matching set of frozen
    /// backward matrices is drawn from the same distribution, after all
    /// forward weights (draw order is part of the reproducibility
    /// contract). Output activation is always sigmoid.
    pub fn init_with_rng(
        layer_sizes: &[usize],
        hidden_activation: Activation,
        const_backward: bool,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least input and output layers, got {layer_sizes:?}"
            )));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::InvalidConfig("zero-width layer".to_string()));
        }
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        for w in layer_sizes.windows(2) {
            let (n_prev, n_out) = (w[0], w[1]);
            let a = 1.0 / (n_prev as f64).sqrt();
            let mut m = Matrix::zeros(n_prev + 1, n_out);
            for i in 0..n_prev {
                for v in m.row_mut(i) {
                    *v = rng.uniform(-a, a);
                }
            }
            weights.push(m);
        }
        let backward = if const_backward {
            let mut bs = Vec::with_capacity(layer_sizes.len() - 1);
            for w in layer_sizes.windows(2) {
                let (n_prev, n_out) = (w[0], w[1]);
                let a = 1.0 / (n_prev as f64).sqrt();
                bs.push(Matrix::from_fn(n_prev, n_out, |_, _| rng.uniform(-a, a)));
            }
            Some(bs)
        } else {
            None
        };
        Ok(Network {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            backward,
            hidden_activation,
            output_activation: Activation::Sigmoid,
        })
    }

    pub fn init(
        layer_sizes: &[usize],
        hidden_activation: Activation,
        const_backward: bool,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = SeededRng::new(seed);
        Network::init_with_rng(layer_sizes, hidden_activation, const_backward, &mut rng)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn num_weight_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self, layer: usize) -> &Matrix {
        &self.weights[layer]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut Matrix {
        &mut self.weights[layer]
    }

    pub fn backward_matrices(&self) -> Option<&[Matrix]> {
        self.backward.as_deref()
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    /// `[x, 1] * W`: accumulate input columns in ascending order, bias last.
    fn affine(&self, x: &Matrix, layer: usize) -> Matrix {
        let w = &self.weights[layer];
        let n_in = w.rows() - 1;
        debug_assert_eq!(x.cols(), n_in);
        let mut z = Matrix::zeros(x.rows(), w.cols());
        for r in 0..x.rows() {
            let xrow = x.row(r);
            let zrow = z.row_mut(r);
            for (i, &xi) in xrow.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                for (zv, &wv) in zrow.iter_mut().zip(w.row(i)) {
                    *zv += xi * wv;
                }
            }
            for (zv, &bv) in zrow.iter_mut().zip(w.row(n_in)) {
                *zv += bv;
            }
        }
        z
    }

    /// Forward pass over a `batch x n_0` input matrix; hidden layers use
    /// the hidden activation, the final layer sigmoid.
    pub fn forward(&self, inputs: &Matrix) -> Result<ForwardTrace> {
        if inputs.cols() != self.layer_sizes[0] {
            return Err(Error::ShapeMismatch {
                op: "forward",
                detail: format!(
                    "input width {} vs first layer {}",
                    inputs.cols(),
                    self.layer_sizes[0]
                ),
            });
        }
        let layers = self.weights.len();
        let mut pre = Vec::with_capacity(layers);
        let mut act = Vec::with_capacity(layers + 1);
        act.push(inputs.clone());
        for k in 0..layers {
            let z = self.affine(&act[k], k);
            let f = if k + 1 == layers {
                self.output_activation
            } else {
                self.hidden_activation
            };
            let y = elementwise_map(&z, |v| f.apply(v))?;
            pre.push(z);
            act.push(y);
        }
        Ok(ForwardTrace {
            pre_activations: pre,
            activations: act,
        })
    }

    /// Deltas for every weight layer, back to front. `deltas[k]` pairs with
    /// weight layer `k`. The derivative factor comes analytically from the
    /// trace and is never quantized.
    pub fn backward_deltas(
        &self,
        trace: &ForwardTrace,
        output_delta: &Matrix,
        mode: BackwardMode,
    ) -> Result<Vec<Matrix>> {
        let layers = self.weights.len();
        let n_out = *self.layer_sizes.last().unwrap();
        if output_delta.cols() != n_out {
            return Err(Error::ShapeMismatch {
                op: "backward_deltas",
                detail: format!(
                    "delta width {} vs output layer {n_out}",
                    output_delta.cols()
                ),
            });
        }
        if mode == BackwardMode::Const && self.backward.is_none() {
            return Err(Error::MissingBackwardMatrices);
        }
        let mut deltas = vec![Matrix::zeros(0, 0); layers];
        deltas[layers - 1] = output_delta.clone();
        for k in (1..layers).rev() {
            let routing = match mode {
                // Forward weights without the bias row.
                BackwardMode::Transposed => self.weights[k].slice_rows(0, self.layer_sizes[k]),
                BackwardMode::Const => self.backward.as_ref().unwrap()[k].clone(),
            };
            let mut prop = matmul(&deltas[k], &transpose(&routing))?;
            let z = &trace.pre_activations[k - 1];
            let y = &trace.activations[k];
            for r in 0..prop.rows() {
                let zrow = z.row(r);
                let yrow = y.row(r);
                let prow = prop.row_mut(r);
                for j in 0..prow.len() {
                    prow[j] *= self.hidden_activation.derivative(zrow[j], yrow[j]);
                }
            }
            deltas[k - 1] = prop;
        }
        Ok(deltas)
    }

    // --- checkpointing -----------------------------------------------------
    //
    // Flat binary container, all integers and floats little-endian:
    //   magic "AMNCKPT1" | u32 layer count | u32 sizes...
    //   | u8 hidden | u8 output | u8 has_backward
    //   | f64 weight data per layer, row-major | f64 backward data per layer

    const MAGIC: &'static [u8; 8] = b"AMNCKPT1";

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(Self::MAGIC);
        out.extend_from_slice(&(self.layer_sizes.len() as u32).to_le_bytes());
        for &s in &self.layer_sizes {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
        out.push(match self.hidden_activation {
            Activation::Sigmoid => 0,
            Activation::Relu => 1,
        });
        out.push(match self.output_activation {
            Activation::Sigmoid => 0,
            Activation::Relu => 1,
        });
        out.push(self.backward.is_some() as u8);
        for w in &self.weights {
            for &v in w.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        if let Some(bs) = &self.backward {
            for b in bs {
                for &v in b.data() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = bytes;
        let mut take = |n: usize| -> Result<&[u8]> {
            if cur.len() < n {
                return Err(Error::BadCheckpoint("unexpected end of data".to_string()));
            }
            let (head, rest) = cur.split_at(n);
            cur = rest;
            Ok(head)
        };
        if take(8)? != Self::MAGIC {
            return Err(Error::BadCheckpoint("wrong magic".to_string()));
        }
        let n_layers = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        if n_layers < 2 {
            return Err(Error::BadCheckpoint(format!("{n_layers} layers")));
        }
        let mut sizes = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            sizes.push(u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize);
        }
        let decode_act = |b: u8| match b {
            0 => Ok(Activation::Sigmoid),
            1 => Ok(Activation::Relu),
            other => Err(Error::BadCheckpoint(format!(
                "unknown activation code {other}"
            ))),
        };
        let hidden = decode_act(take(1)?[0])?;
        let output = decode_act(take(1)?[0])?;
        let has_backward = take(1)?[0] != 0;

        let mut read_matrix = |rows: usize, cols: usize| -> Result<Matrix> {
            let raw = take(rows * cols * 8)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Matrix::from_vec(rows, cols, data)
        };
        let mut weights = Vec::new();
        for w in sizes.windows(2) {
            weights.push(read_matrix(w[0] + 1, w[1])?);
        }
        let backward = if has_backward {
            let mut bs = Vec::new();
            for w in sizes.windows(2) {
                bs.push(read_matrix(w[0], w[1])?);
            }
            Some(bs)
        } else {
            None
        };
        if !cur.is_empty() {
            return Err(Error::BadCheckpoint(format!(
                "{} trailing bytes",
                cur.len()
            )));
        }
        Ok(Network {
            layer_sizes: sizes,
            weights,
            backward,
            hidden_activation: hidden,
            output_activation: output,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Network::from_bytes(&bytes)
    }
}

/// Batch-averaged loss. MSE sums squared output errors per sample;
/// cross-entropy requires outputs strictly inside (0, 1).
pub fn compute_loss(outputs: &Matrix, targets: &Matrix, kind: LossKind) -> Result<f64> {
    if outputs.rows() != targets.rows() || outputs.cols() != targets.cols() {
        return Err(Error::ShapeMismatch {
            op: "compute_loss",
            detail: format!(
                "{}x{} outputs vs {}x{} targets",
                outputs.rows(),
                outputs.cols(),
                targets.rows(),
                targets.cols()
            ),
        });
    }
    let mut total = 0.0;
    for (y, t) in outputs.data().iter().zip(targets.data()) {
        total += match kind {
            LossKind::Mse => (y - t) * (y - t),
            LossKind::CrossEntropy => {
                if !(*y > 0.0 && *y < 1.0) {
                    return Err(Error::LogDomain(*y));
                }
                -(t * y.ln() + (1.0 - t) * (1.0 - y).ln())
            }
        };
    }
    Ok(total / outputs.rows() as f64)
}

/// Output-layer delta for sigmoid outputs with cross-entropy: `y - t`.
pub fn output_delta(outputs: &Matrix, targets: &Matrix) -> Result<Matrix> {
    if outputs.rows() != targets.rows() || outputs.cols() != targets.cols() {
        return Err(Error::ShapeMismatch {
            op: "output_delta",
            detail: format!(
                "{}x{} outputs vs {}x{} targets",
                outputs.rows(),
                outputs.cols(),
                targets.rows(),
                targets.cols()
            ),
        });
    }
    let mut d = outputs.clone();
    for (dv, &tv) in d.data_mut().iter_mut().zip(targets.data()) {
        *dv -= tv;
    }
    Ok(d)
}

/// Appends a constant-1 column so bias updates run through the same
/// per-synapse kernel with x = 1.
pub fn augment_with_bias(x: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(x.rows(), x.cols() + 1);
    for r in 0..x.rows() {
        let row = out.row_mut(r);
        row[..x.cols()].copy_from_slice(x.row(r));
        row[x.cols()] = 1.0;
    }
    out
}
