//! Fully connected networks with ReLU hidden layers and exact reverse-mode
//! gradients. Parameters live in one flat vector (per layer: row-major
//! weights `out × in`, then biases) so optimisers and soft updates work on
//! plain slices.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::MarlError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutputHead {
    Linear,
    /// `scale · tanh(z)`, keeping outputs in [−scale, scale].
    Tanh {
        scale: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    head: OutputHead,
    params: Vec<f64>,
}

/// Activations recorded by [`Mlp::forward_tape`] for the backward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    batch: usize,
    /// Input to every layer (index 0 is the network input) plus the output.
    values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: Vec<f64>,
    pub input: Vec<f64>,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Orthogonal `rows × cols` matrix scaled by `gain`, row-major.
pub fn orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut impl Rng) -> Vec<f64> {
    let (r, c) = if rows >= cols {
        (rows, cols)
    } else {
        (cols, rows)
    };
    let gauss = DMatrix::<f64>::from_fn(r, c, |_, _| rng.sample(StandardNormal));
    let qr = gauss.qr();
    let mut q = qr.q();
    let rdiag = qr.r().diagonal();
    for k in 0..c {
        if rdiag[k] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            let v = if rows >= cols { q[(i, j)] } else { q[(j, i)] };
            out[i * cols + j] = gain * v;
        }
    }
    out
}

impl Mlp {
    /// Zero-initialised network with layer widths `dims` (input first).
    pub fn zeros(dims: &[usize], head: OutputHead) -> Self {
        assert!(dims.len() >= 2, "need input and output widths");
        let n = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Self {
            dims: dims.to_vec(),
            head,
            params: vec![0.0; n],
        }
    }

    /// Orthogonal weights (gain √2 on ReLU layers, `out_gain` on the last
    /// layer) and zero biases.
    pub fn orthogonal(dims: &[usize], head: OutputHead, out_gain: f64, rng: &mut impl Rng) -> Self {
        let mut net = Self::zeros(dims, head);
        let layers = dims.len() - 1;
        let mut offset = 0;
        for l in 0..layers {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let gain = if l + 1 == layers {
                out_gain
            } else {
                std::f64::consts::SQRT_2
            };
            let w = orthogonal(fan_out, fan_in, gain, rng);
            net.params[offset..offset + w.len()].copy_from_slice(&w);
            offset += fan_in * fan_out + fan_out;
        }
        net
    }

    pub fn from_parts(
        dims: Vec<usize>,
        head: OutputHead,
        params: Vec<f64>,
    ) -> Result<Self, MarlError> {
        let net = Self::zeros(&dims, head);
        if net.params.len() != params.len() {
            return Err(MarlError::Dimension {
                expected: net.params.len(),
                found: params.len(),
            });
        }
        Ok(Self { params, ..net })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn head(&self) -> OutputHead {
        self.head
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("non-empty dims")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// (weights, biases) of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let off = self.layer_offset(l);
        let (i, o) = (self.dims[l], self.dims[l + 1]);
        (
            &self.params[off..off + i * o],
            &self.params[off + i * o..off + i * o + o],
        )
    }

    fn layer_offset(&self, l: usize) -> usize {
        self.dims
            .windows(2)
            .take(l)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    fn check_input(&self, x: &[f64], batch: usize) -> Result<(), MarlError> {
        if x.len() != batch * self.dims[0] {
            return Err(MarlError::Dimension {
                expected: batch * self.dims[0],
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Forward pass over `batch` row-major inputs.
    pub fn forward(&self, x: &[f64], batch: usize) -> Result<Vec<f64>, MarlError> {
        Ok(self.forward_tape(x, batch)?.0)
    }

    pub fn forward_tape(&self, x: &[f64], batch: usize) -> Result<(Vec<f64>, Tape), MarlError> {
        self.check_input(x, batch)?;
        let layers = self.dims.len() - 1;
        let mut values = Vec::with_capacity(layers + 1);
        values.push(x.to_vec());
        let mut offset = 0;
        for l in 0..layers {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let w = &self.params[offset..offset + fan_in * fan_out];
            let b = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;
            let input = values.last().expect("input pushed");
            let mut z = vec![0.0; batch * fan_out];
            for s in 0..batch {
                let xs = &input[s * fan_in..(s + 1) * fan_in];
                let zs = &mut z[s * fan_out..(s + 1) * fan_out];
                for o in 0..fan_out {
                    zs[o] = b[o] + dot(&w[o * fan_in..(o + 1) * fan_in], xs);
                }
            }
            if l + 1 < layers {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            } else if let OutputHead::Tanh { scale } = self.head {
                z.iter_mut().for_each(|v| *v = scale * v.tanh());
            }
            values.push(z);
        }
        let out = values.last().expect("output").clone();
        Ok((out, Tape { batch, values }))
    }

    /// Reverse-mode pass: given ∂L/∂output for every batch row, returns
    /// ∂L/∂params (summed over the batch) and ∂L/∂input per row.
    pub fn backward(&self, tape: &Tape, d_out: &[f64]) -> Gradients {
        let batch = tape.batch;
        let layers = self.dims.len() - 1;
        assert_eq!(
            d_out.len(),
            batch * self.output_dim(),
            "upstream gradient shape"
        );
        let mut grads = vec![0.0; self.params.len()];

        let mut delta = d_out.to_vec();
        if let OutputHead::Tanh { scale } = self.head {
            let out = &tape.values[layers];
            for (d, &y) in delta.iter_mut().zip(out) {
                let t = y / scale;
                *d *= scale * (1.0 - t * t);
            }
        }
        for l in (0..layers).rev() {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let offset = self.layer_offset(l);
            let w = &self.params[offset..offset + fan_in * fan_out];
            let input = &tape.values[l];
            let mut d_input = vec![0.0; batch * fan_in];
            {
                let (gw, gb) = grads[offset..offset + fan_in * fan_out + fan_out]
                    .split_at_mut(fan_in * fan_out);
                for s in 0..batch {
                    let xs = &input[s * fan_in..(s + 1) * fan_in];
                    let ds = &delta[s * fan_out..(s + 1) * fan_out];
                    let dxs = &mut d_input[s * fan_in..(s + 1) * fan_in];
                    for o in 0..fan_out {
                        let d = ds[o];
                        if d == 0.0 {
                            continue;
                        }
                        gb[o] += d;
                        axpy(&mut gw[o * fan_in..(o + 1) * fan_in], d, xs);
                        axpy(dxs, d, &w[o * fan_in..(o + 1) * fan_in]);
                    }
                }
            }
            if l > 0 {
                // ReLU: gradient flows where the activation was positive
                for (d, &a) in d_input.iter_mut().zip(input) {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            delta = d_input;
        }
        Gradients {
            params: grads,
            input: delta,
        }
    }
}

/// θ' ← ξ·θ + (1 − ξ)·θ'.
pub fn soft_update(online: &Mlp, target: &mut Mlp, xi: f64) -> Result<(), MarlError> {
    if online.dims != target.dims {
        return Err(MarlError::Shape(format!(
            "{:?} vs {:?}",
            online.dims, target.dims
        )));
    }
    for (t, &o) in target.params.iter_mut().zip(&online.params) {
        *t = xi * o + (1.0 - xi) * *t;
    }
    Ok(())
}

/// Serialized layout: layer widths plus row-major weight arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpRecord {
    pub head: OutputHead,
    pub layers: Vec<LayerRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerRecord {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs × inputs`, row-major.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl From<&Mlp> for MlpRecord {
    fn from(net: &Mlp) -> Self {
        let layers = (0..net.dims.len() - 1)
            .map(|l| {
                let (w, b) = net.layer(l);
                LayerRecord {
                    inputs: net.dims[l],
                    outputs: net.dims[l + 1],
                    weights: w.to_vec(),
                    biases: b.to_vec(),
                }
            })
            .collect();
        Self {
            head: net.head,
            layers,
        }
    }
}

impl TryFrom<MlpRecord> for Mlp {
    type Error = MarlError;

    fn try_from(rec: MlpRecord) -> Result<Self, MarlError> {
        let first = rec
            .layers
            .first()
            .ok_or_else(|| MarlError::Shape("network without layers".into()))?;
        let mut dims = vec![first.inputs];
        let mut params = Vec::new();
        for layer in &rec.layers {
            if layer.inputs != *dims.last().expect("non-empty")
                || layer.weights.len() != layer.inputs * layer.outputs
                || layer.biases.len() != layer.outputs
            {
                return Err(MarlError::Shape(format!(
                    "inconsistent layer {}x{}",
                    layer.outputs, layer.inputs
                )));
            }
            dims.push(layer.outputs);
            params.extend_from_slice(&layer.weights);
            params.extend_from_slice(&layer.biases);
        }
        Mlp::from_parts(dims, rec.head, params)
    }
}

impl Serialize for Mlp {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        MlpRecord::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Mlp {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rec = MlpRecord::deserialize(d)?;
        Mlp::try_from(rec).map_err(serde::de::Error::custom)
    }
}
