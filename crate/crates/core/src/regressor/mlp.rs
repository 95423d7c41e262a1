use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{IndiError, Result};
use crate::oracles::Estimator;
use crate::rng::seeded;
use crate::state::{ensure_dim, State, TimeStep};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "tanh" => Some(Activation::Tanh),
            "relu" => Some(Activation::Relu),
            _ => None,
        }
    }

    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `a`.
    #[inline]
    fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Loss exponent: mean absolute error (`L1`) or mean squared error (`L2`),
/// both averaged over coordinates and batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum PNorm {
    L1,
    L2,
}

impl TryFrom<u8> for PNorm {
    type Error = IndiError;

    fn try_from(p: u8) -> Result<Self> {
        match p {
            1 => Ok(PNorm::L1),
            2 => Ok(PNorm::L2),
            other => Err(IndiError::InvalidInput(format!(
                "p_norm must be 1 or 2, got {other}"
            ))),
        }
    }
}

impl From<PNorm> for u8 {
    fn from(p: PNorm) -> u8 {
        match p {
            PNorm::L1 => 1,
            PNorm::L2 => 2,
        }
    }
}

impl PNorm {
    #[inline]
    fn loss(self, e: f64) -> f64 {
        match self {
            PNorm::L1 => e.abs(),
            PNorm::L2 => e * e,
        }
    }

    /// d loss / d e, with the L1 subgradient at 0 taken as 0.
    #[inline]
    fn grad(self, e: f64) -> f64 {
        match self {
            PNorm::L1 => {
                if e > 0.0 {
                    1.0
                } else if e < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            PNorm::L2 => 2.0 * e,
        }
    }
}

/// Fully connected network `F(x_t, t)`: the state is concatenated with the
/// scalar `t`, hidden layers use `activation`, the output layer is linear.
///
/// Parameters are stored flat, layer by layer, each layer as its row-major
/// `out x in` weight matrix followed by its `out` biases.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpRegressor {
    sizes: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
    seed: u64,
}

/// Per-sample activations reused across a batch.
pub(crate) struct Workspace {
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl MlpRegressor {
    /// Glorot-uniform weights and zero biases drawn from `seed`.
    pub fn new(sizes: Vec<usize>, activation: Activation, seed: u64) -> Result<Self> {
        validate_sizes(&sizes)?;
        let mut rng = seeded(seed);
        let mut params = Vec::with_capacity(param_count(&sizes));
        for pair in sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Ok(MlpRegressor {
            sizes,
            activation,
            params,
            seed,
        })
    }

    /// Network for states of dimension `dim` with the given hidden widths.
    pub fn for_dim(
        dim: usize,
        hidden: &[usize],
        activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(dim + 1);
        sizes.extend_from_slice(hidden);
        sizes.push(dim);
        Self::new(sizes, activation, seed)
    }

    pub fn from_parts(
        sizes: Vec<usize>,
        activation: Activation,
        params: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        validate_sizes(&sizes)?;
        ensure_dim(param_count(&sizes), params.len())?;
        if params.iter().any(|p| !p.is_finite()) {
            return Err(IndiError::InvalidInput(
                "network parameters must be finite".into(),
            ));
        }
        Ok(MlpRegressor {
            sizes,
            activation,
            params,
            seed,
        })
    }

    /// Zeroes the output layer, so the network predicts the zero vector.
    pub fn zero_output_layer(&mut self) {
        let n = self.sizes.len();
        let last = self.sizes[n - 2] * self.sizes[n - 1] + self.sizes[n - 1];
        let len = self.params.len();
        self.params[len - last..].iter_mut().for_each(|p| *p = 0.0);
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub(crate) fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    /// Dimension of the states the network maps.
    pub fn state_dim(&self) -> usize {
        *self.sizes.last().expect("validated sizes")
    }

    pub(crate) fn workspace(&self) -> Workspace {
        Workspace {
            acts: self.sizes.iter().map(|&s| vec![0.0; s]).collect(),
            deltas: self.sizes.iter().map(|&s| vec![0.0; s]).collect(),
        }
    }

    /// Forward pass on a raw `[x_t..., t]` input, leaving every layer's
    /// output in `ws.acts`.
    pub(crate) fn forward_into(&self, input: &[f64], ws: &mut Workspace) {
        ws.acts[0].copy_from_slice(input);
        let layers = self.sizes.len() - 1;
        let mut offset = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[offset..offset + n_in * n_out];
            let b = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            let (prev, rest) = ws.acts.split_at_mut(l + 1);
            let a_in = &prev[l];
            let a_out = &mut rest[0];
            let hidden = l + 1 < layers;
            for (j, out) in a_out.iter_mut().enumerate() {
                let row = &w[j * n_in..(j + 1) * n_in];
                let z = b[j] + row.iter().zip(a_in).map(|(wi, ai)| wi * ai).sum::<f64>();
                *out = if hidden { self.activation.apply(z) } else { z };
            }
        }
    }

    /// Adds `d loss / d params` for one sample to `grad`, given
    /// `d loss / d output` already stored in the last delta buffer.
    pub(crate) fn backward_into(&self, ws: &mut Workspace, grad: &mut [f64]) {
        let layers = self.sizes.len() - 1;
        let mut offset = self.params.len();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            offset -= n_in * n_out + n_out;
            let w = &self.params[offset..offset + n_in * n_out];
            let (gw, gb) = grad[offset..offset + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            let (d_prev, d_rest) = ws.deltas.split_at_mut(l + 1);
            let delta = &d_rest[0];
            let a_in = &ws.acts[l];
            for j in 0..n_out {
                let dj = delta[j];
                gb[j] += dj;
                let row = &mut gw[j * n_in..(j + 1) * n_in];
                for (g, a) in row.iter_mut().zip(a_in) {
                    *g += dj * a;
                }
            }
            if l > 0 {
                let back = &mut d_prev[l];
                back.iter_mut().for_each(|v| *v = 0.0);
                for j in 0..n_out {
                    let dj = delta[j];
                    let row = &w[j * n_in..(j + 1) * n_in];
                    for (b, wi) in back.iter_mut().zip(row) {
                        *b += dj * wi;
                    }
                }
                for (b, a) in back.iter_mut().zip(a_in) {
                    *b *= self.activation.derivative(*a);
                }
            }
        }
    }

    /// Raw prediction on `[x_t..., t]`.
    pub fn predict_raw(&self, x_t: &[f64], t: f64) -> Result<Vec<f64>> {
        ensure_dim(self.state_dim(), x_t.len())?;
        let mut input = Vec::with_capacity(x_t.len() + 1);
        input.extend_from_slice(x_t);
        input.push(t);
        let mut ws = self.workspace();
        self.forward_into(&input, &mut ws);
        Ok(ws.acts.pop().expect("output layer"))
    }

    /// Mean loss over a batch of `(input, target)` pairs, where each input
    /// is `[x_t..., t]`.
    pub fn batch_loss(&self, batch: &[(Vec<f64>, Vec<f64>)], p: PNorm) -> f64 {
        let mut ws = self.workspace();
        let mut total = 0.0;
        for (input, target) in batch {
            self.forward_into(input, &mut ws);
            let out = ws.acts.last().expect("output layer");
            total += out
                .iter()
                .zip(target)
                .map(|(o, x)| p.loss(o - x))
                .sum::<f64>()
                / target.len() as f64;
        }
        total / batch.len() as f64
    }

    /// Mean batch loss and its gradient with respect to every parameter.
    /// Samples are accumulated in order, so the result is deterministic.
    pub fn batch_loss_and_gradient(
        &self,
        batch: &[(Vec<f64>, Vec<f64>)],
        p: PNorm,
    ) -> (f64, Vec<f64>) {
        let mut ws = self.workspace();
        let mut grad = vec![0.0; self.params.len()];
        let mut total = 0.0;
        let scale = 1.0 / batch.len() as f64;
        for (input, target) in batch {
            self.forward_into(input, &mut ws);
            let d = target.len() as f64;
            let out_idx = ws.acts.len() - 1;
            let mut sample_loss = 0.0;
            for ((delta, o), x) in ws.deltas[out_idx]
                .iter_mut()
                .zip(&ws.acts[out_idx])
                .zip(target)
            {
                let e = o - x;
                sample_loss += p.loss(e);
                *delta = p.grad(e) * scale / d;
            }
            total += sample_loss / d;
            self.backward_into(&mut ws, &mut grad);
        }
        (total * scale, grad)
    }
}

fn validate_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(IndiError::InvalidInput(
            "network needs an input and an output layer".into(),
        ));
    }
    if sizes.contains(&0) {
        return Err(IndiError::InvalidInput(
            "layer widths must be positive".into(),
        ));
    }
    let (input, output) = (sizes[0], sizes[sizes.len() - 1]);
    if input != output + 1 {
        return Err(IndiError::InvalidInput(format!(
            "input width must be state dim + 1 (got input {input}, output {output})"
        )));
    }
    Ok(())
}

pub(crate) fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|p| p[0] * p[1] + p[1]).sum()
}

impl Estimator for MlpRegressor {
    fn dim(&self) -> usize {
        self.state_dim()
    }

    fn estimate(&self, x_t: &State, t: TimeStep) -> Result<State> {
        predict(self, x_t, t)
    }
}

/// Deterministic forward pass `F(x_t, t)`.
pub fn predict(model: &MlpRegressor, x_t: &State, t: TimeStep) -> Result<State> {
    let out = model.predict_raw(x_t.as_slice(), t.get())?;
    State::checked(out, 0, "network output")
}
