//! Feed-forward networks with hand-rolled backpropagation.
//!
//! Parameters live in one flat vector so that consensus averaging, soft
//! target updates, and checkpointing all operate on plain slices. Layer `l`
//! occupies a contiguous block: weights row-major `[out][in]`, then biases.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    fn apply<R: Real>(self, z: R) -> R {
        match self {
            Activation::Identity => z,
            Activation::Relu => {
                if z > R::zero() {
                    z
                } else {
                    R::zero()
                }
            }
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative as a function of the pre-activation `z`.
    fn derivative<R: Real>(self, z: R) -> R {
        match self {
            Activation::Identity => R::one(),
            Activation::Relu => {
                if z > R::zero() {
                    R::one()
                } else {
                    R::zero()
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                R::one() - t * t
            }
        }
    }
}

/// Gradients produced by one backward pass.
#[derive(Debug, Clone)]
pub struct Gradients<R> {
    /// Same layout as [`Network::params`].
    pub params: Vec<R>,
    /// Gradient with respect to the network input.
    pub input: Vec<R>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<R> {
    sizes: Vec<usize>,
    activations: Vec<Activation>,
    params: Vec<R>,
}

impl<R: Real> Network<R> {
    /// Builds a zero-initialized network. `sizes` lists layer widths from
    /// input to output; every layer but the last uses `hidden`, the last
    /// uses `output`.
    pub fn new(sizes: &[usize], hidden: Activation, output: Activation) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::config("network needs at least input and output sizes"));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::config("network layer widths must be positive"));
        }
        let n_layers = sizes.len() - 1;
        let mut activations = vec![hidden; n_layers];
        activations[n_layers - 1] = output;
        let params = vec![R::zero(); Self::param_count_for(sizes)];
        Ok(Network { sizes: sizes.to_vec(), activations, params })
    }

    /// Reassembles a network from checkpointed parts.
    pub fn from_parts(
        sizes: Vec<usize>,
        activations: Vec<Activation>,
        params: Vec<R>,
    ) -> Result<Self> {
        if sizes.len() < 2 || activations.len() != sizes.len() - 1 {
            return Err(Error::checkpoint("network shape metadata inconsistent"));
        }
        if params.len() != Self::param_count_for(&sizes) {
            return Err(Error::checkpoint(format!(
                "parameter count {} does not match shape (expected {})",
                params.len(),
                Self::param_count_for(&sizes)
            )));
        }
        Ok(Network { sizes, activations, params })
    }

    fn param_count_for(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Uniform fan-in initialization: each layer drawn from
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` in a fixed parameter order, so a
    /// seeded generator reproduces the network exactly.
    pub fn init<G: Rng>(&mut self, rng: &mut G) {
        let mut offset = 0;
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let bound = 1.0 / (n_in as f64).sqrt();
            for _ in 0..(n_in * n_out + n_out) {
                self.params[offset] = R::from_f64_lossy(rng.random_range(-bound..=bound));
                offset += 1;
            }
        }
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.sizes.last().expect("sizes nonempty")
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn params(&self) -> &[R] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [R] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[R]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::contract(format!(
                "parameter vector length {} does not match network ({})",
                params.len(),
                self.params.len()
            )));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    /// Flat index range of all layers except the output layer.
    pub fn hidden_param_range(&self) -> std::ops::Range<usize> {
        let last = self.n_layers() - 1;
        let last_len = self.sizes[last] * self.sizes[last + 1] + self.sizes[last + 1];
        0..(self.params.len() - last_len)
    }

    /// Flat index range of the interior layers: everything except the first
    /// and last layers.
    ///
    /// Agents differ in observation and action widths, so consensus
    /// averaging exchanges exactly this range, which has a common shape
    /// whenever the hidden widths agree. Empty for single-layer networks.
    pub fn interior_param_range(&self) -> std::ops::Range<usize> {
        if self.n_layers() < 3 {
            let first_len = self.sizes[0] * self.sizes[1] + self.sizes[1];
            return first_len..first_len;
        }
        let first_len = self.sizes[0] * self.sizes[1] + self.sizes[1];
        let last = self.n_layers() - 1;
        let last_len = self.sizes[last] * self.sizes[last + 1] + self.sizes[last + 1];
        first_len..(self.params.len() - last_len)
    }

    fn layer_offset(&self, layer: usize) -> usize {
        Self::param_count_for(&self.sizes[..=layer])
    }

    pub fn forward(&self, input: &[R]) -> Result<Vec<R>> {
        let (_, acts) = self.forward_trace(input)?;
        Ok(acts.into_iter().last().expect("at least one layer"))
    }

    /// Runs the forward pass keeping pre-activations and activations.
    /// `acts[0]` is the input; `acts[l+1]` is layer `l` output.
    fn forward_trace(&self, input: &[R]) -> Result<(Vec<Vec<R>>, Vec<Vec<R>>)> {
        if input.len() != self.input_len() {
            return Err(Error::contract(format!(
                "input length {} does not match network input {}",
                input.len(),
                self.input_len()
            )));
        }
        let mut pre_acts: Vec<Vec<R>> = Vec::with_capacity(self.n_layers());
        let mut acts: Vec<Vec<R>> = Vec::with_capacity(self.n_layers() + 1);
        acts.push(input.to_vec());
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let base = self.layer_offset(l);
            let x = &acts[l];
            let mut z = vec![R::zero(); n_out];
            for o in 0..n_out {
                let mut acc = self.params[base + n_in * n_out + o];
                let row = base + o * n_in;
                for i in 0..n_in {
                    acc = acc + self.params[row + i] * x[i];
                }
                z[o] = acc;
            }
            let a: Vec<R> = z.iter().map(|&v| self.activations[l].apply(v)).collect();
            pre_acts.push(z);
            acts.push(a);
        }
        Ok((pre_acts, acts))
    }

    /// Reverse pass. `output_grad` is dL/d(output); the returned gradients
    /// are dL/d(params) and dL/d(input).
    pub fn backward(&self, input: &[R], output_grad: &[R]) -> Result<Gradients<R>> {
        if output_grad.len() != self.output_len() {
            return Err(Error::contract(format!(
                "output gradient length {} does not match network output {}",
                output_grad.len(),
                self.output_len()
            )));
        }
        let (pre_acts, acts) = self.forward_trace(input)?;
        let mut param_grad = vec![R::zero(); self.params.len()];
        let n_layers = self.n_layers();

        let mut delta: Vec<R> = output_grad
            .iter()
            .zip(&pre_acts[n_layers - 1])
            .map(|(&g, &z)| g * self.activations[n_layers - 1].derivative(z))
            .collect();

        let mut input_grad = vec![R::zero(); self.input_len()];
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let base = self.layer_offset(l);
            let x = &acts[l];
            let mut dx = vec![R::zero(); n_in];
            for o in 0..n_out {
                let d = delta[o];
                let row = base + o * n_in;
                for i in 0..n_in {
                    param_grad[row + i] = param_grad[row + i] + d * x[i];
                    dx[i] = dx[i] + self.params[row + i] * d;
                }
                param_grad[base + n_in * n_out + o] = param_grad[base + n_in * n_out + o] + d;
            }
            if l == 0 {
                input_grad = dx;
            } else {
                delta = dx
                    .iter()
                    .zip(&pre_acts[l - 1])
                    .map(|(&g, &z)| g * self.activations[l - 1].derivative(z))
                    .collect();
            }
        }
        Ok(Gradients { params: param_grad, input: input_grad })
    }

    /// Polyak update toward `source`: `theta = tau*source + (1-tau)*theta`.
    pub fn soft_update_from(&mut self, source: &Self, tau: R) -> Result<()> {
        if source.sizes != self.sizes {
            return Err(Error::contract("soft update requires identical shapes"));
        }
        for (t, &s) in self.params.iter_mut().zip(&source.params) {
            *t = tau * s + (R::one() - tau) * *t;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

/// Adam with bias correction; `step` descends, so callers maximizing a
/// quantity negate their gradient first.
#[derive(Debug, Clone)]
pub struct Adam<R> {
    lr: R,
    beta1: R,
    beta2: R,
    eps: R,
    t: u64,
    m: Vec<R>,
    v: Vec<R>,
}

impl<R: Real> Adam<R> {
    pub fn new(param_len: usize, lr: R) -> Self {
        Adam {
            lr,
            beta1: R::from_f64_lossy(0.9),
            beta2: R::from_f64_lossy(0.999),
            eps: R::from_f64_lossy(1e-8),
            t: 0,
            m: vec![R::zero(); param_len],
            v: vec![R::zero(); param_len],
        }
    }

    pub fn step(&mut self, params: &mut [R], grad: &[R]) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::contract("optimizer state length mismatch"));
        }
        self.t += 1;
        let b1t = self.beta1.powi(self.t as i32);
        let b2t = self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (R::one() - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (R::one() - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / (R::one() - b1t);
            let v_hat = self.v[i] / (R::one() - b2t);
            params[i] = params[i] - self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}
