//! Actor and critic networks built on the tape.
//!
//! Every network stores its tensors in a fixed order. `tensors()` and
//! `tensors_mut()` walk that order, and `bind` consumes tape variables in the
//! same order, so a flat list of gradients lines up with a flat list of
//! parameters without any bookkeeping by name.

mod actor;
mod bundle;
mod critic;
pub mod gradcheck;
mod lstm;

pub use actor::{Actor, ActorConfig, ActorVars, Encoder, HiddenState};
pub use bundle::PolicyBundle;
pub use critic::{Critic, CriticConfig, CriticVars};
pub use lstm::{LstmCell, LstmVars};

use rand::Rng;
use thiserror::Error;

use crate::scalar::Real;
use crate::tensor::{Tape, Tensor, TensorError, Var};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("{what}: expected dimension {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("agent {agent} out of range for {n_agents} agents")]
    NoSuchAgent { agent: usize, n_agents: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Registers a tensor on the tape as trainable or frozen.
pub(crate) fn bind_tensor<'a, T: Real>(tape: &mut Tape<'a, T>, t: &'a Tensor<T>, trainable: bool) -> Var {
    if trainable {
        tape.param(t)
    } else {
        tape.constant_ref(t)
    }
}

/// Registers every tensor of a network and returns the variables in
/// parameter order.
pub fn bind_all<'a, T: Real>(tape: &mut Tape<'a, T>, tensors: &[&'a Tensor<T>], trainable: bool) -> Vec<Var> {
    tensors.iter().map(|t| bind_tensor(tape, t, trainable)).collect()
}

fn next_var(it: &mut impl Iterator<Item = Var>) -> Var {
    it.next().expect("variable list shorter than parameter list")
}

/// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_uniform<T: Real, R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Tensor<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| T::lit(rng.random_range(-limit..=limit)))
        .collect();
    Tensor::new(&[fan_in, fan_out], data).expect("shape matches length")
}

/// Affine map `x·W + b` with `W` of shape `[in, out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

#[derive(Debug, Clone, Copy)]
pub struct LinearVars {
    pub weight: Var,
    pub bias: Var,
}

impl<T: Real> Linear<T> {
    pub fn new<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        Self {
            weight: xavier_uniform(fan_in, fan_out, rng),
            bias: Tensor::zeros(&[fan_out]),
        }
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[fan_in, fan_out]),
            bias: Tensor::zeros(&[fan_out]),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        vec![&self.weight, &self.bias]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![&mut self.weight, &mut self.bias]
    }

    pub fn names(&self, prefix: &str) -> Vec<String> {
        vec![format!("{prefix}.weight"), format!("{prefix}.bias")]
    }

    pub fn bind(it: &mut impl Iterator<Item = Var>) -> LinearVars {
        LinearVars {
            weight: next_var(it),
            bias: next_var(it),
        }
    }
}

impl LinearVars {
    pub fn forward<T: Real>(&self, tape: &mut Tape<'_, T>, x: Var) -> Result<Var, TensorError> {
        let y = tape.matmul(x, self.weight)?;
        tape.add(y, self.bias)
    }
}

/// Stack of affine layers with `tanh` between them and a linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub layers: Vec<Linear<T>>,
}

impl<T: Real> Mlp<T> {
    /// `widths` lists every layer size including input and output.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Self {
        Self {
            layers: widths.windows(2).map(|w| Linear::new(w[0], w[1], rng)).collect(),
        }
    }

    pub fn zeros(widths: &[usize]) -> Self {
        Self {
            layers: widths.windows(2).map(|w| Linear::zeros(w[0], w[1])).collect(),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        self.layers.iter().flat_map(|l| l.tensors()).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers.iter_mut().flat_map(|l| l.tensors_mut()).collect()
    }

    pub fn names(&self, prefix: &str) -> Vec<String> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.names(&format!("{prefix}.{i}")))
            .collect()
    }

    pub fn bind(&self, it: &mut impl Iterator<Item = Var>) -> Vec<LinearVars> {
        self.layers.iter().map(|_| Linear::<T>::bind(it)).collect()
    }
}

pub fn mlp_forward<T: Real>(tape: &mut Tape<'_, T>, layers: &[LinearVars], x: Var) -> Result<Var, TensorError> {
    let mut h = x;
    for (i, l) in layers.iter().enumerate() {
        h = l.forward(tape, h)?;
        if i + 1 < layers.len() {
            h = tape.tanh(h);
        }
    }
    Ok(h)
}

/// Discrete distribution over action indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Categorical {
    pub probs: Vec<f64>,
    pub log_probs: Vec<f64>,
}

impl Categorical {
    pub fn from_probs(probs: Vec<f64>) -> Self {
        let log_probs = probs.iter().map(|p| p.ln()).collect();
        Self { probs, log_probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .zip(&self.log_probs)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, l)| p * l)
            .sum::<f64>()
    }
}

/// Inverse-CDF draw. Returns the index and its log-probability.
pub fn sample_action<R: Rng + ?Sized>(dist: &Categorical, rng: &mut R) -> (usize, f64) {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (i, &p) in dist.probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
        }
        cum += p;
        if u < cum {
            return (i, dist.log_probs[i]);
        }
    }
    // Rounding left the cumulative sum just below u.
    (last_positive, dist.log_probs[last_positive])
}
