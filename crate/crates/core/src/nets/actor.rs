use rand::Rng;

use super::{bind_all, Categorical, Linear, LinearVars, LstmCell, LstmVars, NetError};
use crate::scalar::Real;
use crate::tensor::{Tape, Tensor, TensorError, Var};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActorConfig {
    pub obs_dim: usize,
    pub n_actions: usize,
    pub hidden: usize,
    pub head_hidden: usize,
    /// `false` swaps the LSTM for a single dense `tanh` layer.
    pub recurrent: bool,
    pub forget_bias: f64,
}

impl ActorConfig {
    pub fn new(obs_dim: usize, n_actions: usize) -> Self {
        Self {
            obs_dim,
            n_actions,
            hidden: 64,
            head_hidden: 64,
            recurrent: true,
            forget_bias: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Encoder<T> {
    Lstm(LstmCell<T>),
    Dense(Linear<T>),
}

#[derive(Debug, Clone, Copy)]
enum EncoderVars {
    Lstm(LstmVars),
    Dense(LinearVars),
}

/// Recurrent (or feed-forward) policy: encoder, then `tanh` hidden layer,
/// then action logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Actor<T> {
    pub encoder: Encoder<T>,
    pub head_hidden: Linear<T>,
    pub head_out: Linear<T>,
}

#[derive(Debug, Clone, Copy)]
pub struct ActorVars {
    encoder: EncoderVars,
    head_hidden: LinearVars,
    head_out: LinearVars,
}

/// Recurrent state `(h, c)`, each `[1, hidden]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState<T> {
    pub h: Tensor<T>,
    pub c: Tensor<T>,
}

impl<T: Real> HiddenState<T> {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: Tensor::zeros(&[1, hidden]),
            c: Tensor::zeros(&[1, hidden]),
        }
    }

    pub fn dim(&self) -> usize {
        self.h.numel()
    }
}

impl<T: Real> Actor<T> {
    pub fn new<R: Rng + ?Sized>(cfg: &ActorConfig, rng: &mut R) -> Self {
        let encoder = if cfg.recurrent {
            Encoder::Lstm(LstmCell::new(cfg.obs_dim, cfg.hidden, cfg.forget_bias, rng))
        } else {
            Encoder::Dense(Linear::new(cfg.obs_dim, cfg.hidden, rng))
        };
        Self {
            encoder,
            head_hidden: Linear::new(cfg.hidden, cfg.head_hidden, rng),
            head_out: Linear::new(cfg.head_hidden, cfg.n_actions, rng),
        }
    }

    /// All parameters zero; the forget-gate bias is zero too.
    pub fn zeros(cfg: &ActorConfig) -> Self {
        let encoder = if cfg.recurrent {
            Encoder::Lstm(LstmCell::zeros(cfg.obs_dim, cfg.hidden))
        } else {
            Encoder::Dense(Linear::zeros(cfg.obs_dim, cfg.hidden))
        };
        Self {
            encoder,
            head_hidden: Linear::zeros(cfg.hidden, cfg.head_hidden),
            head_out: Linear::zeros(cfg.head_hidden, cfg.n_actions),
        }
    }

    pub fn obs_dim(&self) -> usize {
        match &self.encoder {
            Encoder::Lstm(l) => l.input_dim(),
            Encoder::Dense(d) => d.in_dim(),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        match &self.encoder {
            Encoder::Lstm(l) => l.hidden_dim(),
            Encoder::Dense(d) => d.out_dim(),
        }
    }

    pub fn n_actions(&self) -> usize {
        self.head_out.out_dim()
    }

    pub fn is_recurrent(&self) -> bool {
        matches!(self.encoder, Encoder::Lstm(_))
    }

    pub fn initial_hidden(&self) -> HiddenState<T> {
        HiddenState::zeros(self.hidden_dim())
    }

    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        let mut out = match &self.encoder {
            Encoder::Lstm(l) => l.tensors(),
            Encoder::Dense(d) => d.tensors(),
        };
        out.extend(self.head_hidden.tensors());
        out.extend(self.head_out.tensors());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = match &mut self.encoder {
            Encoder::Lstm(l) => l.tensors_mut(),
            Encoder::Dense(d) => d.tensors_mut(),
        };
        out.extend(self.head_hidden.tensors_mut());
        out.extend(self.head_out.tensors_mut());
        out
    }

    pub fn names(&self, prefix: &str) -> Vec<String> {
        let mut out = match &self.encoder {
            Encoder::Lstm(l) => l.names(&format!("{prefix}.lstm")),
            Encoder::Dense(d) => d.names(&format!("{prefix}.dense")),
        };
        out.extend(self.head_hidden.names(&format!("{prefix}.head_hidden")));
        out.extend(self.head_out.names(&format!("{prefix}.head_out")));
        out
    }

    /// Consumes variables in `tensors()` order.
    pub fn bind(&self, it: &mut impl Iterator<Item = Var>) -> ActorVars {
        let encoder = match &self.encoder {
            Encoder::Lstm(l) => EncoderVars::Lstm(l.bind(it)),
            Encoder::Dense(_) => EncoderVars::Dense(Linear::<T>::bind(it)),
        };
        ActorVars {
            encoder,
            head_hidden: Linear::<T>::bind(it),
            head_out: Linear::<T>::bind(it),
        }
    }

    /// One decision step outside of training. The distribution is computed
    /// with the same kernels as the training replay, so log-probabilities
    /// agree bit for bit.
    pub fn step(&self, obs: &[T], hidden: &HiddenState<T>) -> Result<(Categorical, HiddenState<T>), NetError> {
        if obs.len() != self.obs_dim() {
            return Err(NetError::Dimension {
                what: "actor observation",
                expected: self.obs_dim(),
                got: obs.len(),
            });
        }
        if hidden.dim() != self.hidden_dim() {
            return Err(NetError::Dimension {
                what: "actor hidden state",
                expected: self.hidden_dim(),
                got: hidden.dim(),
            });
        }
        let params = self.tensors();
        let mut tape = Tape::new();
        let vars = bind_all(&mut tape, &params, false);
        let av = self.bind(&mut vars.into_iter());
        let x = tape.constant(Tensor::new(&[1, obs.len()], obs.to_vec())?);
        let h = tape.constant_ref(&hidden.h);
        let c = tape.constant_ref(&hidden.c);
        let (logits, h2, c2) = av.step(&mut tape, x, h, c)?;
        let p = tape.softmax(logits);
        let lp = tape.log_softmax(logits);
        let dist = Categorical {
            probs: tape.value(p).data().iter().map(|v| v.as_f64()).collect(),
            log_probs: tape.value(lp).data().iter().map(|v| v.as_f64()).collect(),
        };
        let next = HiddenState {
            h: tape.value(h2).clone(),
            c: tape.value(c2).clone(),
        };
        Ok((dist, next))
    }
}

impl ActorVars {
    /// Batched step: `x` is `[B, obs]`, `h`/`c` are `[B, hidden]`.
    /// Returns `(logits, h', c')`. A dense encoder passes `h`, `c` through.
    pub fn step<T: Real>(&self, tape: &mut Tape<'_, T>, x: Var, h: Var, c: Var) -> Result<(Var, Var, Var), TensorError> {
        let (features, h2, c2) = match self.encoder {
            EncoderVars::Lstm(l) => {
                let (h2, c2) = l.step(tape, x, h, c)?;
                (h2, h2, c2)
            }
            EncoderVars::Dense(d) => {
                let e = d.forward(tape, x)?;
                (tape.tanh(e), h, c)
            }
        };
        let z = self.head_hidden.forward(tape, features)?;
        let z = tape.tanh(z);
        let logits = self.head_out.forward(tape, z)?;
        Ok((logits, h2, c2))
    }
}
