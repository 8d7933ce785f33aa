use rand::Rng;

use super::{next_var, xavier_uniform};
use crate::scalar::Real;
use crate::tensor::{Tape, Tensor, TensorError, Var};

/// LSTM cell with the four gates packed column-wise in the order
/// input, forget, cell, output: `z = x·W_x + h·W_h + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell<T> {
    pub w_x: Tensor<T>,
    pub w_h: Tensor<T>,
    pub bias: Tensor<T>,
}

#[derive(Debug, Clone, Copy)]
pub struct LstmVars {
    pub w_x: Var,
    pub w_h: Var,
    pub bias: Var,
    hidden: usize,
}

impl<T: Real> LstmCell<T> {
    /// Xavier weights, zero biases except the forget gate, which starts at
    /// `forget_bias`.
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, forget_bias: f64, rng: &mut R) -> Self {
        let mut bias = Tensor::zeros(&[4 * hidden]);
        for b in &mut bias.data_mut()[hidden..2 * hidden] {
            *b = T::lit(forget_bias);
        }
        Self {
            w_x: xavier_uniform(input, 4 * hidden, rng),
            w_h: xavier_uniform(hidden, 4 * hidden, rng),
            bias,
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_x: Tensor::zeros(&[input, 4 * hidden]),
            w_h: Tensor::zeros(&[hidden, 4 * hidden]),
            bias: Tensor::zeros(&[4 * hidden]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_x.shape()[0]
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_h.shape()[0]
    }

    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        vec![&self.w_x, &self.w_h, &self.bias]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![&mut self.w_x, &mut self.w_h, &mut self.bias]
    }

    pub fn names(&self, prefix: &str) -> Vec<String> {
        ["w_x", "w_h", "bias"].iter().map(|n| format!("{prefix}.{n}")).collect()
    }

    pub fn bind(&self, it: &mut impl Iterator<Item = Var>) -> LstmVars {
        LstmVars {
            w_x: next_var(it),
            w_h: next_var(it),
            bias: next_var(it),
            hidden: self.hidden_dim(),
        }
    }
}

impl LstmVars {
    /// One cell update on a batch: `x` is `[B, in]`, `h` and `c` are
    /// `[B, hidden]`. Returns the new `(h, c)`.
    pub fn step<T: Real>(&self, tape: &mut Tape<'_, T>, x: Var, h: Var, c: Var) -> Result<(Var, Var), TensorError> {
        let n = self.hidden;
        let zx = tape.matmul(x, self.w_x)?;
        let zh = tape.matmul(h, self.w_h)?;
        let z = tape.add(zx, zh)?;
        let z = tape.add(z, self.bias)?;
        let i = tape.slice(z, 1, 0, n)?;
        let f = tape.slice(z, 1, n, n)?;
        let g = tape.slice(z, 1, 2 * n, n)?;
        let o = tape.slice(z, 1, 3 * n, n)?;
        let i = tape.sigmoid(i);
        let f = tape.sigmoid(f);
        let g = tape.tanh(g);
        let o = tape.sigmoid(o);
        let keep = tape.mul(f, c)?;
        let write = tape.mul(i, g)?;
        let c_new = tape.add(keep, write)?;
        let squashed = tape.tanh(c_new);
        let h_new = tape.mul(o, squashed)?;
        Ok((h_new, c_new))
    }
}
