use rand::Rng;

use super::{bind_all, mlp_forward, LinearVars, Mlp, NetError};
use crate::scalar::Real;
use crate::tensor::{Tape, Tensor, TensorError, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct CriticConfig {
    pub obs_dim: usize,
    pub state_dim: usize,
    pub n_agents: usize,
    /// Hidden widths shared by the local and global value networks.
    pub widths: Vec<usize>,
    /// `false` keeps only the global value network.
    pub dual: bool,
    /// One `(ℓ_l, ℓ_g)` pair per agent instead of a shared pair.
    pub per_agent_weights: bool,
}

impl CriticConfig {
    pub fn new(obs_dim: usize, state_dim: usize, n_agents: usize) -> Self {
        Self {
            obs_dim,
            state_dim,
            n_agents,
            widths: vec![128, 64],
            dual: true,
            per_agent_weights: false,
        }
    }

    fn layer_sizes(&self, input: usize) -> Vec<usize> {
        let mut w = vec![input];
        w.extend(&self.widths);
        w.push(1);
        w
    }
}

/// Centralized critic `V_i = w_l·V_local^i(o_i) + w_g·V_global(s)` with
/// `(w_l, w_g) = softmax(ℓ_l, ℓ_g)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Critic<T> {
    pub local: Vec<Mlp<T>>,
    pub global: Mlp<T>,
    /// Mixing logits, `[2]` or `[n_agents, 2]`; absent for a single-head
    /// critic.
    pub mix: Option<Tensor<T>>,
}

#[derive(Debug, Clone)]
pub struct CriticVars {
    local: Vec<Vec<LinearVars>>,
    global: Vec<LinearVars>,
    mix: Option<Var>,
    per_agent: bool,
}

impl<T: Real> Critic<T> {
    pub fn new<R: Rng + ?Sized>(cfg: &CriticConfig, rng: &mut R) -> Self {
        let local = if cfg.dual {
            (0..cfg.n_agents).map(|_| Mlp::new(&cfg.layer_sizes(cfg.obs_dim), rng)).collect()
        } else {
            Vec::new()
        };
        Self {
            local,
            global: Mlp::new(&cfg.layer_sizes(cfg.state_dim), rng),
            mix: Self::initial_mix(cfg),
        }
    }

    pub fn zeros(cfg: &CriticConfig) -> Self {
        let local = if cfg.dual {
            (0..cfg.n_agents).map(|_| Mlp::zeros(&cfg.layer_sizes(cfg.obs_dim))).collect()
        } else {
            Vec::new()
        };
        Self {
            local,
            global: Mlp::zeros(&cfg.layer_sizes(cfg.state_dim)),
            mix: Self::initial_mix(cfg),
        }
    }

    fn initial_mix(cfg: &CriticConfig) -> Option<Tensor<T>> {
        match (cfg.dual, cfg.per_agent_weights) {
            (false, _) => None,
            (true, false) => Some(Tensor::zeros(&[2])),
            (true, true) => Some(Tensor::zeros(&[cfg.n_agents, 2])),
        }
    }

    pub fn is_dual(&self) -> bool {
        self.mix.is_some()
    }

    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        let mut out: Vec<&Tensor<T>> = self.local.iter().flat_map(|m| m.tensors()).collect();
        out.extend(self.global.tensors());
        out.extend(self.mix.as_ref());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out: Vec<&mut Tensor<T>> = self.local.iter_mut().flat_map(|m| m.tensors_mut()).collect();
        out.extend(self.global.tensors_mut());
        out.extend(self.mix.as_mut());
        out
    }

    pub fn names(&self, prefix: &str) -> Vec<String> {
        let mut out: Vec<String> = self
            .local
            .iter()
            .enumerate()
            .flat_map(|(i, m)| m.names(&format!("{prefix}.local.{i}")))
            .collect();
        out.extend(self.global.names(&format!("{prefix}.global")));
        if self.mix.is_some() {
            out.push(format!("{prefix}.mix"));
        }
        out
    }

    pub fn bind(&self, it: &mut impl Iterator<Item = Var>) -> CriticVars {
        let local = self.local.iter().map(|m| m.bind(it)).collect();
        let global = self.global.bind(it);
        let mix = self.mix.as_ref().map(|_| it.next().expect("mix variable"));
        CriticVars {
            local,
            global,
            mix,
            per_agent: self.mix.as_ref().is_some_and(|m| m.rank() == 2),
        }
    }

    /// `(w_l, w_g)` for `agent`; `(0, 1)` for a single-head critic.
    pub fn mix_weights(&self, agent: usize) -> (T, T) {
        match &self.mix {
            None => (T::zero(), T::one()),
            Some(m) => {
                let row = if m.rank() == 2 { &m.data()[2 * agent..2 * agent + 2] } else { m.data() };
                let mx = row[0].max(row[1]);
                let (a, b) = ((row[0] - mx).exp(), (row[1] - mx).exp());
                (a / (a + b), b / (a + b))
            }
        }
    }

    fn check_inputs(&self, obs: &[T], state: &[T], agent: usize) -> Result<(), NetError> {
        if self.is_dual() && agent >= self.local.len() {
            return Err(NetError::NoSuchAgent {
                agent,
                n_agents: self.local.len(),
            });
        }
        if let Some(l) = self.local.first() {
            if obs.len() != l.in_dim() {
                return Err(NetError::Dimension {
                    what: "critic observation",
                    expected: l.in_dim(),
                    got: obs.len(),
                });
            }
        }
        if state.len() != self.global.in_dim() {
            return Err(NetError::Dimension {
                what: "critic global state",
                expected: self.global.in_dim(),
                got: state.len(),
            });
        }
        Ok(())
    }

    /// Value of `agent` outside of training.
    pub fn value(&self, obs: &[T], state: &[T], agent: usize) -> Result<T, NetError> {
        self.check_inputs(obs, state, agent)?;
        let params = self.tensors();
        let mut tape = Tape::new();
        let vars = bind_all(&mut tape, &params, false);
        let cv = self.bind(&mut vars.into_iter());
        let o = tape.constant(Tensor::new(&[1, obs.len()], obs.to_vec())?);
        let s = tape.constant(Tensor::new(&[1, state.len()], state.to_vec())?);
        let vg = cv.global_value(&mut tape, s)?;
        let v = cv.combine(&mut tape, agent, o, vg)?;
        Ok(tape.value(v).item())
    }

    /// Values of agents `0..obs.len()` at one slot, evaluating the global
    /// head once.
    pub fn values(&self, obs: &[Vec<T>], state: &[T]) -> Result<Vec<T>, NetError> {
        for (agent, o) in obs.iter().enumerate() {
            self.check_inputs(o, state, agent)?;
        }
        let params = self.tensors();
        let mut tape = Tape::new();
        let vars = bind_all(&mut tape, &params, false);
        let cv = self.bind(&mut vars.into_iter());
        let s = tape.constant(Tensor::new(&[1, state.len()], state.to_vec())?);
        let vg = cv.global_value(&mut tape, s)?;
        let mut out = Vec::with_capacity(obs.len());
        for (agent, o) in obs.iter().enumerate() {
            let ov = tape.constant(Tensor::new(&[1, o.len()], o.clone())?);
            let v = cv.combine(&mut tape, agent, ov, vg)?;
            out.push(tape.value(v).item());
        }
        Ok(out)
    }
}

impl CriticVars {
    /// `V_global` for a `[B, state]` batch, shape `[B, 1]`.
    pub fn global_value<T: Real>(&self, tape: &mut Tape<'_, T>, state: Var) -> Result<Var, TensorError> {
        mlp_forward(tape, &self.global, state)
    }

    /// Combines a precomputed `V_global` with `agent`'s local value.
    pub fn combine<T: Real>(&self, tape: &mut Tape<'_, T>, agent: usize, obs: Var, v_global: Var) -> Result<Var, TensorError> {
        let Some(mix) = self.mix else {
            return Ok(v_global);
        };
        let v_local = mlp_forward(tape, &self.local[agent], obs)?;
        let (logits, axis) = if self.per_agent {
            (tape.slice(mix, 0, agent, 1)?, 1)
        } else {
            (mix, 0)
        };
        let w = tape.softmax(logits);
        let w_l = tape.slice(w, axis, 0, 1)?;
        let w_g = tape.slice(w, axis, 1, 1)?;
        let a = tape.mul(v_local, w_l)?;
        let b = tape.mul(v_global, w_g)?;
        tape.add(a, b)
    }

    /// `V_i` for a batch, shape `[B, 1]`.
    pub fn value<T: Real>(&self, tape: &mut Tape<'_, T>, agent: usize, obs: Var, state: Var) -> Result<Var, TensorError> {
        let vg = self.global_value(tape, state)?;
        self.combine(tape, agent, obs, vg)
    }
}
