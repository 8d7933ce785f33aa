//! Randomized finite-difference checks of the actor and critic graphs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Actor, ActorConfig, Critic, CriticConfig, NetError};
use crate::tensor::gradcheck::{check_coordinates, CoordCheck, DEFAULT_STEP, DEFAULT_TOLERANCE};
use crate::tensor::{GradFault, Tape, Tensor, TensorError, Var};

/// Coordinates checked per graph per trial.
const COORDS_PER_GRAPH: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Graph {
    Actor,
    Critic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckFailure {
    pub trial: usize,
    pub graph: Graph,
    pub check: CoordCheck,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckSummary {
    pub trials: usize,
    pub checks: usize,
    pub max_rel_error: f64,
    pub failures: Vec<GradcheckFailure>,
}

impl GradcheckSummary {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn random_tensor<R: Rng>(shape: &[usize], scale: f64, rng: &mut R) -> Tensor<f64> {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
    Tensor::new(shape, data).expect("shape matches length")
}

fn random_coords<R: Rng>(params: &[Tensor<f64>], count: usize, rng: &mut R) -> Vec<(usize, usize)> {
    let total: usize = params.iter().map(|p| p.numel()).sum();
    (0..count)
        .map(|_| {
            let mut k = rng.random_range(0..total);
            for (i, p) in params.iter().enumerate() {
                if k < p.numel() {
                    return (i, k);
                }
                k -= p.numel();
            }
            unreachable!("index within total")
        })
        .collect()
}

/// Shifts every entry by a small random amount so no bias sits at zero.
fn jitter(params: &mut [Tensor<f64>], rng: &mut impl Rng) {
    for p in params {
        for x in p.data_mut() {
            *x += rng.random_range(-0.3..0.3);
        }
    }
}

fn actor_trial(
    trial: usize,
    rng: &mut ChaCha8Rng,
    fault: Option<GradFault>,
) -> Result<Vec<CoordCheck>, TensorError> {
    let cfg = ActorConfig {
        obs_dim: rng.random_range(2..6),
        n_actions: rng.random_range(3..9),
        hidden: rng.random_range(2..5),
        head_hidden: rng.random_range(2..5),
        recurrent: true,
        forget_bias: 1.0,
    };
    let template = Actor::<f64>::new(&cfg, rng);
    let mut params: Vec<Tensor<f64>> = template.tensors().into_iter().cloned().collect();
    jitter(&mut params, rng);

    let (batch, steps) = (2, 3 + trial % 2);
    let obs: Vec<Tensor<f64>> = (0..steps)
        .map(|_| random_tensor(&[batch, cfg.obs_dim], 1.0, rng))
        .collect();
    let actions: Vec<Vec<usize>> = (0..steps)
        .map(|_| (0..batch).map(|_| rng.random_range(0..cfg.n_actions)).collect())
        .collect();
    let coords = random_coords(&params, COORDS_PER_GRAPH, rng);

    let build = |tape: &mut Tape<'_, f64>, vars: &[Var]| -> Result<Var, TensorError> {
        let av = template.bind(&mut vars.iter().copied());
        let mut h = tape.constant(Tensor::zeros(&[batch, cfg.hidden]));
        let mut c = tape.constant(Tensor::zeros(&[batch, cfg.hidden]));
        let mut acc: Option<Var> = None;
        for (x, a) in obs.iter().zip(&actions) {
            let x = tape.constant(x.clone());
            let (logits, h2, c2) = av.step(tape, x, h, c)?;
            h = h2;
            c = c2;
            let lp = tape.log_softmax(logits);
            let picked = tape.pick(lp, a)?;
            let picked = tape.sum(picked);
            let p = tape.exp(lp);
            let plogp = tape.mul(p, lp)?;
            let neg_ent = tape.sum(plogp);
            let bonus = tape.scale(neg_ent, -0.01);
            let term = tape.add(picked, bonus)?;
            acc = Some(match acc {
                None => term,
                Some(prev) => tape.add(prev, term)?,
            });
        }
        Ok(acc.expect("at least one step"))
    };
    check_coordinates(&params, build, &coords, DEFAULT_STEP, fault)
}

fn critic_trial(
    trial: usize,
    rng: &mut ChaCha8Rng,
    fault: Option<GradFault>,
) -> Result<Vec<CoordCheck>, TensorError> {
    let n_agents = rng.random_range(1..4);
    let cfg = CriticConfig {
        obs_dim: rng.random_range(2..6),
        state_dim: rng.random_range(2..6),
        n_agents,
        widths: vec![rng.random_range(2..6), rng.random_range(2..5)],
        dual: true,
        per_agent_weights: trial % 2 == 1,
    };
    let template = Critic::<f64>::new(&cfg, rng);
    let mut params: Vec<Tensor<f64>> = template.tensors().into_iter().cloned().collect();
    jitter(&mut params, rng);

    let batch = 3;
    let state = random_tensor(&[batch, cfg.state_dim], 1.0, rng);
    let obs: Vec<Tensor<f64>> = (0..n_agents)
        .map(|_| random_tensor(&[batch, cfg.obs_dim], 1.0, rng))
        .collect();
    let targets: Vec<Tensor<f64>> = (0..n_agents)
        .map(|_| random_tensor(&[batch, 1], 2.0, rng))
        .collect();
    let coords = random_coords(&params, COORDS_PER_GRAPH, rng);

    let build = |tape: &mut Tape<'_, f64>, vars: &[Var]| -> Result<Var, TensorError> {
        let cv = template.bind(&mut vars.iter().copied());
        let s = tape.constant(state.clone());
        let vg = cv.global_value(tape, s)?;
        let mut sq = Vec::with_capacity(n_agents);
        for (agent, (o, t)) in obs.iter().zip(&targets).enumerate() {
            let o = tape.constant(o.clone());
            let v = cv.combine(tape, agent, o, vg)?;
            let t = tape.constant(t.clone());
            let d = tape.sub(t, v)?;
            sq.push(tape.mul(d, d)?);
        }
        let all = tape.concat(&sq, 0)?;
        Ok(tape.mean(all))
    };
    check_coordinates(&params, build, &coords, DEFAULT_STEP, fault)
}

/// Runs `trials` trials; each checks random coordinates of a fresh random
/// actor (LSTM replay with log-probabilities and entropy) and a fresh random
/// dual-value critic (squared error against random targets).
pub fn run_trials(trials: usize, seed: u64, fault: Option<GradFault>) -> Result<GradcheckSummary, NetError> {
    let mut summary = GradcheckSummary {
        trials,
        checks: 0,
        max_rel_error: 0.0,
        failures: Vec::new(),
    };
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial as u64));
        let actor = actor_trial(trial, &mut rng, fault)?;
        let critic = critic_trial(trial, &mut rng, fault)?;
        let tagged = actor
            .into_iter()
            .map(|c| (Graph::Actor, c))
            .chain(critic.into_iter().map(|c| (Graph::Critic, c)));
        for (graph, check) in tagged {
            summary.checks += 1;
            summary.max_rel_error = summary.max_rel_error.max(check.rel_error);
            if !(check.rel_error < DEFAULT_TOLERANCE) {
                summary.failures.push(GradcheckFailure { trial, graph, check });
            }
        }
    }
    Ok(summary)
}
