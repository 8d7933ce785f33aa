use super::{Advantages, TrainConfig, TrainError, TrajectoryBatch};
use crate::nets::{bind_all, ActorVars, PolicyBundle};
use crate::tensor::{Adam, Tape, Tensor, Var};

/// Per-sample clipped surrogate `min(ρA, clip(ρ, 1-ε, 1+ε)A)`.
pub fn clipped_objective(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    (ratio * advantage).min(clipped * advantage)
}

/// Averages over the optimizer steps of one update.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossReport {
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub entropy: f64,
    /// Fraction of samples whose ratio left `[1-ε, 1+ε]`.
    pub clip_fraction: f64,
    /// Gradient norm before clipping.
    pub grad_norm: f64,
    /// Largest `|ρ - 1|` seen by the first optimizer step.
    pub first_step_ratio_dev: f64,
    pub steps: usize,
}

struct StepStats {
    actor_loss: f64,
    critic_loss: f64,
    entropy: f64,
    clip_fraction: f64,
    max_ratio_dev: f64,
}

fn to_tensor(rows: usize, cols: usize, data: Vec<f64>) -> Result<Tensor<f64>, TrainError> {
    Ok(Tensor::new(&[rows, cols], data)?)
}

/// Replays the stored sequences of `agent` through its live actor and
/// returns `(log-probs of the taken actions [L], sum of p·log p)` for each
/// episode.
fn replay_actor(
    tape: &mut Tape<'_, f64>,
    av: &ActorVars,
    hidden_dim: usize,
    batch: &TrajectoryBatch,
    episodes: &[usize],
    agent: usize,
) -> Result<Vec<(Var, Var)>, TrainError> {
    let mut out = Vec::with_capacity(episodes.len());
    for &e in episodes {
        let traj = &batch.episodes[e].agents[agent];
        let mut h = tape.constant(Tensor::zeros(&[1, hidden_dim]));
        let mut c = tape.constant(Tensor::zeros(&[1, hidden_dim]));
        let mut logits = Vec::with_capacity(traj.len());
        for o in &traj.obs {
            let x = tape.constant(to_tensor(1, o.len(), o.clone())?);
            let (lg, h2, c2) = av.step(tape, x, h, c)?;
            logits.push(lg);
            h = h2;
            c = c2;
        }
        let logits = tape.concat(&logits, 0)?;
        let lp = tape.log_softmax(logits);
        let picked = tape.pick(lp, &traj.actions)?;
        let p = tape.exp(lp);
        let plogp = tape.mul(p, lp)?;
        out.push((picked, tape.sum(plogp)));
    }
    Ok(out)
}

fn add_all(tape: &mut Tape<'_, f64>, terms: &[Var]) -> Result<Var, TrainError> {
    let mut acc = terms[0];
    for &t in &terms[1..] {
        acc = tape.add(acc, t)?;
    }
    Ok(acc)
}

/// Builds the combined loss for the episodes in `group`, backpropagates and
/// returns the gradients in `bundle.tensors()` order.
fn group_gradients(
    bundle: &PolicyBundle<f64>,
    batch: &TrajectoryBatch,
    adv: &Advantages,
    group: &[usize],
    cfg: &TrainConfig,
    update: usize,
) -> Result<(Vec<Tensor<f64>>, StepStats), TrainError> {
    let tensors = bundle.tensors();
    let mut tape = Tape::new();
    let vars = bind_all(&mut tape, &tensors, true);
    let mut it = vars.iter().copied();
    let actor_vars: Vec<ActorVars> = bundle.actors.iter().map(|a| a.bind(&mut it)).collect();
    let critic_vars = bundle.critic.bind(&mut it);

    // Actor: clipped surrogate plus entropy bonus.
    let mut new_lp = Vec::new();
    let mut neg_ent = Vec::new();
    let (mut old_lp, mut advs) = (Vec::new(), Vec::new());
    for (j, av) in actor_vars.iter().enumerate() {
        let hidden_dim = bundle.actors[j].hidden_dim();
        for (&e, (lp, ne)) in group
            .iter()
            .zip(replay_actor(&mut tape, av, hidden_dim, batch, group, j)?)
        {
            new_lp.push(lp);
            neg_ent.push(ne);
            old_lp.extend_from_slice(&batch.episodes[e].agents[j].log_probs);
            advs.extend_from_slice(&adv.advantages[e][j]);
        }
    }
    let n = old_lp.len();
    let new_lp = tape.concat(&new_lp, 0)?;
    let old = tape.constant(Tensor::vector(old_lp));
    let a = tape.constant(Tensor::vector(advs));
    let diff = tape.sub(new_lp, old)?;
    let ratio = tape.exp(diff);
    let surr1 = tape.mul(ratio, a)?;
    let clipped = tape.clip_by_value(ratio, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon);
    let surr2 = tape.mul(clipped, a)?;
    let objective = tape.minimum(surr1, surr2)?;
    let objective = tape.mean(objective);
    let neg_ent = add_all(&mut tape, &neg_ent)?;
    let mean_neg_ent = tape.scale(neg_ent, 1.0 / n as f64);
    let policy_loss = tape.neg(objective);
    let bonus = tape.scale(mean_neg_ent, cfg.entropy_coef);
    let actor_loss = tape.add(policy_loss, bonus)?;

    // Critic: squared error of the mixed value against the return targets.
    let mut sq = Vec::new();
    for &e in group {
        let ep = &batch.episodes[e];
        let len = ep.len();
        let sd = ep.global_states.first().map_or(0, |s| s.len());
        let states = to_tensor(len, sd, ep.global_states.concat())?;
        let s = tape.constant(states);
        let vg = critic_vars.global_value(&mut tape, s)?;
        for (j, ag) in ep.agents.iter().enumerate() {
            let od = ag.obs.first().map_or(0, |o| o.len());
            let o = tape.constant(to_tensor(len, od, ag.obs.concat())?);
            let v = critic_vars.combine(&mut tape, j, o, vg)?;
            let target = tape.constant(to_tensor(len, 1, adv.returns[e][j].clone())?);
            let d = tape.sub(v, target)?;
            sq.push(tape.mul(d, d)?);
        }
    }
    let sq = tape.concat(&sq, 0)?;
    let mse = tape.mean(sq);
    let critic_loss = tape.scale(mse, cfg.value_coef);
    let loss = tape.add(actor_loss, critic_loss)?;

    let loss_value = tape.value(loss).item();
    if !loss_value.is_finite() {
        return Err(TrainError::NonFinite { update, what: "loss" });
    }
    let grads = tape.backward(loss)?;
    let grads: Vec<Tensor<f64>> = vars
        .iter()
        .zip(&tensors)
        .map(|(&v, t)| grads.get_or_zeros(v, t.shape()))
        .collect();
    if grads.iter().any(|g| !g.all_finite()) {
        return Err(TrainError::NonFinite { update, what: "gradient" });
    }

    let ratios = tape.value(ratio).data();
    let outside = ratios
        .iter()
        .filter(|r| (**r - 1.0).abs() > cfg.clip_epsilon)
        .count();
    let stats = StepStats {
        actor_loss: tape.value(actor_loss).item(),
        critic_loss: tape.value(critic_loss).item(),
        entropy: -tape.value(mean_neg_ent).item(),
        clip_fraction: outside as f64 / n as f64,
        max_ratio_dev: ratios.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max),
    };
    Ok((grads, stats))
}

/// Runs `cfg.epochs` passes over the batch. Each pass splits the episodes
/// into `cfg.minibatches` contiguous groups of whole sequences and takes one
/// optimizer step per group.
pub fn ppo_update(
    bundle: &mut PolicyBundle<f64>,
    optimizer: &mut Adam<f64>,
    batch: &TrajectoryBatch,
    adv: &Advantages,
    cfg: &TrainConfig,
    update: usize,
) -> Result<LossReport, TrainError> {
    let n_ep = batch.episodes.len();
    if n_ep == 0 {
        return Ok(LossReport::default());
    }
    let groups = cfg.minibatches.clamp(1, n_ep);
    let mut report = LossReport::default();
    for _ in 0..cfg.epochs {
        for g in 0..groups {
            let group: Vec<usize> = (g * n_ep / groups..(g + 1) * n_ep / groups).collect();
            let (mut grads, stats) = group_gradients(bundle, batch, adv, &group, cfg, update)?;
            if report.steps == 0 {
                report.first_step_ratio_dev = stats.max_ratio_dev;
            }
            let norm = optimizer.step(&mut bundle.tensors_mut(), &mut grads)?;
            report.actor_loss += stats.actor_loss;
            report.critic_loss += stats.critic_loss;
            report.entropy += stats.entropy;
            report.clip_fraction += stats.clip_fraction;
            report.grad_norm += norm;
            report.steps += 1;
        }
    }
    let k = report.steps as f64;
    report.actor_loss /= k;
    report.critic_loss /= k;
    report.entropy /= k;
    report.clip_fraction /= k;
    report.grad_norm /= k;
    Ok(report)
}
