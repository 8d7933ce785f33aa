use super::TrajectoryBatch;

/// Generalized advantage estimates for one sequence.
///
/// `dones[t]` marks that the episode ends after step `t`, which cuts both
/// the bootstrap and the accumulation. `bootstrap` is the value after the
/// last step and only matters when that step is not terminal. Returns
/// `(advantages, return_targets)`.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert!(values.len() == n && dones.len() == n, "sequence lengths differ");
    let mut adv = vec![0.0; n];
    let mut next_value = bootstrap;
    let mut running = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        running = delta + gamma * lambda * live * running;
        adv[t] = running;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Advantages and return targets, indexed `[episode][agent][slot]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Advantages {
    pub advantages: Vec<Vec<Vec<f64>>>,
    pub returns: Vec<Vec<Vec<f64>>>,
}

impl Advantages {
    pub fn flat_advantages(&self) -> impl Iterator<Item = f64> + '_ {
        self.advantages.iter().flatten().flatten().copied()
    }
}

pub fn compute_advantages(batch: &TrajectoryBatch, gamma: f64, lambda: f64, reward_scale: f64) -> Advantages {
    let mut advantages = Vec::with_capacity(batch.episodes.len());
    let mut returns = Vec::with_capacity(batch.episodes.len());
    for ep in &batch.episodes {
        let (mut a_ep, mut r_ep) = (Vec::new(), Vec::new());
        for ag in &ep.agents {
            let rewards: Vec<f64> = ag.rewards.iter().map(|r| r * reward_scale).collect();
            let (a, r) = gae(&rewards, &ag.values, &ag.dones, ag.bootstrap, gamma, lambda);
            a_ep.push(a);
            r_ep.push(r);
        }
        advantages.push(a_ep);
        returns.push(r_ep);
    }
    Advantages { advantages, returns }
}

/// Shifts and scales all advantages of the update to mean 0 and standard
/// deviation 1. Leaves them untouched when they are all equal.
pub fn normalize_advantages(adv: &mut Advantages) {
    let n = adv.flat_advantages().count();
    if n == 0 {
        return;
    }
    let mean = adv.flat_advantages().sum::<f64>() / n as f64;
    let var = adv.flat_advantages().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    if !(std > 0.0) {
        return;
    }
    for a in adv.advantages.iter_mut().flatten().flatten() {
        *a = (*a - mean) / std;
    }
}
