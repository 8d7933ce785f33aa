use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Actor, ActorConfig, Critic, CriticConfig};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Per-agent actors, their frozen copies and the shared critic.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyBundle<T> {
    pub actors: Vec<Actor<T>>,
    pub old_actors: Vec<Actor<T>>,
    pub critic: Critic<T>,
}

impl<T: Real> PolicyBundle<T> {
    /// Seeded initialization; the old actors start as copies.
    pub fn new(actor: &ActorConfig, critic: &CriticConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actors: Vec<Actor<T>> = (0..critic.n_agents).map(|_| Actor::new(actor, &mut rng)).collect();
        let critic = Critic::new(critic, &mut rng);
        Self {
            old_actors: actors.clone(),
            actors,
            critic,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.actors.len()
    }

    /// Copies the live actors into the frozen ones.
    pub fn sync_old(&mut self) {
        self.old_actors.clone_from(&self.actors);
    }

    /// Trainable tensors: every actor in agent order, then the critic.
    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        let mut out: Vec<&Tensor<T>> = self.actors.iter().flat_map(|a| a.tensors()).collect();
        out.extend(self.critic.tensors());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out: Vec<&mut Tensor<T>> = self.actors.iter_mut().flat_map(|a| a.tensors_mut()).collect();
        out.extend(self.critic.tensors_mut());
        out
    }

    pub fn names(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .actors
            .iter()
            .enumerate()
            .flat_map(|(i, a)| a.names(&format!("actor.{i}")))
            .collect();
        out.extend(self.critic.names("critic"));
        out
    }

    /// Number of actor tensors preceding the critic's in `tensors()`.
    pub fn actor_tensor_count(&self) -> usize {
        self.actors.iter().map(|a| a.tensors().len()).sum()
    }
}
