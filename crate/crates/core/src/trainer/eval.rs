use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::rollout::reward_weights;
use super::{episode_seed, EpisodeStats, Policy, TrainError};
use crate::world::{check_constraints, ConstraintReport, Env, EpisodeLog};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub policy: String,
    pub episodes: usize,
    pub peak_aoi: Vec<usize>,
    pub mean_peak_aoi: f64,
    pub std_peak_aoi: f64,
    pub max_peak_aoi: usize,
    pub mean_cum_reward: f64,
    pub mean_aoi_reward: f64,
    pub mean_energy_reward: f64,
    pub mean_collection_reward: f64,
    pub mean_collections: f64,
    pub failures: usize,
    /// Constraint counts summed over all episodes.
    pub constraints: ConstraintReport,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str = "policy,episodes,mean_peak_aoi,std_peak_aoi,max_peak_aoi,\
mean_cum_reward,mean_aoi_reward,mean_energy_reward,mean_collection_reward,mean_collections,failures,\
uncollected_iots,iot_energy_violations,uav_energy_violations,collisions,boundary_clips";

    pub fn csv_row(&self) -> String {
        let c = &self.constraints;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.policy,
            self.episodes,
            self.mean_peak_aoi,
            self.std_peak_aoi,
            self.max_peak_aoi,
            self.mean_cum_reward,
            self.mean_aoi_reward,
            self.mean_energy_reward,
            self.mean_collection_reward,
            self.mean_collections,
            self.failures,
            c.uncollected_iots,
            c.iot_energy_violations,
            c.uav_energy_violations,
            c.collisions,
            c.boundary_clips,
        )
    }

    pub fn summary(&self) -> String {
        let c = &self.constraints;
        format!(
            "policy {} over {} episodes\n  peak AoI: mean {:.3}, std {:.3}, max {}\n  \
reward: cumulative {:.4}, aoi {:.4}, energy {:.4}, collection {:.4}\n  \
collections per episode {:.2}, failed episodes {}\n  \
constraints: uncollected {}, iot energy {}, uav energy {}, collisions {}, clips {}",
            self.policy,
            self.episodes,
            self.mean_peak_aoi,
            self.std_peak_aoi,
            self.max_peak_aoi,
            self.mean_cum_reward,
            self.mean_aoi_reward,
            self.mean_energy_reward,
            self.mean_collection_reward,
            self.mean_collections,
            self.failures,
            c.uncollected_iots,
            c.iot_energy_violations,
            c.uav_energy_violations,
            c.collisions,
            c.boundary_clips,
        )
    }
}

/// Plays `episodes` episodes of `policy`; `on_episode` sees every log.
pub fn evaluate_with<F>(
    policy: &mut dyn Policy,
    env: &Env,
    episodes: usize,
    seed: u64,
    mut on_episode: F,
) -> Result<EvalReport, TrainError>
where
    F: FnMut(usize, &EpisodeLog) -> Result<(), TrainError>,
{
    let cfg = env.config();
    let weights = reward_weights(env);
    let mut stats = Vec::with_capacity(episodes);
    let mut constraints = ConstraintReport::default();
    for k in 0..episodes {
        let mut rng = ChaCha8Rng::seed_from_u64(episode_seed(seed, k as u64));
        let mut state = env.reset(cfg.rng_seed);
        policy.begin_episode(env, &state);
        let mut log = EpisodeLog::new(state.clone());
        let mut s = EpisodeStats::default();
        while !state.done {
            let joint = policy.act(env, &state, &mut rng)?;
            let out = env.step(&state, &joint)?;
            s.absorb(&out.state, &out.rewards, weights);
            log.record(&out.state);
            state = out.state;
        }
        s.finish(&state, cfg.horizon);
        constraints.merge(&check_constraints(&log, cfg));
        on_episode(k, &log)?;
        stats.push(s);
    }
    Ok(report(policy.name(), &stats, constraints))
}

/// Plays `episodes` episodes of `policy` and aggregates them.
pub fn evaluate(policy: &mut dyn Policy, env: &Env, episodes: usize, seed: u64) -> Result<EvalReport, TrainError> {
    evaluate_with(policy, env, episodes, seed, |_, _| Ok(()))
}

fn report(name: &str, stats: &[EpisodeStats], constraints: ConstraintReport) -> EvalReport {
    let n = stats.len().max(1) as f64;
    let mean = |f: &dyn Fn(&EpisodeStats) -> f64| stats.iter().map(f).sum::<f64>() / n;
    let mean_peak = mean(&|s| s.peak_aoi as f64);
    let var = mean(&|s| (s.peak_aoi as f64 - mean_peak).powi(2));
    EvalReport {
        policy: name.to_string(),
        episodes: stats.len(),
        peak_aoi: stats.iter().map(|s| s.peak_aoi).collect(),
        mean_peak_aoi: mean_peak,
        std_peak_aoi: var.sqrt(),
        max_peak_aoi: stats.iter().map(|s| s.peak_aoi).max().unwrap_or(0),
        mean_cum_reward: mean(&|s| s.cum_reward),
        mean_aoi_reward: mean(&|s| s.aoi_reward),
        mean_energy_reward: mean(&|s| s.energy_reward),
        mean_collection_reward: mean(&|s| s.collection_reward),
        mean_collections: mean(&|s| s.collections as f64),
        failures: stats.iter().filter(|s| s.failed).count(),
        constraints,
    }
}
