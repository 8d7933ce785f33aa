use std::io;
use std::time::Instant;

use super::{
    collect_rollout, compute_advantages, normalize_advantages, ppo_update, EpisodeTrajectory, LossReport, TrainConfig,
    TrainError,
};
use crate::nets::PolicyBundle;
use crate::tensor::Adam;
use crate::world::{Env, ScenarioConfig};

pub const METRICS_CSV_HEADER: &str =
    "episode,cum_reward,aoi_reward,energy_reward,peak_aoi,collections,collisions,clips,wall_ms";

/// One row of the metrics stream. Rewards are per-agent averages summed
/// over the episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    /// 1-based episode number.
    pub episode: usize,
    pub cum_reward: f64,
    pub aoi_reward: f64,
    pub energy_reward: f64,
    pub peak_aoi: usize,
    pub collections: usize,
    pub collisions: usize,
    pub clips: usize,
    pub wall_ms: u64,
}

impl MetricsRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.episode,
            self.cum_reward,
            self.aoi_reward,
            self.energy_reward,
            self.peak_aoi,
            self.collections,
            self.collisions,
            self.clips,
            self.wall_ms
        )
    }
}

/// Receives the outputs of a run as they are produced.
pub trait TrainSink {
    fn on_episode(&mut self, row: &MetricsRow, episode: &EpisodeTrajectory) -> io::Result<()>;

    fn on_update(&mut self, _update: usize, _report: &LossReport) -> io::Result<()> {
        Ok(())
    }

    /// Called after the update that completes episode `episode` whenever it
    /// crosses a multiple of the checkpoint interval.
    fn on_checkpoint(&mut self, _episode: usize, _bundle: &PolicyBundle<f64>) -> io::Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NullSink;

impl TrainSink for NullSink {
    fn on_episode(&mut self, _row: &MetricsRow, _episode: &EpisodeTrajectory) -> io::Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub bundle: PolicyBundle<f64>,
    pub metrics: Vec<MetricsRow>,
    pub losses: Vec<LossReport>,
}

/// Base sampling seed for the episodes starting at `first_episode`.
fn rollout_seed(seed: u64, first_episode: usize) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(first_episode as u64)
}

/// Alternates rollouts and updates until `cfg.episodes` episodes have been
/// played.
pub fn train(
    scenario: &ScenarioConfig,
    cfg: &TrainConfig,
    seed: u64,
    sink: &mut dyn TrainSink,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let env = Env::new(scenario.clone())?;
    let mut bundle = cfg.init_bundle(scenario, seed);
    let mut optimizer = Adam::new(cfg.adam(), bundle.tensors());
    let mut metrics = Vec::with_capacity(cfg.episodes);
    let mut losses = Vec::new();
    let mut done = 0;
    let mut update = 0;

    while done < cfg.episodes {
        let k = cfg.episodes_per_update.min(cfg.episodes - done);
        let started = Instant::now();
        let batch = collect_rollout(&env, &bundle, k, rollout_seed(seed, done), cfg.threads)?;
        let mut adv = compute_advantages(&batch, cfg.gamma, cfg.gae_lambda, cfg.reward_scale);
        if cfg.normalize_advantages {
            normalize_advantages(&mut adv);
        }
        let report = ppo_update(&mut bundle, &mut optimizer, &batch, &adv, cfg, update)?;
        update += 1;
        if update % cfg.sync_period == 0 {
            bundle.sync_old();
        }
        let wall_ms = if cfg.record_wall_time {
            (started.elapsed().as_millis() / k as u128) as u64
        } else {
            0
        };

        for (i, ep) in batch.episodes.iter().enumerate() {
            let s = &ep.stats;
            let row = MetricsRow {
                episode: done + i + 1,
                cum_reward: s.cum_reward,
                aoi_reward: s.aoi_reward,
                energy_reward: s.energy_reward,
                peak_aoi: s.peak_aoi,
                collections: s.collections,
                collisions: s.collisions,
                clips: s.clips,
                wall_ms,
            };
            sink.on_episode(&row, ep)?;
            metrics.push(row);
        }
        sink.on_update(update, &report)?;
        losses.push(report);

        let before = done;
        done += k;
        if cfg.eval_interval > 0 && done / cfg.eval_interval > before / cfg.eval_interval {
            sink.on_checkpoint(done, &bundle)?;
        }
    }
    Ok(TrainOutcome {
        bundle,
        metrics,
        losses,
    })
}
