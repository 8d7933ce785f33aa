//! Experiment plumbing: configuration files, run directories, checkpoints,
//! parameter sweeps and the oracle instance format.

mod checkpoint;
mod config;
mod sweep;

pub use checkpoint::{
    decode_tensors, encode_tensors, load_bundle, save_bundle, CheckpointError, FORMAT_VERSION, MAGIC,
};
pub use config::{config_keys, format_config, parse_config, set_key, ConfigError, RunConfig, RunSettings};
pub use sweep::{run_sweep, write_sweep_csv, SweepMode, SweepParam, SweepRow, SWEEP_CSV_HEADER};

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::nets::PolicyBundle;
use crate::oracle::{OracleError, TinyInstance};
use crate::trainer::{
    train, EpisodeTrajectory, MetricsRow, TrainError, TrainOutcome, TrainSink, METRICS_CSV_HEADER,
};
use crate::world::{WorldError, EVENT_CSV_HEADER, write_event_rows};

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const EVENTS_DIR: &str = "events";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("cannot read config {path}: {source}")]
    ConfigRead { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Config { path: PathBuf, source: ConfigError },
    #[error(transparent)]
    Scenario(#[from] WorldError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("{path}: {source}")]
    Checkpoint { path: PathBuf, source: CheckpointError },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("{0}")]
    Usage(String),
}

impl HarnessError {
    /// Process exit status: 2 for configuration problems, 3 for a
    /// non-finite training loss, 4 for a corrupted checkpoint, 5 when an
    /// oracle instance exceeds the search guard, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::ConfigRead { .. } | HarnessError::Config { .. } | HarnessError::Scenario(_) | HarnessError::Usage(_) => 2,
            HarnessError::Train(TrainError::NonFinite { .. }) => 3,
            HarnessError::Train(TrainError::Config { .. } | TrainError::World(WorldError::Config { .. })) => 2,
            HarnessError::Checkpoint { source, .. } if source.is_corruption() => 4,
            HarnessError::Checkpoint { .. } => 2,
            HarnessError::Oracle(OracleError::Branching(_) | OracleError::TooLarge { .. }) => 5,
            HarnessError::Oracle(_) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads and parses a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig, HarnessError> {
    let text = fs::read_to_string(path).map_err(|source| HarnessError::ConfigRead {
        path: path.to_path_buf(),
        source,
    })?;
    let cfg = parse_config(&text).map_err(|source| HarnessError::Config {
        path: path.to_path_buf(),
        source,
    })?;
    cfg.scenario.validate()?;
    cfg.train.validate()?;
    Ok(cfg)
}

/// Manifest text: provenance comments followed by the resolved
/// configuration, so the manifest itself is a loadable config.
pub fn manifest_text(cfg: &RunConfig, started_unix: u64) -> String {
    format!(
        "# aoiuav run manifest\n# tool_version = {}\n# started_unix = {}\n\
# outputs: {MANIFEST_FILE}, {METRICS_FILE}, {CHECKPOINT_DIR}/ep_<N>.ckpt, {EVENTS_DIR}/ep_<N>.csv\n\n{}",
        env!("CARGO_PKG_VERSION"),
        started_unix,
        format_config(cfg)
    )
}

pub fn checkpoint_path(dir: &Path, episode: usize) -> PathBuf {
    dir.join(CHECKPOINT_DIR).join(format!("ep_{episode}.ckpt"))
}

pub fn write_checkpoint(path: &Path, bundle: &PolicyBundle<f64>) -> Result<(), HarnessError> {
    fs::write(path, save_bundle(bundle)).map_err(io_err(path))
}

/// Reads `path` into a bundle freshly built for `cfg`.
pub fn read_checkpoint(path: &Path, cfg: &RunConfig) -> Result<PolicyBundle<f64>, HarnessError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let mut bundle = cfg.train.init_bundle(&cfg.scenario, cfg.run.seed);
    load_bundle(&mut bundle, &bytes).map_err(|source| HarnessError::Checkpoint {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(bundle)
}

/// Writes training outputs into a run directory.
struct DirSink {
    dir: PathBuf,
    metrics: BufWriter<File>,
    write_events: bool,
}

impl TrainSink for DirSink {
    fn on_episode(&mut self, row: &MetricsRow, episode: &EpisodeTrajectory) -> io::Result<()> {
        writeln!(self.metrics, "{}", row.csv_row())?;
        if self.write_events {
            let path = self.dir.join(EVENTS_DIR).join(format!("ep_{}.csv", row.episode));
            let mut w = BufWriter::new(File::create(path)?);
            writeln!(w, "{EVENT_CSV_HEADER}")?;
            write_event_rows(&mut w, &episode.events)?;
            w.flush()?;
        }
        Ok(())
    }

    fn on_checkpoint(&mut self, episode: usize, bundle: &PolicyBundle<f64>) -> io::Result<()> {
        self.metrics.flush()?;
        let path = self.dir.join(CHECKPOINT_DIR).join(format!("ep_{episode}.ckpt"));
        fs::write(path, save_bundle(bundle))
    }
}

/// Trains with `cfg` and writes the manifest, metrics, checkpoints and
/// (optionally) event logs under `dir`. The last episode always gets a
/// checkpoint.
pub fn run_training(cfg: &RunConfig, dir: &Path, started_unix: u64) -> Result<TrainOutcome, HarnessError> {
    cfg.scenario.validate()?;
    cfg.train.validate()?;
    fs::create_dir_all(dir.join(CHECKPOINT_DIR)).map_err(io_err(dir))?;
    if cfg.run.write_events {
        fs::create_dir_all(dir.join(EVENTS_DIR)).map_err(io_err(dir))?;
    }
    let manifest = dir.join(MANIFEST_FILE);
    fs::write(&manifest, manifest_text(cfg, started_unix)).map_err(io_err(&manifest))?;

    let metrics_path = dir.join(METRICS_FILE);
    let mut metrics = BufWriter::new(File::create(&metrics_path).map_err(io_err(&metrics_path))?);
    writeln!(metrics, "{METRICS_CSV_HEADER}").map_err(io_err(&metrics_path))?;
    let mut sink = DirSink {
        dir: dir.to_path_buf(),
        metrics,
        write_events: cfg.run.write_events,
    };
    let outcome = train(&cfg.scenario, &cfg.train, cfg.run.seed, &mut sink)?;
    sink.metrics.flush().map_err(io_err(&metrics_path))?;
    write_checkpoint(&checkpoint_path(dir, cfg.train.episodes), &outcome.bundle)?;
    Ok(outcome)
}

/// Parses an oracle instance: a configuration file whose `[layout]` section
/// places every entity.
pub fn parse_instance(text: &str) -> Result<TinyInstance, HarnessError> {
    let cfg = parse_config(text).map_err(|source| HarnessError::Config {
        path: PathBuf::from("<instance>"),
        source,
    })?;
    Ok(TinyInstance::new(cfg.scenario)?)
}

pub fn load_instance(path: &Path) -> Result<TinyInstance, HarnessError> {
    let text = fs::read_to_string(path).map_err(|source| HarnessError::ConfigRead {
        path: path.to_path_buf(),
        source,
    })?;
    let cfg = parse_config(&text).map_err(|source| HarnessError::Config {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(TinyInstance::new(cfg.scenario)?)
}

#[cfg(test)]
mod tests;
