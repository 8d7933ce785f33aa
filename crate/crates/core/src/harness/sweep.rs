use std::io::{self, Write};

use super::{HarnessError, RunConfig};
use crate::trainer::{evaluate, train, BaselineKind, GreedyPolicy, LearnedPolicy, NullSink, Policy, RandomPolicy};
use crate::world::Env;

pub const SWEEP_CSV_HEADER: &str = "param_value,mean_peak_aoi,std_peak_aoi";

/// Scenario parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Laser conversion efficiency.
    EtaLe,
    NUavs,
    NIots,
    /// Laser transmit power.
    PL,
}

impl SweepParam {
    pub const NAMES: [&'static str; 4] = ["eta_le", "n_uavs", "n_iots", "P_L"];

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "eta_le" => Some(SweepParam::EtaLe),
            "n_uavs" => Some(SweepParam::NUavs),
            "n_iots" => Some(SweepParam::NIots),
            "P_L" => Some(SweepParam::PL),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::EtaLe => "eta_le",
            SweepParam::NUavs => "n_uavs",
            SweepParam::NIots => "n_iots",
            SweepParam::PL => "P_L",
        }
    }

    /// Copy of `base` with this parameter set to `value`.
    pub fn apply(self, base: &RunConfig, value: f64) -> Result<RunConfig, HarnessError> {
        let mut cfg = base.clone();
        let s = &mut cfg.scenario;
        let count = || {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(HarnessError::Usage(format!("{} must be a positive integer, got {value}", self.name())))
            }
        };
        match self {
            SweepParam::EtaLe => s.laser.conversion_eta = value,
            SweepParam::PL => s.laser.laser_power = value,
            SweepParam::NUavs => s.n_uavs = count()?,
            SweepParam::NIots => {
                s.n_iots = count()?;
                s.obs_k_nearest = s.obs_k_nearest.min(s.n_iots);
            }
        }
        cfg.scenario.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepMode {
    /// Evaluate a fixed heuristic at every point.
    Eval(BaselineKind),
    /// Train at every point, then evaluate the argmax policy.
    Train,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub param_value: f64,
    pub mean_peak_aoi: f64,
    pub std_peak_aoi: f64,
}

/// Runs one point per value, in ascending value order. Every point uses
/// the configured seed.
pub fn run_sweep(
    base: &RunConfig,
    param: SweepParam,
    values: &[f64],
    mode: SweepMode,
) -> Result<Vec<SweepRow>, HarnessError> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let seed = base.run.seed;
    let episodes = base.run.eval_episodes;
    sorted
        .into_iter()
        .map(|v| {
            let cfg = param.apply(base, v)?;
            let env = Env::new(cfg.scenario.clone())?;
            let mut policy: Box<dyn Policy> = match mode {
                SweepMode::Eval(BaselineKind::Greedy) => Box::new(GreedyPolicy::new()),
                SweepMode::Eval(BaselineKind::Random) => Box::new(RandomPolicy),
                SweepMode::Eval(BaselineKind::MappoFf) => {
                    return Err(HarnessError::Usage("mappo_ff needs training; use the train mode".into()))
                }
                SweepMode::Train => {
                    let out = train(&cfg.scenario, &cfg.train, seed, &mut NullSink)?;
                    Box::new(LearnedPolicy::greedy(out.bundle.actors))
                }
            };
            let report = evaluate(policy.as_mut(), &env, episodes, seed)?;
            Ok(SweepRow {
                param_value: v,
                mean_peak_aoi: report.mean_peak_aoi,
                std_peak_aoi: report.std_peak_aoi,
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(out: &mut W, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.param_value, r.mean_peak_aoi, r.std_peak_aoi)?;
    }
    Ok(())
}
