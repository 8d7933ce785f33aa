//! `key = value` configuration files with `[section]` headers.
//!
//! Every key has a default, so an empty file describes the canonical
//! scenario with default training settings. Unknown sections and keys are
//! rejected. The `[layout]` section holds `UAV`, `IOT` and `LBD` records
//! instead of keys.

use std::fmt::Write as _;

use thiserror::Error;

use crate::trainer::TrainConfig;
use crate::world::{format_layout, parse_layout_line, CollectReward, Layout, ScenarioConfig};

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: `{key}`: {message}")]
pub struct ConfigError {
    pub line: usize,
    /// Offending key, section or record.
    pub key: String,
    pub message: String,
}

/// Settings of a run that belong to neither the scenario nor the trainer.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub seed: u64,
    /// Episodes played by `eval` and by evaluation-mode sweeps.
    pub eval_episodes: usize,
    /// Write `events/ep_<N>.csv` for every training episode.
    pub write_events: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            seed: 0,
            eval_episodes: 20,
            write_events: false,
        }
    }
}

/// Fully resolved configuration of a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub train: TrainConfig,
    pub run: RunSettings,
}

trait Value: Sized {
    fn render(&self) -> String;
    fn read(s: &str) -> Result<Self, String>;
}

impl Value for f64 {
    fn render(&self) -> String {
        // Display prints the shortest string that parses back to the same
        // value, always with `.` as the decimal separator.
        format!("{self}")
    }

    fn read(s: &str) -> Result<Self, String> {
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("expected a finite number, got `{s}`"))
    }
}

impl Value for usize {
    fn render(&self) -> String {
        self.to_string()
    }

    fn read(s: &str) -> Result<Self, String> {
        s.parse().map_err(|_| format!("expected a nonnegative integer, got `{s}`"))
    }
}

impl Value for u64 {
    fn render(&self) -> String {
        self.to_string()
    }

    fn read(s: &str) -> Result<Self, String> {
        s.parse().map_err(|_| format!("expected a nonnegative integer, got `{s}`"))
    }
}

impl Value for bool {
    fn render(&self) -> String {
        self.to_string()
    }

    fn read(s: &str) -> Result<Self, String> {
        match s {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(format!("expected `true` or `false`, got `{s}`")),
        }
    }
}

impl Value for CollectReward {
    fn render(&self) -> String {
        self.name().to_string()
    }

    fn read(s: &str) -> Result<Self, String> {
        CollectReward::parse(s).ok_or_else(|| format!("expected `count` or `age`, got `{s}`"))
    }
}

impl Value for Vec<usize> {
    fn render(&self) -> String {
        self.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(",")
    }

    fn read(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|w| usize::read(w.trim()))
            .collect::<Result<Vec<_>, _>>()
            .and_then(|v| if v.is_empty() { Err("expected at least one width".into()) } else { Ok(v) })
    }
}

struct Field {
    section: &'static str,
    key: &'static str,
    get: fn(&RunConfig) -> String,
    set: fn(&mut RunConfig, &str) -> Result<(), String>,
}

macro_rules! field {
    ($section:literal, $key:literal, $($path:ident).+) => {
        Field {
            section: $section,
            key: $key,
            get: |c| Value::render(&c.$($path).+),
            set: |c, v| {
                c.$($path).+ = Value::read(v)?;
                Ok(())
            },
        }
    };
}

fn fields() -> Vec<Field> {
    vec![
        field!("run", "seed", run.seed),
        field!("run", "eval_episodes", run.eval_episodes),
        field!("run", "write_events", run.write_events),
        field!("scenario", "n_uavs", scenario.n_uavs),
        field!("scenario", "n_iots", scenario.n_iots),
        field!("scenario", "n_lbds", scenario.n_lbds),
        field!("scenario", "area_half_side", scenario.area_half_side),
        field!("scenario", "altitude_H", scenario.altitude),
        field!("scenario", "speed_v", scenario.speed),
        field!("scenario", "slot_dt", scenario.slot_dt),
        field!("scenario", "horizon_T", scenario.horizon),
        field!("scenario", "charge_radius_Rc", scenario.charge_radius),
        field!("scenario", "flight_limit_2Rc", scenario.flight_limit),
        field!("scenario", "e_full", scenario.e_full),
        field!("scenario", "e_init_frac", scenario.e_init_frac),
        field!("scenario", "e_charge_threshold", scenario.e_charge_threshold),
        field!("scenario", "e_full_tol", scenario.e_full_tol),
        field!("scenario", "e_iot_init", scenario.e_iot_init),
        field!("scenario", "e_iot_floor", scenario.e_iot_floor),
        field!("scenario", "data_volume_Vi", scenario.data_volume),
        field!("scenario", "comm_radius", scenario.comm_radius),
        field!("scenario", "collision_dist_d", scenario.collision_dist),
        field!("scenario", "obs_k_nearest", scenario.obs_k_nearest),
        field!("scenario", "alpha_a", scenario.alpha_a),
        field!("scenario", "beta_p", scenario.beta_p),
        field!("scenario", "gamma_s", scenario.gamma_s),
        field!("scenario", "r_pen1", scenario.r_pen1),
        field!("scenario", "r_pen2", scenario.r_pen2),
        field!("scenario", "r_0", scenario.r_0),
        field!("scenario", "event_penalty", scenario.event_penalty),
        field!("scenario", "death_penalty", scenario.death_penalty),
        field!("scenario", "aoi_norm", scenario.aoi_norm),
        field!("scenario", "collect_reward", scenario.collect_reward),
        field!("scenario", "regenerate_on_collect", scenario.regenerate_on_collect),
        field!("scenario", "include_hover_action", scenario.include_hover_action),
        field!("scenario", "rate_gated", scenario.rate_gated),
        field!("scenario", "rng_seed", scenario.rng_seed),
        field!("channel", "bandwidth_W", scenario.channel.bandwidth),
        field!("channel", "ref_snr", scenario.channel.ref_snr),
        field!("channel", "tx_power_Pi", scenario.channel.tx_power),
        field!("channel", "pathloss_exponent_alpha", scenario.channel.pathloss_exponent),
        field!("channel", "b1", scenario.channel.b1),
        field!("channel", "b2", scenario.channel.b2),
        field!("channel", "mu_los", scenario.channel.mu_los),
        field!("channel", "mu_nlos", scenario.channel.mu_nlos),
        field!("laser", "laser_power_PL", scenario.laser.laser_power),
        field!("laser", "conversion_eta_le", scenario.laser.conversion_eta),
        field!("laser", "attenuation_delta", scenario.laser.attenuation),
        field!("propulsion", "p_alpha", scenario.propulsion.p_alpha),
        field!("propulsion", "p_beta", scenario.propulsion.p_beta),
        field!("propulsion", "v_tip", scenario.propulsion.v_tip),
        field!("propulsion", "v0_hover", scenario.propulsion.v0_hover),
        field!("propulsion", "d0_drag", scenario.propulsion.d0_drag),
        field!("propulsion", "rho_air", scenario.propulsion.rho_air),
        field!("propulsion", "omega_solidity", scenario.propulsion.solidity),
        field!("propulsion", "rotor_area_A", scenario.propulsion.rotor_area),
        field!("train", "episodes", train.episodes),
        field!("train", "gamma", train.gamma),
        field!("train", "gae_lambda", train.gae_lambda),
        field!("train", "clip_epsilon", train.clip_epsilon),
        field!("train", "epochs", train.epochs),
        field!("train", "episodes_per_update", train.episodes_per_update),
        field!("train", "minibatches", train.minibatches),
        field!("train", "entropy_coef", train.entropy_coef),
        field!("train", "value_coef", train.value_coef),
        field!("train", "sync_period", train.sync_period),
        field!("train", "lr", train.lr),
        field!("train", "max_grad_norm", train.max_grad_norm),
        field!("train", "adam_beta1", train.adam_beta1),
        field!("train", "adam_beta2", train.adam_beta2),
        field!("train", "adam_eps", train.adam_eps),
        field!("train", "eval_interval", train.eval_interval),
        field!("train", "normalize_advantages", train.normalize_advantages),
        field!("train", "reward_scale", train.reward_scale),
        field!("train", "hidden", train.hidden),
        field!("train", "head_hidden", train.head_hidden),
        field!("train", "critic_widths", train.critic_widths),
        field!("train", "recurrent", train.recurrent),
        field!("train", "dual_critic", train.dual_critic),
        field!("train", "per_agent_mix", train.per_agent_mix),
        field!("train", "forget_bias", train.forget_bias),
        field!("train", "record_wall_time", train.record_wall_time),
    ]
}

const SECTIONS: [&str; 7] = ["run", "scenario", "channel", "laser", "propulsion", "train", "layout"];

/// Every `(section, key)` pair accepted by [`parse_config`], in file order.
pub fn config_keys() -> Vec<(&'static str, &'static str)> {
    fields().iter().map(|f| (f.section, f.key)).collect()
}

fn err(line: usize, key: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        key: key.into(),
        message: message.into(),
    }
}

/// Parses a configuration file. Keys before the first header belong to
/// `[scenario]`. When `aoi_norm` is not given it follows `horizon_T`.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let table = fields();
    let mut cfg = RunConfig::default();
    let mut section = "scenario";
    let mut seen: Vec<(&str, &str)> = Vec::new();
    let mut layout = Layout::default();
    let mut has_layout = false;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(line_no, line, "unterminated section header"))?
                .trim();
            section = SECTIONS
                .iter()
                .copied()
                .find(|s| *s == name)
                .ok_or_else(|| err(line_no, name, "unknown section"))?;
            continue;
        }
        if section == "layout" {
            has_layout = true;
            let known = parse_layout_line(&mut layout, line_no, line)
                .map_err(|e| err(line_no, "layout", e.to_string()))?;
            if !known {
                return Err(err(line_no, line, "expected a UAV, IOT or LBD record"));
            }
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(line_no, line, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        let f = table
            .iter()
            .find(|f| f.section == section && f.key == key)
            .ok_or_else(|| err(line_no, key, format!("unknown key in [{section}]")))?;
        if seen.contains(&(f.section, f.key)) {
            return Err(err(line_no, key, "given twice"));
        }
        seen.push((f.section, f.key));
        (f.set)(&mut cfg, value).map_err(|m| err(line_no, key, m))?;
    }

    if !seen.contains(&("scenario", "aoi_norm")) {
        cfg.scenario.aoi_norm = cfg.scenario.horizon as f64;
    }
    if has_layout {
        cfg.scenario.layout = Some(layout);
    }
    Ok(cfg)
}

/// Writes every key with its resolved value. Parsing the output gives back
/// an identical configuration.
pub fn format_config(cfg: &RunConfig) -> String {
    let mut out = String::new();
    let mut current = "";
    for f in fields() {
        if f.section != current {
            if !current.is_empty() {
                out.push('\n');
            }
            let _ = writeln!(out, "[{}]", f.section);
            current = f.section;
        }
        let _ = writeln!(out, "{} = {}", f.key, (f.get)(cfg));
    }
    if let Some(layout) = &cfg.scenario.layout {
        out.push_str("\n[layout]\n");
        out.push_str(&format_layout(layout));
    }
    out
}

/// Sets one key given as `section.key` or a bare key name that is unique
/// across sections.
pub fn set_key(cfg: &mut RunConfig, name: &str, value: &str) -> Result<(), ConfigError> {
    let table = fields();
    let matches: Vec<&Field> = match name.split_once('.') {
        Some((s, k)) => table.iter().filter(|f| f.section == s && f.key == k).collect(),
        None => table.iter().filter(|f| f.key == name).collect(),
    };
    match matches.as_slice() {
        [f] => (f.set)(cfg, value).map_err(|m| err(0, name, m)),
        [] => Err(err(0, name, "unknown key")),
        _ => Err(err(0, name, "ambiguous key; qualify it as section.key")),
    }
}
