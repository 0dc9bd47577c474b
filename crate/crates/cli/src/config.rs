//! Tracker configuration files: `key=value` lines mirroring `TrackerConfig`.
//!
//! ```text
//! # comments and blank lines are ignored
//! mode = da
//! tau_init = 0.6
//! gate_radius = inf
//! motion.init_variance = 16,16,16,16,100,100,10,10
//! ```

use panotrack_core::TrackerConfig;

use crate::args::TrackerFlags;
use crate::failure::{CliResult, Failure};

fn number(key: &str, v: &str) -> CliResult<f64> {
    v.parse()
        .map_err(|_| Failure::validation(format!("config key '{key}': '{v}' is not a number")))
}

fn integer<T: std::str::FromStr>(key: &str, v: &str) -> CliResult<T> {
    v.parse()
        .map_err(|_| Failure::validation(format!("config key '{key}': '{v}' is not an integer")))
}

fn boolean(key: &str, v: &str) -> CliResult<bool> {
    match v.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Failure::validation(format!("config key '{key}': '{v}' is not a boolean"))),
    }
}

/// Applies one `key=value` file on top of `cfg`.
pub fn apply_text(cfg: &mut TrackerConfig, text: &str) -> CliResult<()> {
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Failure::validation(format!("config line {}: expected key=value", n + 1)))?;
        let (key, v) = (key.trim(), value.trim());
        match key {
            "mode" => cfg.mode = v.parse().map_err(|e: panotrack_core::Error| Failure::validation(e.to_string()))?,
            "tau_init" => cfg.tau_init = number(key, v)?,
            "tau_update" => cfg.tau_update = number(key, v)?,
            "gate_radius" | "gate" => cfg.gate_radius = number(key, v)?,
            "noise_scale" | "noise" => cfg.noise_scale = number(key, v)?,
            "feature_noise_scale" | "feature_noise" => {
                cfg.feature_noise_scale = if v.is_empty() || v == "none" { None } else { Some(number(key, v)?) }
            }
            "max_age" => cfg.max_age = integer(key, v)?,
            "min_hits" => cfg.min_hits = integer(key, v)?,
            "conf_split" => cfg.conf_split = number(key, v)?,
            "da_rebind" => cfg.da_rebind = boolean(key, v)?,
            "iou_gate" => cfg.iou_gate = number(key, v)?,
            "interpolate_gaps" => cfg.interpolate_gaps = boolean(key, v)?,
            "rng_seed" | "seed" => cfg.rng_seed = integer(key, v)?,
            "motion.process_std_position" => cfg.motion.process_std_position = number(key, v)?,
            "motion.process_std_velocity" => cfg.motion.process_std_velocity = number(key, v)?,
            "motion.measurement_std" => cfg.motion.measurement_std = number(key, v)?,
            "motion.init_variance" => {
                let vals = v.split(',').map(|x| number(key, x.trim())).collect::<CliResult<Vec<f64>>>()?;
                cfg.motion.init_variance = vals
                    .try_into()
                    .map_err(|_| Failure::validation("motion.init_variance needs 8 comma-separated values"))?;
            }
            _ => return Err(Failure::validation(format!("config line {}: unknown key '{key}'", n + 1))),
        }
    }
    Ok(())
}

/// Defaults, then the config file, then flags/environment.
pub fn resolve(flags: &TrackerFlags) -> CliResult<TrackerConfig> {
    let mut cfg = TrackerConfig::default();
    if let Some(path) = &flags.config {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
        apply_text(&mut cfg, &text)?;
    }
    apply_flags(&mut cfg, flags);
    cfg.validate()?;
    Ok(cfg)
}

fn apply_flags(cfg: &mut TrackerConfig, f: &TrackerFlags) {
    if let Some(v) = f.mode {
        cfg.mode = v;
    }
    if let Some(v) = f.tau_init {
        cfg.tau_init = v;
    }
    if let Some(v) = f.tau_update {
        cfg.tau_update = v;
    }
    if let Some(v) = f.noise {
        cfg.noise_scale = v;
    }
    if let Some(v) = f.feature_noise {
        cfg.feature_noise_scale = Some(v);
    }
    if let Some(v) = f.gate {
        cfg.gate_radius = v;
    }
    if let Some(v) = f.max_age {
        cfg.max_age = v;
    }
    if let Some(v) = f.min_hits {
        cfg.min_hits = v;
    }
    if let Some(v) = f.conf_split {
        cfg.conf_split = v;
    }
    if let Some(v) = f.da_rebind {
        cfg.da_rebind = v;
    }
    if let Some(v) = f.iou_gate {
        cfg.iou_gate = v;
    }
    if let Some(v) = f.interpolate_gaps {
        cfg.interpolate_gaps = v;
    }
    if let Some(v) = f.seed {
        cfg.rng_seed = v;
    }
}
