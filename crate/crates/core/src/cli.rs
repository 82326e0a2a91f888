//! Batch front end: `render`, `calibrate`, `lights`, `validate`, `sweep`.
//!
//! Exit codes: 0 success, 1 processing failure, 2 bad flag, 3 unreadable
//! input, 4 schema violation. Failures print one JSON object on stderr.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::compose::{calibrate_sequence, condition_dir, run_pipeline, street_lights, world_up, write_outputs};
use crate::config::{Condition, WeatherConfig};
use crate::error::{Error, Result};
use crate::lights::write_rig;
use crate::scene::load_sequence;
use crate::scene::Sequence;

#[derive(Debug, Parser)]
#[command(name = "gbweather", version, about = "G-buffer weather and relighting renderer")]
pub struct Cli {
    /// Worker threads; defaults to the config value, then all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a sequence under one condition.
    Render {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config's condition.
        #[arg(long)]
        condition: Option<String>,
    },
    /// Print the metric calibration report.
    Calibrate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Estimate street lights and write a rig file.
    Lights {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Check a config against the schema without rendering.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Render once per value of a numeric config field.
    Sweep {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Dotted path such as `fog.density_alpha`.
        #[arg(long)]
        param: String,
        /// Comma-separated values; empty means nothing to do.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => 3,
        Error::Load { channel, .. } if channel == "manifest" => 4,
        Error::Load { .. } => 3,
        Error::Config(_) => 4,
        _ => 1,
    }
}

fn error_json(kind: &str, message: &str, code: i32) -> String {
    serde_json::json!({ "error": kind, "message": message, "exit_code": code }).to_string()
}

/// Parse and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprintln!("{}", error_json("usage", e.to_string().trim(), 2));
            return 2;
        }
    };
    match execute(&cli) {
        Ok(out) => {
            if !out.is_empty() {
                println!("{out}");
            }
            0
        }
        Err(e) => {
            let code = exit_code(&e);
            eprintln!("{}", error_json(e.kind(), &e.to_string(), code));
            code
        }
    }
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?
            .install(f),
        None => f(),
    }
}

fn load_config(path: Option<&Path>) -> Result<WeatherConfig> {
    path.map_or_else(|| Ok(WeatherConfig::default()), WeatherConfig::read)
}

fn parse_condition(s: &str) -> Result<Condition> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| Error::Config(format!("unknown condition {s:?}")))
}

fn execute(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Validate { config } => {
            WeatherConfig::read(config)?;
            Ok(String::new())
        }
        Command::Render {
            manifest,
            config,
            out,
            condition,
        } => {
            let mut cfg = WeatherConfig::read(config)?;
            if let Some(c) = condition {
                cfg.condition = parse_condition(c)?;
            }
            let out = resolve_out(out.as_deref(), &cfg);
            let threads = cli.threads.or(cfg.threads);
            with_pool(threads, || {
                let seq = load_sequence(manifest)?;
                let render = run_pipeline(&seq, &cfg)?;
                write_outputs(&render, &cfg, &out)?;
                Ok(condition_dir(&out, cfg.condition).display().to_string())
            })
        }
        Command::Calibrate { manifest, config } => {
            let cfg = load_config(config.as_deref())?;
            with_pool(cli.threads.or(cfg.threads), || {
                let mut seq = load_sequence(manifest)?;
                let report = calibrate_sequence(&mut seq, &cfg.calibration, cfg.seeds()["calibration"])?;
                Ok(serde_json::to_string_pretty(&report).expect("report serializes"))
            })
        }
        Command::Lights { manifest, out, config } => {
            let cfg = load_config(config.as_deref())?;
            with_pool(cli.threads.or(cfg.threads), || {
                let mut seq = load_sequence(manifest)?;
                let seed = cfg.seeds()["calibration"];
                calibrate_sequence(&mut seq, &cfg.calibration, seed)?;
                let up = world_up(&seq, &cfg.calibration, seed);
                let mut lights_cfg = cfg.lights.clone();
                lights_cfg.source = crate::config::LightSource::Estimate;
                let rig = street_lights(&seq, &lights_cfg, &up)?;
                write_rig(&rig, out)?;
                Ok(format!("{} lights", rig.len()))
            })
        }
        Command::Sweep {
            manifest,
            config,
            param,
            values,
            out,
        } => {
            let cfg = WeatherConfig::read(config)?;
            if values.is_empty() {
                return Ok(String::new());
            }
            // reject a bad path before loading anything
            set_param(&cfg, param, values[0])?;
            let out = resolve_out(out.as_deref(), &cfg);
            with_pool(cli.threads.or(cfg.threads), || {
                let seq = load_sequence(manifest)?;
                let rows = sweep(&seq, &cfg, param, values, Some(&out))?;
                Ok(serde_json::to_string_pretty(&rows).expect("sweep serializes"))
            })
        }
    }
}

fn resolve_out(flag: Option<&Path>, cfg: &WeatherConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Copy of `base` with the numeric field at the dotted `path` set to `value`.
pub fn set_param(base: &WeatherConfig, path: &str, value: f64) -> Result<WeatherConfig> {
    let mut tree = serde_json::to_value(base).expect("config serializes");
    let mut node = &mut tree;
    for key in path.split('.') {
        node = node
            .get_mut(key)
            .ok_or_else(|| Error::Config(format!("no config field {path:?}")))?;
    }
    if !node.is_number() {
        return Err(Error::Config(format!("config field {path:?} is not numeric")));
    }
    *node = if node.is_f64() {
        serde_json::json!(value)
    } else {
        if value.fract() != 0.0 || value < 0.0 {
            return Err(Error::Config(format!("config field {path:?} needs a nonnegative integer, got {value}")));
        }
        serde_json::json!(value as u64)
    };
    let cfg: WeatherConfig = serde_json::from_value(tree).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub mean_luminance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_fog_opacity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

/// One render per value. With `out`, each variant is written under
/// `<out>/sweep/<param>=<value>/`.
pub fn sweep(seq: &Sequence, base: &WeatherConfig, param: &str, values: &[f64], out: Option<&Path>) -> Result<Vec<SweepRow>> {
    values
        .iter()
        .map(|&value| {
            let cfg = set_param(base, param, value)?;
            let render = run_pipeline(seq, &cfg)?;
            let n = render.stats.len().max(1) as f64;
            let mean_luminance = render.stats.iter().map(|s| s.mean_luminance).sum::<f64>() / n;
            let mean_fog_opacity = render
                .stats
                .iter()
                .map(|s| s.mean_fog_opacity)
                .sum::<Option<f64>>()
                .map(|x| x / n);
            let output = match out {
                Some(dir) => {
                    let d = dir.join("sweep").join(format!("{param}={value}"));
                    write_outputs(&render, &cfg, &d)?;
                    Some(condition_dir(&d, cfg.condition).display().to_string())
                }
                None => None,
            };
            Ok(SweepRow {
                value,
                mean_luminance,
                mean_fog_opacity,
                output,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_param_paths() {
        let base = WeatherConfig::default();
        assert_eq!(set_param(&base, "fog.density_alpha", 0.5).unwrap().fog.density_alpha, 0.5);
        assert_eq!(set_param(&base, "rain.drop_count", 12.0).unwrap().rain.drop_count, 12);
        assert!(set_param(&base, "fog.nope", 1.0).is_err());
        assert!(set_param(&base, "condition", 1.0).is_err());
        assert!(set_param(&base, "lights.headlights", 1.0).is_err());
        assert!(set_param(&base, "fog.g", 1.5).is_err());
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(main_with_args(["gbweather", "render", "--bogus"]), 2);
        assert_eq!(main_with_args(["gbweather"]), 2);
    }

    #[test]
    fn missing_config_exits_three() {
        assert_eq!(main_with_args(["gbweather", "validate", "--config", "/nonexistent/c.json"]), 3);
    }

    #[test]
    fn schema_violation_exits_four() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"fgo": {}}"#).unwrap();
        assert_eq!(main_with_args(["gbweather", "validate", "--config", p.to_str().unwrap()]), 4);
        std::fs::write(&p, "{}").unwrap();
        assert_eq!(main_with_args(["gbweather", "validate", "--config", p.to_str().unwrap()]), 0);
    }
}
