//! Run configuration: one closed JSON schema, every field defaulted.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibration::{LineRansac, PlaneRansac};
use crate::error::{Error, Result};
use crate::fog::FogParams;
use crate::lights::{EstimationParams, HeadlightParams, SpotParams};
use crate::math::derive_seed;
use crate::rain::RainParams;
use crate::shading::night::NightParams;
use crate::snow::SnowParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    Rain,
    Snow,
    Fog,
    Night,
    RelightOnly,
}

impl Condition {
    pub const ALL: [Condition; 5] = [
        Condition::Rain,
        Condition::Snow,
        Condition::Fog,
        Condition::Night,
        Condition::RelightOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Rain => "rain",
            Condition::Snow => "snow",
            Condition::Fog => "fog",
            Condition::Night => "night",
            Condition::RelightOnly => "relight-only",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMode {
    /// Sparse points when present, else camera height.
    Auto,
    /// Depth is already metric.
    None,
    Sparse,
    CameraHeight,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    pub mode: CalibrationMode,
    pub camera_height_m: f64,
    pub line: LineRansac,
    pub plane: PlaneRansac,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            mode: CalibrationMode::Auto,
            camera_height_m: 1.5,
            line: LineRansac::default(),
            plane: PlaneRansac::default(),
        }
    }
}

/// Where street lights come from: `"none"`, `"estimate"` or a rig file path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum LightSource {
    None,
    Estimate,
    Rig(PathBuf),
}

impl From<String> for LightSource {
    fn from(s: String) -> Self {
        match s.as_str() {
            "none" => LightSource::None,
            "estimate" => LightSource::Estimate,
            _ => LightSource::Rig(PathBuf::from(s)),
        }
    }
}

impl From<LightSource> for String {
    fn from(s: LightSource) -> Self {
        match s {
            LightSource::None => "none".into(),
            LightSource::Estimate => "estimate".into(),
            LightSource::Rig(p) => p.to_string_lossy().into_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LightsConfig {
    pub source: LightSource,
    pub headlights: bool,
    pub estimation: EstimationParams,
    pub street: SpotParams,
    pub headlight: HeadlightParams,
}

impl Default for LightsConfig {
    fn default() -> Self {
        Self {
            source: LightSource::Estimate,
            headlights: true,
            estimation: EstimationParams::default(),
            street: SpotParams::street(),
            headlight: HeadlightParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComposerConfig {
    pub strength: f64,
    pub threshold: f64,
    /// Raise weights to the threshold instead of zeroing those below it.
    pub floor_mode: bool,
}

impl Default for ComposerConfig {
    fn default() -> Self {
        Self {
            strength: 1.0,
            threshold: 0.05,
            floor_mode: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeatherConfig {
    pub condition: Condition,
    pub seed: u64,
    /// Worker count; `None` uses the available parallelism.
    pub threads: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub dump_linear: bool,
    /// Add wall-clock timings to the run report. Off keeps reports
    /// byte-identical between runs.
    pub report_timings: bool,
    pub calibration: CalibrationConfig,
    pub lights: LightsConfig,
    pub composer: ComposerConfig,
    pub snow: SnowParams,
    pub rain: RainParams,
    pub fog: FogParams,
    pub night: NightParams,
}

impl Default for WeatherConfig {
    fn default() -> Self {
        Self {
            condition: Condition::RelightOnly,
            seed: 0,
            threads: None,
            output_dir: None,
            dump_linear: false,
            report_timings: false,
            calibration: CalibrationConfig::default(),
            lights: LightsConfig::default(),
            composer: ComposerConfig::default(),
            snow: SnowParams::default(),
            rain: RainParams::default(),
            fog: FogParams::default(),
            night: NightParams::default(),
        }
    }
}

fn check(ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(what.to_string()))
    }
}

impl WeatherConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: WeatherConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Range checks on every section.
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        check(self.threads != Some(0), "threads must be at least 1")?;
        check(self.calibration.camera_height_m > 0.0, "calibration.camera_height_m must be positive")?;
        check(self.calibration.line.threshold > 0.0, "calibration.line.threshold must be positive")?;
        check(self.calibration.plane.threshold > 0.0, "calibration.plane.threshold must be positive")?;
        check(self.composer.strength >= 0.0, "composer.strength must be nonnegative")?;
        check(unit(self.composer.threshold), "composer.threshold must lie in [0, 1]")?;
        check(self.lights.estimation.tau_dist > 0.0, "lights.estimation.tau_dist must be positive")?;
        check(
            self.lights.estimation.apex_fraction > 0.0 && self.lights.estimation.apex_fraction <= 1.0,
            "lights.estimation.apex_fraction must lie in (0, 1]",
        )?;
        for (name, s) in [("street", self.lights.street), ("headlight", self.lights.headlight.spot())] {
            check(
                s.deg_inner >= 0.0 && s.deg_inner < s.deg_outer && s.deg_outer <= 180.0 && s.r_max > 0.0,
                &format!("lights.{name} cone is invalid"),
            )?;
            check(s.intensity.iter().all(|&e| e >= 0.0), &format!("lights.{name}.intensity must be nonnegative"))?;
        }
        let s = &self.snow;
        s.metaball.validate().map_err(|e| Error::Config(format!("snow.metaball: {e}")))?;
        check(s.coverage_density > 0.0, "snow.coverage_density must be positive")?;
        check(unit(s.wet.p) && unit(s.wet.i), "snow.wet.p and snow.wet.i must lie in [0, 1]")?;
        check(s.blend.gamma > 0.0, "snow.blend.gamma must be positive")?;
        check(s.particles.flake_radius_m > 0.0, "snow.particles.flake_radius_m must be positive")?;
        check(unit(s.particles.alpha), "snow.particles.alpha must lie in [0, 1]")?;
        check(s.max_slope_deg >= 0.0 && s.max_slope_deg < 90.0, "snow.max_slope_deg must lie in [0, 90)")?;
        let r = &self.rain;
        r.validate().map_err(|e| Error::Config(format!("rain: {e}")))?;
        check(unit(r.alpha), "rain.alpha must lie in [0, 1]")?;
        check(unit(r.wetness) && unit(r.porosity), "rain.wetness and rain.porosity must lie in [0, 1]")?;
        check(r.ripple.cell_px > 0, "rain.ripple.cell_px must be positive")?;
        check(r.ripple.intensity[0] <= r.ripple.intensity[1], "rain.ripple.intensity must be [min, max]")?;
        check(r.ripple.period_s > 0.0, "rain.ripple.period_s must be positive")?;
        self.fog.validate().map_err(|e| Error::Config(format!("fog: {e}")))?;
        check(unit(self.night.lut_sigma), "night.lut_sigma must lie in [0, 1]")?;
        let e = &self.night.exposure;
        check(e.percentile > 0.0 && e.percentile <= 100.0, "night.exposure.percentile must lie in (0, 100]")?;
        check(e.clip[0] <= e.clip[1], "night.exposure.clip must be [lo, hi]")?;
        check(unit(self.night.sky.alpha), "night.sky.alpha must lie in [0, 1]")?;
        check(self.night.sky.blur_sigma >= 0.0, "night.sky.blur_sigma must be nonnegative")?;
        Ok(())
    }

    /// Every RNG stream of a run, derived from the global seed unless a
    /// section pins its own.
    pub fn seeds(&self) -> BTreeMap<&'static str, u64> {
        let d = |name: &str| derive_seed(self.seed, name);
        BTreeMap::from([
            ("calibration", d("calibration")),
            ("snow.metaballs", d("snow.metaballs")),
            ("snow.ground", d("snow.ground")),
            ("snow.particles", self.snow.particles.seed.unwrap_or_else(|| d("snow.particles"))),
            ("rain.drops", self.rain.seed.unwrap_or_else(|| d("rain.drops"))),
            ("rain.puddles", self.rain.puddle.seed.unwrap_or_else(|| d("rain.puddles"))),
            ("rain.ripples", d("rain.ripples")),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_roundtrips_and_validates() {
        let c = WeatherConfig::default();
        let back = WeatherConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(WeatherConfig::from_json("{}").unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(WeatherConfig::from_json(r#"{"sed": 3}"#).is_err());
        assert!(WeatherConfig::from_json(r#"{"fog": {"densty_alpha": 1}}"#).is_err());
        assert!(WeatherConfig::from_json(r#"{"condition": "hail"}"#).is_err());
    }

    #[test]
    fn ranges_are_checked() {
        assert!(WeatherConfig::from_json(r#"{"fog": {"g": 1.0}}"#).is_err());
        assert!(WeatherConfig::from_json(r#"{"night": {"lut_sigma": 1.5}}"#).is_err());
        assert!(WeatherConfig::from_json(r#"{"threads": 0}"#).is_err());
        assert!(WeatherConfig::from_json(r#"{"snow": {"metaball": {"xi": 0.9}}}"#).is_err());
    }

    #[test]
    fn light_source_forms() {
        let c = WeatherConfig::from_json(r#"{"condition": "night", "lights": {"source": "rig.json"}}"#).unwrap();
        assert_eq!(c.lights.source, LightSource::Rig("rig.json".into()));
        assert_eq!(c.condition, Condition::Night);
        let c = WeatherConfig::from_json(r#"{"condition": "relight-only", "lights": {"source": "none"}}"#).unwrap();
        assert_eq!(c.lights.source, LightSource::None);
    }

    #[test]
    fn seeds_follow_global_seed() {
        let a = WeatherConfig::default().seeds();
        let b = WeatherConfig { seed: 1, ..Default::default() }.seeds();
        assert!(a.iter().zip(&b).all(|(x, y)| x.1 != y.1));
        let pinned = WeatherConfig::from_json(r#"{"rain": {"seed": 5}}"#).unwrap().seeds();
        assert_eq!(pinned["rain.drops"], 5);
    }
}
