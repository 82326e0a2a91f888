//! Ambient/direct fusion and the canonical pass order of a render.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{
    apply_scale_bias, fit_camera_height_scale, fit_ground_plane, fit_scale_bias_pairs, pair_points,
    repair_sky_depth, road_points, CalibrationMethod, CalibrationReport, ScaleBias,
};
use crate::config::{CalibrationConfig, CalibrationMode, ComposerConfig, Condition, LightSource, LightsConfig, WeatherConfig};
use crate::error::{Error, Result};
use crate::fog::apply_fog;
use crate::lights::{ego_headlights, estimate_street_lights, read_rig, RigEntry, SpotLight};
use crate::math::{clamp01, luminance, Rgb, Vec3};
use crate::particles::{apply_overlay, frustum_bounds};
use crate::rain::{apply_rain, rasterize_raindrops, step_raindrops, RainState};
use crate::scene::{save_frame, GBufferFrame, LinearImage, Sequence};
use crate::shading::night::night_grade;
use crate::shading::shade_local;
use crate::snow::{apply_snow, build_field, rasterize_particles, step_snow_particles, ParticleSet};

/// Blend weight `W` for one direct-light sample.
pub fn blend_weight(direct: &Rgb, cfg: &ComposerConfig) -> f64 {
    let m = clamp01(direct.mean());
    let w = clamp01(cfg.strength * m);
    if cfg.floor_mode {
        w.max(cfg.threshold)
    } else if w < cfg.threshold {
        0.0
    } else {
        w
    }
}

/// `(1 − W)·ambient + W·direct` per pixel.
pub fn blend_ambient_direct(ambient: &LinearImage, direct: &LinearImage, cfg: &ComposerConfig) -> Result<LinearImage> {
    if ambient.dims() != direct.dims() {
        return Err(Error::Dimension {
            expected: ambient.dims(),
            actual: direct.dims(),
        });
    }
    let data = ambient
        .data
        .iter()
        .zip(&direct.data)
        .map(|(a, d)| {
            let w = blend_weight(d, cfg);
            if w == 0.0 {
                *a
            } else {
                a * (1.0 - w) + d * w
            }
        })
        .collect();
    LinearImage::from_data(ambient.width, ambient.height, data)
}

/// Stand-in ambient layer: the source image re-lit for edited albedo,
/// `I·A_edit/A_orig` per channel, or `I + (A_edit − A_orig)` where the
/// original albedo is nearly black. Unedited texels pass through exactly.
pub fn reshade_ambient(image: &LinearImage, original: &[Rgb], edited: &[Rgb]) -> LinearImage {
    let data = image
        .data
        .iter()
        .zip(original.iter().zip(edited))
        .map(|(i, (o, e))| {
            Rgb::from_fn(|k, _| {
                if e[k] == o[k] {
                    i[k]
                } else if o[k] < 1e-3 {
                    (i[k] + e[k] - o[k]).max(0.0)
                } else {
                    i[k] * e[k] / o[k]
                }
            })
        })
        .collect();
    LinearImage {
        width: image.width,
        height: image.height,
        data,
    }
}

/// Bring depth to meters and repair the sky. Mutates `seq.frames`.
pub fn calibrate_sequence(seq: &mut Sequence, cfg: &CalibrationConfig, seed: u64) -> Result<CalibrationReport> {
    let mode = match cfg.mode {
        CalibrationMode::Auto if seq.has_sparse_depth() => CalibrationMode::Sparse,
        CalibrationMode::Auto if seq.frames.iter().any(|f| f.road_mask.iter().any(|&r| r)) => CalibrationMode::CameraHeight,
        CalibrationMode::Auto => CalibrationMode::None,
        m => m,
    };
    let (sb, method) = match mode {
        CalibrationMode::Sparse => {
            let (mut rel, mut met) = (Vec::new(), Vec::new());
            for (f, pts) in seq.frames.iter().zip(&seq.sparse) {
                let (r, m) = pair_points(f, pts);
                rel.extend(r);
                met.extend(m);
            }
            (fit_scale_bias_pairs(&rel, &met, &cfg.line, seed)?, CalibrationMethod::Sparse)
        }
        CalibrationMode::CameraHeight => {
            let k = seq
                .frames
                .iter()
                .position(|f| f.road_mask.iter().any(|&r| r))
                .ok_or_else(|| Error::Calibration("camera-height calibration needs a road mask".into()))?;
            let sb = fit_camera_height_scale(&seq.frames[k], &seq.cameras[k], cfg.camera_height_m, &cfg.plane, seed)?;
            (sb, CalibrationMethod::CameraHeight)
        }
        _ => (ScaleBias::IDENTITY, CalibrationMethod::None),
    };
    apply_scale_bias(&mut seq.frames, &sb);
    let sky_depth = repair_sky_depth(&mut seq.frames)?;
    for f in &seq.frames {
        f.validate(true)?;
    }
    Ok(CalibrationReport {
        s: sb.s,
        b: sb.b,
        inlier_count: sb.inlier_count,
        rms_error: sb.rms_error,
        method,
        sky_depth,
    })
}

/// World up: the fitted road normal of the first frame with road pixels,
/// else `+Y`.
pub fn world_up(seq: &Sequence, cfg: &CalibrationConfig, seed: u64) -> Vec3 {
    for (f, cam) in seq.frames.iter().zip(&seq.cameras) {
        let pts = road_points(f, cam);
        if pts.len() >= 3 {
            if let Ok(plane) = fit_ground_plane(&pts, &cfg.plane, seed) {
                return cam.dir_to_world(&plane.normal).normalize();
            }
        }
    }
    Vec3::y()
}

/// Static street lights from the configured source.
pub fn street_lights(seq: &Sequence, cfg: &LightsConfig, up: &Vec3) -> Result<Vec<SpotLight>> {
    match &cfg.source {
        LightSource::None => Ok(Vec::new()),
        LightSource::Rig(path) => read_rig(path),
        LightSource::Estimate => estimate_street_lights(&seq.frames, &seq.cameras, up, &cfg.estimation, &cfg.street),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameStats {
    pub index: usize,
    pub mean_luminance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_fog_opacity: Option<f64>,
}

/// Everything a render produces before it is written out.
#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub condition: Condition,
    pub frames: Vec<LinearImage>,
    pub stats: Vec<FrameStats>,
    pub calibration: CalibrationReport,
    pub street_lights: Vec<SpotLight>,
    /// Milliseconds per stage, filled only when timings are requested.
    pub timings_ms: Vec<(String, f64)>,
}

struct Timer {
    on: bool,
    last: Instant,
    out: Vec<(String, f64)>,
}

impl Timer {
    fn new(on: bool) -> Self {
        Self {
            on,
            last: Instant::now(),
            out: Vec::new(),
        }
    }

    fn lap(&mut self, name: &str) {
        if self.on {
            let now = Instant::now();
            self.out.push((name.to_string(), (now - self.last).as_secs_f64() * 1e3));
            self.last = now;
        }
    }
}

/// Run every pass over a loaded sequence:
/// calibration and sky repair, light estimation, the Geometry Pass,
/// local shading, ambient blend, fog, precipitation overlay, night grade.
pub fn run_pipeline(source: &Sequence, cfg: &WeatherConfig) -> Result<RenderOutput> {
    cfg.validate()?;
    let condition = cfg.condition;
    if condition == Condition::Rain && !source.masks.road {
        return Err(Error::Config("rain needs a road mask in the manifest".into()));
    }
    let seeds = cfg.seeds();
    let mut timer = Timer::new(cfg.report_timings);
    let mut seq = source.clone();
    let calibration = calibrate_sequence(&mut seq, &cfg.calibration, seeds["calibration"])?;
    timer.lap("calibration");

    let up = world_up(&seq, &cfg.calibration, seeds["calibration"]);
    let street = street_lights(&seq, &cfg.lights, &up)?;
    let rigs: Vec<Vec<SpotLight>> = seq
        .frames
        .iter()
        .zip(&seq.cameras)
        .map(|(f, cam)| {
            let mut rig = street.clone();
            if cfg.lights.headlights {
                rig.extend(ego_headlights(f, cam, cfg.calibration.camera_height_m, &cfg.lights.headlight)?);
            }
            Ok(rig)
        })
        .collect::<Result<_>>()?;
    timer.lap("lights");

    let original_albedo: Vec<Vec<Rgb>> = seq.frames.iter().map(|f| f.albedo.clone()).collect();
    let dt = 1.0 / seq.fps;
    let (w, h) = seq.frames[0].dims();
    match condition {
        Condition::Snow => {
            let p = &cfg.snow;
            let field = build_field(&seq.frames, &seq.cameras, &up, p, seeds["snow.metaballs"])?;
            seq.frames
                .par_iter_mut()
                .zip(&seq.cameras)
                .for_each(|(f, cam)| {
                    apply_snow(f, cam, &field, &up, p, seeds["snow.ground"]);
                });
            let bounds = frustum_bounds(&seq.cameras, w, h, 0.5, p.particles.far_m);
            let mut ps = ParticleSet::new(bounds, &p.particles, seeds["snow.particles"]);
            let mut snaps = Vec::with_capacity(seq.len());
            for (f, cam) in seq.frames.iter().zip(&seq.cameras) {
                step_snow_particles(&mut ps, dt, Some((f, cam)));
                snaps.push(ps.clone());
            }
            seq.frames
                .par_iter_mut()
                .zip(seq.cameras.par_iter().zip(snaps.par_iter()))
                .for_each(|(f, (cam, ps))| rasterize_particles(f, cam, ps, &p.particles));
        }
        Condition::Rain => {
            let p = &cfg.rain;
            seq.frames
                .par_iter_mut()
                .zip(&seq.cameras)
                .enumerate()
                .for_each(|(k, (f, cam))| {
                    apply_rain(f, cam, k as f64 * dt, p, seeds["rain.puddles"], seeds["rain.ripples"]);
                });
            let lateral = frustum_bounds(&seq.cameras, w, h, 0.5, p.far_m);
            let mut state = RainState::new(lateral, p, seeds["rain.drops"])?;
            let mut snaps = Vec::with_capacity(seq.len());
            for (f, cam) in seq.frames.iter().zip(&seq.cameras) {
                step_raindrops(&mut state, dt, Some((f, cam)));
                snaps.push(state.drops.clone());
            }
            seq.frames
                .par_iter_mut()
                .zip(seq.cameras.par_iter().zip(snaps.par_iter()))
                .for_each(|(f, (cam, drops))| rasterize_raindrops(f, cam, drops, dt, p));
        }
        _ => {}
    }
    timer.lap("geometry");

    let rendered: Vec<(LinearImage, FrameStats)> = (0..seq.len())
        .into_par_iter()
        .map(|k| render_frame(&seq, k, &original_albedo[k], &rigs[k], cfg))
        .collect::<Result<_>>()?;
    timer.lap("light");
    let (frames, stats) = rendered.into_iter().unzip();
    Ok(RenderOutput {
        condition,
        frames,
        stats,
        calibration,
        street_lights: street,
        timings_ms: timer.out,
    })
}

fn render_frame(seq: &Sequence, k: usize, original_albedo: &[Rgb], rig: &[SpotLight], cfg: &WeatherConfig) -> Result<(LinearImage, FrameStats)> {
    let frame: &GBufferFrame = &seq.frames[k];
    let cam = &seq.cameras[k];
    let direct = shade_local(frame, cam, rig);
    let ambient = match &seq.ambient[k] {
        Some(a) => a.clone(),
        None => {
            let base = match &seq.images[k] {
                Some(img) => img.clone(),
                None => LinearImage::from_data(frame.width, frame.height, original_albedo.to_vec())?,
            };
            reshade_ambient(&base, original_albedo, &frame.albedo)
        }
    };
    let mut img = blend_ambient_direct(&ambient, &direct, &cfg.composer)?;
    let mut fog_opacity = None;
    if cfg.condition == Condition::Fog {
        fog_opacity = Some(apply_fog(&mut img, frame, cam, rig, &cfg.fog)?);
    }
    if let Some(overlay) = &frame.alpha_overlay {
        apply_overlay(&mut img.data, overlay);
    }
    if cfg.condition == Condition::Night {
        night_grade(&mut img, &frame.sky_mask, &cfg.night)?;
    }
    let mean_luminance = img.data.iter().map(luminance).sum::<f64>() / img.data.len().max(1) as f64;
    Ok((
        img,
        FrameStats {
            index: k,
            mean_luminance,
            mean_fog_opacity: fog_opacity,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFrame {
    pub index: usize,
    pub image: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linear: Option<String>,
    #[serde(flatten)]
    pub stats: FrameStats,
}

/// `run_report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub condition: Condition,
    pub config: serde_json::Value,
    pub seeds: std::collections::BTreeMap<String, u64>,
    pub calibration: CalibrationReport,
    pub lights: Vec<RigEntry>,
    pub frames: Vec<ReportFrame>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<Vec<(String, f64)>>,
}

/// Directory a condition writes into: `<out>/<condition>/`.
pub fn condition_dir(out: &Path, condition: Condition) -> PathBuf {
    out.join(condition.name())
}

/// Write frames as `<idx:04>.png` (plus `.pfm` when dumping) and the run
/// report into `<out>/<condition>/`.
pub fn write_outputs(render: &RenderOutput, cfg: &WeatherConfig, out: &Path) -> Result<RunReport> {
    let dir = condition_dir(out, render.condition);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let frames: Vec<ReportFrame> = render
        .frames
        .par_iter()
        .zip(&render.stats)
        .map(|(img, stats)| {
            let name = format!("{:04}.png", stats.index);
            let linear = cfg.dump_linear.then(|| format!("{:04}.pfm", stats.index));
            let dump = linear.as_ref().map(|l| dir.join(l));
            save_frame(img, &dir.join(&name), dump.as_deref())?;
            Ok(ReportFrame {
                index: stats.index,
                image: name,
                linear,
                stats: stats.clone(),
            })
        })
        .collect::<Result<_>>()?;
    let mut echo = cfg.clone();
    echo.threads = None;
    let report = RunReport {
        condition: render.condition,
        config: serde_json::to_value(&echo).expect("config serializes"),
        seeds: cfg.seeds().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        calibration: render.calibration.clone(),
        lights: render.street_lights.iter().map(RigEntry::from).collect(),
        frames,
        timings_ms: cfg.report_timings.then(|| render.timings_ms.clone()),
    };
    let path = dir.join("run_report.json");
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(report)
}
