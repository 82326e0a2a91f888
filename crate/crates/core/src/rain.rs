//! Rain Geometry Pass: world-anchored puddles, terminal-velocity drops,
//! tapered-capsule streaks, ripples and wet materials.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{hash2_unit, lerp, lerp3, luminance, smoothstep, Rgb, Vec3};
use crate::noise::{fbm_world, FbmParams};
use crate::particles::{composite_ordered, crosses_surface, Aabb, Fragment};
use crate::scene::{CameraModel, GBufferFrame};
use crate::snow::{apply_wet_ground, WetParams};

/// Atlas fit of the Gunn-Kinzer data: `9.65 − 10.3·e^{−0.6D}` m/s, `D` in mm.
pub fn terminal_velocity(diameter_mm: f64) -> f64 {
    (9.65 - 10.3 * (-0.6 * diameter_mm).exp()).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Raindrop {
    pub position: Vec3,
    pub diameter: f64,
    pub velocity: Vec3,
    /// Incremented on every respawn.
    pub generation: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PuddleParams {
    pub octaves: u32,
    pub persistence: f64,
    pub lacunarity: f64,
    pub scale: f64,
    pub exponent: f64,
    pub seed: Option<u64>,
}

impl Default for PuddleParams {
    fn default() -> Self {
        let f = FbmParams::default();
        Self {
            octaves: f.octaves,
            persistence: f.persistence,
            lacunarity: f.lacunarity,
            scale: f.scale,
            exponent: 1.0,
            seed: None,
        }
    }
}

impl PuddleParams {
    pub fn fbm(&self) -> FbmParams {
        FbmParams {
            octaves: self.octaves,
            persistence: self.persistence,
            lacunarity: self.lacunarity,
            scale: self.scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RippleParams {
    pub cell_px: usize,
    pub freq_rad_per_m: f64,
    pub intensity: [f64; 2],
    /// Intensity oscillation rate, Hz.
    pub intensity_hz: f64,
    pub blend: f64,
    /// Ring expansion speed, m/s.
    pub speed_m_per_s: f64,
    /// Seconds between successive rings of one cell.
    pub period_s: f64,
    /// Crest pixels are those with `window·cos ≥ crest`.
    pub crest: f64,
    pub crest_tint: [f64; 3],
    pub crest_strength: f64,
}

impl Default for RippleParams {
    fn default() -> Self {
        Self {
            cell_px: 32,
            freq_rad_per_m: 31.0,
            intensity: [0.01, 0.15],
            intensity_hz: 0.5,
            blend: 0.9,
            speed_m_per_s: 1.0,
            period_s: 1.0,
            crest: 0.9,
            crest_tint: [0.92, 0.96, 1.0],
            crest_strength: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RainParams {
    pub drop_count: usize,
    pub diameter_mm: [f64; 2],
    pub wind_base: [f64; 3],
    pub wind_sigma: f64,
    pub spawn_height_m: [f64; 2],
    pub alpha: f64,
    pub depth_bias_m: f64,
    /// Streak length as a multiple of `dt·‖v‖`.
    pub streak_factor: f64,
    /// Head-to-tail radius ratio `γ`; the tail radius is `r_h/γ`.
    pub taper: f64,
    pub min_radius_px: f64,
    pub color: [f64; 3],
    /// Far plane of the lateral spawn volume, meters.
    pub far_m: f64,
    pub wetness: f64,
    pub porosity: f64,
    pub sky_tint: [f64; 3],
    pub sky_tint_strength: f64,
    pub sky_desaturation: f64,
    pub puddle: PuddleParams,
    pub ripple: RippleParams,
    pub seed: Option<u64>,
}

impl Default for RainParams {
    fn default() -> Self {
        Self {
            drop_count: 10_000,
            diameter_mm: [0.5, 6.0],
            wind_base: [0.1, 0.0, 0.0],
            wind_sigma: 0.5,
            spawn_height_m: [0.0, 51.0],
            alpha: 0.4,
            depth_bias_m: 1e-4,
            streak_factor: 0.8,
            taper: 0.7,
            min_radius_px: 0.6,
            color: [0.78, 0.8, 0.84],
            far_m: 40.0,
            wetness: 0.2,
            porosity: 0.8,
            sky_tint: [0.55, 0.60, 0.70],
            sky_tint_strength: 0.6,
            sky_desaturation: 0.7,
            puddle: PuddleParams::default(),
            ripple: RippleParams::default(),
            seed: None,
        }
    }
}

impl RainParams {
    pub fn validate(&self) -> Result<()> {
        let [d0, d1] = self.diameter_mm;
        let [h0, h1] = self.spawn_height_m;
        if !(d0 > 0.0 && d1 >= d0 && h1 >= h0 && self.wind_sigma >= 0.0 && self.taper > 0.0) {
            return Err(Error::Parameter(format!("invalid rain parameters {self:?}")));
        }
        Ok(())
    }
}

/// Drop population with the spawn volume and its RNG stream.
#[derive(Debug, Clone)]
pub struct RainState {
    pub drops: Vec<Raindrop>,
    pub bounds: Aabb,
    params: RainParams,
    rng: ChaCha8Rng,
}

impl RainState {
    /// `lateral` supplies the x/z extent; heights come from `spawn_height_m`.
    pub fn new(lateral: Aabb, params: &RainParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let mut bounds = lateral;
        bounds.min.y = params.spawn_height_m[0];
        bounds.max.y = params.spawn_height_m[1];
        let mut state = Self {
            drops: Vec::with_capacity(params.drop_count),
            bounds,
            params: *params,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        for _ in 0..params.drop_count {
            let d = state.spawn(0);
            state.drops.push(d);
        }
        Ok(state)
    }

    fn spawn(&mut self, generation: u32) -> Raindrop {
        let p = &self.params;
        let b = self.bounds;
        let rng = &mut self.rng;
        let mut uni = |lo: f64, hi: f64| if hi > lo { rng.random_range(lo..hi) } else { lo };
        let position = Vec3::new(uni(b.min.x, b.max.x), uni(b.min.y, b.max.y), uni(b.min.z, b.max.z));
        let diameter = uni(p.diameter_mm[0], p.diameter_mm[1]);
        let (wx, wz) = if p.wind_sigma > 0.0 {
            let n = Normal::new(0.0, p.wind_sigma).expect("sigma checked positive");
            (p.wind_base[0] + n.sample(&mut self.rng), p.wind_base[2] + n.sample(&mut self.rng))
        } else {
            (p.wind_base[0], p.wind_base[2])
        };
        Raindrop {
            position,
            diameter,
            velocity: Vec3::new(wx, -terminal_velocity(diameter), wz),
            generation,
        }
    }
}

/// Advance every drop by `v·dt`, respawning collided or escaped drops in
/// index order.
pub fn step_raindrops(state: &mut RainState, dt: f64, surface: Option<(&GBufferFrame, &CameraModel)>) {
    if dt == 0.0 {
        return;
    }
    for i in 0..state.drops.len() {
        let d = state.drops[i];
        let next = d.position + d.velocity * dt;
        let hit = surface.is_some_and(|(f, c)| crosses_surface(f, c, &d.position, &next));
        let inside = (0..3).all(|k| next[k] >= state.bounds.min[k] && next[k] <= state.bounds.max[k]);
        state.drops[i] = if hit || !inside {
            state.spawn(d.generation + 1)
        } else {
            Raindrop { position: next, ..d }
        };
    }
}

/// Signed distance to a tapered capsule from `head` (radius `r_h`) to
/// `tail` (radius `r_h/taper`), scaled so the field is 1-Lipschitz.
/// Returns the distance and the axis parameter `t ∈ [0, 1]`.
pub fn capsule_sdf_t(p: [f64; 2], head: [f64; 2], tail: [f64; 2], r_h: f64, taper: f64) -> (f64, f64) {
    let (px, py) = (p[0] - head[0], p[1] - head[1]);
    let (bx, by) = (tail[0] - head[0], tail[1] - head[1]);
    let len2 = bx * bx + by * by;
    if len2 == 0.0 {
        return ((px * px + py * py).sqrt() - r_h, 0.0);
    }
    let t = ((px * bx + py * by) / len2).clamp(0.0, 1.0);
    let (dx, dy) = (px - t * bx, py - t * by);
    let r_t = r_h / taper;
    let r = r_h + (r_t - r_h) * t;
    let slope = (r_t - r_h) / len2.sqrt();
    (((dx * dx + dy * dy).sqrt() - r) / (1.0 + slope * slope).sqrt(), t)
}

pub fn capsule_sdf(p: [f64; 2], head: [f64; 2], tail: [f64; 2], r_h: f64, taper: f64) -> f64 {
    capsule_sdf_t(p, head, tail, r_h, taper).0
}

const NEAR: f64 = 0.05;

/// Screen-space streak fragments for one drop.
pub fn streak_fragments(frame: &GBufferFrame, cam: &CameraModel, drop: &Raindrop, dt: f64, p: &RainParams) -> Vec<Fragment> {
    let tail_w = drop.position - drop.velocity * (p.streak_factor * dt);
    let head_c = cam.world_to_camera(&drop.position);
    let tail_c = cam.world_to_camera(&tail_w);
    if head_c.z <= NEAR || tail_c.z <= NEAR {
        return Vec::new();
    }
    let (Some((hu, hv, hz)), Some((tu, tv, tz))) = (cam.project(&head_c), cam.project(&tail_c)) else {
        return Vec::new();
    };
    let r_h = (cam.fx() * (drop.diameter / 2000.0) / hz).max(p.min_radius_px);
    let r_t = r_h / p.taper;
    let u0 = (hu.min(tu) - r_t).floor().max(0.0);
    let u1 = (hu.max(tu) + r_t).ceil().min(frame.width as f64 - 1.0);
    let v0 = (hv.min(tv) - r_t).floor().max(0.0);
    let v1 = (hv.max(tv) + r_t).ceil().min(frame.height as f64 - 1.0);
    let mut out = Vec::new();
    if u0 > u1 || v0 > v1 {
        return out;
    }
    let color = Rgb::from(p.color);
    for y in v0 as usize..=v1 as usize {
        for x in u0 as usize..=u1 as usize {
            let (sd, t) = capsule_sdf_t([x as f64, y as f64], [hu, hv], [tu, tv], r_h, p.taper);
            if sd >= 0.0 {
                continue;
            }
            let i = frame.index(x, y);
            let z = lerp(hz, tz, t);
            if frame.sky_mask[i] || z < frame.depth[i] + p.depth_bias_m {
                out.push(Fragment { index: i, color, alpha: p.alpha });
            }
        }
    }
    out
}

/// Draw every drop as a streak into the overlay, composited in drop order.
pub fn rasterize_raindrops(frame: &mut GBufferFrame, cam: &CameraModel, drops: &[Raindrop], dt: f64, p: &RainParams) {
    composite_ordered(frame, drops, |f, d| streak_fragments(f, cam, d, dt, p));
}

/// `smoothstep(0.2, 1, smoothstep(0, 0.7, n^e))`.
pub fn puddle_weight(noise: f64, exponent: f64) -> f64 {
    smoothstep(0.2, 1.0, smoothstep(0.0, 0.7, noise.max(0.0).powf(exponent)))
}

/// World-anchored soft puddle mask; zero off the road.
pub fn puddle_mask(frame: &GBufferFrame, cam: &CameraModel, p: &PuddleParams, seed: u64) -> Vec<f64> {
    let fbm = p.fbm();
    (0..frame.len())
        .into_par_iter()
        .map(|i| {
            if !frame.road_mask[i] || frame.sky_mask[i] {
                return 0.0;
            }
            let (u, v) = frame.coords(i);
            let w = cam.camera_to_world(&cam.unproject(u as f64, v as f64, frame.depth[i]));
            puddle_weight(fbm_world(w.x, w.z, &fbm, seed), p.exponent)
        })
        .collect()
}

/// Ring-wave state at one pixel: `(amplitude, window·cos)`, amplitude
/// bounded by the current intensity.
fn ripple_at(r: f64, t: f64, phase: f64, p: &RippleParams) -> (f64, f64) {
    let local = (t / p.period_s + phase).rem_euclid(1.0) * p.period_s;
    let delta = r - p.speed_m_per_s * local;
    if delta > 0.0 {
        return (0.0, 0.0);
    }
    let window = smoothstep(-0.6, 0.0, delta);
    let osc = 0.5 + 0.5 * (std::f64::consts::TAU * (p.intensity_hz * t + phase)).sin();
    let intensity = lerp(p.intensity[0], p.intensity[1], osc);
    let wave = window * (p.freq_rad_per_m * delta).cos();
    (intensity * wave, wave)
}

/// Perturb puddle normals with per-cell expanding rings and tint crests.
pub fn apply_ripples(frame: &mut GBufferFrame, cam: &CameraModel, puddles: &[f64], t: f64, p: &RippleParams, seed: u64) {
    let (w, h) = frame.dims();
    let cell = p.cell_px.max(1);
    let tint = Rgb::from(p.crest_tint);
    let view: &GBufferFrame = frame;
    let edits: Vec<Option<(Vec3, Option<Rgb>)>> = (0..view.len())
        .into_par_iter()
        .map(|i| {
            let wgt = puddles[i];
            if wgt <= 0.0 {
                return None;
            }
            let (u, v) = view.coords(i);
            let (cx, cy) = ((u / cell) as i64, (v / cell) as i64);
            let hx = hash2_unit(cx, cy, seed);
            let hy = hash2_unit(cx, cy, seed ^ 0x9e37_79b9);
            let phase = hash2_unit(cx, cy, seed ^ 0x7f4a_7c15);
            let ou = ((cx as f64 + hx) * cell as f64).min(w as f64 - 1.0);
            let ov = ((cy as f64 + hy) * cell as f64).min(h as f64 - 1.0);
            let oi = view.index(ou as usize, ov as usize);
            let origin = cam.unproject(ou, ov, view.depth[oi]);
            let here = cam.unproject(u as f64, v as f64, view.depth[i]);
            let n = view.normal[i];
            let radial = here - origin;
            let radial = radial - n * radial.dot(&n);
            let (amp, wave) = ripple_at(radial.norm(), t, phase, p);
            let dir = if radial.norm() > 1e-12 { radial.normalize() } else { Vec3::zeros() };
            let rippled = (n + dir * amp).normalize();
            let out = lerp3(&n, &rippled, p.blend * wgt).normalize();
            let albedo = (wave >= p.crest).then(|| lerp3(&view.albedo[i], &tint, p.crest_strength * wgt));
            Some((out, albedo))
        })
        .collect();
    for (i, e) in edits.into_iter().enumerate() {
        if let Some((n, a)) = e {
            frame.normal[i] = n;
            if let Some(a) = a {
                frame.albedo[i] = a;
            }
        }
    }
}

/// Overcast sky albedo, wet road and glassy puddles.
pub fn apply_rain_materials(frame: &mut GBufferFrame, cam: &CameraModel, puddles: &[f64], p: &RainParams) {
    let tint = Rgb::from(p.sky_tint);
    for i in 0..frame.len() {
        if frame.sky_mask[i] {
            let a = frame.albedo[i];
            let gray = lerp3(&a, &Rgb::repeat(luminance(&a)), p.sky_desaturation);
            frame.albedo[i] = lerp3(&gray, &tint, p.sky_tint_strength);
        }
    }
    let road: Vec<bool> = (0..frame.len()).map(|i| frame.road_mask[i] && !frame.sky_mask[i]).collect();
    let wet = WetParams {
        p: p.porosity,
        i: p.wetness,
        ..WetParams::default()
    };
    apply_wet_ground(frame, cam, &road, &wet);
    for i in 0..frame.len() {
        if road[i] {
            frame.roughness[i] = lerp(frame.roughness[i], 0.0, puddles[i]);
        }
    }
}

/// Per-frame material edit. Returns the puddle mask.
pub fn apply_rain(frame: &mut GBufferFrame, cam: &CameraModel, t: f64, p: &RainParams, puddle_seed: u64, ripple_seed: u64) -> Vec<f64> {
    let puddles = puddle_mask(frame, cam, &p.puddle, puddle_seed);
    apply_ripples(frame, cam, &puddles, t, &p.ripple, ripple_seed);
    apply_rain_materials(frame, cam, &puddles, p);
    frame.clamp_materials();
    puddles
}
