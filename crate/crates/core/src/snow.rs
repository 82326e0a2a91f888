//! Snow Geometry Pass: metaball accumulation on upward surfaces, sigmoid
//! material blending, the wet-ground thaw model and falling flakes.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{clamp01, lerp, lerp3, mix64, smoothstep, Rgb, Vec3};
use crate::noise::{value_noise, HashLattice};
use crate::particles::{composite_ordered, crosses_surface, Aabb, Fragment};
use crate::scene::{CameraModel, GBufferFrame};
use crate::spatial::SpatialHash;

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("kernel radius must be positive, got {rho}")))
    }
}

/// SPH poly6 kernel `315/(64π ρ⁹)·(ρ² − r²)³` on `r < ρ`.
pub fn poly6(r: f64, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    Ok(poly6_unchecked(r, rho))
}

/// Radial derivative `−945/(32π ρ⁹)·r·(ρ² − r²)²` on `0 < r < ρ`.
pub fn poly6_dr(r: f64, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    Ok(poly6_dr_unchecked(r, rho))
}

#[inline]
fn poly6_unchecked(r: f64, rho: f64) -> f64 {
    if r >= rho {
        return 0.0;
    }
    let q = rho * rho - r * r;
    315.0 / (64.0 * PI * rho.powi(9)) * q * q * q
}

#[inline]
fn poly6_dr_unchecked(r: f64, rho: f64) -> f64 {
    if r <= 0.0 || r >= rho {
        return 0.0;
    }
    let q = rho * rho - r * r;
    -945.0 / (32.0 * PI * rho.powi(9)) * r * q * q
}

/// `1 / (1 + e^{−w(x − τ)})`.
pub fn sigmoid_blend(x: f64, w: f64, tau_bias: f64) -> f64 {
    1.0 / (1.0 + (-w * (x - tau_bias)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetaballParams {
    #[serde(rename = "L")]
    pub levels: u32,
    pub lambda: f64,
    pub rho0: f64,
    pub xi: f64,
    pub k: usize,
}

impl Default for MetaballParams {
    fn default() -> Self {
        Self {
            levels: 3,
            lambda: 0.7,
            rho0: 0.5,
            xi: 1.5,
            k: 16,
        }
    }
}

impl MetaballParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.levels >= 1
            && self.lambda > 0.0
            && self.lambda <= 1.0
            && self.rho0 > 0.0
            && self.xi > 1.0
            && self.k >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!("invalid metaball parameters {self:?}")))
        }
    }

    fn level_radius(&self, l: u32) -> f64 {
        self.rho0 / self.xi.powi(l as i32)
    }
}

/// Metaball centers with per-center densities and a neighbor index.
#[derive(Debug, Clone)]
pub struct MetaballField {
    pub centers: Vec<Vec3>,
    pub densities: Vec<f64>,
    pub params: MetaballParams,
    hash: SpatialHash,
}

impl MetaballField {
    pub fn new(centers: Vec<Vec3>, densities: Vec<f64>, params: MetaballParams) -> Result<Self> {
        params.validate()?;
        if centers.len() != densities.len() {
            return Err(Error::Parameter(format!(
                "{} centers but {} densities",
                centers.len(),
                densities.len()
            )));
        }
        let hash = SpatialHash::new(&centers, params.rho0);
        Ok(Self {
            centers,
            densities,
            params,
            hash,
        })
    }

    /// The `k` nearest centers within `ρ₀`, ordered by distance then index.
    /// Every level's k-nearest set inside its smaller support is a prefix
    /// filter of this list, so one query serves all levels.
    fn neighbors(&self, x: &Vec3) -> Vec<(usize, f64)> {
        if self.centers.is_empty() {
            return Vec::new();
        }
        self.hash.knn_within(&self.centers, x, self.params.k, self.params.rho0)
    }

    /// Cascaded height `Σ_l λˡ Σ_i a_i W(‖x − c_i‖, ρ₀/ξˡ)`.
    pub fn height(&self, x: &Vec3) -> f64 {
        let near = self.neighbors(x);
        let mut h = 0.0;
        let mut amp = 1.0;
        for l in 0..self.params.levels {
            let rho = self.params.level_radius(l);
            let level: f64 = near
                .iter()
                .map(|&(i, r)| self.densities[i] * poly6_unchecked(r, rho))
                .sum();
            h += amp * level;
            amp *= self.params.lambda;
        }
        h
    }

    /// Spatial gradient of [`height`](Self::height).
    pub fn gradient(&self, x: &Vec3) -> Vec3 {
        let near = self.neighbors(x);
        let mut g = Vec3::zeros();
        let mut amp = 1.0;
        for l in 0..self.params.levels {
            let rho = self.params.level_radius(l);
            for &(i, r) in &near {
                if r > 0.0 {
                    g += (x - self.centers[i]) * (amp * self.densities[i] * poly6_dr_unchecked(r, rho) / r);
                }
            }
            amp *= self.params.lambda;
        }
        g
    }
}

/// `snow_height` as a free function over a field.
pub fn snow_height(x: &Vec3, field: &MetaballField) -> f64 {
    field.height(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlendParams {
    pub w: f64,
    pub tau_bias: f64,
    pub gamma: f64,
}

impl Default for BlendParams {
    fn default() -> Self {
        Self {
            w: 0.8,
            tau_bias: 0.03,
            gamma: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WetParams {
    pub p: f64,
    pub i: f64,
    pub a_water: f64,
    pub r_water: f64,
    pub tau_opt: f64,
}

impl Default for WetParams {
    fn default() -> Self {
        Self {
            p: 0.8,
            i: 0.5,
            a_water: 0.02,
            r_water: 0.1,
            tau_opt: 0.0,
        }
    }
}

/// Procedural ground pattern deciding snow versus wet asphalt on the road.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroundParams {
    /// Value-noise frequency over world XZ, 1/m.
    pub scale: f64,
    /// Road pixels whose noise falls below this are snow, the rest wet.
    pub snow_fraction: f64,
}

impl Default for GroundParams {
    fn default() -> Self {
        Self {
            scale: 0.2,
            snow_fraction: 0.6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlakeParams {
    pub count: usize,
    pub flake_radius_m: f64,
    pub v_gravity: [f64; 3],
    pub v_wind: [f64; 3],
    pub alpha: f64,
    pub color: [f64; 3],
    /// Far plane of the spawn volume, meters.
    pub far_m: f64,
    pub seed: Option<u64>,
}

impl Default for FlakeParams {
    fn default() -> Self {
        Self {
            count: 6000,
            flake_radius_m: 0.02,
            v_gravity: [0.0, -2.0, 0.0],
            v_wind: [0.3, 0.0, 0.1],
            alpha: 0.85,
            color: [0.95, 0.96, 0.98],
            far_m: 25.0,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SnowParams {
    /// Metaball centers per square meter of upward surface.
    pub coverage_density: f64,
    pub metaball: MetaballParams,
    pub blend: BlendParams,
    pub wet: WetParams,
    pub ground: GroundParams,
    pub particles: FlakeParams,
    /// `normal·up` above which a surface collects snow.
    pub up_threshold: f64,
    pub normal_strength: f64,
    pub max_slope_deg: f64,
    /// Displacement along the original normal at full cover, meters.
    pub displacement_m: f64,
}

impl Default for SnowParams {
    fn default() -> Self {
        Self {
            coverage_density: 2.0,
            metaball: MetaballParams::default(),
            blend: BlendParams::default(),
            wet: WetParams::default(),
            ground: GroundParams::default(),
            particles: FlakeParams::default(),
            up_threshold: 0.5,
            normal_strength: 0.01,
            max_slope_deg: 45.0,
            displacement_m: 0.0,
        }
    }
}

/// World positions of upward-facing, non-sky pixels.
pub fn upward_points(frame: &GBufferFrame, cam: &CameraModel, up: &Vec3, threshold: f64) -> Vec<Vec3> {
    (0..frame.len())
        .filter_map(|i| {
            if frame.sky_mask[i] || cam.dir_to_world(&frame.normal[i]).dot(up) <= threshold {
                return None;
            }
            let (u, v) = frame.coords(i);
            Some(cam.camera_to_world(&cam.unproject(u as f64, v as f64, frame.depth[i])))
        })
        .collect()
}

/// Stratified center placement: candidates are binned into cubic cells of
/// side `1/√density` and each occupied cell keeps the candidate with the
/// smallest seeded hash. Densities are drawn from `U[0.8, 1.2]` in cell order.
pub fn place_centers(candidates: &[Vec3], density: f64, seed: u64) -> Result<(Vec<Vec3>, Vec<f64>)> {
    if !(density > 0.0) {
        return Err(Error::Parameter(format!("coverage density must be positive, got {density}")));
    }
    let cell = density.sqrt().recip();
    let mut best: BTreeMap<(i64, i64, i64), (u64, usize)> = BTreeMap::new();
    for (i, p) in candidates.iter().enumerate() {
        let key = (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        );
        let score = mix64(seed ^ mix64(i as u64));
        best.entry(key)
            .and_modify(|e| {
                if score < e.0 {
                    *e = (score, i);
                }
            })
            .or_insert((score, i));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec3> = best.values().map(|&(_, i)| candidates[i]).collect();
    let densities = centers.iter().map(|_| rng.random_range(0.8..=1.2)).collect();
    Ok((centers, densities))
}

/// Build the field from upward surfaces pooled over the whole sequence.
pub fn build_field(
    frames: &[GBufferFrame],
    cameras: &[CameraModel],
    up: &Vec3,
    params: &SnowParams,
    seed: u64,
) -> Result<MetaballField> {
    let per_frame: Vec<Vec<Vec3>> = frames
        .par_iter()
        .zip(cameras)
        .map(|(f, c)| upward_points(f, c, up, params.up_threshold))
        .collect();
    let pooled: Vec<Vec3> = per_frame.into_iter().flatten().collect();
    let (centers, densities) = place_centers(&pooled, params.coverage_density, seed)?;
    MetaballField::new(centers, densities, params.metaball)
}

/// Lerp albedo toward 1, roughness toward 0.6 and metallic toward 0 by
/// `c = coverage^γ`. Sky pixels are left alone.
pub fn apply_snow_material(frame: &mut GBufferFrame, coverage: &[f64], gamma: f64) {
    for i in 0..frame.len() {
        if frame.sky_mask[i] || coverage[i] <= 0.0 {
            continue;
        }
        let c = clamp01(coverage[i]).powf(gamma);
        frame.albedo[i] = lerp3(&frame.albedo[i], &Rgb::repeat(1.0), c);
        frame.roughness[i] = lerp(frame.roughness[i], 0.6, c);
        frame.metallic[i] = lerp(frame.metallic[i], 0.0, c);
    }
}

/// Darken and smooth the pixels selected by `mask`:
/// `A ← A(1 − p) + A_w·p·e^{−τ/μ}`, `r ← r(1 − i) + r_w·i`.
pub fn apply_wet_ground(frame: &mut GBufferFrame, cam: &CameraModel, mask: &[bool], wet: &WetParams) {
    for i in 0..frame.len() {
        if !mask[i] {
            continue;
        }
        let (u, v) = frame.coords(i);
        let mu = frame.normal[i].dot(&-cam.ray_dir(u as f64, v as f64)).abs();
        let extinction = if wet.tau_opt == 0.0 {
            1.0
        } else {
            (-wet.tau_opt / mu.max(1e-6)).exp()
        };
        let water = wet.a_water * wet.p * extinction;
        frame.albedo[i] = frame.albedo[i].map(|a| a * (1.0 - wet.p) + water);
        frame.roughness[i] = frame.roughness[i] * (1.0 - wet.i) + wet.r_water * wet.i;
    }
}

/// Per-pixel snow coverage and the road pixels that thaw to wet asphalt.
pub fn snow_coverage(
    frame: &GBufferFrame,
    cam: &CameraModel,
    field: &MetaballField,
    up: &Vec3,
    params: &SnowParams,
    ground_seed: u64,
) -> (Vec<f64>, Vec<bool>) {
    let lattice = HashLattice { seed: ground_seed };
    let per_pixel: Vec<(f64, bool)> = (0..frame.len())
        .into_par_iter()
        .map(|i| {
            if frame.sky_mask[i] {
                return (0.0, false);
            }
            let (u, v) = frame.coords(i);
            let p = cam.camera_to_world(&cam.unproject(u as f64, v as f64, frame.depth[i]));
            if frame.road_mask[i] {
                let n = value_noise(&lattice, p.x * params.ground.scale, p.z * params.ground.scale);
                if n >= params.ground.snow_fraction {
                    return (0.0, true);
                }
            }
            if cam.dir_to_world(&frame.normal[i]).dot(up) <= params.up_threshold {
                return (0.0, false);
            }
            let h = field.height(&p);
            (sigmoid_blend(h, params.blend.w, params.blend.tau_bias), false)
        })
        .collect();
    per_pixel.into_iter().unzip()
}

/// Tilt normals by the tangential height gradient, slope-clamped.
pub fn perturb_normals(
    frame: &mut GBufferFrame,
    cam: &CameraModel,
    field: &MetaballField,
    coverage: &[f64],
    params: &SnowParams,
) {
    let max_slope = params.max_slope_deg.to_radians().tan();
    let w = frame.width;
    let depth = &frame.depth;
    let perturbed: Vec<Option<(Vec3, f64)>> = frame
        .normal
        .par_iter()
        .enumerate()
        .map(|(i, n)| {
            let c = coverage[i];
            if c <= 0.0 {
                return None;
            }
            let (u, v) = ((i % w) as f64, (i / w) as f64);
            let pc = cam.unproject(u, v, depth[i]);
            let g = cam.dir_to_camera(&field.gradient(&cam.camera_to_world(&pc)));
            let mut tangent = (g - n * g.dot(n)) * (params.normal_strength * c);
            let len = tangent.norm();
            if len > max_slope {
                tangent *= max_slope / len;
            }
            let new_n = (n - tangent).normalize();
            let new_depth = if params.displacement_m != 0.0 {
                (pc + n * (params.displacement_m * c)).z
            } else {
                depth[i]
            };
            Some((new_n, new_depth))
        })
        .collect();
    for (i, p) in perturbed.into_iter().enumerate() {
        if let Some((n, d)) = p {
            frame.normal[i] = n;
            frame.depth[i] = d;
        }
    }
}

/// Full per-frame material edit. Returns the coverage raster.
pub fn apply_snow(
    frame: &mut GBufferFrame,
    cam: &CameraModel,
    field: &MetaballField,
    up: &Vec3,
    params: &SnowParams,
    ground_seed: u64,
) -> Vec<f64> {
    let (coverage, wet) = snow_coverage(frame, cam, field, up, params, ground_seed);
    perturb_normals(frame, cam, field, &coverage, params);
    apply_snow_material(frame, &coverage, params.blend.gamma);
    apply_wet_ground(frame, cam, &wet, &params.wet);
    frame.clamp_materials();
    coverage
}

/// Falling flakes with constant drift, respawned at the top of the volume.
#[derive(Debug, Clone)]
pub struct ParticleSet {
    pub positions: Vec<Vec3>,
    pub radii: Vec<f64>,
    pub velocity: Vec3,
    pub bounds: Aabb,
    /// Incremented on every respawn of the particle.
    pub generation: Vec<u32>,
    rng: ChaCha8Rng,
}

impl ParticleSet {
    pub fn new(bounds: Aabb, params: &FlakeParams, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let positions = (0..params.count)
            .map(|_| Vec3::from_fn(|k, _| uniform(&mut rng, bounds.min[k], bounds.max[k])))
            .collect();
        Self {
            positions,
            radii: vec![params.flake_radius_m; params.count],
            velocity: Vec3::from(params.v_gravity) + Vec3::from(params.v_wind),
            bounds,
            generation: vec![0; params.count],
            rng,
        }
    }

    fn respawn(&mut self, i: usize) {
        let b = self.bounds;
        self.positions[i] = Vec3::new(
            uniform(&mut self.rng, b.min.x, b.max.x),
            b.max.y,
            uniform(&mut self.rng, b.min.z, b.max.z),
        );
        self.generation[i] += 1;
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// `p ← p + (v_g + v_w)·dt`; particles leaving the volume or crossing the
/// visible surface of `surface` respawn at the top in index order.
pub fn step_snow_particles(ps: &mut ParticleSet, dt: f64, surface: Option<(&GBufferFrame, &CameraModel)>) {
    if dt == 0.0 {
        return;
    }
    for i in 0..ps.positions.len() {
        let prev = ps.positions[i];
        let next = prev + ps.velocity * dt;
        ps.positions[i] = next;
        let hit = surface.is_some_and(|(f, c)| crosses_surface(f, c, &prev, &next));
        if hit || !ps.bounds.contains(&next) {
            ps.respawn(i);
        }
    }
}

/// Soft disc of radius `max(f·r/z, 1)` pixels drawn wherever the flake is in
/// front of the stored depth.
pub fn rasterize_particles(frame: &mut GBufferFrame, cam: &CameraModel, ps: &ParticleSet, params: &FlakeParams) {
    let color = Rgb::from(params.color);
    let items: Vec<(Vec3, f64)> = ps.positions.iter().copied().zip(ps.radii.iter().copied()).collect();
    composite_ordered(frame, &items, |f, (p, r)| {
        flake_fragments(f, cam, p, *r, params.alpha, &color)
    });
}

fn flake_fragments(frame: &GBufferFrame, cam: &CameraModel, p: &Vec3, r: f64, alpha: f64, color: &Rgb) -> Vec<Fragment> {
    let Some((u, v, z)) = cam.project(&cam.world_to_camera(p)) else {
        return Vec::new();
    };
    let rad = (cam.fx() * r / z).max(1.0);
    let (u0, u1) = ((u - rad).floor().max(0.0), (u + rad).ceil().min(frame.width as f64 - 1.0));
    let (v0, v1) = ((v - rad).floor().max(0.0), (v + rad).ceil().min(frame.height as f64 - 1.0));
    let mut out = Vec::new();
    if u0 > u1 || v0 > v1 {
        return out;
    }
    for y in v0 as usize..=v1 as usize {
        for x in u0 as usize..=u1 as usize {
            let d = ((x as f64 - u).powi(2) + (y as f64 - v).powi(2)).sqrt();
            if d >= rad {
                continue;
            }
            let i = frame.index(x, y);
            if z >= frame.depth[i] && !frame.sky_mask[i] {
                continue;
            }
            let a = alpha * (1.0 - smoothstep(0.5 * rad, rad, d));
            if a > 0.0 {
                out.push(Fragment { index: i, color: *color, alpha: a });
            }
        }
    }
    out
}
