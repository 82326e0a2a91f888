//! Synthetic four-frame driving sequence: a flat road, one box vehicle and
//! one street light, ray-cast from a camera moving down the road.
//!
//! Depth is written at half its metric value alongside exact sparse metric
//! samples, so calibration recovers `s = 2`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{Rotation3, Vector3};

use crate::error::{Error, Result};
use crate::math::{Rgb, Vec3};
use crate::scene::io::{save_mask, CameraEntry, FrameEntry, MaskEntry};
use crate::scene::pfm::PfmImage;
use crate::scene::{save_frame, CameraModel, LinearImage, SequenceManifest};

pub const FRAMES: usize = 4;
pub const FPS: f64 = 30.0;
/// Stored depth is metric depth divided by this.
pub const DEPTH_SCALE: f64 = 2.0;
pub const SKY_DEPTH_M: f64 = 1000.0;
pub const CAMERA_HEIGHT_M: f64 = 1.5;
pub const ROAD_HALF_WIDTH_M: f64 = 4.0;
/// Forward travel per frame, meters along world −Z.
pub const STEP_M: f64 = 0.5;
const PITCH_DEG: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surface {
    Road,
    Verge,
    Vehicle,
    Pole,
    Lamp,
    Sky,
}

struct Block {
    min: Vec3,
    max: Vec3,
    surface: Surface,
}

fn blocks() -> [Block; 4] {
    let b = |min: [f64; 3], max: [f64; 3], surface| Block {
        min: Vec3::from(min),
        max: Vec3::from(max),
        surface,
    };
    [
        b([1.5, 0.0, -14.0], [3.3, 1.5, -10.0], Surface::Vehicle),
        b([-5.1, 0.0, -18.1], [-4.9, 6.0, -17.9], Surface::Pole),
        b([-5.0, 5.9, -18.05], [-3.6, 6.0, -17.95], Surface::Pole),
        b([-3.8, 5.75, -18.2], [-3.3, 5.9, -17.8], Surface::Lamp),
    ]
}

/// Camera of frame `k` for a `width × height` raster.
pub fn camera(k: usize, width: usize, height: usize) -> CameraModel {
    let f = 0.9 * width as f64;
    let rot = Rotation3::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI - PITCH_DEG.to_radians());
    let t = Vec3::new(0.0, CAMERA_HEIGHT_M, -STEP_M * k as f64);
    CameraModel::from_parts(f, f, (width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0, rot, t)
        .expect("fixture camera is valid")
}

/// Nearest hit along `origin + t·dir`: `(t, world normal, surface)`.
fn trace(origin: &Vec3, dir: &Vec3) -> (f64, Vec3, Surface) {
    let mut best = (f64::INFINITY, Vec3::y(), Surface::Sky);
    if dir.y < 0.0 {
        let t = -origin.y / dir.y;
        let hit = origin + dir * t;
        let s = if hit.x.abs() < ROAD_HALF_WIDTH_M { Surface::Road } else { Surface::Verge };
        best = (t, Vec3::y(), s);
    }
    for b in blocks() {
        let (mut t0, mut t1, mut axis) = (0.0f64, f64::INFINITY, 0usize);
        let mut miss = false;
        for k in 0..3 {
            if dir[k].abs() < 1e-15 {
                if origin[k] < b.min[k] || origin[k] > b.max[k] {
                    miss = true;
                }
                continue;
            }
            let (a, c) = ((b.min[k] - origin[k]) / dir[k], (b.max[k] - origin[k]) / dir[k]);
            let (near, far) = if a < c { (a, c) } else { (c, a) };
            if near > t0 {
                t0 = near;
                axis = k;
            }
            t1 = t1.min(far);
        }
        if !miss && t0 <= t1 && t0 > 0.0 && t0 < best.0 {
            let mut n = Vec3::zeros();
            n[axis] = -dir[axis].signum();
            best = (t0, n, b.surface);
        }
    }
    best
}

fn material(s: Surface, hit: &Vec3) -> (Rgb, f64, f64) {
    match s {
        Surface::Road => {
            let dash = hit.x.abs() < 0.1 && hit.z.rem_euclid(4.0) < 2.0;
            let edge = (hit.x.abs() - 3.7).abs() < 0.08;
            if dash || edge {
                (Rgb::new(0.75, 0.75, 0.72), 0.6, 0.0)
            } else {
                (Rgb::new(0.08, 0.08, 0.09), 0.9, 0.0)
            }
        }
        Surface::Verge => (Rgb::new(0.18, 0.3, 0.1), 1.0, 0.0),
        Surface::Vehicle => (Rgb::new(0.55, 0.08, 0.07), 0.3, 0.8),
        Surface::Pole => (Rgb::new(0.3, 0.3, 0.32), 0.5, 0.6),
        Surface::Lamp => (Rgb::new(0.9, 0.88, 0.8), 0.4, 0.0),
        Surface::Sky => (Rgb::new(0.45, 0.6, 0.85), 1.0, 0.0),
    }
}

/// One frame's rasters in memory. Depth is metric.
#[derive(Debug, Clone)]
pub struct FixtureFrame {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
    /// Camera-space unit normals.
    pub normal: Vec<Vec3>,
    pub albedo: Vec<Rgb>,
    pub roughness: Vec<f64>,
    pub metallic: Vec<f64>,
    pub surface: Vec<Surface>,
    /// Sun-lit linear image.
    pub image: Vec<Rgb>,
}

impl FixtureFrame {
    pub fn mask(&self, f: impl Fn(Surface) -> bool) -> Vec<bool> {
        self.surface.iter().map(|&s| f(s)).collect()
    }
}

pub fn render_frame(cam: &CameraModel, width: usize, height: usize) -> FixtureFrame {
    let n = width * height;
    let sun = Vec3::new(0.3, 0.8, 0.4).normalize();
    let origin = cam.center();
    let mut fr = FixtureFrame {
        width,
        height,
        depth: Vec::with_capacity(n),
        normal: Vec::with_capacity(n),
        albedo: Vec::with_capacity(n),
        roughness: Vec::with_capacity(n),
        metallic: Vec::with_capacity(n),
        surface: Vec::with_capacity(n),
        image: Vec::with_capacity(n),
    };
    for v in 0..height {
        for u in 0..width {
            // unnormalized ray with unit camera z, so t is z-depth
            let dir = cam.dir_to_world(&cam.unproject(u as f64, v as f64, 1.0));
            let (t, n_world, mut s) = trace(&origin, &dir);
            let depth = if t.is_finite() && t < SKY_DEPTH_M { t } else { SKY_DEPTH_M };
            if depth == SKY_DEPTH_M {
                s = Surface::Sky;
            }
            let hit = origin + dir * depth;
            let (albedo, rough, metal) = material(s, &hit);
            let n_cam = if s == Surface::Sky {
                crate::scene::frame::FALLBACK_NORMAL
            } else {
                cam.dir_to_camera(&n_world)
            };
            let shade = if s == Surface::Sky {
                1.0 - 0.3 * (v as f64 / height as f64)
            } else {
                0.3 + 0.9 * n_world.dot(&sun).max(0.0)
            };
            fr.depth.push(depth);
            fr.normal.push(n_cam);
            fr.albedo.push(albedo);
            fr.roughness.push(rough);
            fr.metallic.push(metal);
            fr.surface.push(s);
            fr.image.push((albedo * shade).map(|x| x.min(1.0)));
        }
    }
    fr
}

fn save_pfm(img: PfmImage, path: &Path) -> Result<()> {
    img.write(path)
}

/// Write the sequence into `dir` and return the manifest path.
pub fn write_fixture(dir: &Path, width: usize, height: usize) -> Result<PathBuf> {
    if width < 8 || height < 8 {
        return Err(Error::Parameter(format!("fixture needs at least 8x8 pixels, got {width}x{height}")));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut frames = Vec::with_capacity(FRAMES);
    let mut sparse = String::new();
    for k in 0..FRAMES {
        let cam = camera(k, width, height);
        let fr = render_frame(&cam, width, height);
        let name = |ch: &str, ext: &str| format!("frame{k:02}_{ch}.{ext}");
        let rel: Vec<f64> = fr.depth.iter().map(|d| d / DEPTH_SCALE).collect();
        save_pfm(PfmImage::from_scalar(width, height, &rel), &dir.join(name("depth", "pfm")))?;
        save_pfm(PfmImage::from_vec3(width, height, &fr.normal), &dir.join(name("normal", "pfm")))?;
        save_pfm(PfmImage::from_vec3(width, height, &fr.albedo), &dir.join(name("albedo", "pfm")))?;
        save_pfm(PfmImage::from_scalar(width, height, &fr.roughness), &dir.join(name("roughness", "pfm")))?;
        save_pfm(PfmImage::from_scalar(width, height, &fr.metallic), &dir.join(name("metallic", "pfm")))?;
        let masks: [(&str, Box<dyn Fn(Surface) -> bool>); 4] = [
            ("sky", Box::new(|s| s == Surface::Sky)),
            ("road", Box::new(|s| s == Surface::Road)),
            ("vehicle", Box::new(|s| s == Surface::Vehicle)),
            ("streetlight", Box::new(|s| s == Surface::Lamp)),
        ];
        for (ch, f) in &masks {
            save_mask(&fr.mask(f), width, height, &dir.join(name(ch, "png")))?;
        }
        let image = LinearImage::from_data(width, height, fr.image.clone())?;
        save_frame(&image, &dir.join(name("image", "png")), None)?;

        // sparse metric samples on a coarse grid, matched to the f32 depth
        let stride = (width.min(height) / 12).max(2);
        for v in (stride / 2..height).step_by(stride) {
            for u in (stride / 2..width).step_by(stride) {
                let i = v * width + u;
                if fr.surface[i] != Surface::Sky {
                    let stored = rel[i] as f32 as f64;
                    writeln!(sparse, "{k} {u} {v} {}", stored * DEPTH_SCALE).expect("string write");
                }
            }
        }

        let p = |ch: &str, ext: &str| PathBuf::from(name(ch, ext));
        frames.push(FrameEntry {
            depth: p("depth", "pfm"),
            normal: p("normal", "pfm"),
            albedo: p("albedo", "pfm"),
            roughness: p("roughness", "pfm"),
            metallic: p("metallic", "pfm"),
            masks: MaskEntry {
                sky: Some(p("sky", "png")),
                road: Some(p("road", "png")),
                vehicle: Some(p("vehicle", "png")),
                streetlight: Some(p("streetlight", "png")),
            },
            camera: CameraEntry::from_camera(&cam),
            image: Some(p("image", "png")),
            ambient: None,
            sparse_depth: None,
        });
    }
    let sparse_path = dir.join("sparse_depth.txt");
    std::fs::write(&sparse_path, sparse).map_err(|e| Error::io(&sparse_path, e))?;
    let manifest = SequenceManifest {
        fps: FPS,
        sequence_id: Some("synthetic-road".into()),
        frames,
        sparse_depth: Some(PathBuf::from("sparse_depth.txt")),
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
