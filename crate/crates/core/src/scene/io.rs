//! Sequence manifests, channel loading and frame output.

use std::path::{Path, PathBuf};

use image::{ImageBuffer, Rgb as ImgRgb};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::camera::CameraModel;
use super::color::{linear_to_srgb8, srgb_to_linear};
use super::frame::{GBufferFrame, LinearImage, SparseDepthPoint};
use super::pfm::PfmImage;
use crate::error::{Error, Result};
use crate::math::{Rgb, Vec3};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SequenceManifest {
    pub fps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence_id: Option<String>,
    pub frames: Vec<FrameEntry>,
    /// Text file of `frame u v d` lines (or `u v d`, meaning frame 0).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparse_depth: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FrameEntry {
    pub depth: PathBuf,
    pub normal: PathBuf,
    pub albedo: PathBuf,
    pub roughness: PathBuf,
    pub metallic: PathBuf,
    #[serde(default)]
    pub masks: MaskEntry,
    pub camera: CameraEntry,
    /// Source RGB frame (8-bit sRGB or linear PFM).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
    /// Environment (global illumination) render, linear or sRGB.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambient: Option<PathBuf>,
    /// Per-frame `u v d` lines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparse_depth: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MaskEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sky: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub road: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vehicle: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub streetlight: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CameraEntry {
    #[serde(rename = "K")]
    pub k: [f64; 9],
    #[serde(rename = "R")]
    pub r: [f64; 9],
    pub t: [f64; 3],
}

impl CameraEntry {
    pub fn from_camera(cam: &CameraModel) -> Self {
        let k = cam.k();
        let r = cam.rotation();
        let t = cam.translation();
        Self {
            k: std::array::from_fn(|i| k[(i / 3, i % 3)]),
            r: std::array::from_fn(|i| r[(i / 3, i % 3)]),
            t: [t.x, t.y, t.z],
        }
    }

    pub fn to_camera(&self, frame_interval: f64) -> Result<CameraModel> {
        CameraModel::new(
            nalgebra::Matrix3::from_row_slice(&self.k),
            nalgebra::Matrix3::from_row_slice(&self.r),
            Vec3::from_column_slice(&self.t),
            frame_interval,
        )
    }
}

/// Which mask channels the manifest supplied.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MaskPresence {
    pub sky: bool,
    pub road: bool,
    pub vehicle: bool,
    pub streetlight: bool,
}

/// A fully loaded sequence.
#[derive(Debug, Clone)]
pub struct Sequence {
    pub id: String,
    pub fps: f64,
    pub frames: Vec<GBufferFrame>,
    pub cameras: Vec<CameraModel>,
    /// Sparse metric samples, one list per frame.
    pub sparse: Vec<Vec<SparseDepthPoint>>,
    /// Source frames in linear light, when supplied.
    pub images: Vec<Option<LinearImage>>,
    pub ambient: Vec<Option<LinearImage>>,
    pub masks: MaskPresence,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn has_sparse_depth(&self) -> bool {
        self.sparse.iter().any(|s| !s.is_empty())
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn is_pfm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pfm"))
}

fn check_dims(path: &Path, channel: &str, got: (usize, usize), want: (usize, usize)) -> Result<()> {
    if got != want {
        return Err(Error::load(
            path,
            channel,
            format!("dimensions {}x{} do not match frame {}x{}", got.0, got.1, want.0, want.1),
        ));
    }
    Ok(())
}

fn read_pfm(path: &Path, channel: &str, channels: usize) -> Result<PfmImage> {
    if !path.exists() {
        return Err(Error::load(path, channel, "file not found"));
    }
    let bytes = std::fs::read(path).map_err(|e| Error::load(path, channel, e.to_string()))?;
    let img = PfmImage::decode(&bytes).map_err(|r| Error::load(path, channel, r))?;
    if img.channels != channels {
        return Err(Error::load(
            path,
            channel,
            format!("expected {channels} channel(s), found {}", img.channels),
        ));
    }
    if let Some(bad) = img.data.iter().position(|x| !x.is_finite()) {
        return Err(Error::load(path, channel, format!("non-finite value at {bad}")));
    }
    Ok(img)
}

fn read_8bit(path: &Path, channel: &str) -> Result<image::DynamicImage> {
    if !path.exists() {
        return Err(Error::load(path, channel, "file not found"));
    }
    image::open(path).map_err(|e| Error::load(path, channel, e.to_string()))
}

/// Scalar channel: single-channel PFM, or 8-bit gray scaled to `[0, 1]`.
fn load_scalar(path: &Path, channel: &str, dims: (usize, usize)) -> Result<Vec<f64>> {
    if is_pfm(path) {
        let img = read_pfm(path, channel, 1)?;
        check_dims(path, channel, (img.width, img.height), dims)?;
        Ok(img.data.iter().map(|&x| f64::from(x)).collect())
    } else {
        let img = read_8bit(path, channel)?.to_luma8();
        check_dims(path, channel, (img.width() as usize, img.height() as usize), dims)?;
        Ok(img.pixels().map(|p| f64::from(p.0[0]) / 255.0).collect())
    }
}

fn load_mask(path: Option<&PathBuf>, base: &Path, channel: &str, dims: (usize, usize)) -> Result<Vec<bool>> {
    let Some(p) = path else {
        return Ok(vec![false; dims.0 * dims.1]);
    };
    let path = resolve(base, p);
    let img = read_8bit(&path, channel)?.to_luma8();
    check_dims(&path, channel, (img.width() as usize, img.height() as usize), dims)?;
    Ok(img.pixels().map(|p| p.0[0] != 0).collect())
}

fn load_rgb(path: &Path, channel: &str) -> Result<LinearImage> {
    if is_pfm(path) {
        let img = read_pfm(path, channel, 3)?;
        let data = img
            .data
            .chunks_exact(3)
            .map(|c| Rgb::new(c[0].into(), c[1].into(), c[2].into()))
            .collect();
        LinearImage::from_data(img.width, img.height, data)
    } else {
        let img = read_8bit(path, channel)?.to_rgb8();
        let data = img
            .pixels()
            .map(|p| Rgb::from_fn(|c, _| srgb_to_linear(f64::from(p.0[c]) / 255.0)))
            .collect();
        LinearImage::from_data(img.width() as usize, img.height() as usize, data)
    }
}

/// Load an RGB raster into linear light: PFM as-is, 8-bit files through the
/// sRGB transfer.
pub fn load_linear_image(path: &Path) -> Result<LinearImage> {
    load_rgb(path, "image")
}

fn parse_sparse(path: &Path, default_frame: Option<usize>) -> Result<Vec<(usize, SparseDepthPoint)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::load(path, "sparse_depth", e.to_string()))?;
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let nums: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::load(path, "sparse_depth", format!("line {}: {e}", ln + 1)))?;
        let (frame, rest) = match (nums.len(), default_frame) {
            (3, Some(f)) => (f, &nums[..]),
            (3, None) => (0, &nums[..]),
            (4, None) => (nums[0] as usize, &nums[1..]),
            _ => {
                return Err(Error::load(
                    path,
                    "sparse_depth",
                    format!("line {}: expected `u v d`{}", ln + 1, if default_frame.is_none() { " or `frame u v d`" } else { "" }),
                ))
            }
        };
        out.push((
            frame,
            SparseDepthPoint {
                u: rest[0],
                v: rest[1],
                depth: rest[2],
            },
        ));
    }
    Ok(out)
}

fn load_frame(entry: &FrameEntry, base: &Path) -> Result<(GBufferFrame, Option<LinearImage>, Option<LinearImage>)> {
    let depth_path = resolve(base, &entry.depth);
    let depth = read_pfm(&depth_path, "depth", 1)?;
    let dims = (depth.width, depth.height);

    let normal_path = resolve(base, &entry.normal);
    let normal = read_pfm(&normal_path, "normal", 3)?;
    check_dims(&normal_path, "normal", (normal.width, normal.height), dims)?;

    let albedo_path = resolve(base, &entry.albedo);
    let albedo = load_rgb(&albedo_path, "albedo")?;
    check_dims(&albedo_path, "albedo", albedo.dims(), dims)?;

    let roughness = load_scalar(&resolve(base, &entry.roughness), "roughness", dims)?;
    let metallic = load_scalar(&resolve(base, &entry.metallic), "metallic", dims)?;

    let mut frame = GBufferFrame {
        width: dims.0,
        height: dims.1,
        depth: depth.data.iter().map(|&x| f64::from(x)).collect(),
        normal: normal
            .data
            .chunks_exact(3)
            .map(|c| Vec3::new(c[0].into(), c[1].into(), c[2].into()))
            .collect(),
        albedo: albedo.data,
        roughness,
        metallic,
        sky_mask: load_mask(entry.masks.sky.as_ref(), base, "sky_mask", dims)?,
        road_mask: load_mask(entry.masks.road.as_ref(), base, "road_mask", dims)?,
        vehicle_mask: load_mask(entry.masks.vehicle.as_ref(), base, "vehicle_mask", dims)?,
        streetlight_mask: load_mask(entry.masks.streetlight.as_ref(), base, "streetlight_mask", dims)?,
        alpha_overlay: None,
        fallback_normals: 0,
    };
    frame.renormalize_normals();
    frame.clamp_materials();
    frame.validate(false)?;

    let side = |p: &Option<PathBuf>, channel: &str| -> Result<Option<LinearImage>> {
        p.as_ref()
            .map(|p| {
                let path = resolve(base, p);
                let img = load_rgb(&path, channel)?;
                check_dims(&path, channel, img.dims(), dims)?;
                Ok(img)
            })
            .transpose()
    };
    let image = side(&entry.image, "image")?;
    let ambient = side(&entry.ambient, "ambient")?;
    Ok((frame, image, ambient))
}

/// Load every frame of a manifest. Fails as a whole if any channel is
/// missing, malformed or mis-sized.
pub fn load_sequence(manifest_path: &Path) -> Result<Sequence> {
    let text = std::fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: SequenceManifest = serde_json::from_str(&text)
        .map_err(|e| Error::load(manifest_path, "manifest", e.to_string()))?;
    if !(manifest.fps > 0.0) {
        return Err(Error::load(manifest_path, "manifest", "fps must be positive"));
    }
    if manifest.frames.is_empty() {
        return Err(Error::load(manifest_path, "manifest", "no frames"));
    }
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let dt = 1.0 / manifest.fps;

    let loaded: Vec<_> = manifest
        .frames
        .par_iter()
        .map(|e| load_frame(e, base))
        .collect::<Result<_>>()?;
    let cameras: Vec<CameraModel> = manifest
        .frames
        .iter()
        .map(|e| e.camera.to_camera(dt))
        .collect::<Result<_>>()
        .map_err(|e| Error::load(manifest_path, "camera", e.to_string()))?;

    let dims = (loaded[0].0.width, loaded[0].0.height);
    let n = loaded.len();
    let mut sparse = vec![Vec::new(); n];
    let mut push = |items: Vec<(usize, SparseDepthPoint)>, path: &Path| -> Result<()> {
        for (f, p) in items {
            if f >= n {
                return Err(Error::load(path, "sparse_depth", format!("frame index {f} out of range")));
            }
            if !(p.depth > 0.0) || p.u < 0.0 || p.v < 0.0 || p.u > (dims.0 - 1) as f64 || p.v > (dims.1 - 1) as f64 {
                return Err(Error::load(path, "sparse_depth", format!("point ({}, {}, {}) outside frame or non-positive", p.u, p.v, p.depth)));
            }
            sparse[f].push(p);
        }
        Ok(())
    };
    if let Some(p) = &manifest.sparse_depth {
        let path = resolve(base, p);
        push(parse_sparse(&path, None)?, &path)?;
    }
    for (i, e) in manifest.frames.iter().enumerate() {
        if let Some(p) = &e.sparse_depth {
            let path = resolve(base, p);
            push(parse_sparse(&path, Some(i))?, &path)?;
        }
    }

    let m = &manifest.frames[0].masks;
    let masks = MaskPresence {
        sky: m.sky.is_some(),
        road: m.road.is_some(),
        vehicle: m.vehicle.is_some(),
        streetlight: m.streetlight.is_some(),
    };
    let mut frames = Vec::with_capacity(n);
    let mut images = Vec::with_capacity(n);
    let mut ambient = Vec::with_capacity(n);
    for (i, (f, img, amb)) in loaded.into_iter().enumerate() {
        if f.dims() != dims {
            return Err(Error::load(
                resolve(base, &manifest.frames[i].depth),
                "depth",
                format!("frame {i} is {}x{}, first frame is {}x{}", f.width, f.height, dims.0, dims.1),
            ));
        }
        frames.push(f);
        images.push(img);
        ambient.push(amb);
    }
    Ok(Sequence {
        id: manifest.sequence_id.clone().unwrap_or_else(|| {
            manifest_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        }),
        fps: manifest.fps,
        frames,
        cameras,
        sparse,
        images,
        ambient,
        masks,
    })
}

/// Write a linear raster as 8-bit sRGB (clamped, rounded half up) and,
/// when `linear_dump` is given, as a 3-channel PFM of the linear values.
pub fn save_frame(frame: &LinearImage, path: &Path, linear_dump: Option<&Path>) -> Result<()> {
    if let Some(bad) = frame.data.iter().position(|c| !c.iter().all(|x| x.is_finite())) {
        return Err(Error::Parameter(format!("non-finite pixel at {bad}")));
    }
    let buf: ImageBuffer<ImgRgb<u8>, Vec<u8>> = ImageBuffer::from_fn(
        frame.width as u32,
        frame.height as u32,
        |x, y| {
            let c = frame.get(x as usize, y as usize);
            ImgRgb([linear_to_srgb8(c.x), linear_to_srgb8(c.y), linear_to_srgb8(c.z)])
        },
    );
    buf.save(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Encode {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    })?;
    if let Some(dump) = linear_dump {
        PfmImage::from_vec3(frame.width, frame.height, &frame.data).write(dump)?;
    }
    Ok(())
}

/// Write a boolean mask as an 8-bit PNG/PGM (255 = true).
pub fn save_mask(mask: &[bool], width: usize, height: usize, path: &Path) -> Result<()> {
    let buf: ImageBuffer<image::Luma<u8>, Vec<u8>> =
        ImageBuffer::from_fn(width as u32, height as u32, |x, y| {
            image::Luma([if mask[y as usize * width + x as usize] { 255 } else { 0 }])
        });
    buf.save(path).map_err(|e| Error::Encode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Write a linear RGB raster as an 8-bit sRGB image without the finiteness
/// check; used for fixture albedo.
pub fn save_srgb8(data: &[Rgb], width: usize, height: usize, path: &Path) -> Result<()> {
    save_frame(&LinearImage::from_data(width, height, data.to_vec())?, path, None)
}
