//! Shared pieces of the precipitation simulations: spawn volumes and the
//! ordered compositing of per-particle fragments into the alpha overlay.

use rayon::prelude::*;

use crate::math::{Rgb, Vec3};
use crate::scene::{CameraModel, GBufferFrame};

/// Drops per parallel rasterization chunk.
pub const CHUNK: usize = 256;

/// Axis-aligned world box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }
}

/// World box enclosing the view frusta of every camera between `near` and
/// `far` meters of z-depth.
pub fn frustum_bounds(cameras: &[CameraModel], width: usize, height: usize, near: f64, far: f64) -> Aabb {
    let mut b = Aabb::empty();
    let (w, h) = ((width.max(1) - 1) as f64, (height.max(1) - 1) as f64);
    for cam in cameras {
        for (u, v) in [(0.0, 0.0), (w, 0.0), (0.0, h), (w, h)] {
            for d in [near, far] {
                b.grow(&cam.camera_to_world(&cam.unproject(u, v, d)));
            }
        }
    }
    b
}

/// Whether the segment from `prev` to `next` (world) passes from in front of
/// the visible surface to behind it.
pub fn crosses_surface(frame: &GBufferFrame, cam: &CameraModel, prev: &Vec3, next: &Vec3) -> bool {
    let behind = |p: &Vec3| -> Option<bool> {
        let (u, v, z) = cam.project(&cam.world_to_camera(p))?;
        let i = frame.texel_at(u, v)?;
        if frame.sky_mask[i] {
            return Some(false);
        }
        Some(z >= frame.depth[i])
    };
    matches!((behind(prev), behind(next)), (Some(false), Some(true)))
}

/// One premultiplied RGBA contribution to a pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fragment {
    pub index: usize,
    pub color: Rgb,
    pub alpha: f64,
}

/// Composite `src` over `dst`, both premultiplied.
#[inline]
pub fn over(dst: &mut [f64; 4], color: &Rgb, alpha: f64) {
    let k = 1.0 - alpha;
    dst[0] = color.x * alpha + dst[0] * k;
    dst[1] = color.y * alpha + dst[1] * k;
    dst[2] = color.z * alpha + dst[2] * k;
    dst[3] = alpha + dst[3] * k;
}

/// Rasterize `items` in parallel chunks and composite their fragments into
/// the frame overlay strictly in item order.
pub fn composite_ordered<T, F>(frame: &mut GBufferFrame, items: &[T], raster: F)
where
    T: Sync,
    F: Fn(&GBufferFrame, &T) -> Vec<Fragment> + Sync,
{
    let view: &GBufferFrame = frame;
    let chunks: Vec<Vec<Fragment>> = items
        .par_chunks(CHUNK)
        .map(|chunk| chunk.iter().flat_map(|it| raster(view, it)).collect())
        .collect();
    let n = frame.len();
    let overlay = frame.alpha_overlay.get_or_insert_with(|| vec![[0.0; 4]; n]);
    for frag in chunks.iter().flatten() {
        over(&mut overlay[frag.index], &frag.color, frag.alpha);
    }
}

/// `overlay + (1 − α)·image`, per pixel.
pub fn apply_overlay(image: &mut [Rgb], overlay: &[[f64; 4]]) {
    for (c, o) in image.iter_mut().zip(overlay) {
        *c = Rgb::new(o[0], o[1], o[2]) + *c * (1.0 - o[3]);
    }
}
