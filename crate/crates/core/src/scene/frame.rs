//! Per-pixel raster containers.

use crate::error::{Error, Result};
use crate::math::{Rgb, Vec3};

/// Normal used where the stored normal had zero length: facing the camera.
pub const FALLBACK_NORMAL: Vec3 = Vec3::new(0.0, 0.0, -1.0);

/// Intrinsic state of one frame. Every raster is row-major, `width * height`.
///
/// Normals are camera-space unit vectors; albedo is linear RGB. The Geometry
/// Pass mutates these channels in place.
#[derive(Debug, Clone, PartialEq)]
pub struct GBufferFrame {
    pub width: usize,
    pub height: usize,
    /// Camera-space z-depth in meters.
    pub depth: Vec<f64>,
    pub normal: Vec<Vec3>,
    pub albedo: Vec<Rgb>,
    pub roughness: Vec<f64>,
    pub metallic: Vec<f64>,
    pub sky_mask: Vec<bool>,
    pub road_mask: Vec<bool>,
    pub vehicle_mask: Vec<bool>,
    pub streetlight_mask: Vec<bool>,
    /// Premultiplied RGBA of rasterized precipitation, composited last.
    pub alpha_overlay: Option<Vec<[f64; 4]>>,
    /// Number of stored normals that were zero-length and replaced on load.
    pub fallback_normals: usize,
}

impl GBufferFrame {
    /// A frame of unit-depth, camera-facing, mid-gray diffuse pixels with
    /// empty masks.
    pub fn new(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            depth: vec![1.0; n],
            normal: vec![FALLBACK_NORMAL; n],
            albedo: vec![Rgb::repeat(0.5); n],
            roughness: vec![0.5; n],
            metallic: vec![0.0; n],
            sky_mask: vec![false; n],
            road_mask: vec![false; n],
            vehicle_mask: vec![false; n],
            streetlight_mask: vec![false; n],
            alpha_overlay: None,
            fallback_normals: 0,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, u: usize, v: usize) -> usize {
        v * self.width + u
    }

    #[inline]
    pub fn coords(&self, i: usize) -> (usize, usize) {
        (i % self.width, i / self.width)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Renormalize normals; zero or non-finite ones become [`FALLBACK_NORMAL`].
    pub fn renormalize_normals(&mut self) {
        let mut fallbacks = 0;
        for n in &mut self.normal {
            let len = n.norm();
            if len > 1e-12 && len.is_finite() {
                *n /= len;
            } else {
                *n = FALLBACK_NORMAL;
                fallbacks += 1;
            }
        }
        self.fallback_normals = fallbacks;
    }

    /// Clamp albedo, roughness and metallic into `[0, 1]`.
    pub fn clamp_materials(&mut self) {
        for a in &mut self.albedo {
            *a = a.map(|c| c.clamp(0.0, 1.0));
        }
        for r in &mut self.roughness {
            *r = r.clamp(0.0, 1.0);
        }
        for m in &mut self.metallic {
            *m = m.clamp(0.0, 1.0);
        }
    }

    /// Check the structural invariants. `require_metric` additionally demands
    /// positive depth on every non-sky pixel.
    pub fn validate(&self, require_metric: bool) -> Result<()> {
        let n = self.len();
        let lens = [
            ("depth", self.depth.len()),
            ("normal", self.normal.len()),
            ("albedo", self.albedo.len()),
            ("roughness", self.roughness.len()),
            ("metallic", self.metallic.len()),
            ("sky_mask", self.sky_mask.len()),
            ("road_mask", self.road_mask.len()),
            ("vehicle_mask", self.vehicle_mask.len()),
            ("streetlight_mask", self.streetlight_mask.len()),
        ];
        for (name, len) in lens {
            if len != n {
                return Err(Error::Parameter(format!(
                    "channel {name} has {len} texels, expected {n}"
                )));
            }
        }
        if let Some(o) = &self.alpha_overlay {
            if o.len() != n {
                return Err(Error::Parameter("alpha overlay size mismatch".into()));
            }
        }
        for (i, n) in self.normal.iter().enumerate() {
            if (n.norm() - 1.0).abs() > 1e-3 {
                return Err(Error::Parameter(format!("normal at texel {i} is not unit")));
            }
        }
        let in_unit = |x: f64| (0.0..=1.0).contains(&x);
        if !self.albedo.iter().all(|a| a.iter().all(|&c| in_unit(c)))
            || !self.roughness.iter().copied().all(in_unit)
            || !self.metallic.iter().copied().all(in_unit)
        {
            return Err(Error::Parameter("material channel outside [0, 1]".into()));
        }
        if require_metric {
            for (i, (&d, &sky)) in self.depth.iter().zip(&self.sky_mask).enumerate() {
                if !sky && !(d > 0.0 && d.is_finite()) {
                    return Err(Error::Calibration(format!(
                        "non-positive depth {d} at non-sky texel {i}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Nearest texel index for continuous pixel coordinates, if inside.
    pub fn texel_at(&self, u: f64, v: f64) -> Option<usize> {
        let (iu, iv) = (u.round(), v.round());
        if iu < 0.0 || iv < 0.0 || iu >= self.width as f64 || iv >= self.height as f64 {
            return None;
        }
        Some(self.index(iu as usize, iv as usize))
    }
}

/// A linear-light RGB raster.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<Rgb>,
}

impl LinearImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, Rgb::zeros())
    }

    pub fn filled(width: usize, height: usize, value: Rgb) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<Rgb>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Dimension {
                expected: (width, height),
                actual: (data.len(), 1),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, u: usize, v: usize) -> Rgb {
        self.data[v * self.width + u]
    }
}

/// A sparse metric depth sample projected into the image (e.g. LiDAR).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseDepthPoint {
    pub u: f64,
    pub v: f64,
    /// Metric depth in meters.
    pub depth: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_normals_fall_back_and_are_counted() {
        let mut f = GBufferFrame::new(2, 1);
        f.normal = vec![Vec3::zeros(), Vec3::new(0.0, 3.0, 4.0)];
        f.renormalize_normals();
        assert_eq!(f.normal[0], FALLBACK_NORMAL);
        assert!((f.normal[1] - Vec3::new(0.0, 0.6, 0.8)).norm() < 1e-15);
        assert_eq!(f.fallback_normals, 1);
        f.validate(true).unwrap();
    }

    #[test]
    fn validate_catches_bad_channels() {
        let mut f = GBufferFrame::new(2, 2);
        f.roughness[3] = 1.5;
        assert!(f.validate(false).is_err());
        f.clamp_materials();
        f.validate(false).unwrap();
        f.depth[0] = -1.0;
        assert!(f.validate(true).is_err());
        f.sky_mask[0] = true;
        f.validate(true).unwrap();
        f.metallic.pop();
        assert!(f.validate(false).is_err());
    }
}
