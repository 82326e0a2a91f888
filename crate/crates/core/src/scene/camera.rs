//! Pinhole camera: intrinsics plus a world-from-camera rigid pose.
//!
//! Camera space follows the image convention: +X right, +Y down, +Z forward.
//! Pixel `(u, v)` addresses the center of column `u`, row `v`.

use nalgebra::{Matrix3, Rotation3};

use crate::error::{Error, Result};
use crate::math::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    k: Matrix3<f64>,
    k_inv: Matrix3<f64>,
    rotation: Matrix3<f64>,
    translation: Vec3,
    /// Seconds between consecutive frames.
    pub frame_interval: f64,
}

impl CameraModel {
    /// Build from a row-major intrinsic matrix and a world-from-camera pose.
    pub fn new(
        k: Matrix3<f64>,
        rotation: Matrix3<f64>,
        translation: Vec3,
        frame_interval: f64,
    ) -> Result<Self> {
        let (fx, fy) = (k[(0, 0)], k[(1, 1)]);
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::Config(format!(
                "focal lengths must be positive (fx={fx}, fy={fy})"
            )));
        }
        let k_inv = k
            .try_inverse()
            .ok_or_else(|| Error::Config("intrinsic matrix is not invertible".into()))?;
        let orth = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        let det = rotation.determinant();
        if orth > 1e-6 || (det - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "rotation is not proper orthonormal (|RᵀR−I|={orth:.3e}, det={det})"
            )));
        }
        if !(frame_interval > 0.0) {
            return Err(Error::Config("frame interval must be positive".into()));
        }
        Ok(Self {
            k,
            k_inv,
            rotation,
            translation,
            frame_interval,
        })
    }

    /// Zero-skew intrinsics with the given focal lengths and principal point.
    pub fn intrinsics(fx: f64, fy: f64, cx: f64, cy: f64) -> Matrix3<f64> {
        Matrix3::new(fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0)
    }

    pub fn from_parts(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        rotation: Rotation3<f64>,
        translation: Vec3,
    ) -> Result<Self> {
        Self::new(
            Self::intrinsics(fx, fy, cx, cy),
            *rotation.matrix(),
            translation,
            1.0 / 30.0,
        )
    }

    pub fn k(&self) -> &Matrix3<f64> {
        &self.k
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn fx(&self) -> f64 {
        self.k[(0, 0)]
    }

    pub fn fy(&self) -> f64 {
        self.k[(1, 1)]
    }

    /// Camera center in world space.
    pub fn center(&self) -> Vec3 {
        self.translation
    }

    /// `d · K⁻¹ · [u, v, 1]ᵀ`.
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Vec3 {
        self.k_inv * Vec3::new(u, v, 1.0) * depth
    }

    /// Camera-space point to continuous pixel coordinates and depth.
    /// `None` when the point is at or behind the image plane.
    pub fn project(&self, p: &Vec3) -> Option<(f64, f64, f64)> {
        if p.z <= 0.0 {
            return None;
        }
        let q = self.k * p;
        Some((q.x / q.z, q.y / q.z, p.z))
    }

    pub fn camera_to_world(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn world_to_camera(&self, p: &Vec3) -> Vec3 {
        self.rotation.transpose() * (p - self.translation)
    }

    pub fn dir_to_world(&self, d: &Vec3) -> Vec3 {
        self.rotation * d
    }

    pub fn dir_to_camera(&self, d: &Vec3) -> Vec3 {
        self.rotation.transpose() * d
    }

    /// Unit ray direction through a pixel, camera space.
    pub fn ray_dir(&self, u: f64, v: f64) -> Vec3 {
        (self.k_inv * Vec3::new(u, v, 1.0)).normalize()
    }

    pub fn with_pose(&self, rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        Self::new(self.k, rotation, translation, self.frame_interval)
    }
}
