//! Spotlight attenuation and per-pixel shading over the G-buffer.

use rayon::prelude::*;

use super::brdf::{brdf_eval, BrdfSample};
use crate::lights::SpotLight;
use crate::math::{Rgb, Vec3};
use crate::scene::{CameraModel, GBufferFrame, LinearImage};

/// ε in `E·A / (d² + ε)`, m².
pub const INVERSE_SQUARE_EPS: f64 = 1e-4;

/// Cone falloff `S`, clamped to 1 inside the inner cone.
pub fn spot_angular(light: &SpotLight, cos_theta: f64) -> f64 {
    let t = (cos_theta - light.cos_outer) / (light.cos_inner - light.cos_outer);
    let t = t.clamp(0.0, 1.0);
    t * t
}

/// Range window `W = ((1 − (d/r_max)⁴)₊)²`.
pub fn spot_window(light: &SpotLight, dist: f64) -> f64 {
    let q = dist / light.r_max;
    let w = (1.0 - q * q * q * q).max(0.0);
    w * w
}

/// `A = S·W` at world point `x`.
pub fn spot_attenuation(light: &SpotLight, x: &Vec3) -> f64 {
    let to = x - light.position;
    let dist = to.norm();
    let cos_theta = if dist > 0.0 {
        light.direction.dot(&(to / dist))
    } else {
        1.0
    };
    spot_angular(light, cos_theta) * spot_window(light, dist)
}

/// Incident radiance at `x` from one light: `E·A / (‖x − p‖² + ε)`.
pub fn incident_radiance(light: &SpotLight, x: &Vec3) -> Rgb {
    let d2 = (x - light.position).norm_squared();
    light.intensity * (spot_attenuation(light, x) / (d2 + INVERSE_SQUARE_EPS))
}

/// Outgoing radiance at one surface point summed over `lights`.
pub fn shade_point(
    x: &Vec3,
    n: &Vec3,
    wo: &Vec3,
    albedo: &Rgb,
    roughness: f64,
    metallic: f64,
    lights: &[SpotLight],
) -> Rgb {
    let mut out = Rgb::zeros();
    for light in lights {
        let to_light = light.position - x;
        let dist = to_light.norm();
        if dist == 0.0 {
            continue;
        }
        let wi = to_light / dist;
        let n_dot_l = n.dot(&wi);
        if n_dot_l <= 0.0 {
            continue;
        }
        let li = incident_radiance(light, x);
        if li == Rgb::zeros() {
            continue;
        }
        let f = brdf_eval(&BrdfSample {
            n: *n,
            wi,
            wo: *wo,
            albedo: *albedo,
            roughness,
            metallic,
        });
        out += f.component_mul(&li) * n_dot_l;
    }
    out
}

/// Direct radiance from the spotlight rig for every non-sky pixel.
pub fn shade_local(frame: &GBufferFrame, cam: &CameraModel, lights: &[SpotLight]) -> LinearImage {
    let mut out = LinearImage::new(frame.width, frame.height);
    if lights.is_empty() {
        return out;
    }
    let eye = cam.center();
    out.data.par_iter_mut().enumerate().for_each(|(i, px)| {
        if frame.sky_mask[i] || !(frame.depth[i] > 0.0) {
            return;
        }
        let (u, v) = frame.coords(i);
        let x = cam.camera_to_world(&cam.unproject(u as f64, v as f64, frame.depth[i]));
        let n = cam.dir_to_world(&frame.normal[i]);
        let wo = (eye - x).normalize();
        *px = shade_point(&x, &n, &wo, &frame.albedo[i], frame.roughness[i], frame.metallic[i], lights);
    });
    out
}
