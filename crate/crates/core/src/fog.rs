//! Fog Light Pass: single scattering over metric depth with
//! Henyey-Greenstein in-scattering from the light rig.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lights::SpotLight;
use crate::math::{Rgb, Vec3};
use crate::scene::{CameraModel, GBufferFrame, LinearImage};
use crate::shading::local::incident_radiance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FogParams {
    pub sigma_s: f64,
    pub sigma_a: f64,
    pub g: f64,
    pub density_alpha: f64,
    pub gamma_scatter: f64,
    pub fog_color: [f64; 3],
    pub beta: f64,
    pub march_samples: usize,
}

impl Default for FogParams {
    fn default() -> Self {
        Self {
            sigma_s: 0.04,
            sigma_a: 0.01,
            g: 0.8,
            density_alpha: 1.0,
            gamma_scatter: 1.0,
            fog_color: [0.7, 0.72, 0.75],
            beta: 0.5,
            march_samples: 1,
        }
    }
}

impl FogParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.sigma_s >= 0.0
            && self.sigma_a >= 0.0
            && self.g.abs() < 1.0
            && self.density_alpha >= 0.0
            && (0.0..=1.0).contains(&self.beta)
            && self.march_samples >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!("invalid fog medium {self:?}")))
        }
    }

    /// `σ_t·α`, per meter.
    pub fn extinction(&self) -> f64 {
        (self.sigma_s + self.sigma_a) * self.density_alpha
    }
}

/// `exp(−(σ_s + σ_a)·α·s)`.
pub fn transmittance(s: f64, m: &FogParams) -> f64 {
    (-m.extinction() * s).exp()
}

/// `(1 − g²) / (4π(1 + g² − 2g·cosθ)^{3/2})`.
pub fn hg_phase(cos_theta: f64, g: f64) -> f64 {
    let g2 = g * g;
    (1.0 - g2) / (4.0 * PI * (1.0 + g2 - 2.0 * g * cos_theta).powf(1.5))
}

/// `Σ_i σ_s·α·p(d·d_i)·L_i·γ`, averaged over `march_samples` points spread
/// evenly along the ray segment; one sample sits at the midpoint.
pub fn in_scatter(origin: &Vec3, dir: &Vec3, dist: f64, lights: &[SpotLight], m: &FogParams) -> Rgb {
    if lights.is_empty() || dist <= 0.0 {
        return Rgb::zeros();
    }
    let k = m.sigma_s * m.density_alpha * m.gamma_scatter;
    if k == 0.0 {
        return Rgb::zeros();
    }
    let n = m.march_samples.max(1);
    let mut sum = Rgb::zeros();
    for j in 0..n {
        let x = origin + dir * (dist * (j as f64 + 0.5) / n as f64);
        for light in lights {
            let to = light.position - x;
            let len = to.norm();
            let cos = if len > 0.0 { dir.dot(&(to / len)) } else { 1.0 };
            sum += incident_radiance(light, &x) * hg_phase(cos, m.g);
        }
    }
    sum * (k / n as f64)
}

/// Per-pixel fog opacity `f = 1 − T(s)` where `s` is the ray length to the
/// surface.
pub fn fog_opacity(frame: &GBufferFrame, cam: &CameraModel, m: &FogParams) -> Vec<f64> {
    (0..frame.len())
        .map(|i| {
            let (u, v) = frame.coords(i);
            1.0 - transmittance(cam.unproject(u as f64, v as f64, frame.depth[i]).norm(), m)
        })
        .collect()
}

/// `L_obs = L·T + L_in`, then `(1 − βf)·L_obs + βf·F`. Returns the mean
/// fog opacity.
pub fn apply_fog(img: &mut LinearImage, frame: &GBufferFrame, cam: &CameraModel, lights: &[SpotLight], m: &FogParams) -> Result<f64> {
    m.validate()?;
    if img.dims() != frame.dims() {
        return Err(Error::Dimension {
            expected: frame.dims(),
            actual: img.dims(),
        });
    }
    let fog = Rgb::from(m.fog_color);
    let origin = cam.center();
    let opacity: Vec<f64> = img
        .data
        .par_iter_mut()
        .enumerate()
        .map(|(i, c)| {
            let (u, v) = frame.coords(i);
            let p = cam.unproject(u as f64, v as f64, frame.depth[i]);
            let s = p.norm();
            let t = transmittance(s, m);
            let f = 1.0 - t;
            let dir = cam.dir_to_world(&cam.ray_dir(u as f64, v as f64));
            let obs = *c * t + in_scatter(&origin, &dir, s, lights, m);
            let bf = m.beta * f;
            *c = obs * (1.0 - bf) + fog * bf;
            f
        })
        .collect();
    Ok(opacity.iter().sum::<f64>() / opacity.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lights::LightKind;
    use nalgebra::Rotation3;
    use proptest::prelude::*;

    #[test]
    fn transmittance_examples() {
        let m = FogParams { sigma_s: 0.08, sigma_a: 0.02, density_alpha: 1.0, ..Default::default() };
        assert_eq!(transmittance(0.0, &m), 1.0);
        assert!((transmittance(10.0, &m) - (-1.0f64).exp()).abs() < 1e-9);
        let clear = FogParams { density_alpha: 0.0, ..Default::default() };
        assert_eq!(transmittance(1e6, &clear), 1.0);
    }

    #[test]
    fn hg_examples() {
        for c in [-1.0, 0.0, 0.4, 1.0] {
            assert!((hg_phase(c, 0.0) - 1.0 / (4.0 * PI)).abs() < 1e-15);
        }
        assert!((hg_phase(1.0, 0.8) - 3.580986).abs() < 1e-6);
    }

    /// Midpoint rule over μ = cosθ; the azimuth integral is 2π.
    fn sphere_integral(g: f64) -> f64 {
        let n = 1_000_000;
        let h = 2.0 / n as f64;
        (0..n).map(|i| hg_phase(-1.0 + (i as f64 + 0.5) * h, g)).sum::<f64>() * h * 2.0 * PI
    }

    #[test]
    fn hg_normalizes() {
        for g in [0.0, 0.3, 0.8, -0.5] {
            assert!((sphere_integral(g) - 1.0).abs() < 1e-3, "{g}");
        }
    }

    fn omni(at: Vec3) -> SpotLight {
        // 180-degree cone with a huge range acts as a point source
        SpotLight::new(at, Vec3::new(0.0, 0.0, 1.0), 179.0, 180.0, 1e9, Rgb::repeat(10.0), LightKind::Street).unwrap()
    }

    #[test]
    fn in_scatter_examples() {
        let m = FogParams { g: 0.0, ..Default::default() };
        let o = Vec3::zeros();
        let d = Vec3::z();
        assert_eq!(in_scatter(&o, &d, 10.0, &[], &m), Rgb::zeros());
        let no_gamma = FogParams { gamma_scatter: 0.0, ..m };
        assert_eq!(in_scatter(&o, &d, 10.0, &[omni(Vec3::new(0.0, 0.0, 3.0))], &no_gamma), Rgb::zeros());
        let light = SpotLight::new(Vec3::new(0.0, -2.0, 5.0), Vec3::y(), 10.0, 20.0, 100.0, Rgb::repeat(10.0), LightKind::Street).unwrap();
        let got = in_scatter(&o, &d, 10.0, std::slice::from_ref(&light), &m);
        let li = incident_radiance(&light, &Vec3::new(0.0, 0.0, 5.0));
        assert!(li.x > 0.0);
        let expect = li * (0.04 / (4.0 * PI));
        assert!((got - expect).norm() < 1e-12);
    }

    fn plane(depth: f64) -> (GBufferFrame, CameraModel) {
        let mut f = GBufferFrame::new(8, 8);
        f.depth = vec![depth; 64];
        let cam = CameraModel::from_parts(8.0, 8.0, 4.0, 4.0, Rotation3::identity(), Vec3::zeros()).unwrap();
        (f, cam)
    }

    #[test]
    fn zero_depth_is_bit_identical() {
        let (f, cam) = plane(0.0);
        let src: Vec<Rgb> = (0..64).map(|i| Rgb::new(i as f64 * 0.013, 0.3, 0.77)).collect();
        let mut img = LinearImage::from_data(8, 8, src.clone()).unwrap();
        apply_fog(&mut img, &f, &cam, &[omni(Vec3::new(0.0, 1.0, 2.0))], &FogParams::default()).unwrap();
        assert_eq!(img.data, src);
    }

    #[test]
    fn zero_density_is_identity() {
        let (f, cam) = plane(30.0);
        let src: Vec<Rgb> = (0..64).map(|i| Rgb::new(0.2, i as f64 * 0.01, 0.5)).collect();
        let mut img = LinearImage::from_data(8, 8, src.clone()).unwrap();
        let m = FogParams { density_alpha: 0.0, ..Default::default() };
        assert_eq!(apply_fog(&mut img, &f, &cam, &[omni(Vec3::new(0.0, 1.0, 2.0))], &m).unwrap(), 0.0);
        assert_eq!(img.data, src);
    }

    #[test]
    fn far_limit_is_half_fog_color() {
        let (f, cam) = plane(1e6);
        let mut img = LinearImage::filled(8, 8, Rgb::repeat(0.9));
        apply_fog(&mut img, &f, &cam, &[], &FogParams::default()).unwrap();
        for c in &img.data {
            assert!((c - Rgb::new(0.35, 0.36, 0.375)).norm() < 1e-9);
        }
    }

    #[test]
    fn march_converges_to_reference() {
        let light = SpotLight::new(Vec3::new(0.5, -1.0, 6.0), Vec3::new(0.0, 1.0, 0.2), 20.0, 50.0, 30.0, Rgb::repeat(50.0), LightKind::Street).unwrap();
        let m = |n| FogParams { march_samples: n, ..Default::default() };
        let reference = in_scatter(&Vec3::zeros(), &Vec3::z(), 12.0, std::slice::from_ref(&light), &m(4096));
        let coarse = in_scatter(&Vec3::zeros(), &Vec3::z(), 12.0, std::slice::from_ref(&light), &m(64));
        assert!((coarse - reference).norm() < 1e-2 * reference.norm());
    }

    #[test]
    fn dimension_mismatch_errors() {
        let (f, cam) = plane(1.0);
        let mut img = LinearImage::new(4, 4);
        assert!(apply_fog(&mut img, &f, &cam, &[], &FogParams::default()).is_err());
    }

    proptest! {
        #[test]
        fn opacity_monotone_in_depth_and_density(s in 0.01f64..500.0, ds in 0.01f64..50.0, a in 0.0f64..3.0, da in 0.01f64..1.0) {
            let m = FogParams { density_alpha: a, ..Default::default() };
            let m2 = FogParams { density_alpha: a + da, ..Default::default() };
            prop_assert!(transmittance(s + ds, &m) <= transmittance(s, &m));
            prop_assert!(transmittance(s, &m2) < transmittance(s, &m) || transmittance(s, &m) == 0.0);
        }

        #[test]
        fn output_is_affine_in_surface(a in 0.0f64..2.0, b in 0.0f64..2.0, depth in 0.0f64..200.0) {
            let (f, cam) = plane(depth);
            let lights = [omni(Vec3::new(0.0, 1.0, 4.0))];
            let m = FogParams::default();
            let run = |x: f64| {
                let mut img = LinearImage::filled(8, 8, Rgb::repeat(x));
                apply_fog(&mut img, &f, &cam, &lights, &m).unwrap();
                img.data[27]
            };
            let (fa, fb, fm) = (run(a), run(b), run(0.5 * (a + b)));
            prop_assert!((fm - (fa + fb) * 0.5).norm() < 1e-9 * (1.0 + fa.norm() + fb.norm()));
        }
    }
}
