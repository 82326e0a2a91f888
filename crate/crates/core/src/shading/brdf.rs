//! Metallic-roughness Cook-Torrance: Lambert diffuse, GGX distribution,
//! height-correlated Smith visibility and Schlick Fresnel.

use std::f64::consts::PI;

use crate::math::{Rgb, Vec3};

/// Lower bound on `α = roughness²`; keeps the GGX lobe finite for mirror
/// surfaces such as standing water.
pub const MIN_ALPHA: f64 = 2e-3;

const VIS_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrdfSample {
    pub n: Vec3,
    /// Toward the light.
    pub wi: Vec3,
    /// Toward the viewer.
    pub wo: Vec3,
    pub albedo: Rgb,
    /// Perceptual roughness.
    pub roughness: f64,
    pub metallic: f64,
}

pub fn ggx_distribution(n_dot_h: f64, alpha: f64) -> f64 {
    let a2 = alpha * alpha;
    let d = n_dot_h * n_dot_h * (a2 - 1.0) + 1.0;
    a2 / (PI * d * d)
}

/// `V = 1 / (2(λ_o + λ_i))`, i.e. the Smith term already divided by
/// `4 (n·ω_o)(n·ω_i)`.
pub fn smith_visibility(n_dot_l: f64, n_dot_v: f64, alpha: f64) -> f64 {
    let a2 = alpha * alpha;
    let lambda_o = n_dot_l * (n_dot_v * n_dot_v * (1.0 - a2) + a2).sqrt();
    let lambda_i = n_dot_v * (n_dot_l * n_dot_l * (1.0 - a2) + a2).sqrt();
    0.5 / (lambda_o + lambda_i).max(VIS_EPS)
}

pub fn schlick_fresnel(f0: &Rgb, cos: f64) -> Rgb {
    let k = (1.0 - cos).powi(5);
    f0.map(|f| f + (1.0 - f) * k)
}

/// `f_r` for one direction pair; nonnegative per channel.
pub fn brdf_eval(s: &BrdfSample) -> Rgb {
    let n_dot_l = s.n.dot(&s.wi).max(0.0);
    let n_dot_v = s.n.dot(&s.wo).max(0.0);
    let sum = s.wi + s.wo;
    let h = if sum.norm_squared() > 0.0 {
        sum.normalize()
    } else {
        s.n
    };
    let n_dot_h = s.n.dot(&h).clamp(0.0, 1.0);
    // ω_i·h and ω_o·h agree analytically; averaging keeps the swap exact
    let l_dot_h = (0.5 * (s.wi.dot(&h) + s.wo.dot(&h))).clamp(0.0, 1.0);
    let alpha = (s.roughness * s.roughness).max(MIN_ALPHA);

    let f0 = Rgb::repeat(0.04) + (s.albedo - Rgb::repeat(0.04)) * s.metallic;
    let d = ggx_distribution(n_dot_h, alpha);
    let v = smith_visibility(n_dot_l, n_dot_v, alpha);
    let f = schlick_fresnel(&f0, l_dot_h);
    let diffuse = s.albedo * ((1.0 - s.metallic) / PI);
    diffuse + f * (d * v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(wi: Vec3, wo: Vec3, albedo: f64, r: f64, m: f64) -> BrdfSample {
        BrdfSample {
            n: Vec3::z(),
            wi,
            wo,
            albedo: Rgb::repeat(albedo),
            roughness: r,
            metallic: m,
        }
    }

    #[test]
    fn metallic_one_has_no_diffuse() {
        // far from the specular lobe of a mirror-ish surface only diffuse survives
        let wi = Vec3::new(0.8, 0.0, 0.6);
        let wo = Vec3::new(-0.8, 0.0, 0.6);
        let s = sample(wi, wo, 0.7, 0.5, 1.0);
        let spec_only = {
            let alpha = 0.25;
            let h = (wi + wo).normalize();
            let f0 = Rgb::repeat(0.7);
            schlick_fresnel(&f0, wi.dot(&h)) * (ggx_distribution(h.z, alpha) * smith_visibility(0.6, 0.6, alpha))
        };
        assert_eq!(brdf_eval(&s), spec_only);
    }

    #[test]
    fn schlick_at_normal_incidence() {
        let f0 = Rgb::new(0.04, 0.5, 0.9);
        assert_eq!(schlick_fresnel(&f0, 1.0), f0);
    }

    /// Straight transcription of the scalar formulas for the head-on case.
    #[test]
    fn head_on_value_matches_reference() {
        let (r, albedo) = (0.5, 0.3);
        let s = sample(Vec3::z(), Vec3::z(), albedo, r, 0.0);
        let alpha: f64 = 0.25;
        let a2 = alpha * alpha;
        let d_ref = a2 / (PI * (1.0 * (a2 - 1.0) + 1.0).powi(2));
        let lam = 1.0 * (1.0 * (1.0 - a2) + a2).sqrt();
        let g_ref = 1.0 / (2.0 * (lam + lam));
        let f_ref = 0.04;
        let expected = albedo / PI + d_ref * g_ref * f_ref;
        let got = brdf_eval(&s);
        assert!((got.x - expected).abs() < 1e-12, "{} vs {}", got.x, expected);
        // D = 1/(π α²) = 5.0929582, V = 1/4
        assert!((d_ref - 1.0 / (PI * a2)).abs() < 1e-12);
    }

    #[test]
    fn grazing_is_finite() {
        let s = sample(Vec3::x(), Vec3::x(), 0.5, 0.0, 0.0);
        assert!(brdf_eval(&s).iter().all(|x| x.is_finite() && *x >= 0.0));
        let s = sample(Vec3::z(), Vec3::z(), 0.5, 0.0, 0.0);
        assert!(brdf_eval(&s).iter().all(|x| x.is_finite() && *x >= 0.0));
    }
}
