//! IEC 61966-2-1 sRGB transfer functions.

use crate::math::Rgb;

const SRGB_LINEAR_KNEE: f64 = 0.04045;
const LINEAR_SRGB_KNEE: f64 = 0.0031308;

/// sRGB-encoded value to linear light. Inputs are clamped to `[0, 1]`.
pub fn srgb_to_linear(c: f64) -> f64 {
    let c = c.clamp(0.0, 1.0);
    if c <= SRGB_LINEAR_KNEE {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

/// Linear light to sRGB encoding. Inputs are clamped to `[0, 1]`.
pub fn linear_to_srgb(c: f64) -> f64 {
    let c = c.clamp(0.0, 1.0);
    if c <= LINEAR_SRGB_KNEE {
        c * 12.92
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

pub fn srgb_to_linear_rgb(c: &Rgb) -> Rgb {
    c.map(srgb_to_linear)
}

pub fn linear_to_srgb_rgb(c: &Rgb) -> Rgb {
    c.map(linear_to_srgb)
}

/// Quantize a linear value to an 8-bit sRGB code (clamp, round half up).
#[inline]
pub fn linear_to_srgb8(c: f64) -> u8 {
    (linear_to_srgb(c) * 255.0 + 0.5).floor() as u8
}
