//! Nocturnal grade: adaptive exposure, the parametric tone LUT and soft
//! sky darkening.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{luminance, percentile_nearest_rank, Rgb};
use crate::scene::color::{linear_to_srgb, srgb_to_linear};
use crate::scene::LinearImage;

/// 256×3 tone table over 8-bit sRGB codes. Entries are kept unquantized.
#[derive(Debug, Clone, PartialEq)]
pub struct NightLut {
    pub sigma: f64,
    pub table: [[f64; 3]; 256],
}

pub fn build_night_lut(sigma: f64) -> Result<NightLut> {
    if !(0.0..=1.0).contains(&sigma) {
        return Err(Error::Parameter(format!("LUT strength {sigma} outside [0, 1]")));
    }
    let beta = 0.7 + 0.2 * (1.0 - sigma);
    let scale = [0.85 - 0.15 * sigma, 0.9 - 0.1 * sigma, 1.05 + 0.2 * sigma];
    let mut table = [[0.0; 3]; 256];
    for (i, row) in table.iter_mut().enumerate() {
        for c in 0..3 {
            row[c] = (beta * i as f64 * scale[c]).clamp(0.0, 255.0);
        }
    }
    Ok(NightLut { sigma, table })
}

impl NightLut {
    /// Look up a continuous code in `[0, 255]`, interpolating between entries.
    pub fn lookup(&self, channel: usize, code: f64) -> f64 {
        let x = code.clamp(0.0, 255.0);
        let i = (x.floor() as usize).min(254);
        let t = x - i as f64;
        let (a, b) = (self.table[i][channel], self.table[i + 1][channel]);
        a + (b - a) * t
    }

    /// Grade a linear pixel: encode to sRGB, map each channel, decode.
    pub fn apply_linear(&self, c: &Rgb) -> Rgb {
        Rgb::from_fn(|k, _| {
            let code = linear_to_srgb(c[k]) * 255.0;
            srgb_to_linear(self.lookup(k, code) / 255.0)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExposureParams {
    pub percentile: f64,
    pub target: f64,
    pub clip: [f64; 2],
}

impl Default for ExposureParams {
    fn default() -> Self {
        Self {
            percentile: 70.0,
            target: 0.22,
            clip: [0.6, 1.6],
        }
    }
}

const EXPOSURE_EPS: f64 = 1e-6;

/// Gain `(0.98 − 0.2σ)·clip(target / (L_p + ε), lo, hi)`.
pub fn exposure_gain(l_p: f64, sigma: f64, p: &ExposureParams) -> f64 {
    (0.98 - 0.20 * sigma) * (p.target / (l_p + EXPOSURE_EPS)).clamp(p.clip[0], p.clip[1])
}

#[inline]
pub fn compress_highlight(c: f64) -> f64 {
    c / (1.0 + 0.25 * c)
}

/// Scale by the luminance-percentile gain, then compress highlights.
/// Returns the gain used.
pub fn adaptive_exposure(img: &mut LinearImage, sigma: f64, p: &ExposureParams) -> f64 {
    let mut lum: Vec<f64> = img.data.iter().map(luminance).collect();
    let l_p = percentile_nearest_rank(&mut lum, p.percentile).unwrap_or(0.0);
    let gain = exposure_gain(l_p, sigma, p);
    for c in &mut img.data {
        *c = c.map(|x| compress_highlight(x * gain));
    }
    gain
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SkyParams {
    pub alpha: f64,
    pub dilate_px: usize,
    pub blur_sigma: f64,
}

impl Default for SkyParams {
    fn default() -> Self {
        Self {
            alpha: 0.6,
            dilate_px: 20,
            blur_sigma: 10.0,
        }
    }
}

/// Euclidean dilation: true wherever a mask pixel lies within `radius`.
pub fn dilate(mask: &[bool], width: usize, height: usize, radius: usize) -> Vec<bool> {
    let r = radius as i64;
    let far = i64::MAX / 4;
    // horizontal distance to nearest set pixel in the same row
    let mut hd = vec![far; mask.len()];
    for y in 0..height {
        let row = &mask[y * width..(y + 1) * width];
        let mut last = -far;
        for x in 0..width {
            if row[x] {
                last = x as i64;
            }
            hd[y * width + x] = x as i64 - last;
        }
        let mut next = far;
        for x in (0..width).rev() {
            if row[x] {
                next = x as i64;
            }
            let d = &mut hd[y * width + x];
            *d = (*d).min(next - x as i64);
        }
    }
    let mut out = vec![false; mask.len()];
    for x in 0..width {
        for y in 0..height {
            let lo = (y as i64 - r).max(0) as usize;
            let hi = ((y as i64 + r) as usize).min(height - 1);
            out[y * width + x] = (lo..=hi).any(|k| {
                let h = hd[k * width + x];
                let dy = k as i64 - y as i64;
                h <= r && h * h + dy * dy <= r * r
            });
        }
    }
    out
}

/// Separable Gaussian blur with radius `ceil(3σ)` and clamped edges.
pub fn gaussian_blur(values: &[f64], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return values.to_vec();
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);
    let pass = |src: &[f64], horizontal: bool| -> Vec<f64> {
        let mut dst = vec![0.0; src.len()];
        for y in 0..height as i64 {
            for x in 0..width as i64 {
                let mut acc = 0.0;
                for (j, w) in kernel.iter().enumerate() {
                    let o = j as i64 - radius;
                    let (sx, sy) = if horizontal {
                        ((x + o).clamp(0, width as i64 - 1), y)
                    } else {
                        (x, (y + o).clamp(0, height as i64 - 1))
                    };
                    acc += w * src[(sy * width as i64 + sx) as usize];
                }
                dst[(y * width as i64 + x) as usize] = acc;
            }
        }
        dst
    };
    pass(&pass(values, true), false)
}

/// Soft sky weight: blurred dilated mask, in `[0, 1]`.
pub fn soft_sky_mask(sky: &[bool], width: usize, height: usize, p: &SkyParams) -> Vec<f64> {
    let grown = dilate(sky, width, height, p.dilate_px);
    let hard: Vec<f64> = grown.iter().map(|&b| f64::from(u8::from(b))).collect();
    gaussian_blur(&hard, width, height, p.blur_sigma)
        .into_iter()
        .map(|x| x.clamp(0.0, 1.0))
        .collect()
}

/// `pixel ← pixel·(1 − soft·(1 − α_sky))`.
pub fn darken_sky(img: &mut LinearImage, sky: &[bool], p: &SkyParams) {
    if !sky.iter().any(|&s| s) {
        return;
    }
    let soft = soft_sky_mask(sky, img.width, img.height, p);
    for (c, w) in img.data.iter_mut().zip(soft) {
        *c *= 1.0 - w * (1.0 - p.alpha);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NightParams {
    pub lut_sigma: f64,
    pub exposure: ExposureParams,
    pub sky: SkyParams,
}

impl Default for NightParams {
    fn default() -> Self {
        Self {
            lut_sigma: 0.5,
            exposure: ExposureParams::default(),
            sky: SkyParams::default(),
        }
    }
}

/// Exposure, then the LUT in sRGB, then sky darkening; all in place on a
/// linear image.
pub fn night_grade(img: &mut LinearImage, sky: &[bool], p: &NightParams) -> Result<()> {
    let lut = build_night_lut(p.lut_sigma)?;
    adaptive_exposure(img, p.lut_sigma, &p.exposure);
    for c in &mut img.data {
        *c = lut.apply_linear(c);
    }
    darken_sky(img, sky, &p.sky);
    Ok(())
}
