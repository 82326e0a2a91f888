//! Lattice value noise and its octave sum (fractional Brownian motion).

use serde::{Deserialize, Serialize};

use crate::math::hash2_unit;

/// Scalar values on the integer lattice.
pub trait Lattice {
    fn value(&self, ix: i64, iz: i64) -> f64;
}

/// Corner values in `[0, 1)` from a seeded integer hash.
#[derive(Debug, Clone, Copy)]
pub struct HashLattice {
    pub seed: u64,
}

impl Lattice for HashLattice {
    fn value(&self, ix: i64, iz: i64) -> f64 {
        hash2_unit(ix, iz, self.seed)
    }
}

impl<F: Fn(i64, i64) -> f64> Lattice for F {
    fn value(&self, ix: i64, iz: i64) -> f64 {
        self(ix, iz)
    }
}

#[inline]
fn quintic(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

/// Bilinear interpolation of lattice values with a quintic fade.
pub fn value_noise<L: Lattice + ?Sized>(lattice: &L, x: f64, z: f64) -> f64 {
    let (x0, z0) = (x.floor(), z.floor());
    let (ix, iz) = (x0 as i64, z0 as i64);
    let a = quintic(x - x0);
    let b = quintic(z - z0);
    let v00 = lattice.value(ix, iz);
    let v10 = lattice.value(ix + 1, iz);
    let v01 = lattice.value(ix, iz + 1);
    let v11 = lattice.value(ix + 1, iz + 1);
    let top = v00 + (v10 - v00) * a;
    let bottom = v01 + (v11 - v01) * a;
    top + (bottom - top) * b
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FbmParams {
    pub octaves: u32,
    pub persistence: f64,
    pub lacunarity: f64,
    /// Base spatial frequency, cycles per meter.
    pub scale: f64,
}

impl Default for FbmParams {
    fn default() -> Self {
        Self {
            octaves: 3,
            persistence: 0.5,
            lacunarity: 2.0,
            scale: 0.05,
        }
    }
}

/// `Σ_{o=1..O} persistence^o · noise(lacunarity^o · scale · (x, z))`.
pub fn fbm<L: Lattice + ?Sized>(lattice: &L, x: f64, z: f64, p: &FbmParams) -> f64 {
    let mut sum = 0.0;
    let mut amp = 1.0;
    let mut freq = p.scale;
    for _ in 0..p.octaves {
        amp *= p.persistence;
        freq *= p.lacunarity;
        sum += amp * value_noise(lattice, freq * x, freq * z);
    }
    sum
}

/// World-anchored puddle noise over the lateral coordinates `(x_w, z_w)`.
pub fn fbm_world(xw: f64, zw: f64, params: &FbmParams, seed: u64) -> f64 {
    fbm(&HashLattice { seed }, xw, zw, params)
}
