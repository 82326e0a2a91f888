//! Small numeric helpers shared by the passes.

use nalgebra::Vector3;

pub type Vec3 = Vector3<f64>;

/// Linear RGB triple.
pub type Rgb = Vector3<f64>;

/// Rec.709 luma weights, applied to linear RGB.
pub const REC709: [f64; 3] = [0.2126, 0.7152, 0.0722];

#[inline]
pub fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

#[inline]
pub fn lerp3(a: &Vec3, b: &Vec3, t: f64) -> Vec3 {
    a + (b - a) * t
}

#[inline]
pub fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Cubic Hermite step between `e0` and `e1`.
#[inline]
pub fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let t = clamp01((x - e0) / (e1 - e0));
    t * t * (3.0 - 2.0 * t)
}

#[inline]
pub fn luminance(c: &Rgb) -> f64 {
    REC709[0] * c.x + REC709[1] * c.y + REC709[2] * c.z
}

/// Nearest-rank percentile (`p` in percent). Sorts `values` in place.
///
/// Returns `None` for an empty slice.
pub fn percentile_nearest_rank(values: &mut [f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    Some(values[rank.clamp(1, n) - 1])
}

/// Any unit vector orthogonal to `n`.
pub fn orthonormal_tangent(n: &Vec3) -> Vec3 {
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    n.cross(&helper).normalize()
}

/// splitmix64 finaliser; the hash behind every lattice and per-cell value.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash of a 2D integer coordinate and a seed, mapped to `[0, 1)`.
#[inline]
pub fn hash2_unit(ix: i64, iy: i64, seed: u64) -> f64 {
    let h = mix64(mix64(mix64(seed) ^ ix as u64) ^ (iy as u64).rotate_left(32));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Derive an independent sub-seed for a named consumer.
pub fn derive_seed(seed: u64, stream: &str) -> u64 {
    stream
        .bytes()
        .fold(mix64(seed), |acc, b| mix64(acc ^ u64::from(b)))
}
