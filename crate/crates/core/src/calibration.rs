//! Metric scale recovery for relative depth.
//!
//! Two routes produce a [`ScaleBias`]: a RANSAC line fit of sparse metric
//! samples against relative depth, and a monocular fallback that fits a road
//! plane and compares the relative camera height with a known physical one.
//! [`repair_sky_depth`] then pins sky pixels to a sequence-wide percentile.

use nalgebra::{Matrix3, SymmetricEigen};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{percentile_nearest_rank, Vec3};
use crate::scene::{CameraModel, GBufferFrame, SparseDepthPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleBias {
    pub s: f64,
    /// Meters.
    pub b: f64,
    pub inlier_count: usize,
    /// Meters.
    pub rms_error: f64,
}

impl ScaleBias {
    pub const IDENTITY: ScaleBias = ScaleBias {
        s: 1.0,
        b: 0.0,
        inlier_count: 0,
        rms_error: 0.0,
    };

    #[inline]
    pub fn apply(&self, d: f64) -> f64 {
        self.s * d + self.b
    }
}

/// Road plane `n·P + offset = 0` in relative camera space.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundPlane {
    /// Unit normal pointing to the camera's up side (negative camera Y).
    pub normal: Vec3,
    pub offset: f64,
    pub inliers: Vec<usize>,
    /// Mean `|nᵀP|` over the inliers.
    pub h_rel: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LineRansac {
    /// Residual bound in meters for a sample to count as inlier.
    pub threshold: f64,
    pub iterations: usize,
    /// Points subsampled before the consensus search.
    pub sample_n: usize,
}

impl Default for LineRansac {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            iterations: 100,
            sample_n: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlaneRansac {
    pub threshold: f64,
    pub iterations: usize,
}

impl Default for PlaneRansac {
    fn default() -> Self {
        Self {
            threshold: 0.05,
            iterations: 200,
        }
    }
}

/// Ordinary least squares `l ≈ s·d + b` over the given index set.
fn least_squares(d: &[f64], l: &[f64], idx: &[usize]) -> Result<(f64, f64)> {
    let n = idx.len() as f64;
    let md = idx.iter().map(|&i| d[i]).sum::<f64>() / n;
    let ml = idx.iter().map(|&i| l[i]).sum::<f64>() / n;
    let (mut sdd, mut sdl) = (0.0, 0.0);
    for &i in idx {
        let (x, y) = (d[i] - md, l[i] - ml);
        sdd += x * x;
        sdl += x * y;
    }
    if sdd <= f64::EPSILON * md.abs().max(1.0) * n {
        return Err(Error::Calibration(
            "rank-deficient fit: all relative depths are equal".into(),
        ));
    }
    let s = sdl / sdd;
    Ok((s, ml - s * md))
}

/// Fit metric `d_metric ≈ s·d_rel + b` from paired samples with a seeded
/// RANSAC consensus followed by a least-squares refit on the inliers.
pub fn fit_scale_bias_pairs(
    relative: &[f64],
    metric: &[f64],
    params: &LineRansac,
    seed: u64,
) -> Result<ScaleBias> {
    assert_eq!(relative.len(), metric.len());
    let n = relative.len();
    if n < 2 {
        return Err(Error::Calibration(format!("need at least 2 points, got {n}")));
    }
    let first = relative[0];
    if relative.iter().all(|&d| d == first) {
        return Err(Error::Calibration(
            "rank-deficient fit: all relative depths are equal".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool: Vec<usize> = if n > params.sample_n && params.sample_n >= 2 {
        let mut v = index::sample(&mut rng, n, params.sample_n).into_vec();
        v.sort_unstable();
        v
    } else {
        (0..n).collect()
    };

    let residual = |s: f64, b: f64, i: usize| (s * relative[i] + b - metric[i]).abs();
    let mut best: Option<(usize, f64, Vec<usize>)> = None;
    for _ in 0..params.iterations {
        let a = pool[rng.random_range(0..pool.len())];
        let c = pool[rng.random_range(0..pool.len())];
        let dd = relative[c] - relative[a];
        if a == c || dd == 0.0 {
            continue;
        }
        let s = (metric[c] - metric[a]) / dd;
        if !(s > 0.0) {
            continue;
        }
        let b = metric[a] - s * relative[a];
        let inliers: Vec<usize> = pool
            .iter()
            .copied()
            .filter(|&i| residual(s, b, i) < params.threshold)
            .collect();
        let sse: f64 = inliers.iter().map(|&i| residual(s, b, i).powi(2)).sum();
        let better = match &best {
            None => true,
            Some((count, best_sse, _)) => {
                inliers.len() > *count || (inliers.len() == *count && sse < *best_sse)
            }
        };
        if better {
            best = Some((inliers.len(), sse, inliers));
        }
    }
    let consensus = match best {
        Some((count, _, inliers)) if count >= 2 => inliers,
        _ => pool,
    };
    let (s, b) = least_squares(relative, metric, &consensus)?;
    if !(s > 0.0) {
        return Err(Error::Calibration(format!("fitted scale {s} is not positive")));
    }
    let mse = consensus.iter().map(|&i| residual(s, b, i).powi(2)).sum::<f64>()
        / consensus.len() as f64;
    Ok(ScaleBias {
        s,
        b,
        inlier_count: consensus.len(),
        rms_error: mse.sqrt(),
    })
}

/// Pair sparse metric points with the relative depth raster and fit.
/// Points on sky pixels or outside the frame are ignored.
pub fn fit_scale_bias(
    frame: &GBufferFrame,
    points: &[SparseDepthPoint],
    params: &LineRansac,
    seed: u64,
) -> Result<ScaleBias> {
    let (rel, met) = pair_points(frame, points);
    fit_scale_bias_pairs(&rel, &met, params, seed)
}

pub(crate) fn pair_points(frame: &GBufferFrame, points: &[SparseDepthPoint]) -> (Vec<f64>, Vec<f64>) {
    let mut rel = Vec::with_capacity(points.len());
    let mut met = Vec::with_capacity(points.len());
    for p in points {
        if let Some(i) = frame.texel_at(p.u, p.v) {
            if !frame.sky_mask[i] && p.depth > 0.0 {
                rel.push(frame.depth[i]);
                met.push(p.depth);
            }
        }
    }
    (rel, met)
}

fn plane_through(a: &Vec3, b: &Vec3, c: &Vec3) -> Option<(Vec3, f64)> {
    let n = (b - a).cross(&(c - a));
    let len = n.norm();
    let scale = (b - a).norm().max((c - a).norm());
    if !(len > 1e-12 * scale * scale) {
        return None;
    }
    let n = n / len;
    Some((n, -n.dot(a)))
}

/// RANSAC plane fit with a least-squares refit on the consensus set.
pub fn fit_ground_plane(points: &[Vec3], params: &PlaneRansac, seed: u64) -> Result<GroundPlane> {
    if points.len() < 3 {
        return Err(Error::Calibration(format!(
            "need at least 3 road points, got {}",
            points.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = points.len();
    let mut best: Option<(usize, f64, Vec<usize>)> = None;
    for _ in 0..params.iterations {
        let s = index::sample(&mut rng, n, 3);
        let Some((normal, offset)) = plane_through(&points[s.index(0)], &points[s.index(1)], &points[s.index(2)]) else {
            continue;
        };
        let mut inliers = Vec::new();
        let mut sum = 0.0;
        for (i, p) in points.iter().enumerate() {
            let r = (normal.dot(p) + offset).abs();
            if r < params.threshold {
                inliers.push(i);
                sum += r;
            }
        }
        let better = match &best {
            None => true,
            Some((c, bs, _)) => inliers.len() > *c || (inliers.len() == *c && sum < *bs),
        };
        if better {
            best = Some((inliers.len(), sum, inliers));
        }
    }
    let Some((count, _, inliers)) = best else {
        return Err(Error::Calibration("degenerate road points: no plane hypothesis".into()));
    };
    if count < 3 {
        return Err(Error::Calibration("degenerate road plane: fewer than 3 inliers".into()));
    }

    let centroid = inliers.iter().map(|&i| points[i]).sum::<Vec3>() / count as f64;
    let mut cov = Matrix3::zeros();
    for &i in &inliers {
        let d = points[i] - centroid;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let (k, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("3 eigenvalues");
    let mut normal: Vec3 = eig.eigenvectors.column(k).into_owned().normalize();
    // second-smallest eigenvalue ~0 means the inliers are collinear
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    if ev[1] <= 1e-12 * ev[2].max(f64::MIN_POSITIVE) {
        return Err(Error::Calibration("degenerate road plane: inliers are collinear".into()));
    }
    if normal.y > 0.0 {
        normal = -normal;
    }
    let offset = -normal.dot(&centroid);
    let h_rel = inliers.iter().map(|&i| normal.dot(&points[i]).abs()).sum::<f64>() / count as f64;
    if !(h_rel > 0.0) {
        return Err(Error::Calibration("camera lies on the fitted road plane".into()));
    }
    Ok(GroundPlane {
        normal,
        offset,
        inliers,
        h_rel,
    })
}

/// Unprojected road pixels of a frame (camera space, current depth units).
pub fn road_points(frame: &GBufferFrame, cam: &CameraModel) -> Vec<Vec3> {
    (0..frame.len())
        .filter(|&i| frame.road_mask[i] && !frame.sky_mask[i] && frame.depth[i] > 0.0)
        .map(|i| {
            let (u, v) = frame.coords(i);
            cam.unproject(u as f64, v as f64, frame.depth[i])
        })
        .collect()
}

/// Monocular fallback: `s = H_cam / h_rel` with `b = 0`.
pub fn fit_camera_height_scale(
    frame: &GBufferFrame,
    cam: &CameraModel,
    camera_height: f64,
    params: &PlaneRansac,
    seed: u64,
) -> Result<ScaleBias> {
    if !(camera_height > 0.0) {
        return Err(Error::Calibration("camera height must be positive".into()));
    }
    let pts = road_points(frame, cam);
    let plane = fit_ground_plane(&pts, params, seed)?;
    let s = camera_height / plane.h_rel;
    let mse = plane
        .inliers
        .iter()
        .map(|&i| (s * (plane.normal.dot(&pts[i]) + plane.offset)).powi(2))
        .sum::<f64>()
        / plane.inliers.len() as f64;
    Ok(ScaleBias {
        s,
        b: 0.0,
        inlier_count: plane.inliers.len(),
        rms_error: mse.sqrt(),
    })
}

/// Apply `s·d + b` to every depth texel of every frame.
pub fn apply_scale_bias(frames: &mut [GBufferFrame], sb: &ScaleBias) {
    for f in frames {
        for d in &mut f.depth {
            *d = sb.apply(*d);
        }
    }
}

/// Set every sky texel in the sequence to the nearest-rank 99th percentile
/// of all non-sky depths. Returns the value used, or `None` when no frame
/// has sky.
pub fn repair_sky_depth(frames: &mut [GBufferFrame]) -> Result<Option<f64>> {
    if !frames.iter().any(|f| f.sky_mask.iter().any(|&s| s)) {
        return Ok(None);
    }
    let mut pool: Vec<f64> = frames
        .iter()
        .flat_map(|f| f.depth.iter().zip(&f.sky_mask).filter(|(_, &s)| !s).map(|(&d, _)| d))
        .collect();
    let value = percentile_nearest_rank(&mut pool, 99.0).ok_or_else(|| {
        Error::Calibration("every pixel is sky; no depth percentile is defined".into())
    })?;
    for f in frames.iter_mut() {
        for (d, &s) in f.depth.iter_mut().zip(&f.sky_mask) {
            if s {
                *d = value;
            }
        }
    }
    Ok(Some(value))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMethod {
    Sparse,
    CameraHeight,
    /// Depth taken as already metric.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub s: f64,
    pub b: f64,
    pub inlier_count: usize,
    pub rms_error: f64,
    pub method: CalibrationMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sky_depth: Option<f64>,
}
