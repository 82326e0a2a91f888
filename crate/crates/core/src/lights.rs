//! Static street-light emitters from masks and metric depth, plus ego
//! headlights and the light-rig JSON format.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Rgb, Vec3};
use crate::scene::{CameraModel, GBufferFrame};
use crate::spatial::connected_components;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LightKind {
    Street,
    Headlight,
}

/// Cone-parameterized point emitter.
#[derive(Debug, Clone, PartialEq)]
pub struct SpotLight {
    pub position: Vec3,
    /// Unit forward axis of the cone.
    pub direction: Vec3,
    pub cos_inner: f64,
    pub cos_outer: f64,
    /// Influence radius in meters.
    pub r_max: f64,
    /// Linear RGB radiant intensity.
    pub intensity: Rgb,
    pub kind: LightKind,
}

impl SpotLight {
    pub fn new(
        position: Vec3,
        direction: Vec3,
        deg_inner: f64,
        deg_outer: f64,
        r_max: f64,
        intensity: Rgb,
        kind: LightKind,
    ) -> Result<Self> {
        let light = Self {
            position,
            direction: direction.normalize(),
            cos_inner: deg_inner.to_radians().cos(),
            cos_outer: deg_outer.to_radians().cos(),
            r_max,
            intensity,
            kind,
        };
        light.validate()?;
        Ok(light)
    }

    pub fn validate(&self) -> Result<()> {
        if !((self.direction.norm() - 1.0).abs() <= 1e-6) {
            return Err(Error::Parameter("spotlight direction must be unit length".into()));
        }
        if !(self.cos_inner > self.cos_outer) {
            return Err(Error::Parameter("spotlight inner cone must be narrower than outer".into()));
        }
        if !(self.r_max > 0.0) {
            return Err(Error::Parameter("spotlight r_max must be positive".into()));
        }
        if !self.intensity.iter().all(|&e| e >= 0.0) {
            return Err(Error::Parameter("spotlight intensity must be nonnegative".into()));
        }
        Ok(())
    }
}

/// One group of nearby light observations.
#[derive(Debug, Clone, PartialEq)]
pub struct LightCluster {
    pub id: usize,
    pub points: Vec<Vec3>,
}

/// Cone shape and strength used for estimated or generated lights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpotParams {
    pub deg_inner: f64,
    pub deg_outer: f64,
    pub r_max: f64,
    /// Linear RGB intensity; `color * scale` in the usual setup.
    pub intensity: [f64; 3],
}

impl SpotParams {
    pub fn street() -> Self {
        Self {
            deg_inner: 15.0,
            deg_outer: 35.0,
            r_max: 15.0,
            intensity: [120.0, 108.0, 84.0],
        }
    }

    pub fn headlight() -> Self {
        Self {
            deg_inner: 10.0,
            deg_outer: 25.0,
            r_max: 40.0,
            intensity: [400.0, 360.0, 280.0],
        }
    }

    pub fn build(&self, position: Vec3, direction: Vec3, kind: LightKind) -> Result<SpotLight> {
        SpotLight::new(
            position,
            direction,
            self.deg_inner,
            self.deg_outer,
            self.r_max,
            Rgb::from(self.intensity),
            kind,
        )
    }
}

/// Reproject every street-light pixel of every frame into world space.
pub fn aggregate_light_points(frames: &[GBufferFrame], cameras: &[CameraModel]) -> Vec<Vec3> {
    frames
        .par_iter()
        .zip(cameras.par_iter())
        .map(|(f, cam)| {
            (0..f.len())
                .filter(|&i| f.streetlight_mask[i] && !f.sky_mask[i] && f.depth[i] > 0.0)
                .map(|i| {
                    let (u, v) = f.coords(i);
                    cam.camera_to_world(&cam.unproject(u as f64, v as f64, f.depth[i]))
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .concat()
}

fn lex_cmp(a: &Vec3, b: &Vec3) -> std::cmp::Ordering {
    a.x.total_cmp(&b.x)
        .then(a.y.total_cmp(&b.y))
        .then(a.z.total_cmp(&b.z))
}

/// Connected components of the `‖a − b‖ < tau` graph. Members are sorted
/// lexicographically and clusters are numbered by their smallest member, so
/// the output does not depend on input order.
pub fn cluster_dsu(points: &[Vec3], tau: f64) -> Vec<LightCluster> {
    assert!(tau > 0.0, "tau_dist must be positive");
    let mut groups: Vec<Vec<Vec3>> = connected_components(points, tau)
        .into_iter()
        .map(|idx| {
            let mut m: Vec<Vec3> = idx.into_iter().map(|i| points[i]).collect();
            m.sort_by(lex_cmp);
            m
        })
        .collect();
    groups.sort_by(|a, b| lex_cmp(&a[0], &b[0]));
    groups
        .into_iter()
        .enumerate()
        .map(|(id, points)| LightCluster { id, points })
        .collect()
}

/// Indices of the apex subset: the `max(1, ceil(fraction·n))` highest points
/// along `up`, widened to include every point tied with the lowest of them.
pub fn apex_indices(points: &[Vec3], up: &Vec3, fraction: f64) -> Vec<usize> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let m = ((fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    let h = |i: usize| up.dot(&points[i]);
    order.sort_by(|&a, &b| h(b).total_cmp(&h(a)).then(a.cmp(&b)));
    let cutoff = h(order[m - 1]);
    order.into_iter().take_while(|&i| h(i) >= cutoff).collect()
}

/// Emitter at the centroid of the cluster's apex, aimed along `-up`.
pub fn localize_emitter(
    cluster: &LightCluster,
    up: &Vec3,
    apex_fraction: f64,
    params: &SpotParams,
) -> Result<SpotLight> {
    if cluster.points.is_empty() {
        return Err(Error::Parameter("cannot localize an empty cluster".into()));
    }
    let up = up.normalize();
    let apex = apex_indices(&cluster.points, &up, apex_fraction);
    let centroid = apex.iter().map(|&i| cluster.points[i]).sum::<Vec3>() / apex.len() as f64;
    params.build(centroid, -up, LightKind::Street)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimationParams {
    pub tau_dist: f64,
    pub apex_fraction: f64,
    /// Clusters with fewer observations are discarded as noise.
    pub min_cluster_points: usize,
}

impl Default for EstimationParams {
    fn default() -> Self {
        Self {
            tau_dist: 0.5,
            apex_fraction: 0.05,
            min_cluster_points: 1,
        }
    }
}

/// Full estimation: aggregate, cluster, localize.
pub fn estimate_street_lights(
    frames: &[GBufferFrame],
    cameras: &[CameraModel],
    up: &Vec3,
    est: &EstimationParams,
    params: &SpotParams,
) -> Result<Vec<SpotLight>> {
    let points = aggregate_light_points(frames, cameras);
    cluster_dsu(&points, est.tau_dist)
        .iter()
        .filter(|c| c.points.len() >= est.min_cluster_points)
        .map(|c| localize_emitter(c, up, est.apex_fraction, params))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeadlightParams {
    pub deg_inner: f64,
    pub deg_outer: f64,
    pub r_max: f64,
    pub intensity: [f64; 3],
    /// Lamp height above the road, meters.
    pub bumper_height_m: f64,
    /// Lateral lamp offset when the ego hood is not visible, meters.
    pub half_width_m: f64,
    /// Lamp distance ahead of the camera center, meters.
    pub forward_offset_m: f64,
}

impl HeadlightParams {
    pub fn spot(&self) -> SpotParams {
        SpotParams {
            deg_inner: self.deg_inner,
            deg_outer: self.deg_outer,
            r_max: self.r_max,
            intensity: self.intensity,
        }
    }
}

impl Default for HeadlightParams {
    fn default() -> Self {
        let spot = SpotParams::headlight();
        Self {
            deg_inner: spot.deg_inner,
            deg_outer: spot.deg_outer,
            r_max: spot.r_max,
            intensity: spot.intensity,
            bumper_height_m: 0.7,
            half_width_m: 0.75,
            forward_offset_m: 1.5,
        }
    }
}

/// Two ego-vehicle headlights for one frame, aimed along the camera axis.
///
/// When the vehicle mask reaches the bottom image row (the ego hood is in
/// view) the lamps sit at 15% and 85% of its unprojected lateral extent;
/// otherwise at `±half_width_m`.
pub fn ego_headlights(
    frame: &GBufferFrame,
    cam: &CameraModel,
    camera_height: f64,
    params: &HeadlightParams,
) -> Result<[SpotLight; 2]> {
    let drop = camera_height - params.bumper_height_m;
    let z = params.forward_offset_m;
    let bottom = frame.height.saturating_sub(1);
    let cols: Vec<usize> = (0..frame.width)
        .filter(|&u| frame.vehicle_mask[frame.index(u, bottom)])
        .collect();
    let (xl, xr) = match (cols.first(), cols.last()) {
        (Some(&a), Some(&b)) if b > a => {
            let x = |u: usize| {
                let i = frame.index(u, bottom);
                cam.unproject(u as f64, bottom as f64, frame.depth[i]).x
            };
            let (l, r) = (x(a), x(b));
            (l + 0.15 * (r - l), l + 0.85 * (r - l))
        }
        _ => (-params.half_width_m, params.half_width_m),
    };
    let forward = cam.dir_to_world(&Vec3::z());
    let spot = params.spot();
    let make = |x: f64| {
        spot.build(
            cam.camera_to_world(&Vec3::new(x, drop, z)),
            forward,
            LightKind::Headlight,
        )
    };
    Ok([make(xl)?, make(xr)?])
}

/// Light-rig file entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigEntry {
    pub p: [f64; 3],
    pub d: [f64; 3],
    pub deg_inner: f64,
    pub deg_outer: f64,
    pub r_max: f64,
    #[serde(rename = "E")]
    pub e: [f64; 3],
    pub kind: LightKind,
}

impl From<&SpotLight> for RigEntry {
    fn from(l: &SpotLight) -> Self {
        Self {
            p: l.position.into(),
            d: l.direction.into(),
            deg_inner: l.cos_inner.clamp(-1.0, 1.0).acos().to_degrees(),
            deg_outer: l.cos_outer.clamp(-1.0, 1.0).acos().to_degrees(),
            r_max: l.r_max,
            e: l.intensity.into(),
            kind: l.kind,
        }
    }
}

impl TryFrom<&RigEntry> for SpotLight {
    type Error = Error;

    fn try_from(e: &RigEntry) -> Result<Self> {
        SpotLight::new(
            Vec3::from(e.p),
            Vec3::from(e.d),
            e.deg_inner,
            e.deg_outer,
            e.r_max,
            Rgb::from(e.e),
            e.kind,
        )
    }
}

pub fn rig_to_json(lights: &[SpotLight]) -> String {
    let entries: Vec<RigEntry> = lights.iter().map(RigEntry::from).collect();
    serde_json::to_string_pretty(&entries).expect("rig serializes")
}

pub fn rig_from_json(text: &str) -> Result<Vec<SpotLight>> {
    let entries: Vec<RigEntry> =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("light rig: {e}")))?;
    entries.iter().map(SpotLight::try_from).collect()
}

pub fn read_rig(path: &Path) -> Result<Vec<SpotLight>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    rig_from_json(&text)
}

pub fn write_rig(lights: &[SpotLight], path: &Path) -> Result<()> {
    std::fs::write(path, rig_to_json(lights)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, Rotation3};

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    #[test]
    fn single_pixel_reprojection() {
        let mut f = GBufferFrame::new(1, 1);
        f.depth[0] = 3.0;
        f.streetlight_mask[0] = true;
        let cam = CameraModel::new(Matrix3::identity(), Matrix3::identity(), Vec3::zeros(), 0.1).unwrap();
        assert_eq!(aggregate_light_points(std::slice::from_ref(&f), std::slice::from_ref(&cam)), vec![v(0.0, 0.0, 3.0)]);
        f.streetlight_mask[0] = false;
        assert!(aggregate_light_points(&[f], &[cam]).is_empty());
    }

    #[test]
    fn static_light_seen_from_two_poses() {
        let target = v(1.0, 0.5, 12.0);
        let mut pts = Vec::new();
        for tz in [0.0, 3.0] {
            let cam = CameraModel::from_parts(200.0, 200.0, 32.0, 32.0, Rotation3::identity(), v(0.0, 0.0, tz)).unwrap();
            let (u, vv, d) = cam.project(&cam.world_to_camera(&target)).unwrap();
            let mut f = GBufferFrame::new(64, 64);
            let i = f.index(u.round() as usize, vv.round() as usize);
            f.depth[i] = d;
            f.streetlight_mask[i] = true;
            pts.extend(aggregate_light_points(&[f], &[cam]));
        }
        assert_eq!(pts.len(), 2);
        // each within one pixel footprint of the planted point
        for p in &pts {
            assert!((p - target).norm() < 0.06, "{p:?}");
        }
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(cluster_dsu(&[v(0.0, 0.0, 0.0), v(0.4, 0.0, 0.0)], 0.5).len(), 1);
        assert_eq!(cluster_dsu(&[v(0.0, 0.0, 0.0), v(0.6, 0.0, 0.0)], 0.5).len(), 2);
        let chain: Vec<Vec3> = (0..5).map(|i| v(0.45 * i as f64, 0.0, 0.0)).collect();
        let c = cluster_dsu(&chain, 0.5);
        assert_eq!(c.len(), 1);
        let span = c[0].points.last().unwrap().x - c[0].points[0].x;
        assert!((span - 1.8).abs() < 1e-12);
    }

    #[test]
    fn apex_examples() {
        let up = Vec3::y();
        let single = LightCluster { id: 0, points: vec![v(1.0, 2.0, 3.0)] };
        let l = localize_emitter(&single, &up, 0.05, &SpotParams::street()).unwrap();
        assert_eq!(l.position, v(1.0, 2.0, 3.0));
        assert_eq!(l.direction, -up);

        let mut pts: Vec<Vec3> = (0..95).map(|i| v(i as f64 * 0.01, 7.0 - i as f64 * 0.05, 0.0)).collect();
        let apex: Vec<Vec3> = (0..5).map(|i| v(2.0 + i as f64, 8.0, 1.0)).collect();
        pts.extend(&apex);
        let expected = apex.iter().sum::<Vec3>() / 5.0;
        let l = localize_emitter(&LightCluster { id: 0, points: pts }, &up, 0.05, &SpotParams::street()).unwrap();
        assert!((l.position - expected).norm() < 1e-12);

        let flat: Vec<Vec3> = (0..30).map(|i| v(i as f64, 5.0, -(i as f64))).collect();
        let centroid = flat.iter().sum::<Vec3>() / 30.0;
        let l = localize_emitter(&LightCluster { id: 0, points: flat }, &up, 0.05, &SpotParams::street()).unwrap();
        assert!((l.position - centroid).norm() < 1e-12);
    }

    #[test]
    fn apex_size_rule() {
        for n in 1..300 {
            let pts: Vec<Vec3> = (0..n).map(|i| v(0.0, i as f64, 0.0)).collect();
            assert_eq!(apex_indices(&pts, &Vec3::y(), 0.05).len(), ((n as f64) / 20.0).ceil().max(1.0) as usize);
        }
    }

    #[test]
    fn spot_validation_and_rig_roundtrip() {
        assert!(SpotLight::new(Vec3::zeros(), -Vec3::y(), 35.0, 15.0, 10.0, Rgb::repeat(1.0), LightKind::Street).is_err());
        assert!(SpotLight::new(Vec3::zeros(), -Vec3::y(), 15.0, 35.0, 0.0, Rgb::repeat(1.0), LightKind::Street).is_err());
        let l = SpotParams::street().build(v(1.0, 7.0, -3.0), -Vec3::y(), LightKind::Street).unwrap();
        let back = rig_from_json(&rig_to_json(std::slice::from_ref(&l))).unwrap();
        assert_eq!(back.len(), 1);
        assert!((back[0].cos_inner - l.cos_inner).abs() < 1e-12);
        assert_eq!(back[0].position, l.position);
        assert!(rig_from_json(r#"[{"p":[0,0,0]}]"#).is_err());
    }

    #[test]
    fn headlights_follow_camera() {
        let cam = CameraModel::from_parts(100.0, 100.0, 16.0, 16.0, Rotation3::identity(), v(0.0, 0.0, 5.0)).unwrap();
        let f = GBufferFrame::new(32, 32);
        let [l, r] = ego_headlights(&f, &cam, 1.5, &HeadlightParams::default()).unwrap();
        assert_eq!(l.direction, Vec3::z());
        assert!((l.position - v(-0.75, 0.8, 6.5)).norm() < 1e-12);
        assert!((r.position - v(0.75, 0.8, 6.5)).norm() < 1e-12);
    }
}
