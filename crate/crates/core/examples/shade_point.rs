//! Evaluates the metallic-roughness BRDF under one spotlight for a few
//! materials, with no input files.

use gbuffer_weather::lights::{LightKind, SpotParams};
use gbuffer_weather::shading::local::shade_point;
use gbuffer_weather::{Rgb, Vec3};

/// Outgoing radiance for (label, roughness, metallic) triples.
pub fn run_example() -> gbuffer_weather::Result<Vec<(&'static str, Rgb)>> {
    let light = SpotParams::street().build(Vec3::new(0.0, 5.0, 0.0), -Vec3::y(), LightKind::Street)?;
    let x = Vec3::zeros();
    let n = Vec3::y();
    let wo = Vec3::new(0.0, 1.0, 1.0).normalize();
    let albedo = Rgb::new(0.5, 0.5, 0.5);
    let mut rows = Vec::new();
    for (label, roughness, metallic) in [
        ("matte asphalt", 0.9, 0.0),
        ("wet asphalt", 0.1, 0.0),
        ("brushed metal", 0.4, 1.0),
    ] {
        let l = shade_point(&x, &n, &wo, &albedo, roughness, metallic, std::slice::from_ref(&light));
        println!("{label:14} [{:.4}, {:.4}, {:.4}]", l.x, l.y, l.z);
        rows.push((label, l));
    }
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> gbuffer_weather::Result<()> {
    run_example().map(|_| ())
}
