//! Night: adaptive exposure, the night tone LUT and sky darkening, applied
//! after relighting with the street light and headlights.

use gbuffer_weather::compose::{run_pipeline, write_outputs};
use gbuffer_weather::config::{Condition, WeatherConfig};
use gbuffer_weather::scene::load_sequence;
use gbuffer_weather::shading::night::build_night_lut;

const MANIFEST: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/manifest.json");

/// Sequence mean luminance for each LUT strength.
pub fn run_example() -> gbuffer_weather::Result<Vec<(f64, f64)>> {
    let lut = build_night_lut(0.5)?;
    println!(
        "LUT at 0.5, code 128 -> [{:.1}, {:.1}, {:.1}]",
        lut.table[128][0], lut.table[128][1], lut.table[128][2]
    );
    let seq = load_sequence(MANIFEST.as_ref())?;
    let out = std::env::temp_dir().join("gbweather-examples");
    let mut rows = Vec::new();
    for sigma in [0.0, 0.5, 1.0] {
        let mut cfg = WeatherConfig {
            condition: Condition::Night,
            ..WeatherConfig::default()
        };
        cfg.night.lut_sigma = sigma;
        let render = run_pipeline(&seq, &cfg)?;
        let lum = render.stats.iter().map(|s| s.mean_luminance).sum::<f64>() / render.stats.len() as f64;
        println!("lut sigma {sigma:.1}: mean luminance {lum:.4}");
        if sigma == 0.5 {
            write_outputs(&render, &cfg, &out)?;
        }
        rows.push((sigma, lum));
    }
    println!("frames written to {}", out.join("night").display());
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> gbuffer_weather::Result<()> {
    run_example().map(|_| ())
}
