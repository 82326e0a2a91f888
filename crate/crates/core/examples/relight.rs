//! Relights the bundled sequence with the estimated street light and ego
//! headlights, and checks that an empty rig reproduces the source frames.

use gbuffer_weather::compose::{run_pipeline, write_outputs};
use gbuffer_weather::config::{Condition, LightSource, WeatherConfig};
use gbuffer_weather::scene::load_sequence;

const MANIFEST: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/manifest.json");

/// Largest per-channel deviation of the unlit render from the source.
pub fn run_example() -> gbuffer_weather::Result<f64> {
    let seq = load_sequence(MANIFEST.as_ref())?;
    let out = std::env::temp_dir().join("gbweather-examples").join("relight");

    let lit = WeatherConfig::default();
    let render = run_pipeline(&seq, &lit)?;
    write_outputs(&render, &lit, &out)?;
    println!("{} street light(s) plus headlights -> {}", render.street_lights.len(), out.display());
    for s in &render.stats {
        println!("frame {}: mean luminance {:.4}", s.index, s.mean_luminance);
    }

    let mut unlit = WeatherConfig {
        condition: Condition::RelightOnly,
        ..WeatherConfig::default()
    };
    unlit.lights.source = LightSource::None;
    unlit.lights.headlights = false;
    let plain = run_pipeline(&seq, &unlit)?;
    let mut worst = 0.0f64;
    for (img, src) in plain.frames.iter().zip(&seq.images) {
        let src = src.as_ref().expect("fixture has source images");
        for (a, b) in img.data.iter().zip(&src.data) {
            worst = worst.max((a - b).abs().max());
        }
    }
    println!("empty rig: max deviation from source {worst:.3e}");
    Ok(worst)
}

#[allow(dead_code)]
fn main() -> gbuffer_weather::Result<()> {
    run_example().map(|_| ())
}
