//! Rain: sky tint, wet road with world-anchored puddles and ripples, and
//! motion-blurred streaks for drops falling at terminal velocity.

use gbuffer_weather::compose::{run_pipeline, write_outputs};
use gbuffer_weather::config::{Condition, WeatherConfig};
use gbuffer_weather::rain::terminal_velocity;
use gbuffer_weather::scene::load_sequence;

const MANIFEST: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/manifest.json");

/// Mean luminance per frame.
pub fn run_example() -> gbuffer_weather::Result<Vec<f64>> {
    for d in [0.5, 1.0, 2.0, 4.0, 6.0] {
        println!("terminal velocity at {d} mm: {:.2} m/s", terminal_velocity(d));
    }
    let cfg = WeatherConfig {
        condition: Condition::Rain,
        seed: 7,
        ..WeatherConfig::default()
    };
    let seq = load_sequence(MANIFEST.as_ref())?;
    let render = run_pipeline(&seq, &cfg)?;
    let out = std::env::temp_dir().join("gbweather-examples");
    write_outputs(&render, &cfg, &out)?;
    let lum: Vec<f64> = render.stats.iter().map(|s| s.mean_luminance).collect();
    println!("mean luminance per frame {lum:.4?}");
    println!("frames written to {}", out.join("rain").display());
    Ok(lum)
}

#[allow(dead_code)]
fn main() -> gbuffer_weather::Result<()> {
    run_example().map(|_| ())
}
