//! Fog: Beer-Lambert extinction toward a fog color plus single-scattered
//! light from the rig. Sweeps the extinction scale and prints mean opacity.

use gbuffer_weather::compose::{run_pipeline, write_outputs};
use gbuffer_weather::config::{Condition, WeatherConfig};
use gbuffer_weather::scene::load_sequence;

const MANIFEST: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/manifest.json");

/// Mean fog opacity over the sequence for each density scale.
pub fn run_example() -> gbuffer_weather::Result<Vec<(f64, f64)>> {
    let seq = load_sequence(MANIFEST.as_ref())?;
    let out = std::env::temp_dir().join("gbweather-examples");
    let mut rows = Vec::new();
    for alpha in [0.0, 0.25, 0.5, 1.0, 2.0] {
        let mut cfg = WeatherConfig {
            condition: Condition::Fog,
            ..WeatherConfig::default()
        };
        cfg.fog.density_alpha = alpha;
        let render = run_pipeline(&seq, &cfg)?;
        let opacity = render
            .stats
            .iter()
            .filter_map(|s| s.mean_fog_opacity)
            .sum::<f64>()
            / render.stats.len() as f64;
        println!("density alpha {alpha:4.2}: mean opacity {opacity:.4}");
        if alpha == 1.0 {
            write_outputs(&render, &cfg, &out)?;
        }
        rows.push((alpha, opacity));
    }
    println!("default-density frames written to {}", out.join("fog").display());
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> gbuffer_weather::Result<()> {
    run_example().map(|_| ())
}
