//! Snow: metaball accumulation on upward surfaces, wet slush patches on the
//! road and falling flakes.

use gbuffer_weather::compose::{calibrate_sequence, run_pipeline, world_up, write_outputs};
use gbuffer_weather::config::{Condition, WeatherConfig};
use gbuffer_weather::scene::load_sequence;
use gbuffer_weather::snow::{apply_snow, build_field};

const MANIFEST: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/manifest.json");

/// Fraction of non-sky pixels on frame 0 with coverage above one half.
pub fn run_example() -> gbuffer_weather::Result<f64> {
    let cfg = WeatherConfig {
        condition: Condition::Snow,
        seed: 7,
        ..WeatherConfig::default()
    };
    let seeds = cfg.seeds();
    let source = load_sequence(MANIFEST.as_ref())?;

    let mut seq = source.clone();
    calibrate_sequence(&mut seq, &cfg.calibration, seeds["calibration"])?;
    let up = world_up(&seq, &cfg.calibration, seeds["calibration"]);
    let field = build_field(&seq.frames, &seq.cameras, &up, &cfg.snow, seeds["snow.metaballs"])?;
    let frame = &mut seq.frames[0];
    let coverage = apply_snow(frame, &seq.cameras[0], &field, &up, &cfg.snow, seeds["snow.ground"]);
    let ground = frame.sky_mask.iter().filter(|s| !**s).count();
    let covered = coverage
        .iter()
        .zip(&frame.sky_mask)
        .filter(|(c, sky)| !**sky && **c > 0.5)
        .count();
    let fraction = covered as f64 / ground.max(1) as f64;
    println!("{} metaballs, {:.1}% of ground covered", field.centers.len(), 100.0 * fraction);

    let out = std::env::temp_dir().join("gbweather-examples");
    let render = run_pipeline(&source, &cfg)?;
    write_outputs(&render, &cfg, &out)?;
    println!("frames written to {}", out.join("snow").display());
    Ok(fraction)
}

#[allow(dead_code)]
fn main() -> gbuffer_weather::Result<()> {
    run_example().map(|_| ())
}
