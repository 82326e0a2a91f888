//! Parameter sweep through a dotted config path, as the `sweep` subcommand
//! does, writing each run under `sweep/<param>=<value>/`.

use gbuffer_weather::cli::{sweep, SweepRow};
use gbuffer_weather::config::{Condition, WeatherConfig};
use gbuffer_weather::scene::load_sequence;

const MANIFEST: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/manifest.json");

pub fn run_example() -> gbuffer_weather::Result<Vec<SweepRow>> {
    let seq = load_sequence(MANIFEST.as_ref())?;
    let base = WeatherConfig {
        condition: Condition::Fog,
        ..WeatherConfig::default()
    };
    let out = std::env::temp_dir().join("gbweather-examples");
    let rows = sweep(&seq, &base, "fog.sigma_s", &[0.01, 0.02, 0.04, 0.08], Some(&out))?;
    for r in &rows {
        println!(
            "fog.sigma_s = {:<5} opacity {:.4} luminance {:.4}",
            r.value,
            r.mean_fog_opacity.unwrap_or(0.0),
            r.mean_luminance
        );
    }
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> gbuffer_weather::Result<()> {
    run_example().map(|_| ())
}
