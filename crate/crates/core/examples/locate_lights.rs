//! Finds street lights from the streetlight mask and writes a light rig.

use gbuffer_weather::compose::{calibrate_sequence, street_lights, world_up};
use gbuffer_weather::config::WeatherConfig;
use gbuffer_weather::lights::{rig_to_json, SpotLight};
use gbuffer_weather::scene::load_sequence;

const MANIFEST: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/manifest.json");

pub fn run_example() -> gbuffer_weather::Result<Vec<SpotLight>> {
    let cfg = WeatherConfig::default();
    let mut seq = load_sequence(MANIFEST.as_ref())?;
    calibrate_sequence(&mut seq, &cfg.calibration, 0)?;
    let up = world_up(&seq, &cfg.calibration, 0);
    let lights = street_lights(&seq, &cfg.lights, &up)?;
    println!("up = [{:.3}, {:.3}, {:.3}]", up.x, up.y, up.z);
    for l in &lights {
        println!(
            "street light at [{:.2}, {:.2}, {:.2}] aimed [{:.2}, {:.2}, {:.2}]",
            l.position.x, l.position.y, l.position.z, l.direction.x, l.direction.y, l.direction.z
        );
    }
    println!("{}", rig_to_json(&lights));
    Ok(lights)
}

#[allow(dead_code)]
fn main() -> gbuffer_weather::Result<()> {
    run_example().map(|_| ())
}
