//! Recovers metric scale and bias for the relative depth of the bundled
//! sequence from its sparse samples, then repairs sky depth.

use gbuffer_weather::calibration::CalibrationReport;
use gbuffer_weather::compose::calibrate_sequence;
use gbuffer_weather::config::CalibrationConfig;
use gbuffer_weather::scene::load_sequence;

const MANIFEST: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/manifest.json");

pub fn run_example() -> gbuffer_weather::Result<CalibrationReport> {
    let mut seq = load_sequence(MANIFEST.as_ref())?;
    let before = seq.frames[0].depth[seq.frames[0].len() - 1];
    let report = calibrate_sequence(&mut seq, &CalibrationConfig::default(), 0)?;
    let after = seq.frames[0].depth[seq.frames[0].len() - 1];
    println!(
        "method {:?}: s = {:.4}, b = {:.4}, {} inliers, rms {:.2e}",
        report.method, report.s, report.b, report.inlier_count, report.rms_error
    );
    println!("bottom-right texel: {before:.3} relative -> {after:.3} m");
    if let Some(d) = report.sky_depth {
        println!("sky depth set to {d:.2} m");
    }
    Ok(report)
}

#[allow(dead_code)]
fn main() -> gbuffer_weather::Result<()> {
    run_example().map(|_| ())
}
