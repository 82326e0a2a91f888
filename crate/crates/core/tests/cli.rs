use std::path::{Path, PathBuf};

use gbuffer_weather::cli::main_with_args;
use gbuffer_weather::lights::read_rig;

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/manifest.json");

fn config(name: &str) -> String {
    format!("{}/fixtures/configs/{name}.json", env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("gbweather").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn report(dir: &Path, condition: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join(condition).join("run_report.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn render_writes_frames_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    for c in ["rain", "snow", "fog", "night", "relight-only"] {
        assert_eq!(run(&["render", "--manifest", FIXTURE, "--config", &config(c), "--out", s(out)]), 0, "{c}");
        for k in 0..4 {
            assert!(out.join(c).join(format!("{k:04}.png")).exists());
        }
        let r = report(out, c);
        assert_eq!(r["condition"], c);
        assert_eq!(r["frames"].as_array().unwrap().len(), 4);
        assert!(r["config"]["threads"].is_null());
        assert!(r.get("timings_ms").is_none());
        assert_eq!(r["calibration"]["method"], "sparse");
        assert!(r["seeds"]["calibration"].is_u64());
    }
    assert!(report(out, "fog")["frames"][0]["mean_fog_opacity"].is_f64());
    assert!(report(out, "rain")["frames"][0].get("mean_fog_opacity").is_none());
}

#[test]
fn condition_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["render", "--manifest", FIXTURE, "--config", &config("default"), "--out", s(tmp.path()), "--condition", "fog"];
    assert_eq!(run(&args), 0);
    assert!(tmp.path().join("fog/run_report.json").exists());
    let bad = ["render", "--manifest", FIXTURE, "--config", &config("default"), "--condition", "hail"];
    assert_eq!(run(&bad), 4);
}

#[test]
fn linear_dump_and_timings_are_opt_in() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"condition": "night", "dump_linear": true, "report_timings": true}"#).unwrap();
    let out = tmp.path().join("out");
    assert_eq!(run(&["render", "--manifest", FIXTURE, "--config", s(&cfg), "--out", s(&out)]), 0);
    assert!(out.join("night/0000.pfm").exists());
    let r = report(&out, "night");
    assert_eq!(r["frames"][0]["linear"], "0000.pfm");
    let stages: Vec<&str> = r["timings_ms"].as_array().unwrap().iter().map(|t| t[0].as_str().unwrap()).collect();
    assert_eq!(stages, ["calibration", "lights", "geometry", "light"]);
}

#[test]
fn estimated_rig_round_trips_through_render() {
    let tmp = tempfile::tempdir().unwrap();
    let rig = tmp.path().join("rig.json");
    assert_eq!(run(&["lights", "--manifest", FIXTURE, "--out", s(&rig)]), 0);
    let lights = read_rig(&rig).unwrap();
    assert_eq!(lights.len(), 1);

    let cfg = tmp.path().join("cfg.json");
    let body = serde_json::json!({"condition": "night", "lights": {"source": rig}});
    std::fs::write(&cfg, body.to_string()).unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(run(&["render", "--manifest", FIXTURE, "--config", s(&cfg), "--out", s(&a)]), 0);
    assert_eq!(run(&["render", "--manifest", FIXTURE, "--config", &config("night"), "--out", s(&b)]), 0);
    assert_eq!(report(&a, "night")["lights"], report(&b, "night")["lights"]);
}

#[test]
fn calibrate_and_validate() {
    assert_eq!(run(&["calibrate", "--manifest", FIXTURE]), 0);
    for c in ["default", "rain", "snow", "fog", "night", "relight-only"] {
        assert_eq!(run(&["validate", "--config", &config(c)]), 0, "{c}");
    }
}

#[test]
fn sweep_writes_one_directory_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "sweep", "--manifest", FIXTURE, "--config", &config("fog"), "--param", "fog.density_alpha", "--values", "0.5,1,2",
        "--out", s(tmp.path()),
    ];
    assert_eq!(run(&args), 0);
    let dirs: Vec<PathBuf> = ["0.5", "1", "2"]
        .iter()
        .map(|v| tmp.path().join(format!("sweep/fog.density_alpha={v}/fog/run_report.json")))
        .collect();
    assert!(dirs.iter().all(|d| d.exists()), "{dirs:?}");
    let bad = ["sweep", "--manifest", FIXTURE, "--config", &config("fog"), "--param", "fog.nope", "--values", "1"];
    assert_ne!(run(&bad), 0);
}

#[test]
fn error_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(&["render", "--bogus"]), 2);
    assert_eq!(run(&[]), 2);
    assert_eq!(run(&["--help"]), 0);
    assert_eq!(run(&["validate", "--config", "/no/such/file.json"]), 3);
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"condition": "rain", "fog": {"sigma_s": -1}}"#).unwrap();
    assert_eq!(run(&["validate", "--config", s(&bad)]), 4);
    std::fs::write(&bad, r#"{"condiiton": "rain"}"#).unwrap();
    assert_eq!(run(&["validate", "--config", s(&bad)]), 4);
    assert_eq!(run(&["render", "--manifest", "/no/such/manifest.json", "--config", &config("fog")]), 3);
    let manifest = tmp.path().join("manifest.json");
    std::fs::write(&manifest, "{\"frames\": 3}").unwrap();
    assert_eq!(run(&["calibrate", "--manifest", s(&manifest)]), 4);
}
