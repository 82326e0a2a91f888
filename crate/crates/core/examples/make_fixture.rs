//! Writes the synthetic four-frame road sequence.
//!
//! `cargo run --example make_fixture -- [DIR] [WIDTH] [HEIGHT]`
//! (defaults: a temp directory, 96x72).

use std::path::{Path, PathBuf};

use gbuffer_weather::fixture::write_fixture;
use gbuffer_weather::scene::load_sequence;

fn default_dir() -> PathBuf {
    std::env::temp_dir().join("gbweather-fixture")
}

fn write(dir: &Path, width: usize, height: usize) -> gbuffer_weather::Result<PathBuf> {
    let manifest = write_fixture(dir, width, height)?;
    let seq = load_sequence(&manifest)?;
    println!(
        "{}: {} frames of {}x{}, {} sparse depth samples",
        manifest.display(),
        seq.len(),
        width,
        height,
        seq.sparse.iter().map(Vec::len).sum::<usize>()
    );
    Ok(manifest)
}

pub fn run_example() -> gbuffer_weather::Result<PathBuf> {
    write(&default_dir(), 96, 72)
}

#[allow(dead_code)]
fn main() -> gbuffer_weather::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = args.next().map(PathBuf::from).unwrap_or_else(default_dir);
    let width = args.next().and_then(|s| s.parse().ok()).unwrap_or(96);
    let height = args.next().and_then(|s| s.parse().ok()).unwrap_or(72);
    write(&dir, width, height).map(|_| ())
}
