//! Writes the default synthetic collection to the directory given as the
//! first argument (default `tests/fixtures/synth`).

use std::path::PathBuf;

use relstat_core::synth::{SynthCollection, SynthConfig};

fn main() -> relstat_core::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("tests/fixtures/synth"));
    SynthCollection::generate(&SynthConfig::default())?.write_to(&dir)?;
    println!("wrote {}", dir.display());
    Ok(())
}
