//! Writes the bundled synthetic fixture: `cargo run --example make_fixture -- <dir>`.

use std::path::PathBuf;

use propnsm::synth::{generate, SynthConfig};

fn main() -> propnsm::Result<()> {
    let dir: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "fixtures/synth12".into())
        .into();
    std::fs::create_dir_all(&dir)?;
    let data = generate(&SynthConfig::default())?;
    data.table.save(dir.join("embeddings.txt"))?;
    data.dataset.save(dir.join("dataset.csv"))?;
    println!("wrote {}", dir.display());
    Ok(())
}
