//! Regenerates the bundled scenario files from the builders.
//!
//! Usage: `cargo run -p kinorrt --example export_scenarios -- [DIR]`
//! (default `scenarios/`).

use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "scenarios".into()),
    );
    std::fs::create_dir_all(&dir)?;
    for (file, scenario) in kinorrt::scenarios::bundled() {
        let path = dir.join(file);
        std::fs::write(&path, scenario.to_toml()?)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
