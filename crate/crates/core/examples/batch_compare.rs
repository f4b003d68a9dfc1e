//! Batch run from a manifest written on the fly, then the per-condition
//! aggregate table.
//!
//! ```text
//! cargo run --release --example batch_compare [seeds]
//! ```

use std::fs;

use locomotion::cli::cmd_run;
use locomotion::config::ScenarioConfig;

fn main() {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let dir = std::env::temp_dir().join("locomotion-batch-compare");
    fs::create_dir_all(&dir).unwrap();
    fs::write(dir.join("pursuit.toml"), ScenarioConfig::pursuit().to_toml()).unwrap();
    fs::write(dir.join("waypoints.toml"), ScenarioConfig::waypoints().to_toml()).unwrap();

    let mut manifest = String::new();
    for scenario in ["pursuit.toml", "waypoints.toml"] {
        for interface in ["finger-distance", "finger-tapping", "gamepad"] {
            manifest.push_str(&format!(
                "[[run]]\nscenario = \"{scenario}\"\ninterface = \"{interface}\"\nseed = 0\nrepeat = {seeds}\n\n"
            ));
        }
    }
    let path = dir.join("compare.toml");
    fs::write(&path, manifest).unwrap();

    let summary = cmd_run(&path, Some(&dir.join("out")), 0, None, false).unwrap();
    println!("{} trials in {}", summary.rows.len(), summary.dir.display());
    print!("{}", fs::read_to_string(summary.dir.join("aggregate.csv")).unwrap());
}
