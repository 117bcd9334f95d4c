//! The file-based workflow behind `assignkit assign`: scene JSON in,
//! assignment JSON out.
//!
//!     cargo run --example assign_scene_file

use assignkit::cli::cmd_assign;
use assignkit::{AnchorConfig, Assignment, ExperimentConfig};

fn main() -> assignkit::Result<()> {
    let dir = tempfile::tempdir()?;
    let scene = dir.path().join("scene.json");
    std::fs::write(
        &scene,
        r#"{"image": [128, 128], "gts": [{"box": [20, 24, 84, 70], "class": 1}, {"box": [90, 10, 110, 100], "class": 0}]}"#,
    )?;

    let cfg = ExperimentConfig {
        anchors: AnchorConfig::with_strides(&[8, 16, 32]),
        ..ExperimentConfig::default()
    };
    let out = dir.path().join("assignment.json");
    let a = cmd_assign(&scene, &cfg, &out)?;

    let text = std::fs::read_to_string(&out)?;
    let parsed: Assignment = serde_json::from_str(&text)?;
    assert_eq!(parsed, a);
    for s in &a.stats {
        println!(
            "gt {}: {} candidates, threshold {:.4}, positives {:?}",
            s.gt_index,
            s.candidates.len(),
            s.stats.threshold,
            s.selected
        );
    }

    // Malformed input names the offending field.
    std::fs::write(&scene, r#"{"image": [128, 128], "gts": [{"box": [50, 0, 10, 10]}]}"#)?;
    println!("bad scene: {}", cmd_assign(&scene, &cfg, &out).unwrap_err());
    Ok(())
}
