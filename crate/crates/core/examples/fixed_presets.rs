//! Fixed-threshold assignment (RetinaNet / RPN / SSD presets) next to ATSS
//! on one synthetic scene. ATSS can leave a GT with no positives: when one
//! level's candidates tie at a high IoU and the other level's sit far below,
//! mean + std lands above every candidate.
//!
//!     cargo run --example fixed_presets

use assignkit::simulator::{generate_scene, SceneSpec};
use assignkit::{assign, generate_anchors, AnchorConfig, AssignerConfig, BBox, Label};

fn main() -> assignkit::Result<()> {
    let anchors = generate_anchors(&AnchorConfig::with_strides(&[8, 16]), 256, 256)?;
    let scene = generate_scene(&SceneSpec {
        seed: 7,
        ..SceneSpec::default()
    })?;
    let gts: Vec<BBox> = scene.iter().map(|g| g.bbox).collect();
    println!("{} anchors, {} GTs", anchors.len(), gts.len());

    let presets = [
        ("retinanet", AssignerConfig::retinanet()),
        ("rpn", AssignerConfig::rpn()),
        ("ssd", AssignerConfig::ssd()),
        ("atss", AssignerConfig::atss(9)),
    ];
    for (name, cfg) in presets {
        let a = assign(&cfg, &anchors, &gts, None, 0, 1)?;
        let ignored = a.labels.iter().filter(|l| matches!(l, Label::Ignore)).count();
        println!("{name:<10} positives per GT {:?}, ignored {ignored}", a.num_pos);
    }
    Ok(())
}
