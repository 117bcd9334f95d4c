//! Quality targets and a simulation written to disk: metrics.csv +
//! summary.json, once per quality branch.
//!
//!     cargo run --release --example simulate_export [out_dir]

use assignkit::cli::cmd_simulate;
use assignkit::losses::{centerness_target, iou_target, QualityBranch};
use assignkit::{AnchorConfig, BBox, ExperimentConfig, Point};

fn main() -> assignkit::Result<()> {
    let gt = BBox::new(0., 0., 4., 4.)?;
    println!(
        "centerness at (2,2) {:.4}, at (1,1) {:.4}",
        centerness_target(Point::new(2., 2.), &gt)?,
        centerness_target(Point::new(1., 1.), &gt)?
    );
    println!(
        "iou target of (1,1,3,3) {:.4}",
        iou_target(&BBox::new(1., 1., 3., 3.)?, &BBox::new(0., 0., 2., 2.)?)
    );

    let root = std::env::args().nth(1).unwrap_or_else(|| "out/simulate_export".into());
    for branch in [QualityBranch::Centerness, QualityBranch::Iou] {
        let mut cfg = ExperimentConfig {
            anchors: AnchorConfig::with_strides(&[8, 16]),
            ..ExperimentConfig::default()
        };
        cfg.losses.quality_branch = branch;
        cfg.train.iterations = 200;
        cfg.output.dir = format!("{root}/{}", branch.name()).into();
        let s = cmd_simulate(&cfg)?;
        println!(
            "{:<10} quality_loss {:.4}  reg_loss {:.4}  -> {}",
            branch.name(),
            s.final_window.quality_loss,
            s.final_window.reg_loss,
            cfg.output.dir.display()
        );
    }
    Ok(())
}
