//! Weight-ratio and schedule ablation for Dynamic ATSS on paired scenes.
//!
//!     cargo run --release --example schedule_ablation

use assignkit::cli::apply_variant;
use assignkit::simulator::{run_simulation, window_means};
use assignkit::{AnchorConfig, ExperimentConfig};

fn main() -> assignkit::Result<()> {
    let mut base = ExperimentConfig {
        anchors: AnchorConfig::with_strides(&[8, 16]),
        ..ExperimentConfig::default()
    };
    base.train.iterations = 300;
    base.train.summary_window = 100;

    println!(
        "{:<14} {:>10} {:>10} {:>8}",
        "variant", "reg_loss", "pred_iou", "num_pos"
    );
    for name in ["atss", "1:1", "0.5:1", "1.5:1", "d_up", "d_down"] {
        let cfg = apply_variant(&base, name)?;
        let run = run_simulation(&cfg)?;
        let w = window_means(&run.records, cfg.train.summary_window);
        println!(
            "{name:<14} {:>10.4} {:>10.4} {:>8.2}",
            w.reg_loss, w.mean_pos_pred_iou, w.num_pos
        );
    }
    Ok(())
}
