//! Static vs Dynamic ATSS on identical seeded scenes; prints the
//! final-window regression loss and predicted-box IoU of positives.
//!
//!     cargo run --release --example paired_simulation [seeds]

use assignkit::simulator::{run_simulation, window_means};
use assignkit::{AnchorConfig, AssignerConfig, ExperimentConfig};

fn main() -> assignkit::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);

    let base = ExperimentConfig {
        anchors: AnchorConfig::with_strides(&[8, 16]),
        ..ExperimentConfig::default()
    };

    println!("seed  {:>22}  {:>22}", "reg_loss static/dyn", "pred_iou static/dyn");
    for seed in 0..seeds {
        let mut res = Vec::new();
        for assigner in [AssignerConfig::atss(9), AssignerConfig::dynamic(9, 1.0, 1.0)] {
            let mut cfg = base.clone().with_seed(seed);
            cfg.assigner = assigner;
            let run = run_simulation(&cfg)?;
            res.push((run.scene_hash.clone(), window_means(&run.records, 100)));
        }
        assert_eq!(res[0].0, res[1].0, "runs must share scenes");
        println!(
            "{seed:>4}  {:>10.4} / {:<10.4}  {:>10.4} / {:<10.4}",
            res[0].1.reg_loss, res[1].1.reg_loss, res[0].1.mean_pos_pred_iou, res[1].1.mean_pos_pred_iou
        );
    }
    Ok(())
}
