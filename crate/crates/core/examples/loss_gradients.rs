//! Focal / quality focal / varifocal losses and their analytic gradients,
//! checked against central finite differences.
//!
//!     cargo run --example loss_gradients

use assignkit::losses::{ClsLoss, LossParams};
use assignkit::oracle::finite_diff;

fn main() -> assignkit::Result<()> {
    println!(
        "{:<6} {:>5} {:>5} {:>10} {:>12} {:>12}",
        "loss", "p", "y", "value", "d/dp", "finite diff"
    );
    for loss in [ClsLoss::Focal, ClsLoss::Qfl, ClsLoss::Vfl] {
        let params = LossParams::for_loss(loss);
        for (p, y) in [(0.9, 1.0), (0.5, 0.0), (0.5, 0.8), (0.2, 0.6)] {
            let e = loss.eval(p, y, &params);
            let fd = finite_diff(loss, p, y, &params, 1e-5)?;
            println!(
                "{:<6} {p:>5} {y:>5} {:>10.6} {:>12.6} {:>12.6}",
                loss.name(),
                e.value,
                e.d_dp,
                fd
            );
        }
    }
    Ok(())
}
