//! The adaptive threshold by hand: static ATSS on three anchors, then the
//! combined (prediction + anchor) threshold on five candidates.
//!
//!     cargo run --example atss_vs_dynamic

use assignkit::anchors::AnchorSet;
use assignkit::assignment::select_positive_candidates;
use assignkit::oracle::{naive_assign, NaiveMode};
use assignkit::{assign_atss, BBox};

fn main() -> assignkit::Result<()> {
    let gt = BBox::new(10., 10., 50., 50.)?;
    let anchors = AnchorSet::from_level_boxes(vec![(
        8,
        vec![
            BBox::new(10., 10., 50., 50.)?,
            BBox::new(20., 20., 60., 60.)?,
            BBox::new(30., 30., 70., 70.)?,
        ],
    )])?;

    let out = assign_atss(&anchors, &[gt], 9)?;
    let st = &out.stats[0];
    println!("AIoUs     {:?}", st.aious);
    println!(
        "mean {:.6}  std {:.6}  threshold {:.7}",
        st.stats.mean_a, st.stats.std_a, st.stats.threshold
    );
    println!("labels    {:?}", out.labels);

    let naive = naive_assign(&anchors, &[gt], 9, NaiveMode::Atss, None)?;
    assert_eq!(naive.labels, out.labels);
    println!("brute-force oracle agrees");

    // Candidate 1 has a mediocre anchor but an excellent prediction; the
    // combined score promotes it over the best-anchored candidate.
    let aious = [0.6, 0.55, 0.5, 0.45, 0.4];
    let pious = [0.5, 0.95, 0.5, 0.5, 0.45];
    let (static_sel, s) = select_positive_candidates(&aious, None, 0.0, 1.0)?;
    let (dyn_sel, d) = select_positive_candidates(&aious, Some(&pious), 1.0, 1.0)?;
    println!("\nanchor-only: threshold {:.6}, positives {static_sel:?}", s.threshold);
    println!(
        "combined:    threshold {:.6} = ({:.3} + {:.3}) + ({:.6} + {:.6}), positives {dyn_sel:?}",
        d.threshold, d.mean_p, d.mean_a, d.std_p, d.std_a
    );
    Ok(())
}
