//! Feature-pyramid anchor layout and flat indexing.
//!
//!     cargo run --example anchor_grid

use assignkit::{generate_anchors, AnchorConfig};

fn main() -> assignkit::Result<()> {
    let cfg = AnchorConfig {
        strides: vec![8, 16],
        scale: 8.0,
        ratios: vec![0.5, 1.0, 2.0],
    };
    let set = generate_anchors(&cfg, 64, 48)?;
    println!("{} anchors", set.len());
    for lvl in set.levels() {
        println!(
            "stride {:>3}: grid {}x{}, indices {:?}",
            lvl.stride, lvl.grid_width, lvl.grid_height, lvl.range
        );
    }

    // (level, col, row, ratio) <-> flat index
    let idx = set.flat_index(1, 2, 1, 2).expect("in range");
    let b = set.boxes()[idx];
    println!(
        "level 1, col 2, row 1, ratio 2.0 -> #{idx}: {:?} ({}x{}), center {:?}",
        b.to_array(),
        b.width(),
        b.height(),
        set.centers()[idx]
    );
    assert_eq!(set.locate(idx), Some((1, 2, 1, 2)));
    Ok(())
}
