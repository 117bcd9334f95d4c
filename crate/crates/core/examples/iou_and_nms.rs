//! Box geometry: IoU, delta coding, greedy NMS.
//!
//!     cargo run --example iou_and_nms

use assignkit::geometry::{decode, encode, iou, nms};
use assignkit::BBox;

fn main() -> assignkit::Result<()> {
    let a = BBox::new(0., 0., 2., 2.)?;
    let b = BBox::new(1., 1., 3., 3.)?;
    println!("iou({a:?}, {b:?}) = {:.6}  (1/7)", iou(&a, &b));

    // Regression targets are deltas relative to an anchor; decode inverts encode.
    let anchor = BBox::new(10., 10., 50., 50.)?;
    let gt = BBox::new(14., 8., 58., 44.)?;
    let d = encode(&gt, &anchor);
    let back = decode(&d, &anchor)?;
    println!("encode -> {:?}", d.to_array());
    println!("decode -> {:?}", back.to_array());

    let boxes = [
        BBox::new(0., 0., 10., 10.)?,
        BBox::new(1., 1., 11., 11.)?,
        BBox::new(20., 20., 30., 30.)?,
        BBox::new(0.5, 0., 10.5, 10.)?,
    ];
    let scores = [0.9, 0.8, 0.7, 0.95];
    let keep = nms(&boxes, &scores, 0.5)?;
    println!("nms keeps {keep:?}");
    Ok(())
}
