//! Axis-aligned box arithmetic.
//!
//! Boxes use the corner convention `(x1, y1, x2, y2)` with continuous
//! coordinates, so `area = (x2 - x1) * (y2 - y1)` with no `+1` pixel term.
//! Degenerate boxes cannot be constructed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound applied to `dw`/`dh` before exponentiation in [`decode`].
pub const DELTA_CLAMP: f64 = 4.0;

/// Default strict margin for [`center_inside`], in pixels.
pub const CENTER_MARGIN: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        let finite = [x1, y1, x2, y2].iter().all(|v| v.is_finite());
        if !finite || x2 <= x1 || y2 <= y1 {
            return Err(Error::InvalidBox { x1, y1, x2, y2 });
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    /// Box of the given size centered on `(cx, cy)`.
    pub fn from_center(cx: f64, cy: f64, width: f64, height: f64) -> Result<Self> {
        Self::new(cx - 0.5 * width, cy - 0.5 * height, cx + 0.5 * width, cy + 0.5 * height)
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn y1(&self) -> f64 {
        self.y1
    }

    pub fn x2(&self) -> f64 {
        self.x2
    }

    pub fn y2(&self) -> f64 {
        self.y2
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point {
        Point {
            x: 0.5 * (self.x1 + self.x2),
            y: 0.5 * (self.y1 + self.y2),
        }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        b.to_array()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Regression offsets of a box relative to an anchor.
///
/// `dx`, `dy` are center shifts normalized by the anchor width/height and
/// `dw`, `dh` are log size ratios.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Deltas {
    pub dx: f64,
    pub dy: f64,
    pub dw: f64,
    pub dh: f64,
}

impl Deltas {
    pub fn new(dx: f64, dy: f64, dw: f64, dh: f64) -> Self {
        Self { dx, dy, dw, dh }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.dx, self.dy, self.dw, self.dh]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

pub fn intersection_area(a: &BBox, b: &BBox) -> f64 {
    let w = a.x2.min(b.x2) - a.x1.max(b.x1);
    let h = a.y2.min(b.y2) - a.y1.max(b.y1);
    if w <= 0.0 || h <= 0.0 {
        0.0
    } else {
        w * h
    }
}

/// Intersection over union, in `[0, 1]`.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = intersection_area(a, b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

pub fn center_distance(a: &BBox, b: &BBox) -> f64 {
    a.center().distance(&b.center())
}

/// True iff `p` is farther than `margin` from every side of `gt`.
pub fn center_inside(gt: &BBox, p: Point, margin: f64) -> bool {
    let nearest = (p.x - gt.x1).min(gt.x2 - p.x).min(p.y - gt.y1).min(gt.y2 - p.y);
    nearest > margin
}

pub fn encode(gt: &BBox, anchor: &BBox) -> Deltas {
    let (g, a) = (gt.center(), anchor.center());
    let (aw, ah) = (anchor.width(), anchor.height());
    Deltas {
        dx: (g.x - a.x) / aw,
        dy: (g.y - a.y) / ah,
        dw: (gt.width() / aw).ln(),
        dh: (gt.height() / ah).ln(),
    }
}

/// Inverse of [`encode`]. `dw`/`dh` are clamped to [`DELTA_CLAMP`] first.
///
/// Fails only when the deltas are non-finite.
pub fn decode(d: &Deltas, anchor: &BBox) -> Result<BBox> {
    let a = anchor.center();
    let (aw, ah) = (anchor.width(), anchor.height());
    let cx = a.x + d.dx * aw;
    let cy = a.y + d.dy * ah;
    let w = aw * d.dw.min(DELTA_CLAMP).exp();
    let h = ah * d.dh.min(DELTA_CLAMP).exp();
    BBox::from_center(cx, cy, w, h)
}

/// Greedy non-maximum suppression.
///
/// Returns kept indices in descending score order; equal scores keep the
/// lower index first. A box is suppressed when its IoU with an already kept
/// box exceeds `iou_thr`.
pub fn nms(boxes: &[BBox], scores: &[f64], iou_thr: f64) -> Result<Vec<usize>> {
    if boxes.len() != scores.len() {
        return Err(Error::LengthMismatch {
            what: "scores",
            expected: boxes.len(),
            actual: scores.len(),
        });
    }
    if !(iou_thr > 0.0 && iou_thr < 1.0) {
        return Err(Error::arg("iou_thr", format!("must lie in (0, 1), got {iou_thr}")));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::arg("scores", format!("score {i} is not finite")));
    }

    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));

    let mut keep: Vec<usize> = Vec::new();
    let mut suppressed = vec![false; boxes.len()];
    for (pos, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        keep.push(i);
        for &j in &order[pos + 1..] {
            if !suppressed[j] && iou(&boxes[i], &boxes[j]) > iou_thr {
                suppressed[j] = true;
            }
        }
    }
    Ok(keep)
}
