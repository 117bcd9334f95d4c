//! Brute-force reference implementations.
//!
//! These deliberately avoid the optimized code paths in [`crate::geometry`],
//! [`crate::assignment`] and [`crate::losses`] so they can be used to check
//! them. They are slow; use them in tests and diagnostics only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::anchors::{generate_anchors, AnchorConfig, AnchorSet};
use crate::assignment::{AssignerKind, Assignment, CandidateStats, Label, ThresholdStats};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::losses::{ClsLoss, LossParams};

/// IoU by counting unit cells. Corners must be integers in `[0, 256]`.
pub fn rasterized_iou(a: &BBox, b: &BBox) -> Result<f64> {
    let ca = integer_corners(a)?;
    let cb = integer_corners(b)?;
    let lo_x = ca[0].min(cb[0]);
    let lo_y = ca[1].min(cb[1]);
    let hi_x = ca[2].max(cb[2]);
    let hi_y = ca[3].max(cb[3]);

    let covers = |c: &[i64; 4], x: i64, y: i64| x >= c[0] && x < c[2] && y >= c[1] && y < c[3];
    let (mut inter, mut union) = (0u64, 0u64);
    for y in lo_y..hi_y {
        for x in lo_x..hi_x {
            let (in_a, in_b) = (covers(&ca, x, y), covers(&cb, x, y));
            if in_a && in_b {
                inter += 1;
            }
            if in_a || in_b {
                union += 1;
            }
        }
    }
    Ok(inter as f64 / union as f64)
}

fn integer_corners(b: &BBox) -> Result<[i64; 4]> {
    let mut out = [0i64; 4];
    for (slot, v) in out.iter_mut().zip(b.to_array()) {
        if v.fract() != 0.0 || !(0.0..=256.0).contains(&v) {
            return Err(Error::arg("box", format!("corner {v} is not an integer in [0, 256]")));
        }
        *slot = v as i64;
    }
    Ok(out)
}

/// Which score the naive assigner thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NaiveMode {
    /// Anchor IoUs only.
    Atss,
    /// `w_p * predicted IoU + w_a * anchor IoU`.
    Dynamic { w_p: f64, w_a: f64 },
}

fn overlap(a: &BBox, b: &BBox) -> f64 {
    let left = if a.x1() > b.x1() { a.x1() } else { b.x1() };
    let right = if a.x2() < b.x2() { a.x2() } else { b.x2() };
    let top = if a.y1() > b.y1() { a.y1() } else { b.y1() };
    let bottom = if a.y2() < b.y2() { a.y2() } else { b.y2() };
    if right <= left || bottom <= top {
        return 0.0;
    }
    let inter = (right - left) * (bottom - top);
    let area_a = (a.x2() - a.x1()) * (a.y2() - a.y1());
    let area_b = (b.x2() - b.x1()) * (b.y2() - b.y1());
    let v = inter / (area_a + area_b - inter);
    if v > 1.0 {
        1.0
    } else {
        v
    }
}

fn mean_and_sample_std(xs: &[f64]) -> (f64, f64) {
    // Constant input: exactly (x, 0), as the definitions demand.
    if xs.iter().all(|x| *x == xs[0]) {
        return (xs[0], 0.0);
    }
    let mut total = 0.0;
    for x in xs {
        total += x;
    }
    let mean = total / xs.len() as f64;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let mut sq = 0.0;
    for x in xs {
        sq += (x - mean) * (x - mean);
    }
    (mean, (sq / (xs.len() as f64 - 1.0)).sqrt())
}

/// The five ATSS steps, transcribed literally, with the combined-IoU
/// scoring for [`NaiveMode::Dynamic`].
pub fn naive_assign(
    anchors: &AnchorSet,
    gts: &[BBox],
    k: usize,
    mode: NaiveMode,
    predicted_boxes: Option<&[BBox]>,
) -> Result<Assignment> {
    if k == 0 {
        return Err(Error::arg("k", "must be at least 1"));
    }
    let n = anchors.len();
    let (kind, w_p, w_a, preds) = match mode {
        NaiveMode::Atss => (AssignerKind::Atss, 0.0, 1.0, None),
        NaiveMode::Dynamic { w_p, w_a } => {
            let p = predicted_boxes.ok_or_else(|| Error::arg("predicted_boxes", "required in dynamic mode"))?;
            if p.len() != n {
                return Err(Error::LengthMismatch {
                    what: "predicted_boxes",
                    expected: n,
                    actual: p.len(),
                });
            }
            (AssignerKind::DynamicAtss, w_p, w_a, Some(p))
        }
    };

    let mut labels = vec![Label::Negative; n];
    let mut stats = Vec::new();
    let mut num_pos = vec![0usize; gts.len()];
    if gts.is_empty() {
        return Ok(Assignment {
            kind,
            labels,
            stats,
            num_pos,
        });
    }

    let boxes = anchors.boxes();
    // final positives per gt with their scores
    let mut finals: Vec<Vec<(usize, f64)>> = Vec::new();

    for (g, gt) in gts.iter().enumerate() {
        let gcx = (gt.x1() + gt.x2()) / 2.0;
        let gcy = (gt.y1() + gt.y2()) / 2.0;

        // step 1: distances from every anchor center to the gt center
        let mut dist = vec![0.0; n];
        for (i, a) in boxes.iter().enumerate() {
            let dx = (a.x1() + a.x2()) / 2.0 - gcx;
            let dy = (a.y1() + a.y2()) / 2.0 - gcy;
            dist[i] = (dx * dx + dy * dy).sqrt();
        }

        // step 2: k nearest on each level
        let mut candidates = Vec::new();
        for level in anchors.levels() {
            let mut idx: Vec<usize> = level.range.clone().collect();
            idx.sort_by(|&i, &j| dist[i].partial_cmp(&dist[j]).unwrap().then(i.cmp(&j)));
            for &i in idx.iter().take(k) {
                candidates.push(i);
            }
        }

        // step 3: IoUs and their statistics
        let mut aious = Vec::new();
        for &i in &candidates {
            aious.push(overlap(&boxes[i], gt));
        }
        let (mean_a, std_a) = mean_and_sample_std(&aious);
        let mut pious = None;
        let (mut mean_p, mut std_p) = (0.0, 0.0);
        if let Some(p) = preds {
            let mut v = Vec::new();
            for &i in &candidates {
                v.push(overlap(&p[i], gt));
            }
            let (m, s) = mean_and_sample_std(&v);
            mean_p = m;
            std_p = s;
            pious = Some(v);
        }

        // step 4: threshold at mean + std
        let mean_c = w_p * mean_p + w_a * mean_a;
        let std_c = w_p * std_p + w_a * std_a;
        let threshold = mean_c + std_c;
        let mut selected = Vec::new();
        let mut keep = Vec::new();
        for pos in 0..candidates.len() {
            let score = match &pious {
                Some(p) => w_p * p[pos] + w_a * aious[pos],
                None => w_a * aious[pos],
            };
            if score >= threshold {
                selected.push(pos);
                // step 5: center strictly inside the gt, 0.01 px margin
                let a = &boxes[candidates[pos]];
                let cx = (a.x1() + a.x2()) / 2.0;
                let cy = (a.y1() + a.y2()) / 2.0;
                let inside = cx - gt.x1() > 0.01 && gt.x2() - cx > 0.01 && cy - gt.y1() > 0.01 && gt.y2() - cy > 0.01;
                if inside {
                    let rank = match &pious {
                        Some(_) => score,
                        None => aious[pos],
                    };
                    keep.push((candidates[pos], rank));
                }
            }
        }
        finals.push(keep);
        stats.push(CandidateStats {
            gt_index: g,
            candidates,
            aious,
            pious,
            selected,
            stats: ThresholdStats {
                w_p,
                w_a,
                mean_a,
                std_a,
                mean_p,
                std_p,
                mean_c,
                std_c,
                threshold,
            },
        });
    }

    // anchors claimed by several gts go to the best score, then the lower index
    #[allow(clippy::needless_range_loop)]
    for a in 0..n {
        let mut best: Option<(f64, usize)> = None;
        for (g, keep) in finals.iter().enumerate() {
            for &(i, score) in keep {
                if i == a {
                    let better = match best {
                        None => true,
                        Some((s, _)) => score > s,
                    };
                    if better {
                        best = Some((score, g));
                    }
                }
            }
        }
        if let Some((_, g)) = best {
            labels[a] = Label::Positive(g);
            num_pos[g] += 1;
        }
    }

    Ok(Assignment {
        kind,
        labels,
        stats,
        num_pos,
    })
}

/// A random two-level assignment problem.
#[derive(Debug, Clone)]
pub struct AssignmentCase {
    pub anchors: AnchorSet,
    pub gts: Vec<BBox>,
    /// Anchors perturbed by random deltas, aligned with `anchors`.
    pub predicted: Vec<BBox>,
}

/// Seeded scene with at most 500 anchors (strides 8 and 16) and up to 10
/// ground truths.
pub fn random_case(seed: u64) -> AssignmentCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = 8 * rng.gen_range(2..=20u32);
    let h = 8 * rng.gen_range(2..=20u32);
    let config = AnchorConfig {
        strides: vec![8, 16],
        scale: rng.gen_range(2.0..8.0),
        ratios: vec![1.0],
    };
    let anchors = generate_anchors(&config, w, h).expect("valid anchor config");
    let (wf, hf) = (f64::from(w), f64::from(h));

    let num_gts = rng.gen_range(0..=10);
    let gts = (0..num_gts)
        .map(|_| {
            let bw = rng.gen_range(4.0..=wf);
            let bh = rng.gen_range(4.0..=hf);
            let x1 = rng.gen_range(0.0..=wf - bw);
            let y1 = rng.gen_range(0.0..=hf - bh);
            BBox::new(x1, y1, x1 + bw, y1 + bh).expect("positive extent")
        })
        .collect();

    let predicted = anchors
        .boxes()
        .iter()
        .map(|a| {
            let (cx, cy) = ((a.x1() + a.x2()) / 2.0, (a.y1() + a.y2()) / 2.0);
            let (aw, ah) = (a.x2() - a.x1(), a.y2() - a.y1());
            let pw = aw * rng.gen_range(-0.7f64..0.7).exp();
            let ph = ah * rng.gen_range(-0.7f64..0.7).exp();
            let px = cx + aw * rng.gen_range(-0.3..0.3);
            let py = cy + ah * rng.gen_range(-0.3..0.3);
            BBox::new(px - pw / 2.0, py - ph / 2.0, px + pw / 2.0, py + ph / 2.0).expect("positive extent")
        })
        .collect();

    AssignmentCase {
        anchors,
        gts,
        predicted,
    }
}

/// Central difference `(f(x + h) - f(x - h)) / 2h`.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Finite-difference estimate of `d loss / dp` at `(p, y)`.
pub fn finite_diff(loss: ClsLoss, p: f64, y: f64, params: &LossParams, h: f64) -> Result<f64> {
    if !(p - h > 0.0 && p + h < 1.0) {
        return Err(Error::arg(
            "p",
            format!("p +/- h must stay inside (0, 1), got p={p} h={h}"),
        ));
    }
    Ok(central_difference(|q| loss.eval(q, y, params).value, p, h))
}
