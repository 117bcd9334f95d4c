//! Positive/negative label assignment for anchors.
//!
//! Three strategies share one [`Assignment`] output:
//!
//! * [`assign_fixed`]: max-IoU matching against fixed positive/negative
//!   thresholds, with an ignore band in between.
//! * [`assign_atss`]: adaptive training sample selection. Per ground truth,
//!   the `k` anchors nearest to its center are taken from every pyramid
//!   level, their anchor IoUs are thresholded at `mean + std`, and the
//!   survivors must have their center strictly inside the box.
//! * [`assign_dynamic_atss`]: the same procedure scored by combined IoUs,
//!   `w_p * piou + w_a * aiou`, where `piou` is the IoU of the anchor's
//!   decoded prediction with the ground truth. The threshold statistics are
//!   computed for each component separately and then summed:
//!   `mean_c = w_p * mean_p + w_a * mean_a`, `std_c = w_p * std_p + w_a * std_a`.
//!   Note that `std_c` is *not* the standard deviation of the combined scores.
//!
//! Standard deviations use the sample (`n - 1`) divisor, with zero for a
//! single value.

use serde::{Deserialize, Serialize};

use crate::anchors::AnchorSet;
use crate::error::{Error, Result};
use crate::geometry::{center_distance, center_inside, iou, BBox, CENTER_MARGIN};

pub const DEFAULT_K: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignerKind {
    Fixed,
    Atss,
    DynamicAtss,
}

/// Weight schedule applied to the PIoU or AIoU term over training.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    #[default]
    Constant,
    DUp,
    DDown,
}

impl Schedule {
    pub fn name(self) -> &'static str {
        match self {
            Schedule::Constant => "constant",
            Schedule::DUp => "d_up",
            Schedule::DDown => "d_down",
        }
    }
}

/// `constant -> 1`, `d_up -> iteration / max_iter`, `d_down -> 1 - iteration / max_iter`.
pub fn schedule_weight(kind: Schedule, iteration: u64, max_iter: u64) -> f64 {
    let max_iter = max_iter.max(1);
    let progress = (iteration.min(max_iter)) as f64 / max_iter as f64;
    match kind {
        Schedule::Constant => 1.0,
        Schedule::DUp => progress,
        Schedule::DDown => 1.0 - progress,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssignerConfig {
    pub kind: AssignerKind,
    /// Candidates taken per pyramid level.
    pub k: usize,
    pub pos_thr: f64,
    pub neg_thr: f64,
    pub w_p: f64,
    pub w_a: f64,
    pub schedule_p: Schedule,
    pub schedule_a: Schedule,
}

impl Default for AssignerConfig {
    fn default() -> Self {
        Self {
            kind: AssignerKind::Atss,
            k: DEFAULT_K,
            pos_thr: 0.5,
            neg_thr: 0.4,
            w_p: 1.0,
            w_a: 1.0,
            schedule_p: Schedule::Constant,
            schedule_a: Schedule::Constant,
        }
    }
}

impl AssignerConfig {
    pub fn fixed(pos_thr: f64, neg_thr: f64) -> Self {
        Self {
            kind: AssignerKind::Fixed,
            pos_thr,
            neg_thr,
            ..Self::default()
        }
    }

    pub fn atss(k: usize) -> Self {
        Self {
            kind: AssignerKind::Atss,
            k,
            ..Self::default()
        }
    }

    pub fn dynamic(k: usize, w_p: f64, w_a: f64) -> Self {
        Self {
            kind: AssignerKind::DynamicAtss,
            k,
            w_p,
            w_a,
            ..Self::default()
        }
    }

    /// RetinaNet-style thresholds (0.5 / 0.4).
    pub fn retinanet() -> Self {
        Self::fixed(0.5, 0.4)
    }

    /// RPN-style thresholds (0.7 / 0.3).
    pub fn rpn() -> Self {
        Self::fixed(0.7, 0.3)
    }

    /// SSD-style single threshold (0.5).
    pub fn ssd() -> Self {
        Self::fixed(0.5, 0.5)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("assigner.k", "must be at least 1"));
        }
        if self.kind == AssignerKind::Fixed
            && !(0.0 <= self.neg_thr && self.neg_thr <= self.pos_thr && self.pos_thr <= 1.0)
        {
            return Err(Error::config(
                "assigner.pos_thr",
                format!(
                    "need 0 <= neg_thr <= pos_thr <= 1, got neg_thr={} pos_thr={}",
                    self.neg_thr, self.pos_thr
                ),
            ));
        }
        for (field, w) in [("assigner.w_p", self.w_p), ("assigner.w_a", self.w_a)] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::config(field, "must be finite and non-negative"));
            }
        }
        if self.w_p == 0.0 && self.w_a == 0.0 {
            return Err(Error::config("assigner.w_p", "w_p and w_a cannot both be zero"));
        }
        Ok(())
    }

    /// Weights `(w_p, w_a)` after applying the schedules at `iteration`.
    pub fn effective_weights(&self, iteration: u64, max_iter: u64) -> (f64, f64) {
        (
            self.w_p * schedule_weight(self.schedule_p, iteration, max_iter),
            self.w_a * schedule_weight(self.schedule_a, iteration, max_iter),
        )
    }
}

/// Per-anchor label.
///
/// Serialized as an integer: the ground-truth index for positives, `-1`
/// for negatives and `-2` for ignored anchors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Label {
    Positive(usize),
    Negative,
    Ignore,
}

impl Label {
    pub fn gt(self) -> Option<usize> {
        match self {
            Label::Positive(g) => Some(g),
            _ => None,
        }
    }

    pub fn is_positive(self) -> bool {
        matches!(self, Label::Positive(_))
    }
}

impl From<Label> for i64 {
    fn from(l: Label) -> i64 {
        match l {
            Label::Positive(g) => g as i64,
            Label::Negative => -1,
            Label::Ignore => -2,
        }
    }
}

impl TryFrom<i64> for Label {
    type Error = String;

    fn try_from(v: i64) -> std::result::Result<Self, String> {
        match v {
            -1 => Ok(Label::Negative),
            -2 => Ok(Label::Ignore),
            g if g >= 0 => Ok(Label::Positive(g as usize)),
            other => Err(format!("invalid label {other}")),
        }
    }
}

/// Mean/std of each component and the resulting threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ThresholdStats {
    pub w_p: f64,
    pub w_a: f64,
    pub mean_a: f64,
    pub std_a: f64,
    pub mean_p: f64,
    pub std_p: f64,
    pub mean_c: f64,
    pub std_c: f64,
    pub threshold: f64,
}

/// Diagnostics of one ground truth's candidate selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateStats {
    pub gt_index: usize,
    /// Global anchor indices, level-ordered, nearest first within a level.
    pub candidates: Vec<usize>,
    pub aious: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pious: Option<Vec<f64>>,
    /// Positions into `candidates` that reached the threshold, before the
    /// center-inside filter and conflict resolution.
    pub selected: Vec<usize>,
    #[serde(flatten)]
    pub stats: ThresholdStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub kind: AssignerKind,
    pub labels: Vec<Label>,
    /// One entry per ground truth for the ATSS kinds; empty for `fixed`.
    pub stats: Vec<CandidateStats>,
    pub num_pos: Vec<usize>,
}

impl Assignment {
    fn all_negative(kind: AssignerKind, num_anchors: usize, num_gts: usize) -> Self {
        Self {
            kind,
            labels: vec![Label::Negative; num_anchors],
            stats: Vec::new(),
            num_pos: vec![0; num_gts],
        }
    }

    pub fn total_pos(&self) -> usize {
        self.num_pos.iter().sum()
    }

    pub fn positives(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(a, l)| l.gt().map(|g| (a, g)))
    }

    pub fn mean_threshold(&self) -> Option<f64> {
        if self.stats.is_empty() {
            return None;
        }
        Some(self.stats.iter().map(|s| s.stats.threshold).sum::<f64>() / self.stats.len() as f64)
    }

    /// Checks the structural invariants against the inputs that produced it.
    pub fn check(&self, anchors: &AnchorSet, gts: &[BBox]) -> Result<()> {
        if self.labels.len() != anchors.len() || self.num_pos.len() != gts.len() {
            return Err(Error::Invariant("assignment dimensions do not match inputs".into()));
        }
        let mut counts = vec![0usize; gts.len()];
        for (a, label) in self.labels.iter().enumerate() {
            match *label {
                Label::Positive(g) => {
                    let gt = gts
                        .get(g)
                        .ok_or_else(|| Error::Invariant(format!("anchor {a} points at gt {g}")))?;
                    if self.kind != AssignerKind::Fixed && !center_inside(gt, anchors.centers()[a], CENTER_MARGIN) {
                        return Err(Error::Invariant(format!(
                            "positive anchor {a} has its center outside gt {g}"
                        )));
                    }
                    counts[g] += 1;
                }
                Label::Ignore if self.kind != AssignerKind::Fixed => {
                    return Err(Error::Invariant(format!("anchor {a} ignored by {:?}", self.kind)));
                }
                _ => {}
            }
        }
        if counts != self.num_pos {
            return Err(Error::Invariant("num_pos disagrees with labels".into()));
        }
        Ok(())
    }
}

/// Mean and sample standard deviation (`n - 1` divisor, 0 for one value).
pub fn candidate_stats(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::arg("values", "cannot compute statistics of an empty list"));
    }
    let n = values.len() as f64;
    let mut mean = values.iter().sum::<f64>() / n;
    // One refinement pass. Without it a run of identical IoUs (a small GT
    // inside several large anchors) can get a mean a few ulps above the
    // common value, a positive std, and hence no positives at all.
    mean += values.iter().map(|v| v - mean).sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok((mean, (ss / (n - 1.0)).sqrt()))
}

/// The `k` anchors nearest to the center of `gt` on every level.
///
/// Distance ties go to the lower anchor index. Levels with fewer than `k`
/// anchors contribute all of them.
pub fn select_candidates(anchors: &AnchorSet, gt: &BBox, k: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(k * anchors.levels().len());
    let boxes = anchors.boxes();
    let mut scratch: Vec<(f64, usize)> = Vec::new();
    for level in anchors.levels() {
        scratch.clear();
        scratch.extend(level.range.clone().map(|i| (center_distance(&boxes[i], gt), i)));
        let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        let take = k.min(scratch.len());
        if take < scratch.len() {
            scratch.select_nth_unstable_by(take - 1, by_distance);
            scratch.truncate(take);
        }
        scratch.sort_unstable_by(by_distance);
        out.extend(scratch.iter().map(|&(_, i)| i));
    }
    out
}

/// Thresholds candidate scores at `mean_c + std_c`.
///
/// Returns the positions `i` with `w_p * pious[i] + w_a * aious[i] >= threshold`
/// (possibly none) together with the statistics.
pub fn select_positive_candidates(
    aious: &[f64],
    pious: Option<&[f64]>,
    w_p: f64,
    w_a: f64,
) -> Result<(Vec<usize>, ThresholdStats)> {
    let (mean_a, std_a) = candidate_stats(aious)?;
    let (mean_p, std_p) = match pious {
        Some(p) => {
            if p.len() != aious.len() {
                return Err(Error::LengthMismatch {
                    what: "pious",
                    expected: aious.len(),
                    actual: p.len(),
                });
            }
            candidate_stats(p)?
        }
        None if w_p != 0.0 => {
            return Err(Error::arg("w_p", "must be zero when no predicted IoUs are given"));
        }
        None => (0.0, 0.0),
    };

    let mean_c = w_p * mean_p + w_a * mean_a;
    let std_c = w_p * std_p + w_a * std_a;
    let threshold = mean_c + std_c;

    let score = |i: usize| match pious {
        Some(p) => w_p * p[i] + w_a * aious[i],
        None => w_a * aious[i],
    };
    let selected = (0..aious.len()).filter(|&i| score(i) >= threshold).collect();

    Ok((
        selected,
        ThresholdStats {
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
    ))
}

pub fn assign_fixed(anchors: &AnchorSet, gts: &[BBox], pos_thr: f64, neg_thr: f64) -> Result<Assignment> {
    AssignerConfig::fixed(pos_thr, neg_thr).validate()?;
    let mut out = Assignment::all_negative(AssignerKind::Fixed, anchors.len(), gts.len());
    if gts.is_empty() {
        return Ok(out);
    }
    for (a, abox) in anchors.boxes().iter().enumerate() {
        let (best_gt, best) = gts
            .iter()
            .enumerate()
            .map(|(g, gt)| (g, iou(abox, gt)))
            .fold((0, f64::NEG_INFINITY), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        out.labels[a] = if best >= pos_thr {
            out.num_pos[best_gt] += 1;
            Label::Positive(best_gt)
        } else if best < neg_thr {
            Label::Negative
        } else {
            Label::Ignore
        };
    }
    Ok(out)
}

pub fn assign_atss(anchors: &AnchorSet, gts: &[BBox], k: usize) -> Result<Assignment> {
    run_atss(anchors, gts, k, None, 0.0, 1.0)
}

pub fn assign_dynamic_atss(
    anchors: &AnchorSet,
    predicted_boxes: &[BBox],
    gts: &[BBox],
    config: &AssignerConfig,
    iteration: u64,
    max_iter: u64,
) -> Result<Assignment> {
    config.validate()?;
    if predicted_boxes.len() != anchors.len() {
        return Err(Error::LengthMismatch {
            what: "predicted_boxes",
            expected: anchors.len(),
            actual: predicted_boxes.len(),
        });
    }
    if iteration > max_iter {
        return Err(Error::arg(
            "iteration",
            format!("iteration {iteration} exceeds max_iter {max_iter}"),
        ));
    }
    let (w_p, w_a) = config.effective_weights(iteration, max_iter);
    let mut out = run_atss(anchors, gts, config.k, Some(predicted_boxes), w_p, w_a)?;
    out.kind = AssignerKind::DynamicAtss;
    Ok(out)
}

fn run_atss(
    anchors: &AnchorSet,
    gts: &[BBox],
    k: usize,
    predicted: Option<&[BBox]>,
    w_p: f64,
    w_a: f64,
) -> Result<Assignment> {
    if k == 0 {
        return Err(Error::arg("k", "must be at least 1"));
    }
    let kind = if predicted.is_some() {
        AssignerKind::DynamicAtss
    } else {
        AssignerKind::Atss
    };
    let mut out = Assignment::all_negative(kind, anchors.len(), gts.len());
    if gts.is_empty() {
        return Ok(out);
    }
    if anchors.is_empty() {
        return Err(Error::arg("anchors", "anchor set is empty"));
    }

    // best claim per anchor: (score, gt)
    let mut claims: Vec<Option<(f64, usize)>> = vec![None; anchors.len()];
    let boxes = anchors.boxes();
    let centers = anchors.centers();

    for (g, gt) in gts.iter().enumerate() {
        let candidates = select_candidates(anchors, gt, k);
        let aious: Vec<f64> = candidates.iter().map(|&i| iou(&boxes[i], gt)).collect();
        let pious: Option<Vec<f64>> = predicted.map(|p| candidates.iter().map(|&i| iou(&p[i], gt)).collect());
        let (selected, stats) = select_positive_candidates(&aious, pious.as_deref(), w_p, w_a)?;

        for &pos in &selected {
            let anchor = candidates[pos];
            if !center_inside(gt, centers[anchor], CENTER_MARGIN) {
                continue;
            }
            let score = match &pious {
                Some(p) => w_p * p[pos] + w_a * aious[pos],
                None => aious[pos],
            };
            match claims[anchor] {
                Some((best, _)) if best >= score => {}
                _ => claims[anchor] = Some((score, g)),
            }
        }

        out.stats.push(CandidateStats {
            gt_index: g,
            candidates,
            aious,
            pious,
            selected,
            stats,
        });
    }

    for (a, claim) in claims.into_iter().enumerate() {
        if let Some((_, g)) = claim {
            out.labels[a] = Label::Positive(g);
            out.num_pos[g] += 1;
        }
    }
    Ok(out)
}

/// Dispatches on [`AssignerConfig::kind`].
///
/// `predicted_boxes` is required for the dynamic kind and ignored otherwise.
pub fn assign(
    config: &AssignerConfig,
    anchors: &AnchorSet,
    gts: &[BBox],
    predicted_boxes: Option<&[BBox]>,
    iteration: u64,
    max_iter: u64,
) -> Result<Assignment> {
    config.validate()?;
    match config.kind {
        AssignerKind::Fixed => assign_fixed(anchors, gts, config.pos_thr, config.neg_thr),
        AssignerKind::Atss => assign_atss(anchors, gts, config.k),
        AssignerKind::DynamicAtss => {
            let predicted = match predicted_boxes {
                Some(p) => p,
                None => anchors.boxes(),
            };
            assign_dynamic_atss(anchors, predicted, gts, config, iteration, max_iter)
        }
    }
}
