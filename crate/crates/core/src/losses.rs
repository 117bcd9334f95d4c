//! Classification losses with closed-form derivatives, quality targets and
//! the smooth-L1 regression loss.
//!
//! All probability losses clamp `p` to `[PROB_EPS, 1 - PROB_EPS]` before
//! taking logarithms; derivatives are evaluated at the clamped point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, BBox, Deltas, Point};

pub const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClsLoss {
    Focal,
    Qfl,
    Vfl,
}

impl ClsLoss {
    pub fn name(self) -> &'static str {
        match self {
            ClsLoss::Focal => "focal",
            ClsLoss::Qfl => "qfl",
            ClsLoss::Vfl => "vfl",
        }
    }

    /// Default `alpha`: 0.25 for focal, 0.75 for the VFL negative branch.
    /// QFL does not use it.
    pub fn default_alpha(self) -> f64 {
        match self {
            ClsLoss::Focal | ClsLoss::Qfl => 0.25,
            ClsLoss::Vfl => 0.75,
        }
    }

    /// Focal takes hard targets (`y > 0` is treated as 1); QFL and VFL take
    /// soft targets in `[0, 1]`.
    pub fn eval(self, p: f64, y: f64, params: &LossParams) -> LossEval {
        match self {
            ClsLoss::Focal => focal_loss(p, y > 0.0, params),
            ClsLoss::Qfl => qfl(p, y, params),
            ClsLoss::Vfl => vfl(p, y, params),
        }
    }
}

/// Auxiliary quality head target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityBranch {
    Centerness,
    Iou,
    None,
}

impl QualityBranch {
    pub fn name(self) -> &'static str {
        match self {
            QualityBranch::Centerness => "centerness",
            QualityBranch::Iou => "iou",
            QualityBranch::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    pub alpha: f64,
    pub gamma: f64,
    pub beta: f64,
    pub smooth_l1_beta: f64,
}

impl Default for LossParams {
    fn default() -> Self {
        Self {
            alpha: 0.25,
            gamma: 2.0,
            beta: 2.0,
            smooth_l1_beta: 1.0 / 9.0,
        }
    }
}

impl LossParams {
    pub fn for_loss(loss: ClsLoss) -> Self {
        Self {
            alpha: loss.default_alpha(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("losses.alpha", self.alpha),
            ("losses.gamma", self.gamma),
            ("losses.beta", self.beta),
            ("losses.smooth_l1_beta", self.smooth_l1_beta),
        ];
        for (name, v) in fields {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(name, "must be finite and non-negative"));
            }
        }
        if self.smooth_l1_beta == 0.0 {
            return Err(Error::config("losses.smooth_l1_beta", "must be positive"));
        }
        Ok(())
    }
}

/// A loss value with its derivative in probability and in logit space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossEval {
    pub value: f64,
    pub d_dp: f64,
    pub d_dlogit: f64,
}

impl LossEval {
    fn new(p: f64, value: f64, d_dp: f64) -> Self {
        Self {
            value,
            d_dp,
            d_dlogit: d_dp * p * (1.0 - p),
        }
    }

    pub fn zero() -> Self {
        Self {
            value: 0.0,
            d_dp: 0.0,
            d_dlogit: 0.0,
        }
    }
}

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

// -w * p^g * ln(1 - p) and its derivative; shared by every negative branch.
fn weighted_neg_log(p: f64, weight: f64, exponent: f64) -> (f64, f64) {
    let ln_q = (1.0 - p).ln();
    let pg = p.powf(exponent);
    let dpg = if exponent == 0.0 {
        0.0
    } else {
        exponent * p.powf(exponent - 1.0)
    };
    (-weight * pg * ln_q, -weight * (dpg * ln_q - pg / (1.0 - p)))
}

// Soft cross-entropy -(y ln p + (1 - y) ln(1 - p)) and derivative in p.
fn soft_ce(p: f64, y: f64) -> (f64, f64) {
    let v = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
    let d = -(y / p - (1.0 - y) / (1.0 - p));
    (v.max(0.0), d)
}

pub fn focal_loss(p: f64, positive: bool, params: &LossParams) -> LossEval {
    let p = clamp_prob(p);
    let (a, g) = (params.alpha, params.gamma);
    if positive {
        let q = 1.0 - p;
        let qg = q.powf(g);
        let dqg = if g == 0.0 { 0.0 } else { -g * q.powf(g - 1.0) };
        let ln_p = p.ln();
        let value = -a * qg * ln_p;
        let d_dp = -a * (dqg * ln_p + qg / p);
        LossEval::new(p, value, d_dp)
    } else {
        let (value, d_dp) = weighted_neg_log(p, 1.0 - a, g);
        LossEval::new(p, value, d_dp)
    }
}

/// Quality focal loss; `y` is the soft target (0 for negatives).
pub fn qfl(p: f64, y: f64, params: &LossParams) -> LossEval {
    let p = clamp_prob(p);
    let b = params.beta;
    if y > 0.0 {
        let diff = y - p;
        let m = diff.abs().powf(b);
        // d|y - p|^b / dp = -b |y - p|^(b-1) sign(y - p)
        let dm = if diff == 0.0 || b == 0.0 {
            0.0
        } else {
            -b * diff.abs().powf(b - 1.0) * diff.signum()
        };
        let (ce, dce) = soft_ce(p, y);
        LossEval::new(p, m * ce, dm * ce + m * dce)
    } else {
        let (value, d_dp) = weighted_neg_log(p, 1.0, b);
        LossEval::new(p, value, d_dp)
    }
}

/// Varifocal loss; positives are weighted by their soft target, negatives by
/// `alpha * p^gamma`.
pub fn vfl(p: f64, y: f64, params: &LossParams) -> LossEval {
    let p = clamp_prob(p);
    if y > 0.0 {
        let (ce, dce) = soft_ce(p, y);
        LossEval::new(p, y * ce, y * dce)
    } else {
        let (value, d_dp) = weighted_neg_log(p, params.alpha, params.gamma);
        LossEval::new(p, value, d_dp)
    }
}

/// Plain binary cross-entropy with a soft target, used by the quality head.
pub fn binary_cross_entropy(p: f64, y: f64) -> LossEval {
    let p = clamp_prob(p);
    let (value, d_dp) = soft_ce(p, y);
    LossEval::new(p, value, d_dp)
}

/// FCOS-style centerness of a point inside `gt`.
pub fn centerness_target(anchor_center: Point, gt: &BBox) -> Result<f64> {
    let l = anchor_center.x - gt.x1();
    let r = gt.x2() - anchor_center.x;
    let t = anchor_center.y - gt.y1();
    let b = gt.y2() - anchor_center.y;
    if l <= 0.0 || r <= 0.0 || t <= 0.0 || b <= 0.0 {
        return Err(Error::arg(
            "anchor_center",
            format!(
                "({}, {}) is not inside the ground truth",
                anchor_center.x, anchor_center.y
            ),
        ));
    }
    Ok(((l.min(r) / l.max(r)) * (t.min(b) / t.max(b))).sqrt())
}

pub fn iou_target(pred: &BBox, gt: &BBox) -> f64 {
    iou(pred, gt)
}

/// Smooth-L1 summed over the four delta components, with its gradient
/// with respect to `pred`.
pub fn smooth_l1(pred: &Deltas, target: &Deltas, beta: f64) -> (f64, Deltas) {
    let p = pred.to_array();
    let t = target.to_array();
    let mut value = 0.0;
    let mut grad = [0.0; 4];
    for i in 0..4 {
        let d = p[i] - t[i];
        if d.abs() < beta {
            value += 0.5 * d * d / beta;
            grad[i] = d / beta;
        } else {
            value += d.abs() - 0.5 * beta;
            grad[i] = d.signum();
        }
    }
    (value, Deltas::from_array(grad))
}
