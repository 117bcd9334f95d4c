use serde::{Deserialize, Serialize};

use crate::anchors::{generate_anchors, AnchorSet};
use crate::assignment::{assign, AssignerConfig, AssignerKind, Assignment, Label};
use crate::config::{ExperimentConfig, LossConfig};
use crate::error::{Error, Result};
use crate::geometry::{decode, encode, iou, BBox, Deltas};
use crate::losses::{binary_cross_entropy, centerness_target, sigmoid, smooth_l1, QualityBranch};

use super::scene::{generate_scenes, scene_hash, GroundTruth};

pub const INIT_CLASS_LOGIT: f64 = -4.0;

/// Tabular per-anchor parameters standing in for a detection head.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub deltas: Vec<Deltas>,
    /// Anchor-major, `num_classes` logits per anchor.
    pub class_logits: Vec<f64>,
    pub quality_logits: Vec<f64>,
    pub num_classes: usize,
    pub iteration: u64,
    pub max_iter: u64,
    pub learning_rate: f64,
}

impl SimState {
    pub fn new(num_anchors: usize, num_classes: usize, max_iter: u64, learning_rate: f64) -> Self {
        Self {
            deltas: vec![Deltas::default(); num_anchors],
            class_logits: vec![INIT_CLASS_LOGIT; num_anchors * num_classes],
            quality_logits: vec![0.0; num_anchors],
            num_classes,
            iteration: 0,
            max_iter,
            learning_rate,
        }
    }

    pub fn num_anchors(&self) -> usize {
        self.deltas.len()
    }

    /// Boxes decoded from the current deltas.
    pub fn predicted_boxes(&self, anchors: &AnchorSet) -> Result<Vec<BBox>> {
        self.deltas
            .iter()
            .zip(anchors.boxes())
            .enumerate()
            .map(|(i, (d, a))| {
                decode(d, a).map_err(|_| Error::NonFinite {
                    what: "deltas",
                    anchor: i,
                })
            })
            .collect()
    }
}

/// One row of the metrics time series.
///
/// Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub iteration: u64,
    pub total_loss: f64,
    pub cls_loss: f64,
    pub reg_loss: f64,
    pub quality_loss: f64,
    pub num_pos: usize,
    pub mean_pos_pred_iou: f64,
    pub churn: f64,
    pub mean_threshold: f64,
}

pub const METRICS_HEADER: &str =
    "iteration,total_loss,cls_loss,reg_loss,quality_loss,num_pos,mean_pos_pred_iou,churn,mean_threshold";

/// Runs one assignment + loss + gradient-descent step on `scene`.
///
/// `previous` holds the labels this scene received the last time it was
/// visited; churn is measured against it and is 0 when absent.
pub fn train_step(
    state: &mut SimState,
    scene: &[GroundTruth],
    anchors: &AnchorSet,
    assigner: &AssignerConfig,
    losses: &LossConfig,
    previous: Option<&[Label]>,
) -> Result<(MetricsRecord, Assignment)> {
    let n = anchors.len();
    if state.num_anchors() != n {
        return Err(Error::LengthMismatch {
            what: "sim state anchors",
            expected: n,
            actual: state.num_anchors(),
        });
    }
    if let Some(gt) = scene.iter().find(|g| g.class_id >= state.num_classes) {
        return Err(Error::arg(
            "scene",
            format!("class {} exceeds num_classes {}", gt.class_id, state.num_classes),
        ));
    }
    let params = losses.params();
    let gts: Vec<BBox> = scene.iter().map(|g| g.bbox).collect();

    let predicted = state.predicted_boxes(anchors)?;
    let iteration = state.iteration.min(state.max_iter);
    let assignment = assign(assigner, anchors, &gts, Some(&predicted), iteration, state.max_iter)?;

    // soft targets / predicted IoUs of positives, before the update
    let mut pos_iou = vec![0.0; n];
    let mut iou_sum = 0.0;
    for (a, g) in assignment.positives() {
        pos_iou[a] = iou(&predicted[a], &gts[g]);
        iou_sum += pos_iou[a];
    }
    let num_pos = assignment.total_pos();
    let norm = num_pos.max(1) as f64;
    let step = state.learning_rate / norm;

    let (mut cls_sum, mut reg_sum, mut quality_sum) = (0.0, 0.0, 0.0);
    let c = state.num_classes;
    #[allow(clippy::needless_range_loop)]
    for a in 0..n {
        let label = assignment.labels[a];
        if label == Label::Ignore {
            continue;
        }
        let positive = label.gt();

        for k in 0..c {
            let idx = a * c + k;
            let y = match positive {
                Some(g) if scene[g].class_id == k => match losses.cls_loss {
                    crate::losses::ClsLoss::Focal => 1.0,
                    _ => pos_iou[a],
                },
                _ => 0.0,
            };
            let eval = losses.cls_loss.eval(sigmoid(state.class_logits[idx]), y, &params);
            cls_sum += eval.value;
            state.class_logits[idx] -= step * eval.d_dlogit;
            if !state.class_logits[idx].is_finite() {
                return Err(Error::NonFinite {
                    what: "class logit",
                    anchor: a,
                });
            }
        }

        let Some(g) = positive else { continue };
        let target = encode(&gts[g], &anchors.boxes()[a]);
        let (value, grad) = smooth_l1(&state.deltas[a], &target, params.smooth_l1_beta);
        reg_sum += value;
        let d = &mut state.deltas[a];
        d.dx -= step * grad.dx;
        d.dy -= step * grad.dy;
        d.dw -= step * grad.dw;
        d.dh -= step * grad.dh;
        if !d.is_finite() {
            return Err(Error::NonFinite {
                what: "deltas",
                anchor: a,
            });
        }

        let quality_target = match losses.quality_branch {
            QualityBranch::None => None,
            QualityBranch::Centerness => Some(centerness_target(anchors.centers()[a], &gts[g])?),
            QualityBranch::Iou => Some(pos_iou[a]),
        };
        if let Some(t) = quality_target {
            let eval = binary_cross_entropy(sigmoid(state.quality_logits[a]), t);
            quality_sum += eval.value;
            state.quality_logits[a] -= step * eval.d_dlogit;
            if !state.quality_logits[a].is_finite() {
                return Err(Error::NonFinite {
                    what: "quality logit",
                    anchor: a,
                });
            }
        }
    }

    let churn = match previous {
        Some(prev) if prev.len() == n => {
            prev.iter().zip(&assignment.labels).filter(|(p, q)| p != q).count() as f64 / n as f64
        }
        _ => 0.0,
    };
    let mean_threshold = match assignment.mean_threshold() {
        Some(t) => t,
        None if assigner.kind == AssignerKind::Fixed && !gts.is_empty() => assigner.pos_thr,
        None => 0.0,
    };

    let (cls_loss, reg_loss, quality_loss) = (cls_sum / norm, reg_sum / norm, quality_sum / norm);
    let record = MetricsRecord {
        iteration: state.iteration,
        total_loss: cls_loss + reg_loss + quality_loss,
        cls_loss,
        reg_loss,
        quality_loss,
        num_pos,
        mean_pos_pred_iou: if num_pos > 0 { iou_sum / num_pos as f64 } else { 0.0 },
        churn,
        mean_threshold,
    };
    state.iteration += 1;
    Ok((record, assignment))
}

#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub records: Vec<MetricsRecord>,
    pub state: SimState,
    pub scenes: Vec<Vec<GroundTruth>>,
    pub scene_hash: String,
}

/// Trains for `train.iterations` steps, visiting the scenes round-robin.
pub fn run_simulation(config: &ExperimentConfig) -> Result<SimulationRun> {
    config.validate()?;
    let spec = config.scene_spec();
    let anchors = generate_anchors(&config.anchors, spec.image_width, spec.image_height)?;
    let scenes = generate_scenes(&spec, config.train.num_scenes)?;
    run_on_scenes(config, &anchors, scenes)
}

/// As [`run_simulation`] but with caller-provided anchors and scenes.
pub fn run_on_scenes(
    config: &ExperimentConfig,
    anchors: &AnchorSet,
    scenes: Vec<Vec<GroundTruth>>,
) -> Result<SimulationRun> {
    if scenes.is_empty() {
        return Err(Error::arg("scenes", "need at least one scene"));
    }
    let max_iter = config.train.iterations;
    let mut state = SimState::new(
        anchors.len(),
        config.scene.num_classes,
        max_iter,
        config.train.learning_rate,
    );
    let mut last_labels: Vec<Option<Vec<Label>>> = vec![None; scenes.len()];
    let mut records = Vec::with_capacity(max_iter as usize);

    for it in 0..max_iter {
        let s = (it % scenes.len() as u64) as usize;
        let (record, assignment) = train_step(
            &mut state,
            &scenes[s],
            anchors,
            &config.assigner,
            &config.losses,
            last_labels[s].as_deref(),
        )?;
        last_labels[s] = Some(assignment.labels);
        records.push(record);
    }

    let scene_hash = scene_hash(&scenes);
    Ok(SimulationRun {
        records,
        state,
        scenes,
        scene_hash,
    })
}

/// Means of the metrics over the trailing `window` records.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WindowMeans {
    pub window: usize,
    pub total_loss: f64,
    pub cls_loss: f64,
    pub reg_loss: f64,
    pub quality_loss: f64,
    pub num_pos: f64,
    pub mean_pos_pred_iou: f64,
    pub churn: f64,
    pub mean_threshold: f64,
}

pub fn window_means(records: &[MetricsRecord], window: usize) -> WindowMeans {
    let tail = &records[records.len().saturating_sub(window)..];
    if tail.is_empty() {
        return WindowMeans::default();
    }
    let n = tail.len() as f64;
    let mean = |f: fn(&MetricsRecord) -> f64| tail.iter().map(f).sum::<f64>() / n;
    WindowMeans {
        window: tail.len(),
        total_loss: mean(|r| r.total_loss),
        cls_loss: mean(|r| r.cls_loss),
        reg_loss: mean(|r| r.reg_loss),
        quality_loss: mean(|r| r.quality_loss),
        num_pos: mean(|r| r.num_pos as f64),
        mean_pos_pred_iou: mean(|r| r.mean_pos_pred_iou),
        churn: mean(|r| r.churn),
        mean_threshold: mean(|r| r.mean_threshold),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anchors::AnchorConfig;
    use crate::assignment::assign_atss;

    fn small_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            anchors: AnchorConfig::with_strides(&[8, 16]),
            ..ExperimentConfig::default()
        };
        cfg.scene.image_width = 64;
        cfg.scene.image_height = 64;
        cfg.scene.size_range = [12.0, 40.0];
        cfg.train.iterations = 30;
        cfg.train.num_scenes = 3;
        cfg
    }

    #[test]
    fn zero_learning_rate_freezes_metrics() {
        let mut cfg = small_config();
        cfg.train.learning_rate = 0.0;
        cfg.train.num_scenes = 1;
        let run = run_simulation(&cfg).unwrap();
        let first = &run.records[0];
        for r in &run.records[1..] {
            assert_eq!(
                (r.total_loss, r.reg_loss, r.num_pos),
                (first.total_loss, first.reg_loss, first.num_pos)
            );
            assert_eq!(r.churn, 0.0);
        }
    }

    #[test]
    fn first_dynamic_step_matches_static_atss() {
        let mut cfg = small_config();
        cfg.assigner = AssignerConfig::dynamic(9, 1.0, 1.0);
        let spec = cfg.scene_spec();
        let anchors = generate_anchors(&cfg.anchors, 64, 64).unwrap();
        let scene = &generate_scenes(&spec, 1).unwrap()[0];
        let mut state = SimState::new(anchors.len(), cfg.scene.num_classes, 10, 0.05);
        let (_, dynamic) = train_step(&mut state, scene, &anchors, &cfg.assigner, &cfg.losses, None).unwrap();
        let gts: Vec<BBox> = scene.iter().map(|g| g.bbox).collect();
        let stat = assign_atss(&anchors, &gts, 9).unwrap();
        assert_eq!(dynamic.labels, stat.labels);
    }

    #[test]
    fn empty_scene_has_no_positive_losses() {
        let cfg = small_config();
        let anchors = generate_anchors(&cfg.anchors, 64, 64).unwrap();
        let mut state = SimState::new(anchors.len(), 3, 10, 0.05);
        let (rec, _) = train_step(&mut state, &[], &anchors, &cfg.assigner, &cfg.losses, None).unwrap();
        assert_eq!((rec.reg_loss, rec.quality_loss, rec.num_pos), (0.0, 0.0, 0));
        assert!(rec.cls_loss.is_finite() && rec.cls_loss > 0.0);
    }

    #[test]
    fn non_finite_state_reports_anchor() {
        let cfg = small_config();
        let anchors = generate_anchors(&cfg.anchors, 64, 64).unwrap();
        let mut state = SimState::new(anchors.len(), 3, 10, 0.05);
        state.deltas[7].dx = f64::NAN;
        let err = train_step(&mut state, &[], &anchors, &cfg.assigner, &cfg.losses, None).unwrap_err();
        assert!(matches!(err, Error::NonFinite { anchor: 7, .. }));
        assert!(!err.is_user_error());
    }

    #[test]
    fn static_assignment_never_churns() {
        let mut cfg = small_config();
        cfg.train.num_scenes = 2;
        for assigner in [AssignerConfig::atss(9), AssignerConfig::retinanet()] {
            cfg.assigner = assigner;
            let run = run_simulation(&cfg).unwrap();
            assert!(run.records.iter().all(|r| r.churn == 0.0));
        }
    }

    #[test]
    fn max_iter_zero_is_empty() {
        let mut cfg = small_config();
        cfg.train.iterations = 0;
        assert!(run_simulation(&cfg).unwrap().records.is_empty());
    }

    #[test]
    fn window_means_use_tail() {
        let mk = |i: u64, reg: f64| MetricsRecord {
            iteration: i,
            total_loss: reg,
            cls_loss: 0.0,
            reg_loss: reg,
            quality_loss: 0.0,
            num_pos: 2,
            mean_pos_pred_iou: 0.5,
            churn: 0.0,
            mean_threshold: 0.0,
        };
        let recs: Vec<_> = (0..10).map(|i| mk(i, i as f64)).collect();
        let w = window_means(&recs, 4);
        assert_eq!(w.window, 4);
        assert_eq!(w.reg_loss, 7.5);
        assert_eq!(window_means(&recs, 100).window, 10);
    }
}
