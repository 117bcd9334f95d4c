//! Command implementations behind the `assignkit` binary.
//!
//! Each command returns `Ok` on success; the binary maps user errors to
//! exit code 1 and internal errors to exit code 2 (see
//! [`Error::is_user_error`]).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::anchors::generate_anchors;
use crate::assignment::{assign, AssignerConfig, AssignerKind, Assignment, Schedule};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};
use crate::losses::{ClsLoss, LossParams, QualityBranch};
use crate::oracle::{finite_diff, naive_assign, random_case, rasterized_iou, NaiveMode};
use crate::simulator::{run_simulation, window_means, GroundTruth, MetricsRecord, WindowMeans};

pub const THREADS_ENV: &str = "ASSIGNKIT_THREADS";

/// Parsed scene file:
/// `{"image": [W, H], "gts": [{"box": [x1, y1, x2, y2], "class": id}], "predicted_boxes": [...]}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneFile {
    pub image: [u32; 2],
    pub gts: Vec<GroundTruth>,
    pub predicted_boxes: Option<Vec<BBox>>,
}

fn field_err(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::config(field, reason)
}

fn parse_box(v: &Value, field: &str) -> Result<BBox> {
    let arr = v
        .as_array()
        .filter(|a| a.len() == 4)
        .ok_or_else(|| field_err(field, "expected [x1, y1, x2, y2]"))?;
    let mut c = [0.0; 4];
    for (slot, x) in c.iter_mut().zip(arr) {
        *slot = x
            .as_f64()
            .ok_or_else(|| field_err(field, "coordinates must be numbers"))?;
    }
    BBox::new(c[0], c[1], c[2], c[3]).map_err(|e| field_err(field, e.to_string()))
}

impl SceneFile {
    pub fn parse(text: &str) -> Result<Self> {
        let root: Value = serde_json::from_str(text)?;
        let obj = root
            .as_object()
            .ok_or_else(|| field_err("scene", "expected a JSON object"))?;
        if let Some(k) = obj
            .keys()
            .find(|k| !matches!(k.as_str(), "image" | "gts" | "predicted_boxes"))
        {
            return Err(field_err(k.clone(), "unknown field"));
        }

        let image = obj
            .get("image")
            .and_then(Value::as_array)
            .filter(|a| a.len() == 2)
            .ok_or_else(|| field_err("image", "expected [width, height]"))?;
        let mut dims = [0u32; 2];
        for (slot, v) in dims.iter_mut().zip(image) {
            *slot = v
                .as_u64()
                .filter(|&d| d > 0 && d <= u64::from(u32::MAX))
                .ok_or_else(|| field_err("image", "dimensions must be positive integers"))? as u32;
        }

        let gts_v = obj
            .get("gts")
            .and_then(Value::as_array)
            .ok_or_else(|| field_err("gts", "expected an array"))?;
        let mut gts = Vec::with_capacity(gts_v.len());
        for (i, g) in gts_v.iter().enumerate() {
            let bbox = parse_box(
                g.get("box")
                    .ok_or_else(|| field_err(format!("gts[{i}].box"), "missing"))?,
                &format!("gts[{i}].box"),
            )?;
            let class_id = match g.get("class") {
                None => 0,
                Some(c) => c
                    .as_u64()
                    .ok_or_else(|| field_err(format!("gts[{i}].class"), "must be a non-negative integer"))?
                    as usize,
            };
            gts.push(GroundTruth { bbox, class_id });
        }

        let predicted_boxes = match obj.get("predicted_boxes") {
            None | Some(Value::Null) => None,
            Some(v) => {
                let arr = v
                    .as_array()
                    .ok_or_else(|| field_err("predicted_boxes", "expected an array"))?;
                let boxes = arr
                    .iter()
                    .enumerate()
                    .map(|(i, b)| parse_box(b, &format!("predicted_boxes[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                Some(boxes)
            }
        };

        Ok(SceneFile {
            image: dims,
            gts,
            predicted_boxes,
        })
    }
}

/// Runs the configured assigner on a scene file and writes the assignment
/// as JSON to `out`.
pub fn cmd_assign(scene_path: &Path, config: &ExperimentConfig, out: &Path) -> Result<Assignment> {
    let scene = SceneFile::parse(&fs::read_to_string(scene_path)?)?;
    let anchors = generate_anchors(&config.anchors, scene.image[0], scene.image[1])?;
    if let Some(p) = &scene.predicted_boxes {
        if p.len() != anchors.len() {
            return Err(field_err(
                "predicted_boxes",
                format!(
                    "has {} boxes but the config generates {} anchors",
                    p.len(),
                    anchors.len()
                ),
            ));
        }
    }
    let gts: Vec<BBox> = scene.gts.iter().map(|g| g.bbox).collect();
    let assignment = assign(&config.assigner, &anchors, &gts, scene.predicted_boxes.as_deref(), 0, 1)?;
    assignment.check(&anchors, &gts)?;

    write_file(out, serde_json::to_string_pretty(&assignment)?.as_bytes())?;
    Ok(assignment)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub seed: u64,
    pub iterations: u64,
    pub assigner: AssignerKind,
    pub cls_loss: ClsLoss,
    pub quality_branch: QualityBranch,
    pub scene_hash: String,
    pub final_window: WindowMeans,
    pub config: ExperimentConfig,
}

pub fn metrics_csv(records: &[MetricsRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if records.is_empty() {
        w.write_record(crate::simulator::METRICS_HEADER.split(','))
            .map_err(|e| Error::Invariant(e.to_string()))?;
    }
    for r in records {
        w.serialize(r).map_err(|e| Error::Invariant(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Invariant(e.to_string()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

/// Runs one simulation and writes `metrics.csv` / `summary.json` into
/// `config.output.dir` as requested by `config.output.formats`.
pub fn cmd_simulate(config: &ExperimentConfig) -> Result<SimulationSummary> {
    let run = run_simulation(config)?;
    let summary = SimulationSummary {
        seed: config.train.seed,
        iterations: config.train.iterations,
        assigner: config.assigner.kind,
        cls_loss: config.losses.cls_loss,
        quality_branch: config.losses.quality_branch,
        scene_hash: run.scene_hash.clone(),
        final_window: window_means(&run.records, config.train.summary_window),
        config: config.clone(),
    };
    let dir = &config.output.dir;
    if config.output.wants("csv") {
        write_file(&dir.join("metrics.csv"), &metrics_csv(&run.records)?)?;
    }
    if config.output.wants("json") {
        write_file(
            &dir.join("summary.json"),
            serde_json::to_string_pretty(&summary)?.as_bytes(),
        )?;
    }
    Ok(summary)
}

/// Applies a named variant to a base config.
///
/// Accepted names:
/// * assigner kinds: `fixed`/`retinanet`, `rpn`, `ssd`, `atss`, `dynamic_atss`;
/// * classification losses: `focal`, `qfl`, `vfl`;
/// * quality branches: `centerness`, `iou`, `no_quality`;
/// * weight ratios `P:A` (Dynamic ATSS), each side a number or a schedule
///   name (`d_up`, `d_down`, `constant`), e.g. `1:1`, `0.5:1`, `d_up:1`;
/// * the shorthands `constant` (= `1:1`), `d_up` (= `d_up:1`) and
///   `d_down` (= `1:d_down`).
pub fn apply_variant(base: &ExperimentConfig, name: &str) -> Result<ExperimentConfig> {
    let mut cfg = base.clone();
    let a = &mut cfg.assigner;
    match name {
        "fixed" | "retinanet" => set_fixed(a, AssignerConfig::retinanet()),
        "rpn" => set_fixed(a, AssignerConfig::rpn()),
        "ssd" => set_fixed(a, AssignerConfig::ssd()),
        "atss" => a.kind = AssignerKind::Atss,
        "dynamic_atss" => a.kind = AssignerKind::DynamicAtss,
        "focal" => set_cls(&mut cfg, ClsLoss::Focal),
        "qfl" => set_cls(&mut cfg, ClsLoss::Qfl),
        "vfl" => set_cls(&mut cfg, ClsLoss::Vfl),
        "centerness" => cfg.losses.quality_branch = QualityBranch::Centerness,
        "iou" => cfg.losses.quality_branch = QualityBranch::Iou,
        "no_quality" => cfg.losses.quality_branch = QualityBranch::None,
        "constant" => set_weights(a, "1", "1")?,
        "d_up" => set_weights(a, "d_up", "1")?,
        "d_down" => set_weights(a, "1", "d_down")?,
        other => match other.split_once(':') {
            Some((p, q)) => set_weights(a, p, q)?,
            None => return Err(field_err("variants", format!("unknown variant `{other}`"))),
        },
    }
    cfg.validate()
        .map_err(|e| field_err("variants", format!("`{name}`: {e}")))?;
    Ok(cfg)
}

fn set_fixed(a: &mut AssignerConfig, preset: AssignerConfig) {
    a.kind = AssignerKind::Fixed;
    a.pos_thr = preset.pos_thr;
    a.neg_thr = preset.neg_thr;
}

fn set_cls(cfg: &mut ExperimentConfig, loss: ClsLoss) {
    cfg.losses.cls_loss = loss;
    cfg.losses.alpha = None;
}

fn parse_weight(s: &str) -> Result<(f64, Schedule)> {
    match s {
        "d_up" => Ok((1.0, Schedule::DUp)),
        "d_down" => Ok((1.0, Schedule::DDown)),
        "constant" => Ok((1.0, Schedule::Constant)),
        num => num
            .parse::<f64>()
            .map(|w| (w, Schedule::Constant))
            .map_err(|_| field_err("variants", format!("bad weight `{num}`"))),
    }
}

fn set_weights(a: &mut AssignerConfig, p: &str, q: &str) -> Result<()> {
    let (w_p, schedule_p) = parse_weight(p)?;
    let (w_a, schedule_a) = parse_weight(q)?;
    a.kind = AssignerKind::DynamicAtss;
    a.w_p = w_p;
    a.w_a = w_a;
    a.schedule_p = schedule_p;
    a.schedule_a = schedule_a;
    Ok(())
}

/// One row of `comparison.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub variant: String,
    pub assigner: AssignerKind,
    pub w_p: f64,
    pub w_a: f64,
    pub schedule_p: Schedule,
    pub schedule_a: Schedule,
    pub cls_loss: ClsLoss,
    pub quality_branch: QualityBranch,
    pub seed: u64,
    pub scene_hash: String,
    pub reg_loss: f64,
    pub mean_pos_pred_iou: f64,
    pub num_pos: f64,
}

fn thread_count() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.parse().ok().filter(|&n: &usize| n > 0)
}

fn variant_dir(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '.' {
                c
            } else {
                '-'
            }
        })
        .collect()
}

/// Runs every variant on the same seed and scenes and writes
/// `comparison.csv` plus one subdirectory of outputs per variant.
pub fn cmd_compare(base: &ExperimentConfig, variants: &[String]) -> Result<Vec<ComparisonRow>> {
    if variants.is_empty() {
        return Err(field_err("variants", "at least one variant is required"));
    }
    let mut configs = Vec::with_capacity(variants.len());
    for name in variants {
        let mut cfg = apply_variant(base, name)?;
        cfg.output.dir = base.output.dir.join(variant_dir(name));
        configs.push((name.clone(), cfg));
    }

    let run_all = || -> Result<Vec<ComparisonRow>> {
        configs
            .par_iter()
            .map(|(name, cfg)| {
                let s = cmd_simulate(cfg)?;
                let a = &cfg.assigner;
                Ok(ComparisonRow {
                    variant: name.clone(),
                    assigner: a.kind,
                    w_p: a.w_p,
                    w_a: a.w_a,
                    schedule_p: a.schedule_p,
                    schedule_a: a.schedule_a,
                    cls_loss: cfg.losses.cls_loss,
                    quality_branch: cfg.losses.quality_branch,
                    seed: cfg.train.seed,
                    scene_hash: s.scene_hash,
                    reg_loss: s.final_window.reg_loss,
                    mean_pos_pred_iou: s.final_window.mean_pos_pred_iou,
                    num_pos: s.final_window.num_pos,
                })
            })
            .collect()
    };
    let rows = match thread_count() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Invariant(e.to_string()))?
            .install(run_all)?,
        None => run_all()?,
    };

    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(|e| Error::Invariant(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Invariant(e.to_string()))?;
    write_file(&base.output.dir.join("comparison.csv"), &bytes)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
}

impl OracleCheck {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Compares the optimized implementations with the brute-force oracles on
/// `cases` seeded inputs per check.
pub fn cmd_oracle_check(seed: u64, cases: usize) -> Vec<OracleCheck> {
    use rand::{Rng, SeedableRng};

    let mut out = Vec::new();

    let mut atss_fail = 0;
    let mut dyn_fail = 0;
    for i in 0..cases as u64 {
        let c = random_case(seed.wrapping_add(i));
        let fast = crate::assignment::assign_atss(&c.anchors, &c.gts, 9);
        let slow = naive_assign(&c.anchors, &c.gts, 9, NaiveMode::Atss, None);
        if !same_assignment(fast.ok().as_ref(), slow.ok().as_ref()) {
            atss_fail += 1;
        }
        let cfg = AssignerConfig::dynamic(9, 1.0, 1.0);
        let fast = crate::assignment::assign_dynamic_atss(&c.anchors, &c.predicted, &c.gts, &cfg, 0, 1);
        let slow = naive_assign(
            &c.anchors,
            &c.gts,
            9,
            NaiveMode::Dynamic { w_p: 1.0, w_a: 1.0 },
            Some(&c.predicted),
        );
        if !same_assignment(fast.ok().as_ref(), slow.ok().as_ref()) {
            dyn_fail += 1;
        }
    }
    out.push(OracleCheck {
        name: "atss vs naive",
        cases,
        failures: atss_fail,
    });
    out.push(OracleCheck {
        name: "dynamic atss vs naive",
        cases,
        failures: dyn_fail,
    });

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut iou_fail = 0;
    for _ in 0..cases {
        let mut rand_box = || {
            let x1 = rng.gen_range(0..64) as f64;
            let y1 = rng.gen_range(0..64) as f64;
            let w = rng.gen_range(1..=32) as f64;
            let h = rng.gen_range(1..=32) as f64;
            BBox::new(x1, y1, x1 + w, y1 + h).expect("positive extent")
        };
        let (a, b) = (rand_box(), rand_box());
        match rasterized_iou(&a, &b) {
            Ok(r) if (r - iou(&a, &b)).abs() <= 1e-12 => {}
            _ => iou_fail += 1,
        }
    }
    out.push(OracleCheck {
        name: "iou vs rasterized",
        cases,
        failures: iou_fail,
    });

    let mut grad_fail = 0;
    for i in 0..cases {
        let loss = [ClsLoss::Focal, ClsLoss::Qfl, ClsLoss::Vfl][i % 3];
        let p = rng.gen_range(0.01..0.99);
        let y = match loss {
            ClsLoss::Focal => f64::from(u8::from(rng.gen_bool(0.5))),
            _ => rng.gen_range(0.0..1.0),
        };
        let params = LossParams::for_loss(loss);
        let eval = loss.eval(p, y, &params);
        let fd = finite_diff(loss, p, y, &params, 1e-5).unwrap_or(f64::NAN);
        let ok = if eval.value < 1e-3 {
            (fd - eval.d_dp).abs() < 1e-9
        } else {
            (fd - eval.d_dp).abs() <= 1e-6 * eval.d_dp.abs().max(fd.abs())
        };
        if !ok {
            grad_fail += 1;
        }
    }
    out.push(OracleCheck {
        name: "loss gradients vs finite differences",
        cases,
        failures: grad_fail,
    });
    out
}

fn same_assignment(a: Option<&Assignment>, b: Option<&Assignment>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => {
            a.labels == b.labels
                && a.num_pos == b.num_pos
                && a.stats.len() == b.stats.len()
                && a.stats
                    .iter()
                    .zip(&b.stats)
                    .all(|(x, y)| (x.stats.threshold - y.stats.threshold).abs() <= 1e-12)
        }
        _ => false,
    }
}

/// Output path for `assign` when `--out` names a directory.
pub fn resolve_assign_out(out: &Path) -> PathBuf {
    if out.is_dir() {
        out.join("assignment.json")
    } else {
        out.to_path_buf()
    }
}
