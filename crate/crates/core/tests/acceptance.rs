//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always print; exits non-zero if any criterion fails.

// expected values are written out to six places on purpose
#![allow(clippy::approx_constant, clippy::field_reassign_with_default)]

use std::time::{Duration, Instant};

use assignkit::anchors::AnchorSet;
use assignkit::assignment::{schedule_weight, select_positive_candidates};
use assignkit::cli::{apply_variant, cmd_compare, cmd_simulate};
use assignkit::geometry::iou;
use assignkit::losses::{focal_loss, qfl, vfl, ClsLoss, LossParams};
use assignkit::oracle::{finite_diff, naive_assign, random_case, rasterized_iou, NaiveMode};
use assignkit::simulator::{run_on_scenes, run_simulation, window_means, GroundTruth};
use assignkit::{
    assign_atss, assign_dynamic_atss, AnchorConfig, AssignerConfig, Assignment, BBox, ExperimentConfig, Label, Schedule,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_s: u64) -> (bool, String) {
    (
        elapsed <= Duration::from_secs(limit_s),
        format!("{:.2} s (limit {limit_s} s)", elapsed.as_secs_f64()),
    )
}

fn b(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
    BBox::new(x1, y1, x2, y2).unwrap()
}

fn same(fast: &Assignment, slow: &Assignment) -> bool {
    fast.labels == slow.labels
        && fast.num_pos == slow.num_pos
        && fast.stats.len() == slow.stats.len()
        && fast
            .stats
            .iter()
            .zip(&slow.stats)
            .all(|(x, y)| x.selected == y.selected && (x.stats.threshold - y.stats.threshold).abs() <= 1e-12)
}

fn c1_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let (mut mismatches, mut max_anchors, mut max_gts, mut positives) = (0, 0, 0, 0);
    let cfg = AssignerConfig::dynamic(9, 1.0, 1.0);
    for seed in 0..1000 {
        let c = random_case(seed);
        max_anchors = max_anchors.max(c.anchors.len());
        max_gts = max_gts.max(c.gts.len());
        let fast = assign_atss(&c.anchors, &c.gts, 9).unwrap();
        let slow = naive_assign(&c.anchors, &c.gts, 9, NaiveMode::Atss, None).unwrap();
        positives += fast.total_pos();
        mismatches += usize::from(!same(&fast, &slow));
        let fast = assign_dynamic_atss(&c.anchors, &c.predicted, &c.gts, &cfg, 0, 1).unwrap();
        let slow = naive_assign(
            &c.anchors,
            &c.gts,
            9,
            NaiveMode::Dynamic { w_p: 1.0, w_a: 1.0 },
            Some(&c.predicted),
        )
        .unwrap();
        mismatches += usize::from(!same(&fast, &slow));
    }
    let (fast_enough, t) = within(start.elapsed(), 30);
    outcome(
        mismatches == 0 && fast_enough && max_anchors <= 500 && max_gts <= 10,
        format!(
            "1000 scenes x {{atss, dynamic}}: {mismatches} mismatches; up to {max_anchors} anchors x {max_gts} GTs, {positives} static positives; {t}"
        ),
    )
}

fn c2_degeneracy() -> Outcome {
    let cfg = AssignerConfig::dynamic(9, 1.0, 1.0);
    let mut mismatches = 0;
    for seed in 0..1000 {
        let c = random_case(seed);
        let st = assign_atss(&c.anchors, &c.gts, 9).unwrap();
        let dy = assign_dynamic_atss(&c.anchors, c.anchors.boxes(), &c.gts, &cfg, 0, 1).unwrap();
        if st.labels != dy.labels || st.num_pos != dy.num_pos {
            mismatches += 1;
        }
    }
    outcome(
        mismatches == 0,
        format!("predictions = anchors, 1:1 weights: {mismatches}/1000 scenes differ"),
    )
}

fn c3_hand_thresholds() -> Outcome {
    let anchors = AnchorSet::from_level_boxes(vec![(
        8,
        vec![b(10., 10., 50., 50.), b(20., 20., 60., 60.), b(30., 30., 70., 70.)],
    )])
    .unwrap();
    let gt = b(10., 10., 50., 50.);
    let out = assign_atss(&anchors, &[gt], 9).unwrap();
    let naive = naive_assign(&anchors, &[gt], 9, NaiveMode::Atss, None).unwrap();
    let st = &out.stats[0];
    // value frozen from the brute-force oracle
    let t1 = 0.9523955;
    let aious_ok = (st.aious[0] - 1.0).abs() < 1e-6
        && (st.aious[1] - 0.391304).abs() < 1e-6
        && (st.aious[2] - 0.142857).abs() < 1e-6;
    let ok1 = aious_ok
        && (st.stats.threshold - t1).abs() <= 1e-6
        && (naive.stats[0].stats.threshold - t1).abs() <= 1e-6
        && out.labels == vec![Label::Positive(0), Label::Negative, Label::Negative]
        && naive.labels == out.labels;

    let aious = [0.6, 0.55, 0.5, 0.45, 0.4];
    let pious = [0.5, 0.95, 0.5, 0.5, 0.45];
    let (sel, d) = select_positive_candidates(&aious, Some(&pious), 1.0, 1.0).unwrap();
    // independent: textbook mean and sample std of each component, summed
    let ms = |xs: &[f64]| {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        m + v.sqrt()
    };
    let t2_ref = ms(&aious) + ms(&pious);
    let ok2 = (d.threshold - 1.367023).abs() <= 1e-6 && (t2_ref - 1.367023).abs() <= 1e-6 && sel == vec![1];

    outcome(
        ok1 && ok2,
        format!(
            "3-anchor threshold {:.7} (expected {t1} +- 1e-6), positives {:?}; 5-candidate combined threshold {:.6} (expected 1.367023), positives {sel:?}",
            st.stats.threshold, st.selected, d.threshold
        ),
    )
}

fn c4_iou_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let rand_box = |rng: &mut ChaCha8Rng| {
        let (x1, x2) = loop {
            let (p, q) = (rng.gen_range(0..=256), rng.gen_range(0..=256));
            if p != q {
                break (p.min(q), p.max(q));
            }
        };
        let (y1, y2) = loop {
            let (p, q) = (rng.gen_range(0..=256), rng.gen_range(0..=256));
            if p != q {
                break (p.min(q), p.max(q));
            }
        };
        b(f64::from(x1), f64::from(y1), f64::from(x2), f64::from(y2))
    };
    let (mut worst, mut overlapping) = (0.0f64, 0);
    for _ in 0..10_000 {
        let (a, c) = (rand_box(&mut rng), rand_box(&mut rng));
        let analytic = iou(&a, &c);
        overlapping += usize::from(analytic > 0.0);
        worst = worst.max((analytic - rasterized_iou(&a, &c).unwrap()).abs());
    }
    let (fast_enough, t) = within(start.elapsed(), 10);
    outcome(
        worst <= 1e-12 && fast_enough,
        format!("10000 integer pairs in [0,256]^2 ({overlapping} overlapping): max |diff| {worst:.1e}; {t}"),
    )
}

fn c5_gradients() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut failures, mut worst_rel) = (0, 0.0f64);
    for loss in [ClsLoss::Focal, ClsLoss::Qfl, ClsLoss::Vfl] {
        for _ in 0..500 {
            let p = rng.gen_range(0.01..0.99);
            let y = match loss {
                ClsLoss::Focal => f64::from(u8::from(rng.gen_bool(0.5))),
                _ if rng.gen_bool(0.2) => 0.0,
                _ => rng.gen_range(0.0..=1.0),
            };
            let params = LossParams {
                alpha: rng.gen_range(0.05..0.95),
                gamma: rng.gen_range(0.0..4.0),
                // |y - p|^beta has a cusp at p = y for beta < 2, where a central
                // difference with h = 1e-5 is not a valid reference.
                beta: f64::from(rng.gen_range(2..=4u8)),
                ..LossParams::default()
            };
            let e = loss.eval(p, y, &params);
            let fd = finite_diff(loss, p, y, &params, 1e-5).unwrap();
            let abs = (fd - e.d_dp).abs();
            let ok = if e.value < 1e-3 {
                abs < 1e-9 || abs / e.d_dp.abs().max(1e-300) < 1e-6
            } else {
                let rel = abs / e.d_dp.abs().max(fd.abs()).max(1e-300);
                worst_rel = worst_rel.max(rel);
                rel < 1e-6
            };
            if !ok && std::env::var_os("ACCEPT_DEBUG").is_some() {
                eprintln!(
                    "{loss:?} p={p} y={y} {params:?} value={} analytic={} fd={fd}",
                    e.value, e.d_dp
                );
            }
            failures += usize::from(!ok);
        }
    }
    let (fast_enough, t) = within(start.elapsed(), 5);
    outcome(
        failures == 0 && fast_enough,
        format!("3 x 500 random points: {failures} failures, worst relative error {worst_rel:.1e}; {t}"),
    )
}

fn c6_loss_values() -> Outcome {
    let f = LossParams::for_loss(ClsLoss::Focal);
    let q = LossParams::for_loss(ClsLoss::Qfl);
    let v = LossParams::for_loss(ClsLoss::Vfl);
    let cases = [
        ("focal(1,1)", focal_loss(1.0, true, &f).value, 0.0),
        ("focal(0.9,1)", focal_loss(0.9, true, &f).value, 0.000263),
        ("focal(0.5,0)", focal_loss(0.5, false, &f).value, 0.129965),
        ("qfl(0.7,0.7)", qfl(0.7, 0.7, &q).value, 0.0),
        ("qfl(0.5,0)", qfl(0.5, 0.0, &q).value, 0.173287),
        ("qfl(0.5,0.8)", qfl(0.5, 0.8, &q).value, 0.062383),
        ("vfl(1e-9,0)", vfl(1e-9, 0.0, &v).value, 0.0),
        ("vfl(0.5,1)", vfl(0.5, 1.0, &v).value, 0.693147),
        ("vfl(0.5,0)", vfl(0.5, 0.0, &v).value, 0.129965),
    ];
    let bad: Vec<String> = cases
        .iter()
        .filter(|(_, got, want)| (got - want).abs() > 1e-6)
        .map(|(n, got, want)| format!("{n}={got:.7} (want {want})"))
        .collect();
    outcome(
        bad.is_empty(),
        if bad.is_empty() {
            "9/9 within 1e-6".to_owned()
        } else {
            bad.join(", ")
        },
    )
}

fn c7_fig2_direction() -> Outcome {
    let start = Instant::now();
    let mut base = ExperimentConfig::default();
    base.anchors = AnchorConfig::with_strides(&[8, 16]);
    base.scene.image_width = 256;
    base.scene.image_height = 256;
    base.train.num_scenes = 20;
    base.train.iterations = 500;
    base.train.learning_rate = 0.05;
    base.losses.cls_loss = ClsLoss::Focal;

    let jobs: Vec<(u64, bool)> = (0..5).flat_map(|s| [(s, false), (s, true)]).collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(seed, dynamic)| {
            let mut cfg = base.clone().with_seed(seed);
            cfg.assigner = if dynamic {
                AssignerConfig::dynamic(9, 1.0, 1.0)
            } else {
                AssignerConfig::atss(9)
            };
            let run = run_simulation(&cfg).unwrap();
            (run.scene_hash.clone(), window_means(&run.records, 100))
        })
        .collect();

    let (mut reg_wins, mut iou_wins, mut paired) = (0, 0, true);
    let mut per_seed = Vec::new();
    for pair in results.chunks(2) {
        let (st, dy) = (&pair[0].1, &pair[1].1);
        paired &= pair[0].0 == pair[1].0;
        reg_wins += usize::from(dy.reg_loss < st.reg_loss);
        iou_wins += usize::from(dy.mean_pos_pred_iou > st.mean_pos_pred_iou);
        per_seed.push(format!(
            "{:.3}/{:.3}|{:.3}/{:.3}",
            st.reg_loss, dy.reg_loss, st.mean_pos_pred_iou, dy.mean_pos_pred_iou
        ));
    }
    let (fast_enough, t) = within(start.elapsed(), 120);
    outcome(
        paired && reg_wins >= 4 && iou_wins >= 4 && fast_enough,
        format!(
            "dynamic lower reg_loss in {reg_wins}/5 seeds, higher pred IoU in {iou_wins}/5 (need 4/5 each); \
             static/dynamic reg|iou per seed: {}; {t}",
            per_seed.join(" ")
        ),
    )
}

fn small_config(dir: &std::path::Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.anchors = AnchorConfig::with_strides(&[8, 16]);
    cfg.scene.image_width = 128;
    cfg.scene.image_height = 128;
    cfg.scene.size_range = [16.0, 64.0];
    cfg.train.iterations = 150;
    cfg.train.num_scenes = 5;
    cfg.output.dir = dir.to_path_buf();
    cfg
}

fn c8_schedules() -> Outcome {
    let n = 500;
    let exact = schedule_weight(Schedule::DUp, 0, n) == 0.0
        && schedule_weight(Schedule::DUp, n, n) == 1.0
        && schedule_weight(Schedule::DDown, 0, n) == 1.0
        && schedule_weight(Schedule::DDown, n, n) == 0.0
        && (0..=n).all(|i| schedule_weight(Schedule::DDown, i, n) == 1.0 - schedule_weight(Schedule::DUp, i, n));

    let dir = tempfile::tempdir().unwrap();
    let variants = ["1:1".to_owned(), "d_up:1".to_owned()];
    let mut csvs = Vec::new();
    let mut rows = Vec::new();
    for run in 0..2 {
        let mut base = small_config(&dir.path().join(format!("run{run}")));
        base.train.seed = 8;
        rows = cmd_compare(&base, &variants).unwrap();
        csvs.push(std::fs::read(base.output.dir.join("comparison.csv")).unwrap());
    }
    let recorded = rows.len() == 2
        && rows[0].schedule_p == Schedule::Constant
        && rows[1].schedule_p == Schedule::DUp
        && rows[0].scene_hash == rows[1].scene_hash;
    outcome(
        exact && recorded && csvs[0] == csvs[1],
        format!(
            "d_up(0)=0, d_up(N)=1, d_down mirrors exactly: {exact}; compare {{1:1, d_up}} wrote {} rows, deterministic: {}",
            rows.len(),
            csvs[0] == csvs[1]
        ),
    )
}

fn c9_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut identical = true;
    for (seed, variant) in [(0, "atss"), (3, "dynamic_atss"), (5, "vfl"), (6, "d_down")] {
        let mut outs = Vec::new();
        for run in 0..2 {
            let base = small_config(&dir.path().join(format!("{variant}-{run}"))).with_seed(seed);
            let cfg = apply_variant(&base, variant).unwrap();
            cmd_simulate(&cfg).unwrap();
            outs.push(std::fs::read(cfg.output.dir.join("metrics.csv")).unwrap());
        }
        identical &= outs[0] == outs[1];
    }
    let variants: Vec<String> = ["atss", "dynamic_atss", "qfl"].map(String::from).to_vec();
    let mut cmp = Vec::new();
    for run in 0..2 {
        let base = small_config(&dir.path().join(format!("cmp-{run}"))).with_seed(2);
        cmd_compare(&base, &variants).unwrap();
        cmp.push(std::fs::read(base.output.dir.join("comparison.csv")).unwrap());
    }
    identical &= cmp[0] == cmp[1];
    outcome(
        identical,
        "4 simulate configs and one 3-variant compare, each run twice: CSV byte-identical",
    )
}

fn c10_empty_positive() -> Outcome {
    // The one selected candidate has its center outside the GT.
    let anchors = AnchorSet::from_level_boxes(vec![(
        8,
        vec![b(-25., 10., 35., 50.), b(60., 60., 100., 100.), b(70., 70., 110., 110.)],
    )])
    .unwrap();
    let scene = vec![GroundTruth {
        bbox: b(10., 10., 50., 50.),
        class_id: 0,
    }];
    let mut ok = true;
    let mut rows = 0;
    for assigner in [AssignerConfig::atss(9), AssignerConfig::dynamic(9, 1.0, 1.0)] {
        let mut cfg = ExperimentConfig::default();
        cfg.assigner = assigner;
        cfg.train.iterations = 100;
        match run_on_scenes(&cfg, &anchors, vec![scene.clone()]) {
            Ok(run) => {
                rows += run.records.len();
                ok &= run.records.len() == 100
                    && run.records.iter().all(|r| {
                        r.num_pos == 0 && r.reg_loss == 0.0 && r.quality_loss == 0.0 && r.cls_loss.is_finite()
                    });
            }
            Err(_) => ok = false,
        }
    }
    outcome(
        ok,
        format!("{rows} iterations (static + dynamic), all with 0 positives and reg_loss = 0"),
    )
}

fn main() {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check); 10] = [
        ("oracle equivalence (assignment)", c1_oracle_equivalence),
        ("static/dynamic degeneracy", c2_degeneracy),
        ("hand-computed thresholds", c3_hand_thresholds),
        ("IoU oracle", c4_iou_oracle),
        ("gradient checks", c5_gradients),
        ("loss point values", c6_loss_values),
        ("paired static vs dynamic direction", c7_fig2_direction),
        ("schedule sanity", c8_schedules),
        ("determinism", c9_determinism),
        ("empty-positive robustness", c10_empty_positive),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failed += usize::from(!o.pass);
        println!(
            "{} criterion {:>2} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
