//! Acceptance suite. Each criterion prints one PASS/FAIL line with the
//! measured quantity and its tolerance; the process exits non-zero if any
//! criterion fails.

use std::f64::consts::{FRAC_PI_2, LN_2, PI};
use std::time::{Duration, Instant};

use mdl_core::dota::{
    decode_predictions, evaluate_map, ApInterpolation, DecodeParams, DotaAnnotation, DotaCategory, DotaInstance,
    ImagePredictions, PredictionFields,
};
use mdl_core::geometry::{skew_iou, Detection, ObbCenterWHAngle, ObbVertices, Point2};
use mdl_core::gradcheck::check_all;
use mdl_core::loss::{
    focal_heatmap_loss, ln_norm_loss, mdl, mdl_boundary_min, CovarianceSource, HeatmapGrid, NormKind, FOCAL_ALPHA,
    FOCAL_BETA,
};
use mdl_core::sweep::{emit_csv, read_csv, run_sweep, BoxDelta, SweepFactor, SweepLoss, SweepSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SOURCES: [CovarianceSource; 2] = [CovarianceSource::FromTarget, CovarianceSource::FromPrediction];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn random_rect(rng: &mut ChaCha8Rng, center: f64, side: (f64, f64)) -> ObbCenterWHAngle {
    ObbCenterWHAngle {
        cx: rng.gen_range(-center..center),
        cy: rng.gen_range(-center..center),
        w: rng.gen_range(side.0..side.1),
        h: rng.gen_range(side.0..side.1),
        theta: rng.gen_range(-PI..PI),
    }
}

fn jitter(rng: &mut ChaCha8Rng, b: &ObbCenterWHAngle) -> ObbCenterWHAngle {
    ObbCenterWHAngle {
        cx: b.cx + rng.gen_range(-0.5..0.5) * b.w,
        cy: b.cy + rng.gen_range(-0.5..0.5) * b.h,
        w: b.w * rng.gen_range(0.6..1.5),
        h: b.h * rng.gen_range(0.6..1.5),
        theta: b.theta + rng.gen_range(-0.6..0.6),
    }
}

/// Random (pred, target) pair of rectangles that overlap in general.
fn random_pair(rng: &mut ChaCha8Rng) -> (ObbVertices, ObbVertices) {
    let t = random_rect(rng, 20.0, (0.5, 10.0));
    let p = jitter(rng, &t);
    (p.to_vertices().unwrap(), t.to_vertices().unwrap())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn scale_invariance() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_mdl, mut worst_l1) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let (p, t) = random_pair(&mut rng);
        let l1 = ln_norm_loss(&p, &t, NormKind::L1);
        for src in SOURCES {
            let base = mdl(&p, &t, src).unwrap();
            for s in [0.5, 2.0, 10.0, 100.0] {
                let scaled = mdl(&p.scale(s).unwrap(), &t.scale(s).unwrap(), src).unwrap();
                worst_mdl = worst_mdl.max((scaled - base).abs());
            }
        }
        for s in [0.5, 2.0, 10.0, 100.0] {
            let scaled = ln_norm_loss(&p.scale(s).unwrap(), &t.scale(s).unwrap(), NormKind::L1);
            worst_l1 = worst_l1.max(rel(scaled, s * l1));
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst_mdl <= 1e-9 && worst_l1 <= 1e-9 && elapsed < Duration::from_secs(1),
        format!(
            "max |dMDL| = {worst_mdl:.2e} (tol 1e-9), max rel L1 homogeneity error = {worst_l1:.2e} (tol 1e-9), {:.3} s (limit 1 s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn similarity_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_mdl, mut worst_iou) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let (p, t) = random_pair(&mut rng);
        let theta = rng.gen_range(-PI..PI);
        let s = rng.gen_range(0.1..10.0);
        let shift = Point2::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0));
        let (c, si) = (theta.cos(), theta.sin());
        let tf = |q: Point2| Point2::new(s * (c * q.x - si * q.y) + shift.x, s * (si * q.x + c * q.y) + shift.y);
        let (tp, tt) = (p.map(tf).unwrap(), t.map(tf).unwrap());
        for src in SOURCES {
            let d = (mdl(&tp, &tt, src).unwrap() - mdl(&p, &t, src).unwrap()).abs();
            worst_mdl = worst_mdl.max(d);
        }
        let d = (skew_iou(&tp, &tt).unwrap() - skew_iou(&p, &t).unwrap()).abs();
        worst_iou = worst_iou.max(d);
    }
    outcome(
        worst_mdl <= 1e-9 && worst_iou <= 1e-9,
        format!("max |dMDL| = {worst_mdl:.2e} (tol 1e-9), max |dSkewIoU| = {worst_iou:.2e} (tol 1e-9)"),
    )
}

/// Point-in-rectangle in the box's own frame, independent of the
/// polygon clipping code.
fn inside(b: &ObbCenterWHAngle, x: f64, y: f64) -> bool {
    let (dx, dy) = (x - b.cx, y - b.cy);
    let (c, s) = (b.theta.cos(), b.theta.sin());
    let u = c * dx + s * dy;
    let v = -s * dx + c * dy;
    u.abs() <= b.w / 2.0 && v.abs() <= b.h / 2.0
}

fn aabb(b: &ObbCenterWHAngle) -> (f64, f64, f64, f64) {
    let (c, s) = (b.theta.cos().abs(), b.theta.sin().abs());
    let hx = (b.w * c + b.h * s) / 2.0;
    let hy = (b.w * s + b.h * c) / 2.0;
    (b.cx - hx, b.cy - hy, b.cx + hx, b.cy + hy)
}

/// Jittered-grid rasterization with 1000 x 1000 samples over the joint
/// bounding box.
fn raster_iou(rng: &mut ChaCha8Rng, p: &ObbCenterWHAngle, q: &ObbCenterWHAngle) -> f64 {
    let (a, b) = (aabb(p), aabb(q));
    let (x0, y0, x1, y1) = (a.0.min(b.0), a.1.min(b.1), a.2.max(b.2), a.3.max(b.3));
    const N: usize = 1000;
    let (sx, sy) = ((x1 - x0) / N as f64, (y1 - y0) / N as f64);
    let (mut both, mut either) = (0u64, 0u64);
    for i in 0..N {
        for j in 0..N {
            let x = x0 + (i as f64 + rng.gen::<f64>()) * sx;
            let y = y0 + (j as f64 + rng.gen::<f64>()) * sy;
            let (ip, iq) = (inside(p, x, y), inside(q, x, y));
            both += u64::from(ip && iq);
            either += u64::from(ip || iq);
        }
    }
    both as f64 / either as f64
}

fn skew_iou_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_mc = 0.0f64;
    for _ in 0..100 {
        let p = ObbCenterWHAngle {
            cx: rng.gen_range(20.0..80.0),
            cy: rng.gen_range(20.0..80.0),
            w: rng.gen_range(5.0..40.0),
            h: rng.gen_range(5.0..40.0),
            theta: rng.gen_range(-PI..PI),
        };
        let q = ObbCenterWHAngle {
            cx: p.cx + rng.gen_range(-15.0..15.0),
            cy: p.cy + rng.gen_range(-15.0..15.0),
            w: rng.gen_range(5.0..40.0),
            h: rng.gen_range(5.0..40.0),
            theta: rng.gen_range(-PI..PI),
        };
        let exact = skew_iou(&p.to_vertices().unwrap(), &q.to_vertices().unwrap()).unwrap();
        worst_mc = worst_mc.max((exact - raster_iou(&mut rng, &p, &q)).abs());
    }

    let mut worst_rect = 0.0f64;
    for _ in 0..100 {
        let r = |rng: &mut ChaCha8Rng| -> (f64, f64, f64, f64) {
            let (x, y): (f64, f64) = (rng.gen_range(0.0..80.0), rng.gen_range(0.0..80.0));
            (x, y, x + rng.gen_range(1.0..20.0), y + rng.gen_range(1.0..20.0))
        };
        let (a, b) = (r(&mut rng), r(&mut rng));
        let iw = (a.2.min(b.2) - a.0.max(b.0)).max(0.0);
        let ih = (a.3.min(b.3) - a.1.max(b.1)).max(0.0);
        let inter = iw * ih;
        let union = (a.2 - a.0) * (a.3 - a.1) + (b.2 - b.0) * (b.3 - b.1) - inter;
        let quad = |r: (f64, f64, f64, f64)| ObbVertices::from_array([r.0, r.1, r.2, r.1, r.2, r.3, r.0, r.3]).unwrap();
        let got = skew_iou(&quad(a), &quad(b)).unwrap();
        worst_rect = worst_rect.max((got - inter / union).abs());
    }
    let elapsed = start.elapsed();
    outcome(
        worst_mc <= 3e-3 && worst_rect <= 1e-12 && elapsed < Duration::from_secs(30),
        format!(
            "max |IoU - raster| = {worst_mc:.2e} (tol 3e-3, 1e6 samples x 100 pairs), max |IoU - rect formula| = {worst_rect:.2e} (tol 1e-12), {:.2} s (limit 30 s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn boundary_continuity() -> Outcome {
    let target = ObbCenterWHAngle::new(3.0, 1.0, 2.0, 2.0, 0.0)
        .unwrap()
        .to_vertices()
        .unwrap();
    let center = Point2::new(3.0, 1.0);
    let (mut worst_jump, mut min_margin) = (0.0f64, f64::INFINITY);
    for offset in [Point2::new(0.0, 0.0), Point2::new(0.3, -0.2), Point2::new(-0.05, 0.4)] {
        let pred_at = |theta: f64| target.rotate_about(center, theta).unwrap().translate(offset).unwrap();
        for src in SOURCES {
            let values: Vec<f64> = (-1000..=1000)
                .map(|k| mdl_boundary_min(&pred_at(FRAC_PI_2 + k as f64 * 1e-6), &target, src).unwrap())
                .collect();
            for w in values.windows(2) {
                worst_jump = worst_jump.max((w[1] - w[0]).abs());
            }
            if offset != Point2::new(0.0, 0.0) {
                let p = pred_at(FRAC_PI_2);
                let margin = mdl(&p, &target, src).unwrap() - mdl_boundary_min(&p, &target, src).unwrap();
                min_margin = min_margin.min(margin);
            }
        }
    }
    outcome(
        worst_jump <= 1e-4 && min_margin > 0.0,
        format!(
            "max step change around pi/2 = {worst_jump:.2e} (tol 1e-4), min(plain - boundary-min) at pi/2 = {min_margin:.4} (must be > 0)"
        ),
    )
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let reports = check_all(20240501, 100, 1e-4).unwrap();
    let elapsed = start.elapsed();
    let failed: Vec<&str> = reports
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.op_name.as_str())
        .collect();
    let worst = reports.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    let all_full = reports.iter().all(|r| r.cases == 100);
    outcome(
        failed.is_empty() && all_full && elapsed < Duration::from_secs(10),
        format!(
            "{} ops x 100 cases, worst rel error = {worst:.2e} (tol 1e-4, step 1e-6), failed: {failed:?}, {:.2} s (limit 10 s)",
            reports.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn rect(x: f64, y: f64, w: f64, h: f64) -> ObbVertices {
    ObbVertices::from_array([x, y, x + w, y, x + w, y + h, x, y + h]).unwrap()
}

fn hand_oracles() -> Outcome {
    let unit = rect(0.0, 0.0, 1.0, 1.0);
    let shifted = unit.translate(Point2::new(0.1, 0.0)).unwrap();
    let m = mdl(&shifted, &unit, CovarianceSource::FromTarget).unwrap();
    let e_mdl = (m - 0.1 * 3f64.sqrt()).abs();

    let one = |y: f64, p: f64| {
        let t = HeatmapGrid::new(1, 1, vec![y]).unwrap();
        let q = HeatmapGrid::new(1, 1, vec![p]).unwrap();
        focal_heatmap_loss(&q, &t, FOCAL_ALPHA, FOCAL_BETA).unwrap()
    };
    let e_pos = (one(1.0, 0.5) - 0.25 * LN_2).abs();
    let e_neg = (one(0.0, 0.5) - 0.25 * LN_2).abs();

    // Two ground truths; predictions ranked TP, FP, TP.
    let (a, b) = (rect(0.0, 0.0, 10.0, 10.0), rect(50.0, 50.0, 10.0, 10.0));
    let gts = [DotaAnnotation {
        image_id: "img".into(),
        instances: [a, b]
            .map(|bbox| DotaInstance {
                bbox,
                category: DotaCategory::Harbor,
                difficult: false,
            })
            .to_vec(),
    }];
    let class = DotaCategory::Harbor.index();
    let preds = [ImagePredictions {
        image_id: "img".into(),
        detections: vec![
            Detection::new(a, 0.9, class).unwrap(),
            Detection::new(rect(200.0, 0.0, 5.0, 5.0), 0.8, class).unwrap(),
            Detection::new(b, 0.7, class).unwrap(),
        ],
    }];
    let ap = evaluate_map(&gts, &preds, 0.5, ApInterpolation::ElevenPoint).per_class_ap[&DotaCategory::Harbor];
    let e_ap = (ap - 0.8485).abs();

    outcome(
        e_mdl <= 1e-12 && e_pos <= 1e-12 && e_neg <= 1e-12 && e_ap <= 5e-5,
        format!(
            "MDL shift err {e_mdl:.1e} (tol 1e-12), focal +/- err {e_pos:.1e}/{e_neg:.1e} (tol 1e-12), 11-point AP {ap:.6} vs 0.8485 (tol 5e-5)"
        ),
    )
}

fn sweep_csv() -> Outcome {
    let spec = SweepSpec {
        factor: SweepFactor::Scale,
        base_box: SweepSpec::default_base(),
        pred_offset: BoxDelta {
            dcx: 0.4,
            dcy: -0.3,
            dw: 0.5,
            dh: -0.2,
            dtheta: 0.15,
        },
        range: (1.0, 10.0),
        steps: 37,
        losses: SweepLoss::ALL.into_iter().collect(),
        boundary_min: false,
    };
    let dir = tempfile::tempdir().unwrap();
    let (pa, pb) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    emit_csv(&run_sweep(&spec).unwrap(), &pa).unwrap();
    emit_csv(&run_sweep(&spec).unwrap(), &pb).unwrap();
    let identical = std::fs::read(&pa).unwrap() == std::fs::read(&pb).unwrap();

    let table = read_csv(&pa).unwrap();
    let spread = |name: &str| {
        let c = table.column(name).unwrap();
        c.iter().cloned().fold(f64::MIN, f64::max) - c.iter().cloned().fold(f64::MAX, f64::min)
    };
    let increasing = |name: &str| table.column(name).unwrap().windows(2).all(|w| w[1] > w[0]);
    let (st, sp) = (spread("mdl_t"), spread("mdl_p"));
    let (l1_up, sl1_up) = (increasing("l1"), increasing("smooth_l1"));
    outcome(
        identical && st <= 1e-9 && sp <= 1e-9 && l1_up && sl1_up && table.rows.len() == 37,
        format!(
            "byte-identical: {identical}, MDL-t/MDL-p spread {st:.1e}/{sp:.1e} (tol 1e-9), L1 increasing: {l1_up}, SmoothL1 increasing: {sl1_up}"
        ),
    )
}

fn evaluation_sanity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut gts = Vec::new();
    for image in 0..3 {
        let mut instances = Vec::new();
        for category in DotaCategory::ALL {
            for k in 0..2 {
                let b = ObbCenterWHAngle {
                    cx: 100.0 * category.index() as f64 + rng.gen_range(0.0..40.0),
                    cy: 100.0 * k as f64 + rng.gen_range(0.0..40.0),
                    w: rng.gen_range(5.0..30.0),
                    h: rng.gen_range(5.0..30.0),
                    theta: rng.gen_range(-PI..PI),
                };
                instances.push(DotaInstance {
                    bbox: b.to_vertices().unwrap(),
                    category,
                    difficult: image == 1 && k == 1,
                });
            }
        }
        gts.push(DotaAnnotation {
            image_id: format!("P{image:04}"),
            instances,
        });
    }
    let as_preds: Vec<ImagePredictions> = gts
        .iter()
        .map(|a| ImagePredictions {
            image_id: a.image_id.clone(),
            detections: a
                .instances
                .iter()
                .filter(|i| !i.difficult)
                .map(|i| Detection::new(i.bbox, 1.0, i.category.index()).unwrap())
                .collect(),
        })
        .collect();
    let perfect = evaluate_map(&gts, &as_preds, 0.5, ApInterpolation::ElevenPoint);
    let empty = evaluate_map(&gts, &[], 0.5, ApInterpolation::ElevenPoint);
    let classes_ok = perfect.per_class_ap.len() == 15 && perfect.per_class_ap.values().all(|&v| v == 1.0);
    outcome(
        perfect.map_score == 1.0 && classes_ok && empty.map_score == 0.0,
        format!(
            "gt-as-predictions mAP = {:.4} (expect 1.0000 exactly, 15 classes), empty predictions mAP = {:.4} (expect 0.0000)",
            perfect.map_score, empty.map_score
        ),
    )
}

fn decode_arithmetic() -> Outcome {
    let (w, h) = (32usize, 24usize);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut fields = PredictionFields {
        heatmaps: vec![HeatmapGrid::zeros(w, h).unwrap(); 2],
        box_field: vec![[0.0; 8]; w * h],
        offset_field: vec![[0.0; 2]; w * h],
    };
    // Eighths are exact in binary, so the expected vertices are exact too.
    let eighth = |rng: &mut ChaCha8Rng, lo: i32, hi: i32| rng.gen_range(lo * 8..hi * 8) as f64 / 8.0;
    let mut expected = Vec::new();
    let cells: [(usize, usize, usize, f64); 5] = [
        (10, 7, 0, 0.9),
        (3, 3, 1, 0.8),
        (25, 18, 0, 0.7),
        (20, 2, 1, 0.6),
        (6, 20, 0, 0.5),
    ];
    for (x, y, class, score) in cells {
        let i = y * w + x;
        fields.heatmaps[class].set(x, y, score).unwrap();
        let mut v: [f64; 8] = std::array::from_fn(|_| eighth(&mut rng, -4, 4));
        let mut o = [eighth(&mut rng, 0, 1), eighth(&mut rng, 0, 1)];
        if (x, y) == (10, 7) {
            // The worked example: zero offset, vector a = (-2, -1).
            o = [0.0, 0.0];
            v[0] = -2.0;
            v[1] = -1.0;
        }
        fields.box_field[i] = v;
        fields.offset_field[i] = o;
        let pts: [f64; 8] = std::array::from_fn(|k| {
            let cell = if k % 2 == 0 { x } else { y } as f64;
            (cell + o[k % 2] + v[k]) * 4.0
        });
        expected.push((score, class, pts));
    }
    let out = decode_predictions(&fields, &DecodeParams::default()).unwrap();
    let example = out.first().map(|d| d.bbox.a()) == Some(Point2::new(32.0, 24.0));
    let exact = example
        && out.len() == expected.len()
        && out
            .iter()
            .zip(&expected)
            .all(|(d, (s, c, pts))| d.score == *s && d.class_id == *c && d.bbox.to_array() == *pts);
    outcome(
        exact,
        format!(
            "{} peaks decoded, vertices equal (cell + offset + vector) * 4 exactly: {exact}; example cell (10,7) vertex a = ({}, {})",
            out.len(),
            out[0].bbox.a().x,
            out[0].bbox.a().y
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("scale invariance", scale_invariance),
        ("similarity invariance", similarity_invariance),
        ("SkewIoU oracle equivalence", skew_iou_oracles),
        ("boundary continuity", boundary_continuity),
        ("gradient suite", gradient_suite),
        ("hand-oracle values", hand_oracles),
        ("sweep CSV determinism and trends", sweep_csv),
        ("evaluation sanity", evaluation_sanity),
        ("decode arithmetic", decode_arithmetic),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        failures += usize::from(!o.passed);
        println!(
            "{} {}. {name}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
