//! Central-difference verification of the analytic loss gradients.
//!
//! Each differentiable loss is evaluated on randomly drawn, well-conditioned
//! instances. Instances near a non-smooth point (zero vertex displacement,
//! the smooth-L1 kink, a near tie between cyclic relabellings) are rejected
//! and redrawn, since finite differences say nothing useful there.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ObbCenterWHAngle, ObbVertices};
use crate::loss::{
    covariance_from_vertices, focal_heatmap_grad, gaussian_heatmap_target, ln_norm_boundary_min_grad, ln_norm_cyclic,
    ln_norm_grad, mdl_boundary_min_grad, mdl_cyclic, mdl_grad, mdl_with_covariance_grad, offset_loss_grad, Covariance2,
    CovarianceSource, HeatmapGrid, NormKind, Offset2, SigmaGradient, FOCAL_ALPHA, FOCAL_BETA,
};

pub const DEFAULT_STEP: f64 = 1e-6;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;
/// Minimum distance from a kink or a relabelling tie for an accepted case.
pub const KINK_MARGIN: f64 = 1e-3;

const MAX_DRAWS_PER_CASE: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradReport {
    pub op_name: String,
    pub cases: usize,
    pub max_rel_error: f64,
    /// JSON encoding of the instance that produced `max_rel_error`.
    pub worst_input: String,
    pub passed: bool,
}

/// `g_i = (f(x + h e_i) - f(x - h e_i)) / 2h`
pub fn central_difference<F>(f: F, x: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(format!("step must be positive, got {step}")));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + step;
        let fp = f(&probe);
        probe[i] = orig - step;
        let fm = f(&probe);
        probe[i] = orig;
        if !(fp.is_finite() && fm.is_finite()) {
            return Err(Error::Oracle(format!(
                "non-finite evaluation at coordinate {i}: f(+h) = {fp}, f(-h) = {fm}"
            )));
        }
        grad.push((fp - fm) / (2.0 * step));
    }
    Ok(grad)
}

/// Largest elementwise `|a - g| / max(|a|, |g|, 1e-8)`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &g)| (a - g).abs() / a.abs().max(g.abs()).max(1e-8))
        .fold(0.0, f64::max)
}

/// A differentiable scalar function of a flat input vector, with its
/// analytic gradient.
struct Case {
    x: Vec<f64>,
    context: serde_json::Value,
    value: Box<dyn Fn(&[f64]) -> f64>,
    grad: Box<dyn Fn(&[f64]) -> Vec<f64>>,
}

type Sampler = fn(&mut ChaCha8Rng) -> Option<Case>;

fn operations() -> Vec<(&'static str, Sampler)> {
    vec![
        ("mdl_t", sample_mdl_t),
        ("mdl_p_full", sample_mdl_p_full),
        ("mdl_p_constant", sample_mdl_p_constant),
        ("mdl_boundary_min_t", sample_mdl_min_t),
        ("mdl_boundary_min_p_full", sample_mdl_min_p_full),
        ("l1", sample_l1),
        ("l2", sample_l2),
        ("smooth_l1", sample_smooth_l1),
        ("smooth_l1_boundary_min", sample_smooth_l1_min),
        ("focal_heatmap", sample_focal),
        ("offset", sample_offset),
    ]
}

/// Checks every differentiable loss on `n_cases` random instances.
/// Deterministic for a given `(seed, n_cases, tolerance)`.
pub fn check_all(seed: u64, n_cases: usize, tolerance: f64) -> Result<Vec<GradReport>> {
    check_all_with_step(seed, n_cases, tolerance, DEFAULT_STEP)
}

pub fn check_all_with_step(seed: u64, n_cases: usize, tolerance: f64, step: f64) -> Result<Vec<GradReport>> {
    if n_cases == 0 {
        return Err(Error::invalid("n_cases must be at least 1"));
    }
    if !(tolerance >= 0.0) {
        return Err(Error::invalid(format!(
            "tolerance must be non-negative, got {tolerance}"
        )));
    }
    operations()
        .into_iter()
        .enumerate()
        .map(|(i, (name, sampler))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            run_op(name, sampler, &mut rng, n_cases, tolerance, step)
        })
        .collect()
}

fn run_op(
    name: &str,
    sampler: Sampler,
    rng: &mut ChaCha8Rng,
    n_cases: usize,
    tolerance: f64,
    step: f64,
) -> Result<GradReport> {
    let mut worst = (0.0, serde_json::Value::Null);
    for _ in 0..n_cases {
        let case = draw(sampler, rng, name)?;
        let analytic = (case.grad)(&case.x);
        let numeric = central_difference(&case.value, &case.x, step)?;
        let err = max_relative_error(&analytic, &numeric);
        if err > worst.0 || worst.1.is_null() {
            worst = (err, serde_json::json!({ "x": case.x, "context": case.context }));
        }
    }
    Ok(GradReport {
        op_name: name.to_string(),
        cases: n_cases,
        max_rel_error: worst.0,
        worst_input: worst.1.to_string(),
        passed: worst.0 <= tolerance,
    })
}

fn draw(sampler: Sampler, rng: &mut ChaCha8Rng, name: &str) -> Result<Case> {
    for _ in 0..MAX_DRAWS_PER_CASE {
        if let Some(c) = sampler(rng) {
            return Ok(c);
        }
    }
    Err(Error::Oracle(format!(
        "could not draw a well-conditioned case for {name}"
    )))
}

/// Rectangle with sides in [0.1, 10], aspect ratio at most 10.
fn random_box(rng: &mut ChaCha8Rng) -> ObbCenterWHAngle {
    loop {
        let w: f64 = rng.gen_range(0.1..10.0);
        let h: f64 = rng.gen_range(0.1..10.0);
        if w.max(h) / w.min(h) > 10.0 {
            continue;
        }
        return ObbCenterWHAngle {
            cx: rng.gen_range(-20.0..20.0),
            cy: rng.gen_range(-20.0..20.0),
            w,
            h,
            theta: rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
        };
    }
}

/// A target box and a prediction made by jittering every vertex by up to
/// half the target's shorter side.
fn random_pair(rng: &mut ChaCha8Rng) -> (ObbVertices, ObbVertices) {
    let t = random_box(rng);
    let target = t.to_vertices().expect("finite box");
    let jitter = 0.5 * t.w.min(t.h);
    let mut p = target.to_array();
    for v in &mut p {
        *v += rng.gen_range(-jitter..jitter);
    }
    (ObbVertices::from_array(p).expect("finite box"), target)
}

fn boxed(x: &[f64]) -> Option<ObbVertices> {
    let mut a = [0.0; 8];
    a.copy_from_slice(x);
    ObbVertices::from_array(a).ok()
}

fn pair_context(target: &ObbVertices) -> serde_json::Value {
    serde_json::json!({ "target": target.to_array() })
}

/// Every paired vertex is at least `KINK_MARGIN` away from its target.
fn displacements_clear(pred: &ObbVertices, target: &ObbVertices) -> bool {
    pred.points()
        .iter()
        .zip(target.points())
        .all(|(p, t)| p.sub(*t).norm() >= KINK_MARGIN)
}

/// The smallest of four relabelling losses beats the runner-up by the margin.
fn unique_min(v: &[f64; 4]) -> bool {
    let mut s = *v;
    s.sort_by(f64::total_cmp);
    s[1] - s[0] >= KINK_MARGIN
}

fn mdl_case(pred: ObbVertices, target: ObbVertices, source: CovarianceSource, mode: SigmaGradient, min: bool) -> Case {
    let value = move |x: &[f64]| {
        let p = match boxed(x) {
            Some(p) => p,
            None => return f64::NAN,
        };
        let r = if min {
            mdl_boundary_min_grad(&p, &target, source, mode)
        } else {
            mdl_grad(&p, &target, source, mode)
        };
        r.map_or(f64::NAN, |(v, _)| v)
    };
    let grad = move |x: &[f64]| {
        let p = boxed(x).expect("finite input");
        let r = if min {
            mdl_boundary_min_grad(&p, &target, source, mode)
        } else {
            mdl_grad(&p, &target, source, mode)
        };
        r.expect("well-conditioned case").1.to_vec()
    };
    Case {
        x: pred.to_array().to_vec(),
        context: pair_context(&target),
        value: Box::new(value),
        grad: Box::new(grad),
    }
}

fn sample_mdl(rng: &mut ChaCha8Rng, source: CovarianceSource, mode: SigmaGradient) -> Option<Case> {
    let (pred, target) = random_pair(rng);
    displacements_clear(&pred, &target).then(|| mdl_case(pred, target, source, mode, false))
}

fn sample_mdl_min(rng: &mut ChaCha8Rng, source: CovarianceSource, mode: SigmaGradient) -> Option<Case> {
    let (pred, target) = random_pair(rng);
    // Mix in relabelled predictions so non-identity winners get exercised.
    let pred = pred.cyclic_shift(rng.gen_range(0..4));
    let all = mdl_cyclic(&pred, &target, source).ok()?;
    let clear = (0..4).all(|k| displacements_clear(&pred.cyclic_shift(k), &target));
    (clear && unique_min(&all)).then(|| mdl_case(pred, target, source, mode, true))
}

fn sample_mdl_t(rng: &mut ChaCha8Rng) -> Option<Case> {
    sample_mdl(rng, CovarianceSource::FromTarget, SigmaGradient::Constant)
}

fn sample_mdl_p_full(rng: &mut ChaCha8Rng) -> Option<Case> {
    sample_mdl(rng, CovarianceSource::FromPrediction, SigmaGradient::Full)
}

fn sample_mdl_min_t(rng: &mut ChaCha8Rng) -> Option<Case> {
    sample_mdl_min(rng, CovarianceSource::FromTarget, SigmaGradient::Constant)
}

fn sample_mdl_min_p_full(rng: &mut ChaCha8Rng) -> Option<Case> {
    sample_mdl_min(rng, CovarianceSource::FromPrediction, SigmaGradient::Full)
}

/// Constant-Σ mode for MDL-p: Σ is frozen at the prediction's covariance,
/// so the oracle differentiates with that Σ held fixed.
fn sample_mdl_p_constant(rng: &mut ChaCha8Rng) -> Option<Case> {
    let (pred, target) = random_pair(rng);
    if !displacements_clear(&pred, &target) {
        return None;
    }
    let sigma = covariance_from_vertices(&pred);
    let value = move |x: &[f64]| {
        boxed(x)
            .and_then(|p| mdl_with_covariance_grad(&p, &target, &sigma).ok())
            .map_or(f64::NAN, |(v, _)| v)
    };
    let grad = move |x: &[f64]| {
        let p = boxed(x).expect("finite input");
        // The analytic side goes through the public MDL-p entry point.
        let (_, g) = mdl_grad(&p, &target, CovarianceSource::FromPrediction, SigmaGradient::Constant)
            .expect("well-conditioned case");
        g.to_vec()
    };
    Some(Case {
        x: pred.to_array().to_vec(),
        context: serde_json::json!({ "target": target.to_array(), "sigma": [sigma.sxx, sigma.sxy, sigma.syy] }),
        value: Box::new(value),
        grad: Box::new(grad),
    })
}

fn norm_case(pred: ObbVertices, target: ObbVertices, kind: NormKind, min: bool) -> Case {
    let value = move |x: &[f64]| {
        boxed(x).map_or(f64::NAN, |p| {
            if min {
                ln_norm_boundary_min_grad(&p, &target, kind).0
            } else {
                ln_norm_grad(&p, &target, kind).0
            }
        })
    };
    let grad = move |x: &[f64]| {
        let p = boxed(x).expect("finite input");
        let g = if min {
            ln_norm_boundary_min_grad(&p, &target, kind).1
        } else {
            ln_norm_grad(&p, &target, kind).1
        };
        g.to_vec()
    };
    Case {
        x: pred.to_array().to_vec(),
        context: pair_context(&target),
        value: Box::new(value),
        grad: Box::new(grad),
    }
}

/// Coordinate differences stay clear of zero (L1) and of |x| = 1 (smooth L1).
fn coords_clear(pred: &ObbVertices, target: &ObbVertices) -> bool {
    pred.to_array().iter().zip(target.to_array()).all(|(p, t)| {
        let d = (p - t).abs();
        d >= KINK_MARGIN && (d - 1.0).abs() >= KINK_MARGIN
    })
}

fn sample_norm(rng: &mut ChaCha8Rng, kind: NormKind) -> Option<Case> {
    let (pred, target) = random_pair(rng);
    coords_clear(&pred, &target).then(|| norm_case(pred, target, kind, false))
}

fn sample_l1(rng: &mut ChaCha8Rng) -> Option<Case> {
    sample_norm(rng, NormKind::L1)
}

fn sample_l2(rng: &mut ChaCha8Rng) -> Option<Case> {
    sample_norm(rng, NormKind::L2)
}

fn sample_smooth_l1(rng: &mut ChaCha8Rng) -> Option<Case> {
    sample_norm(rng, NormKind::SmoothL1)
}

fn sample_smooth_l1_min(rng: &mut ChaCha8Rng) -> Option<Case> {
    let (pred, target) = random_pair(rng);
    let pred = pred.cyclic_shift(rng.gen_range(0..4));
    let kind = NormKind::SmoothL1;
    let all = ln_norm_cyclic(&pred, &target, kind);
    let clear = (0..4).all(|k| coords_clear(&pred.cyclic_shift(k), &target));
    (clear && unique_min(&all)).then(|| norm_case(pred, target, kind, true))
}

/// Small grid with one or two Gaussian objects; predictions drawn away
/// from the clamp bounds.
fn sample_focal(rng: &mut ChaCha8Rng) -> Option<Case> {
    let (w, h) = (6usize, 5usize);
    let n_obj = rng.gen_range(1..=2);
    let centers: Vec<_> = (0..n_obj)
        .map(|_| crate::geometry::Point2::new(rng.gen_range(0.0..w as f64), rng.gen_range(0.0..h as f64)))
        .collect();
    // Wide kernels and small predictions leave cells whose gradient sits
    // below the finite-difference rounding floor of the summed loss.
    let sigmas: Vec<f64> = (0..n_obj).map(|_| rng.gen_range(1.0..1.2)).collect();
    let target = gaussian_heatmap_target(w, h, &centers, &sigmas).ok()?;
    let pred: Vec<f64> = (0..w * h).map(|_| rng.gen_range(0.2..0.95)).collect();

    let t2 = target.clone();
    let value = move |x: &[f64]| {
        HeatmapGrid::new(w, h, x.to_vec())
            .and_then(|p| focal_heatmap_grad(&p, &t2, FOCAL_ALPHA, FOCAL_BETA))
            .map_or(f64::NAN, |(v, _)| v)
    };
    let t3 = target.clone();
    let grad = move |x: &[f64]| {
        let p = HeatmapGrid::new(w, h, x.to_vec()).expect("valid grid");
        focal_heatmap_grad(&p, &t3, FOCAL_ALPHA, FOCAL_BETA)
            .expect("same shape")
            .1
    };
    Some(Case {
        x: pred,
        context: serde_json::json!({ "width": w, "height": h, "target": target.values() }),
        value: Box::new(value),
        grad: Box::new(grad),
    })
}

fn sample_offset(rng: &mut ChaCha8Rng) -> Option<Case> {
    let b = random_box(rng).to_vertices().expect("finite box");
    let sigma: Covariance2 = covariance_from_vertices(&b);
    let target = Offset2::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)).ok()?;
    let pred = Offset2::new(rng.gen_range(-0.5..1.5), rng.gen_range(-0.5..1.5)).ok()?;
    if (pred.dx - target.dx).hypot(pred.dy - target.dy) < KINK_MARGIN {
        return None;
    }
    let value = move |x: &[f64]| {
        Offset2::new(x[0], x[1])
            .and_then(|p| offset_loss_grad(p, target, &sigma))
            .map_or(f64::NAN, |(v, _)| v)
    };
    let grad = move |x: &[f64]| {
        let p = Offset2::new(x[0], x[1]).expect("finite offset");
        offset_loss_grad(p, target, &sigma)
            .expect("regularized sigma")
            .1
            .to_vec()
    };
    Some(Case {
        x: vec![pred.dx, pred.dy],
        context: serde_json::json!({ "target": [target.dx, target.dy], "sigma": [sigma.sxx, sigma.sxy, sigma.syy] }),
        value: Box::new(value),
        grad: Box::new(grad),
    })
}
