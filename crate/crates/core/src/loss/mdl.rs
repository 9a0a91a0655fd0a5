//! Mahalanobis distance loss over the four positionally paired vertices,
//! its cyclic-relabelling minimum, and the Mahalanobis offset loss.

use serde::{Deserialize, Serialize};

use super::covariance::{covariance_of_points, Covariance2, Precision, REGULARIZATION_REL};
use crate::error::{Error, Result};
use crate::geometry::{ObbVertices, Point2};

/// Which box supplies the covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CovarianceSource {
    /// Σ from the ground-truth vertices (MDL-t).
    FromTarget,
    /// Σ from the predicted vertices (MDL-p).
    FromPrediction,
}

/// How the gradient treats Σ when it is computed from the prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SigmaGradient {
    /// Σ is held fixed; only the displacement terms are differentiated.
    #[default]
    Constant,
    /// Differentiate through Σ as well.
    Full,
}

/// Gradient with respect to `[ax, ay, bx, by, cx, cy, dx, dy]` of the prediction.
pub type BoxGrad = [f64; 8];

fn source_covariance(pred: &ObbVertices, target: &ObbVertices, source: CovarianceSource) -> Covariance2 {
    match source {
        CovarianceSource::FromTarget => covariance_of_points(target.points()),
        CovarianceSource::FromPrediction => covariance_of_points(pred.points()),
    }
}

fn mean_distance(pred: &ObbVertices, target: &ObbVertices, prec: &Precision) -> f64 {
    pred.points()
        .iter()
        .zip(target.points())
        .map(|(p, t)| prec.distance(p.sub(*t)))
        .sum::<f64>()
        / 4.0
}

/// Mean Mahalanobis distance between paired vertices, with Σ taken from
/// the box named by `source`.
pub fn mdl(pred: &ObbVertices, target: &ObbVertices, source: CovarianceSource) -> Result<f64> {
    mdl_with_covariance(pred, target, &source_covariance(pred, target, source))
}

/// MDL under an explicitly supplied covariance.
pub fn mdl_with_covariance(pred: &ObbVertices, target: &ObbVertices, sigma: &Covariance2) -> Result<f64> {
    let prec = sigma.precision()?;
    Ok(mean_distance(pred, target, &prec))
}

/// MDL with a fixed covariance and its gradient.
pub fn mdl_with_covariance_grad(
    pred: &ObbVertices,
    target: &ObbVertices,
    sigma: &Covariance2,
) -> Result<(f64, BoxGrad)> {
    let prec = sigma.precision()?;
    let mut grad = [0.0; 8];
    let mut value = 0.0;
    for (i, (p, t)) in pred.points().iter().zip(target.points()).enumerate() {
        let d = p.sub(*t);
        let md = prec.distance(d);
        value += md;
        if md > 0.0 {
            let u = prec.apply(d);
            grad[2 * i] = 0.25 * u.x / md;
            grad[2 * i + 1] = 0.25 * u.y / md;
        }
    }
    Ok((0.25 * value, grad))
}

/// MDL and its gradient with respect to the predicted vertices.
///
/// With [`CovarianceSource::FromPrediction`] and [`SigmaGradient::Full`] the
/// dependence of Σ (including any regularization shift) on the prediction is
/// differentiated too.
pub fn mdl_grad(
    pred: &ObbVertices,
    target: &ObbVertices,
    source: CovarianceSource,
    mode: SigmaGradient,
) -> Result<(f64, BoxGrad)> {
    let sigma = source_covariance(pred, target, source);
    let (value, mut grad) = mdl_with_covariance_grad(pred, target, &sigma)?;
    if source == CovarianceSource::FromPrediction && mode == SigmaGradient::Full {
        add_sigma_terms(pred, target, &sigma, &mut grad)?;
    }
    Ok((value, grad))
}

/// Adds ∂L/∂Σ · ∂Σ/∂pred for Σ built from the predicted vertices.
fn add_sigma_terms(pred: &ObbVertices, target: &ObbVertices, sigma: &Covariance2, grad: &mut BoxGrad) -> Result<()> {
    let prec = sigma.precision()?;
    // dMD = -(uᵀ dΣ u) / (2 MD) with u = Σ⁻¹ d; the loss averages over 4.
    let (mut gxx, mut gxy, mut gyy) = (0.0, 0.0, 0.0);
    for (p, t) in pred.points().iter().zip(target.points()) {
        let d = p.sub(*t);
        let md = prec.distance(d);
        if md == 0.0 {
            continue;
        }
        let u = prec.apply(d);
        let w = -0.125 / md;
        gxx += w * u.x * u.x;
        gxy += w * u.x * u.y;
        gyy += w * u.y * u.y;
    }
    // Regularization shift λ = 1e-7·tr(Σ) moves with the trace; the
    // absolute floor is constant.
    let lambda = sigma.regularization();
    let dlambda_dtr = if lambda > 0.0 && REGULARIZATION_REL * sigma.trace() >= lambda {
        REGULARIZATION_REL
    } else {
        0.0
    };
    let g_tr = (gxx + gyy) * dlambda_dtr;

    let c = pred.centroid();
    for (j, p) in pred.points().iter().enumerate() {
        let (ex, ey) = (p.x - c.x, p.y - c.y);
        // ∂Σxx/∂x = 2ex/3, ∂Σxy/∂x = ey/3, ∂Σxy/∂y = ex/3, ∂Σyy/∂y = 2ey/3.
        grad[2 * j] += (2.0 * gxx * ex + 2.0 * gxy * ey + 2.0 * g_tr * ex) / 3.0;
        grad[2 * j + 1] += (2.0 * gyy * ey + 2.0 * gxy * ex + 2.0 * g_tr * ey) / 3.0;
    }
    Ok(())
}

/// MDL for each of the four cyclic relabellings `(a,b,c,d)`, `(b,c,d,a)`,
/// `(c,d,a,b)`, `(d,a,b,c)` of the prediction.
pub fn mdl_cyclic(pred: &ObbVertices, target: &ObbVertices, source: CovarianceSource) -> Result<[f64; 4]> {
    // Σ depends only on the vertex set, so one inverse serves all four.
    let prec = source_covariance(pred, target, source).precision()?;
    Ok([0, 1, 2, 3].map(|k| mean_distance(&pred.cyclic_shift(k), target, &prec)))
}

/// Index of the smallest entry; the earliest wins ties.
pub(crate) fn argmin4(v: &[f64; 4]) -> usize {
    let mut best = 0;
    for k in 1..4 {
        if v[k] < v[best] {
            best = k;
        }
    }
    best
}

/// Minimum MDL over the cyclic relabellings of the predicted vertices.
pub fn mdl_boundary_min(pred: &ObbVertices, target: &ObbVertices, source: CovarianceSource) -> Result<f64> {
    let all = mdl_cyclic(pred, target, source)?;
    Ok(all[argmin4(&all)])
}

/// Gradient of [`mdl_boundary_min`], routed through the winning relabelling.
pub fn mdl_boundary_min_grad(
    pred: &ObbVertices,
    target: &ObbVertices,
    source: CovarianceSource,
    mode: SigmaGradient,
) -> Result<(f64, BoxGrad)> {
    let k = argmin4(&mdl_cyclic(pred, target, source)?);
    let (value, g) = mdl_grad(&pred.cyclic_shift(k), target, source, mode)?;
    Ok((value, unshift_grad(&g, k)))
}

/// Maps a gradient taken w.r.t. `pred.cyclic_shift(k)` back onto `pred`.
pub(crate) fn unshift_grad(g: &BoxGrad, k: usize) -> BoxGrad {
    let mut out = [0.0; 8];
    for j in 0..4 {
        let src = (j + k) % 4;
        out[2 * src] = g[2 * j];
        out[2 * src + 1] = g[2 * j + 1];
    }
    out
}

/// Sub-cell center offset. Ground-truth values are the fractional part of
/// the downsampled center; predictions are unconstrained.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Offset2 {
    pub dx: f64,
    pub dy: f64,
}

impl Offset2 {
    pub fn new(dx: f64, dy: f64) -> Result<Self> {
        if !(dx.is_finite() && dy.is_finite()) {
            return Err(Error::invalid("offset must be finite"));
        }
        Ok(Self { dx, dy })
    }

    /// Ground-truth offset of an image-space center after downsampling.
    pub fn ground_truth(center: Point2, downsample: f64) -> Result<Self> {
        if !(downsample > 0.0) || !center.is_finite() {
            return Err(Error::invalid("center must be finite and downsample positive"));
        }
        let (x, y) = (center.x / downsample, center.y / downsample);
        Ok(Self {
            dx: x - x.floor(),
            dy: y - y.floor(),
        })
    }

    fn as_point(self) -> Point2 {
        Point2::new(self.dx, self.dy)
    }
}

/// Mahalanobis distance between predicted and target offsets under the
/// covariance of the associated box.
pub fn offset_loss(pred: Offset2, target: Offset2, sigma: &Covariance2) -> Result<f64> {
    Ok(sigma.precision()?.distance(pred.as_point().sub(target.as_point())))
}

pub fn offset_loss_grad(pred: Offset2, target: Offset2, sigma: &Covariance2) -> Result<(f64, [f64; 2])> {
    let prec = sigma.precision()?;
    let d = pred.as_point().sub(target.as_point());
    let md = prec.distance(d);
    if md == 0.0 {
        return Ok((0.0, [0.0; 2]));
    }
    let u = prec.apply(d);
    Ok((md, [u.x / md, u.y / md]))
}
