use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ObbVertices, Point2};

/// Relative eigenvalue floor below which a covariance is regularized.
pub const REGULARIZATION_REL: f64 = 1e-7;
/// Absolute lower bound on the regularization shift.
pub const REGULARIZATION_ABS: f64 = 1e-12;

/// Symmetric 2x2 covariance matrix `[[sxx, sxy], [sxy, syy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covariance2 {
    pub sxx: f64,
    pub sxy: f64,
    pub syy: f64,
}

impl Covariance2 {
    pub fn new(sxx: f64, sxy: f64, syy: f64) -> Result<Self> {
        if !(sxx.is_finite() && sxy.is_finite() && syy.is_finite()) {
            return Err(Error::invalid("covariance entries must be finite"));
        }
        Ok(Self { sxx, sxy, syy })
    }

    pub fn identity() -> Self {
        Self {
            sxx: 1.0,
            sxy: 0.0,
            syy: 1.0,
        }
    }

    pub fn trace(&self) -> f64 {
        self.sxx + self.syy
    }

    pub fn det(&self) -> f64 {
        self.sxx * self.syy - self.sxy * self.sxy
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.sxx + self.syy);
        let half_diff = 0.5 * (self.sxx - self.syy);
        let r = half_diff.hypot(self.sxy);
        (mean - r, mean + r)
    }

    /// The diagonal shift applied before inversion: zero for a
    /// well-conditioned matrix, otherwise `max(1e-7 * trace, 1e-12)`.
    pub fn regularization(&self) -> f64 {
        let tr = self.trace();
        let (lo, _) = self.eigenvalues();
        if tr > 0.0 && lo >= REGULARIZATION_REL * tr {
            0.0
        } else {
            (REGULARIZATION_REL * tr).max(REGULARIZATION_ABS)
        }
    }

    pub fn regularized(&self) -> Covariance2 {
        let lambda = self.regularization();
        Covariance2 {
            sxx: self.sxx + lambda,
            sxy: self.sxy,
            syy: self.syy + lambda,
        }
    }

    /// Closed-form inverse of the regularized matrix.
    pub fn precision(&self) -> Result<Precision> {
        let r = self.regularized();
        let det = r.det();
        if !(det.is_finite() && det > 0.0 && r.sxx > 0.0) {
            return Err(Error::SingularCovariance { det });
        }
        Ok(Precision {
            ixx: r.syy / det,
            ixy: -r.sxy / det,
            iyy: r.sxx / det,
        })
    }
}

/// Inverse covariance `Σ⁻¹`, stored by its three distinct entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Precision {
    pub ixx: f64,
    pub ixy: f64,
    pub iyy: f64,
}

impl Precision {
    /// `Σ⁻¹ d`
    #[inline]
    pub fn apply(&self, d: Point2) -> Point2 {
        Point2::new(self.ixx * d.x + self.ixy * d.y, self.ixy * d.x + self.iyy * d.y)
    }

    /// `dᵀ Σ⁻¹ d`, clamped at zero against rounding.
    #[inline]
    pub fn quad(&self, d: Point2) -> f64 {
        (self.ixx * d.x * d.x + 2.0 * self.ixy * d.x * d.y + self.iyy * d.y * d.y).max(0.0)
    }

    #[inline]
    pub fn distance(&self, d: Point2) -> f64 {
        self.quad(d).sqrt()
    }
}

/// Sample covariance of the four vertices around their mean, divisor 3.
pub fn covariance_from_vertices(b: &ObbVertices) -> Covariance2 {
    covariance_of_points(b.points())
}

pub(crate) fn covariance_of_points(pts: &[Point2; 4]) -> Covariance2 {
    // Canonical summation order: relabeling the vertices must not change
    // the rounding, or near-degenerate boxes lose cyclic invariance.
    let mut sorted = *pts;
    sorted.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let pts = &sorted;
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.x).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.y).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in pts {
        let (ex, ey) = (p.x - mx, p.y - my);
        sxx += ex * ex;
        sxy += ex * ey;
        syy += ey * ey;
    }
    let k = 1.0 / (n - 1.0);
    Covariance2 {
        sxx: sxx * k,
        sxy: sxy * k,
        syy: syy * k,
    }
}

/// `sqrt((m - n)ᵀ Σ⁻¹ (m - n))`.
pub fn mahalanobis_distance(m: Point2, n: Point2, sigma: &Covariance2) -> Result<f64> {
    if !(m.is_finite() && n.is_finite()) {
        return Err(Error::invalid("points must be finite"));
    }
    Ok(sigma.precision()?.distance(m.sub(n)))
}
