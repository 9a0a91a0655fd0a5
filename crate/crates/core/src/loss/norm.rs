//! Coordinate-wise l_n-norm baselines over the eight vertex coordinates.

use serde::{Deserialize, Serialize};

use super::mdl::{argmin4, unshift_grad, BoxGrad};
use crate::geometry::ObbVertices;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormKind {
    L1,
    L2,
    SmoothL1,
}

impl NormKind {
    /// Per-element loss and its derivative.
    #[inline]
    fn eval(self, x: f64) -> (f64, f64) {
        match self {
            NormKind::L1 => (x.abs(), sign(x)),
            NormKind::L2 => (x * x, 2.0 * x),
            NormKind::SmoothL1 => {
                if x.abs() < 1.0 {
                    (0.5 * x * x, x)
                } else {
                    (x.abs() - 0.5, sign(x))
                }
            }
        }
    }
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Mean of the element-wise loss over the eight coordinate differences.
pub fn ln_norm_loss(pred: &ObbVertices, target: &ObbVertices, kind: NormKind) -> f64 {
    ln_norm_grad(pred, target, kind).0
}

pub fn ln_norm_grad(pred: &ObbVertices, target: &ObbVertices, kind: NormKind) -> (f64, BoxGrad) {
    let (p, t) = (pred.to_array(), target.to_array());
    let mut grad = [0.0; 8];
    let mut total = 0.0;
    for i in 0..8 {
        let (v, g) = kind.eval(p[i] - t[i]);
        total += v;
        grad[i] = g / 8.0;
    }
    (total / 8.0, grad)
}

pub fn ln_norm_cyclic(pred: &ObbVertices, target: &ObbVertices, kind: NormKind) -> [f64; 4] {
    [0, 1, 2, 3].map(|k| ln_norm_loss(&pred.cyclic_shift(k), target, kind))
}

/// Minimum l_n loss over the four cyclic relabellings of the prediction.
pub fn ln_norm_boundary_min(pred: &ObbVertices, target: &ObbVertices, kind: NormKind) -> f64 {
    let all = ln_norm_cyclic(pred, target, kind);
    all[argmin4(&all)]
}

pub fn ln_norm_boundary_min_grad(pred: &ObbVertices, target: &ObbVertices, kind: NormKind) -> (f64, BoxGrad) {
    let k = argmin4(&ln_norm_cyclic(pred, target, kind));
    let (v, g) = ln_norm_grad(&pred.cyclic_shift(k), target, kind);
    (v, unshift_grad(&g, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ObbCenterWHAngle;

    const KINDS: [NormKind; 3] = [NormKind::L1, NormKind::L2, NormKind::SmoothL1];

    #[test]
    fn smooth_l1_elements() {
        assert_eq!(NormKind::SmoothL1.eval(0.5).0, 0.125);
        assert_eq!(NormKind::SmoothL1.eval(2.0).0, 1.5);
        assert_eq!(NormKind::SmoothL1.eval(-2.0).0, 1.5);
    }

    #[test]
    fn zero_for_identical_boxes() {
        let b = ObbCenterWHAngle::new(1.0, 2.0, 3.0, 4.0, 0.7)
            .unwrap()
            .to_vertices()
            .unwrap();
        for k in KINDS {
            assert_eq!(ln_norm_loss(&b, &b, k), 0.0);
            assert_eq!(ln_norm_boundary_min(&b, &b, k), 0.0);
        }
    }

    #[test]
    fn l1_is_homogeneous_in_scale() {
        let t = ObbCenterWHAngle::new(0.0, 0.0, 4.0, 2.0, 0.0)
            .unwrap()
            .to_vertices()
            .unwrap();
        let p = ObbCenterWHAngle::new(0.5, 0.25, 4.0, 2.0, 0.1)
            .unwrap()
            .to_vertices()
            .unwrap();
        let base = ln_norm_loss(&p, &t, NormKind::L1);
        for s in [2.0, 10.0] {
            let v = ln_norm_loss(&p.scale(s).unwrap(), &t.scale(s).unwrap(), NormKind::L1);
            assert!((v - s * base).abs() <= 1e-12 * v);
        }
    }

    #[test]
    fn quarter_turn_square_realigns() {
        let t = ObbCenterWHAngle::new(0.0, 0.0, 2.0, 2.0, 0.0)
            .unwrap()
            .to_vertices()
            .unwrap();
        let p = t.cyclic_shift(3);
        for k in KINDS {
            assert!(ln_norm_loss(&p, &t, k) > 0.0);
            assert_eq!(ln_norm_boundary_min(&p, &t, k), 0.0);
        }
    }

    #[test]
    fn boundary_min_not_above_plain() {
        let t = ObbCenterWHAngle::new(0.0, 0.0, 3.0, 1.0, 0.2)
            .unwrap()
            .to_vertices()
            .unwrap();
        let p = ObbCenterWHAngle::new(0.4, -0.3, 2.0, 1.5, 1.4)
            .unwrap()
            .to_vertices()
            .unwrap();
        for k in KINDS {
            assert!(ln_norm_boundary_min(&p, &t, k) <= ln_norm_loss(&p, &t, k));
        }
    }
}
