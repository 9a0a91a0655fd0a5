//! Center-point heatmaps: Gaussian targets and the penalty-reduced focal loss.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ObbVertices, Point2};

pub const FOCAL_ALPHA: f64 = 2.0;
pub const FOCAL_BETA: f64 = 4.0;
/// Predictions are clamped to `[PRED_CLAMP, 1 - PRED_CLAMP]` before the logs.
pub const PRED_CLAMP: f64 = 1e-6;
/// Minimum IoU the radius rule guarantees between a shifted box and the original.
pub const GAUSSIAN_MIN_OVERLAP: f64 = 0.7;

/// Row-major grid of per-cell scores in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapGrid {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl HeatmapGrid {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("heatmap dimensions must be at least 1"));
        }
        if values.len() != width * height {
            return Err(Error::invalid(format!(
                "heatmap of {width}x{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("heatmap value {v} outside [0, 1]")));
        }
        Ok(Self { width, height, values })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0.0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[self.index(x, y)]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!("heatmap value {v} outside [0, 1]")));
        }
        let i = self.index(x, y);
        self.values[i] = v;
        Ok(())
    }

    fn same_shape(&self, other: &HeatmapGrid) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Largest center displacement that keeps IoU ≥ `min_overlap` with a
/// `width` × `height` box, following the CornerNet radius heuristic.
pub fn gaussian_radius(width: f64, height: f64, min_overlap: f64) -> f64 {
    let (w, h, o) = (width, height, min_overlap);

    let b1 = h + w;
    let c1 = w * h * (1.0 - o) / (1.0 + o);
    let r1 = (b1 + (b1 * b1 - 4.0 * c1).sqrt()) / 2.0;

    let b2 = 2.0 * (h + w);
    let c2 = (1.0 - o) * w * h;
    let r2 = (b2 + (b2 * b2 - 16.0 * c2).sqrt()) / 2.0;

    let a3 = 4.0 * o;
    let b3 = -2.0 * o * (h + w);
    let c3 = (o - 1.0) * w * h;
    let r3 = (b3 + (b3 * b3 - 4.0 * a3 * c3).sqrt()) / 2.0;

    r1.min(r2).min(r3)
}

/// Kernel deviation for an object whose axis-aligned extent is
/// `width` × `height` heatmap cells: `max(1, r / 3)`.
pub fn gaussian_sigma(width: f64, height: f64) -> f64 {
    (gaussian_radius(width, height, GAUSSIAN_MIN_OVERLAP) / 3.0).max(1.0)
}

/// [`gaussian_sigma`] for an oriented box given in image pixels.
pub fn gaussian_sigma_for_box(b: &ObbVertices, downsample: f64) -> f64 {
    let xs = b.points().map(|p| p.x);
    let ys = b.points().map(|p| p.y);
    let extent = |v: [f64; 4]| {
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
        (hi - lo) / downsample
    };
    gaussian_sigma(extent(xs), extent(ys))
}

/// Splats one Gaussian per object at the integer cell of its center and
/// keeps the per-cell maximum. Centers are in heatmap cell units.
pub fn gaussian_heatmap_target(width: usize, height: usize, centers: &[Point2], sigmas: &[f64]) -> Result<HeatmapGrid> {
    if centers.len() != sigmas.len() {
        return Err(Error::invalid("one sigma per center required"));
    }
    let mut grid = HeatmapGrid::zeros(width, height)?;
    for (c, &sigma) in centers.iter().zip(sigmas) {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
        }
        let inside = c.x >= 0.0 && c.y >= 0.0 && c.x < width as f64 && c.y < height as f64;
        if !inside {
            return Err(Error::invalid(format!(
                "center ({}, {}) outside {width}x{height} grid",
                c.x, c.y
            )));
        }
        let (px, py) = (c.x.floor(), c.y.floor());
        let denom = 2.0 * sigma * sigma;
        for y in 0..height {
            for x in 0..width {
                let (dx, dy) = (x as f64 - px, y as f64 - py);
                let v = (-(dx * dx + dy * dy) / denom).exp();
                let i = grid.index(x, y);
                if v > grid.values[i] {
                    grid.values[i] = v;
                }
            }
        }
    }
    Ok(grid)
}

/// Per-image focal loss, summed over all cells (no normalization).
pub fn focal_heatmap_loss(pred: &HeatmapGrid, target: &HeatmapGrid, alpha: f64, beta: f64) -> Result<f64> {
    Ok(focal_heatmap_grad(pred, target, alpha, beta)?.0)
}

/// Focal loss and its gradient with respect to each predicted cell. Cells
/// whose prediction sits on a clamp bound get a zero gradient.
pub fn focal_heatmap_grad(pred: &HeatmapGrid, target: &HeatmapGrid, alpha: f64, beta: f64) -> Result<(f64, Vec<f64>)> {
    if !pred.same_shape(target) {
        return Err(Error::invalid(format!(
            "heatmap shapes differ: {}x{} vs {}x{}",
            pred.width, pred.height, target.width, target.height
        )));
    }
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(pred.values.len());
    for (&raw, &y) in pred.values.iter().zip(&target.values) {
        let p = raw.clamp(PRED_CLAMP, 1.0 - PRED_CLAMP);
        let clamped = p != raw;
        let (l, g) = if y == 1.0 {
            let q = 1.0 - p;
            let l = -q.powf(alpha) * p.ln();
            let g = alpha * q.powf(alpha - 1.0) * p.ln() - q.powf(alpha) / p;
            (l, g)
        } else {
            let wgt = (1.0 - y).powf(beta);
            let l = -wgt * p.powf(alpha) * (1.0 - p).ln();
            let g = -wgt * (alpha * p.powf(alpha - 1.0) * (1.0 - p).ln() - p.powf(alpha) / (1.0 - p));
            (l, g)
        };
        loss += l;
        grad.push(if clamped { 0.0 } else { g });
    }
    Ok((loss, grad))
}
