use serde::{Deserialize, Serialize};

use super::annotation::{DotaAnnotation, DotaInstance};
use crate::error::{Error, Result};
use crate::geometry::{intersect_convex, ConvexPolygon, ObbVertices, Point2};

/// An instance is kept in a window when at least this share of its area
/// falls inside the window.
pub const RETAIN_AREA_FRACTION: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchConfig {
    pub patch: u32,
    pub gap: u32,
    pub scales: Vec<f64>,
}

impl Default for PatchConfig {
    fn default() -> Self {
        Self {
            patch: 600,
            gap: 100,
            scales: vec![0.5, 1.0],
        }
    }
}

impl PatchConfig {
    pub fn stride(&self) -> u32 {
        self.patch - self.gap
    }

    fn validate(&self) -> Result<()> {
        if self.patch == 0 || self.gap >= self.patch {
            return Err(Error::invalid(format!(
                "patch size {} must exceed gap {}",
                self.patch, self.gap
            )));
        }
        if self.scales.is_empty() || !self.scales.iter().all(|s| s.is_finite() && *s > 0.0) {
            return Err(Error::invalid("scales must be positive and non-empty"));
        }
        Ok(())
    }
}

/// A crop window in the coordinates of the image resized by `scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchWindow {
    pub image_id: String,
    pub scale: f64,
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
    /// Retained instances in window-local coordinates.
    pub remapped_instances: Vec<DotaInstance>,
}

impl PatchWindow {
    pub fn width(&self) -> u32 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0
    }

    /// Window-local point to original-image coordinates.
    pub fn to_original(&self, p: Point2) -> Point2 {
        Point2::new((p.x + self.x0 as f64) / self.scale, (p.y + self.y0 as f64) / self.scale)
    }

    /// Original-image point to window-local coordinates.
    pub fn to_local(&self, p: Point2) -> Point2 {
        Point2::new(p.x * self.scale - self.x0 as f64, p.y * self.scale - self.y0 as f64)
    }

    pub fn box_to_original(&self, b: &ObbVertices) -> Result<ObbVertices> {
        b.map(|p| self.to_original(p))
    }

    pub fn box_to_local(&self, b: &ObbVertices) -> Result<ObbVertices> {
        b.map(|p| self.to_local(p))
    }

    fn local_rect(&self) -> ConvexPolygon {
        let (w, h) = (self.width() as f64, self.height() as f64);
        ConvexPolygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(w, 0.0),
            Point2::new(w, h),
            Point2::new(0.0, h),
        ])
        .expect("window rectangle is convex")
    }
}

/// Window origins along one axis of length `len`: a stride-spaced run from
/// zero, with the last window pulled back so it ends on the image edge.
pub fn axis_origins(len: u32, patch: u32, stride: u32) -> Vec<u32> {
    if len <= patch {
        return vec![0];
    }
    let mut out = Vec::new();
    let mut x = 0;
    loop {
        if x + patch >= len {
            out.push(len - patch);
            return out;
        }
        out.push(x);
        x += stride;
    }
}

fn scaled_len(len: u32, scale: f64) -> u32 {
    ((len as f64 * scale).round() as u32).max(1)
}

/// Tiles the image at every configured scale. Windows carry no instances;
/// see [`assign_instances`].
pub fn plan_patches(
    image_id: &str,
    image_width: u32,
    image_height: u32,
    cfg: &PatchConfig,
) -> Result<Vec<PatchWindow>> {
    if image_width == 0 || image_height == 0 {
        return Err(Error::invalid("image dimensions must be positive"));
    }
    cfg.validate()?;
    let mut out = Vec::new();
    for &scale in &cfg.scales {
        let (w, h) = (scaled_len(image_width, scale), scaled_len(image_height, scale));
        let xs = axis_origins(w, cfg.patch, cfg.stride());
        let ys = axis_origins(h, cfg.patch, cfg.stride());
        for &y0 in &ys {
            for &x0 in &xs {
                out.push(PatchWindow {
                    image_id: image_id.to_string(),
                    scale,
                    x0,
                    y0,
                    x1: (x0 + cfg.patch).min(w),
                    y1: (y0 + cfg.patch).min(h),
                    remapped_instances: Vec::new(),
                });
            }
        }
    }
    Ok(out)
}

/// Share of the instance's area inside the window, measured on the convex
/// hull of its (possibly non-convex) annotated quadrilateral.
fn inside_fraction(window: &PatchWindow, local: &ObbVertices) -> f64 {
    let rect = window.local_rect();
    let hull = ConvexPolygon::enclosing(local);
    let area = hull.area();
    if area <= 0.0 {
        // Degenerate annotation: kept only when it lies inside entirely.
        return if local.points().iter().all(|p| rect.contains(*p)) {
            1.0
        } else {
            0.0
        };
    }
    intersect_convex(&hull, &rect).map_or(0.0, |r| r.area() / area)
}

/// Fills each window with the instances of `annotation` that are at least
/// [`RETAIN_AREA_FRACTION`] inside it, remapped to window coordinates and
/// left unclipped.
pub fn assign_instances(windows: &mut [PatchWindow], annotation: &DotaAnnotation) -> Result<()> {
    for w in windows.iter_mut() {
        w.remapped_instances.clear();
        for inst in &annotation.instances {
            let local = w.box_to_local(&inst.bbox)?;
            if inside_fraction(w, &local) >= RETAIN_AREA_FRACTION {
                w.remapped_instances.push(DotaInstance { bbox: local, ..*inst });
            }
        }
    }
    Ok(())
}
