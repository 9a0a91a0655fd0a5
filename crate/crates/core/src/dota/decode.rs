use serde::{Deserialize, Serialize};

use super::patch::PatchWindow;
use crate::error::{Error, Result};
use crate::geometry::{nms_with_polygons, ConvexPolygon, Detection, ObbVertices, Point2};
use crate::loss::HeatmapGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub top_k: usize,
    /// Cells must score strictly above this.
    pub score_min: f64,
    pub downsample: f64,
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self {
            top_k: 500,
            score_min: 0.1,
            downsample: 4.0,
        }
    }
}

/// Network outputs for one window: a heatmap per class plus per-cell box
/// vectors `[ax, ay, bx, by, cx, cy, dx, dy]` (center to vertex, in cells)
/// and center offsets `[ox, oy]`, all row-major over the heatmap grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionFields {
    pub heatmaps: Vec<HeatmapGrid>,
    pub box_field: Vec<[f64; 8]>,
    pub offset_field: Vec<[f64; 2]>,
}

impl PredictionFields {
    fn validate(&self) -> Result<(usize, usize)> {
        let first = self
            .heatmaps
            .first()
            .ok_or_else(|| Error::invalid("at least one class heatmap is required"))?;
        let (w, h) = (first.width(), first.height());
        if self.heatmaps.iter().any(|m| m.width() != w || m.height() != h) {
            return Err(Error::invalid("class heatmaps differ in size"));
        }
        if self.box_field.len() != w * h || self.offset_field.len() != w * h {
            return Err(Error::invalid(format!(
                "box/offset fields need {} cells, got {} and {}",
                w * h,
                self.box_field.len(),
                self.offset_field.len()
            )));
        }
        Ok((w, h))
    }
}

/// 3x3 peak test. Equal neighbours earlier in row-major order win, so a
/// plateau yields a single peak.
fn is_peak(map: &HeatmapGrid, x: usize, y: usize) -> bool {
    let (w, h) = (map.width() as isize, map.height() as isize);
    let v = map.get(x, y);
    let here = map.index(x, y);
    for dy in -1..=1isize {
        for dx in -1..=1isize {
            let (nx, ny) = (x as isize + dx, y as isize + dy);
            if (dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= w || ny >= h {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            let n = map.get(nx, ny);
            if n > v || (n == v && map.index(nx, ny) < here) {
                return false;
            }
        }
    }
    true
}

/// Picks up to `top_k` local maxima scoring above `score_min` across all
/// class heatmaps and turns each into a box in input-image pixels:
/// vertex = (cell + offset + vector) * downsample.
pub fn decode_predictions(fields: &PredictionFields, params: &DecodeParams) -> Result<Vec<Detection>> {
    let (w, h) = fields.validate()?;
    if !(params.downsample > 0.0 && params.downsample.is_finite()) {
        return Err(Error::invalid("downsample must be positive"));
    }
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (class_id, map) in fields.heatmaps.iter().enumerate() {
        for y in 0..h {
            for x in 0..w {
                let s = map.get(x, y);
                if s > params.score_min && is_peak(map, x, y) {
                    candidates.push((s, class_id, map.index(x, y)));
                }
            }
        }
    }
    // Descending score; ties by class, then cell index.
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    candidates.truncate(params.top_k);

    candidates
        .into_iter()
        .map(|(score, class_id, cell)| {
            let (x, y) = ((cell % w) as f64, (cell / w) as f64);
            let [ox, oy] = fields.offset_field[cell];
            let v = fields.box_field[cell];
            let (cx, cy) = (x + ox, y + oy);
            let k = params.downsample;
            let bbox = ObbVertices::from_points(
                [0, 1, 2, 3].map(|i| Point2::new((cx + v[2 * i]) * k, (cy + v[2 * i + 1]) * k)),
            )?;
            Detection::new(bbox, score, class_id)
        })
        .collect()
}

/// A detection mapped back to the original image, tagged with the window
/// it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedDetection {
    pub detection: Detection,
    pub image_id: String,
    pub scale: f64,
    pub window_origin: (u32, u32),
}

impl DecodedDetection {
    /// Maps a window-local detection into original-image coordinates.
    pub fn from_window(local: &Detection, window: &PatchWindow) -> Result<Self> {
        Ok(Self {
            detection: Detection {
                bbox: window.box_to_original(&local.bbox)?,
                ..*local
            },
            image_id: window.image_id.clone(),
            scale: window.scale,
            window_origin: (window.x0, window.y0),
        })
    }
}

/// Per-class rotated NMS over detections pooled from every window and
/// scale of one image. Non-convex predicted quadrilaterals are compared
/// through their convex hulls.
pub fn merge_multiscale(dets: &[DecodedDetection], nms_threshold: f64) -> Result<Vec<Detection>> {
    if !(0.0..=1.0).contains(&nms_threshold) {
        return Err(Error::invalid(format!("nms threshold {nms_threshold} outside [0, 1]")));
    }
    let plain: Vec<Detection> = dets.iter().map(|d| d.detection).collect();
    let polys: Vec<ConvexPolygon> = plain.iter().map(|d| ConvexPolygon::enclosing(&d.bbox)).collect();
    Ok(nms_with_polygons(&plain, &polys, nms_threshold))
}
