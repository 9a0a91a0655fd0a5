use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::annotation::{DotaAnnotation, DotaCategory};
use crate::geometry::{polygon_iou, ConvexPolygon, Detection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ApInterpolation {
    /// Mean of the interpolated precision at recall 0, 0.1, ..., 1.
    #[default]
    ElevenPoint,
    /// Area under the monotone precision envelope.
    AllPoint,
}

/// Detections for one image; `class_id` is [`DotaCategory::index`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImagePredictions {
    pub image_id: String,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub per_class_ap: BTreeMap<DotaCategory, f64>,
    /// Unweighted mean over all fifteen categories.
    pub map_score: f64,
}

/// AP from a precision/recall curve ordered by descending score.
pub fn average_precision(recall: &[f64], precision: &[f64], interp: ApInterpolation) -> f64 {
    match interp {
        ApInterpolation::ElevenPoint => {
            let mut ap = 0.0;
            for k in 0..=10 {
                let t = k as f64 / 10.0;
                let p = recall
                    .iter()
                    .zip(precision)
                    .filter(|(r, _)| **r >= t)
                    .map(|(_, p)| *p)
                    .fold(0.0, f64::max);
                ap += p;
            }
            ap / 11.0
        }
        ApInterpolation::AllPoint => {
            let mut mrec = Vec::with_capacity(recall.len() + 2);
            mrec.push(0.0);
            mrec.extend_from_slice(recall);
            mrec.push(1.0);
            let mut mpre = Vec::with_capacity(precision.len() + 2);
            mpre.push(0.0);
            mpre.extend_from_slice(precision);
            mpre.push(0.0);
            for i in (0..mpre.len() - 1).rev() {
                mpre[i] = mpre[i].max(mpre[i + 1]);
            }
            (1..mrec.len())
                .filter(|&i| mrec[i] != mrec[i - 1])
                .map(|i| (mrec[i] - mrec[i - 1]) * mpre[i])
                .sum()
        }
    }
}

struct GtBox {
    poly: ConvexPolygon,
    difficult: bool,
    matched: bool,
}

fn class_ap(
    class: DotaCategory,
    gts: &[DotaAnnotation],
    preds: &[ImagePredictions],
    iou_threshold: f64,
    interp: ApInterpolation,
) -> f64 {
    let mut by_image: HashMap<&str, Vec<GtBox>> = HashMap::new();
    let mut npos = 0usize;
    for ann in gts {
        let entry = by_image.entry(ann.image_id.as_str()).or_default();
        for inst in ann.instances.iter().filter(|i| i.category == class) {
            npos += usize::from(!inst.difficult);
            entry.push(GtBox {
                poly: ConvexPolygon::enclosing(&inst.bbox),
                difficult: inst.difficult,
                matched: false,
            });
        }
    }
    if npos == 0 {
        return 0.0;
    }

    let mut dets: Vec<(&str, &Detection)> = preds
        .iter()
        .flat_map(|p| {
            p.detections
                .iter()
                .filter(|d| d.class_id == class.index())
                .map(move |d| (p.image_id.as_str(), d))
        })
        .collect();
    dets.sort_by(|a, b| b.1.score.total_cmp(&a.1.score));

    let (mut tp, mut fp) = (0usize, 0usize);
    let mut recall = Vec::with_capacity(dets.len());
    let mut precision = Vec::with_capacity(dets.len());
    for (image_id, det) in dets {
        let poly = ConvexPolygon::enclosing(&det.bbox);
        let mut best: Option<(usize, f64)> = None;
        if let Some(boxes) = by_image.get(image_id) {
            for (i, g) in boxes.iter().enumerate() {
                // Matched non-difficult boxes are no longer available.
                if g.matched && !g.difficult {
                    continue;
                }
                let iou = polygon_iou(&poly, &g.poly);
                if best.map_or(true, |(_, b)| iou > b) {
                    best = Some((i, iou));
                }
            }
        }
        match best {
            Some((i, iou)) if iou >= iou_threshold => {
                let g = &mut by_image.get_mut(image_id).expect("image present")[i];
                if g.difficult {
                    continue;
                }
                g.matched = true;
                tp += 1;
            }
            _ => fp += 1,
        }
        recall.push(tp as f64 / npos as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    average_precision(&recall, &precision, interp)
}

/// Rotated-box mAP. Predictions are ranked per class by descending score,
/// each matched greedily to the highest-IoU available ground truth; hits
/// on difficult ground truths are ignored. Categories with no
/// non-difficult ground truth score 0.
pub fn evaluate_map(
    gts: &[DotaAnnotation],
    preds: &[ImagePredictions],
    iou_threshold: f64,
    interp: ApInterpolation,
) -> EvalResult {
    let per_class_ap: BTreeMap<DotaCategory, f64> = DotaCategory::ALL
        .iter()
        .map(|&c| (c, class_ap(c, gts, preds, iou_threshold, interp)))
        .collect();
    let map_score = per_class_ap.values().sum::<f64>() / DotaCategory::ALL.len() as f64;
    EvalResult {
        per_class_ap,
        map_score,
    }
}
