use super::polygon::polygon_iou;
use super::{ConvexPolygon, Detection};
use crate::error::{Error, Result};

/// Greedy per-class non-maximum suppression using rotated IoU.
///
/// Detections are visited by descending score (ties keep input order). A
/// detection is dropped when its IoU with an already kept detection of the
/// same class exceeds `iou_threshold`. The result keeps the visiting order.
pub fn rotated_nms(dets: &[Detection], iou_threshold: f64) -> Result<Vec<Detection>> {
    if !(0.0..=1.0).contains(&iou_threshold) {
        return Err(Error::invalid(format!("iou threshold {iou_threshold} outside [0, 1]")));
    }
    let polys = dets
        .iter()
        .map(|d| d.bbox.to_polygon())
        .collect::<Result<Vec<ConvexPolygon>>>()?;
    Ok(nms_with_polygons(dets, &polys, iou_threshold))
}

/// NMS core with caller-supplied overlap polygons, one per detection.
pub(crate) fn nms_with_polygons(dets: &[Detection], polys: &[ConvexPolygon], iou_threshold: f64) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    // sort_by is stable, so equal scores stay in input order.
    order.sort_by(|&i, &j| dets[j].score.total_cmp(&dets[i].score));

    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let suppressed = kept
            .iter()
            .any(|&k| dets[k].class_id == dets[i].class_id && polygon_iou(&polys[k], &polys[i]) > iou_threshold);
        if !suppressed {
            kept.push(i);
        }
    }
    kept.into_iter().map(|i| dets[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ObbVertices;

    fn square(x: f64, y: f64) -> ObbVertices {
        ObbVertices::from_array([x, y, x + 1.0, y, x + 1.0, y + 1.0, x, y + 1.0]).unwrap()
    }

    fn det(x: f64, score: f64, class_id: usize) -> Detection {
        Detection::new(square(x, 0.0), score, class_id).unwrap()
    }

    #[test]
    fn identical_boxes_keep_best() {
        let out = rotated_nms(&[det(0.0, 0.8, 0), det(0.0, 0.9, 0)], 0.1).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].score, 0.9);
    }

    #[test]
    fn disjoint_boxes_survive() {
        let out = rotated_nms(&[det(0.0, 0.9, 0), det(5.0, 0.8, 0)], 0.1).unwrap();
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn third_overlap_suppressed_at_point_one() {
        // IoU of unit squares offset by 0.5 is 1/3.
        let out = rotated_nms(&[det(0.0, 0.9, 0), det(0.5, 0.8, 0)], 0.1).unwrap();
        assert_eq!(out.len(), 1);
        let out = rotated_nms(&[det(0.0, 0.9, 0), det(0.5, 0.8, 0)], 0.5).unwrap();
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn classes_are_independent() {
        let out = rotated_nms(&[det(0.0, 0.9, 0), det(0.0, 0.8, 1)], 0.1).unwrap();
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn ties_resolved_by_input_order() {
        let a = Detection::new(square(0.0, 0.0), 0.5, 0).unwrap();
        let b = Detection::new(square(0.0, 0.0), 0.5, 0).unwrap();
        let b = Detection {
            bbox: b.bbox.cyclic_shift(1),
            ..b
        };
        let out = rotated_nms(&[a, b], 0.1).unwrap();
        assert_eq!(out, vec![a]);
    }

    #[test]
    fn threshold_validated() {
        assert!(rotated_nms(&[], 1.5).is_err());
        assert!(rotated_nms(&[], 0.0).unwrap().is_empty());
    }
}
