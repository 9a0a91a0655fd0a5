use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Loss components of one image and their per-object total.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub heatmap: f64,
    /// Sum of the per-object box losses.
    pub r#box: f64,
    /// Sum of the per-object offset losses.
    pub offset: f64,
    pub total: f64,
}

/// `(L_h + Σ L_b + Σ L_o) / N`. An image without objects yields all zeros.
pub fn total_loss(
    heatmap_loss: f64,
    box_losses: &[f64],
    offset_losses: &[f64],
    n_objects: usize,
) -> Result<LossBreakdown> {
    if box_losses.len() != n_objects || offset_losses.len() != n_objects {
        return Err(Error::invalid(format!(
            "expected {n_objects} box and offset losses, got {} and {}",
            box_losses.len(),
            offset_losses.len()
        )));
    }
    if n_objects == 0 {
        return Ok(LossBreakdown::default());
    }
    let parts = std::iter::once(heatmap_loss)
        .chain(box_losses.iter().copied())
        .chain(offset_losses.iter().copied());
    for v in parts {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::invalid(format!(
                "loss component {v} is not a finite non-negative value"
            )));
        }
    }
    let b: f64 = box_losses.iter().sum();
    let o: f64 = offset_losses.iter().sum();
    Ok(LossBreakdown {
        heatmap: heatmap_loss,
        r#box: b,
        offset: o,
        total: (heatmap_loss + b + o) / n_objects as f64,
    })
}
