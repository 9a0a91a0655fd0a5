//! Loss kernels for eight-parameter boxes and center-point heatmaps.

mod covariance;
mod heatmap;
mod mdl;
mod norm;
mod total;

pub use covariance::{
    covariance_from_vertices, mahalanobis_distance, Covariance2, Precision, REGULARIZATION_ABS, REGULARIZATION_REL,
};
pub use heatmap::{
    focal_heatmap_grad, focal_heatmap_loss, gaussian_heatmap_target, gaussian_radius, gaussian_sigma,
    gaussian_sigma_for_box, HeatmapGrid, FOCAL_ALPHA, FOCAL_BETA, GAUSSIAN_MIN_OVERLAP, PRED_CLAMP,
};
pub use mdl::{
    mdl, mdl_boundary_min, mdl_boundary_min_grad, mdl_cyclic, mdl_grad, mdl_with_covariance, mdl_with_covariance_grad,
    offset_loss, offset_loss_grad, BoxGrad, CovarianceSource, Offset2, SigmaGradient,
};
pub use norm::{ln_norm_boundary_min, ln_norm_boundary_min_grad, ln_norm_cyclic, ln_norm_grad, ln_norm_loss, NormKind};
pub use total::{total_loss, LossBreakdown};
