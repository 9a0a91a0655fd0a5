//! Mahalanobis distance loss for eight-parameter oriented boxes.
//!
//! The crate is organised by concern:
//!
//! * [`geometry`] – box representations, exact rotated IoU, rotated NMS.
//! * [`loss`] – vertex covariance, Mahalanobis distance loss and its
//!   boundary-minimum form, l_n baselines, heatmap focal loss, total loss.
//! * [`gradcheck`] – central-difference verification of every analytic gradient.
//! * [`sweep`] – one-factor-at-a-time loss sweeps written as CSV.
//! * [`dota`] – DOTA-v1.0 annotations, patch planning, decoding and mAP.

pub mod dota;
pub mod error;
pub mod geometry;
pub mod gradcheck;
pub mod loss;
pub mod sweep;

pub use error::{Error, Result};
