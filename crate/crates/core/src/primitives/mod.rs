//! Distances, overlap, assignment and state estimation used by the trackers.

mod geometry;
mod hungarian;
mod kalman;

pub use geometry::{cosine_distance, euclidean, iou, pairwise_distances};
pub use hungarian::{hungarian, Assignment, CostMatrix};
pub use kalman::{bbox_to_measurement, kf_init, kf_predict, kf_update, KalmanParams, KalmanState};
