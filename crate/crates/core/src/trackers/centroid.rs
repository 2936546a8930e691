use crate::model::{representative_point, FrameObservations, TrackId};
use crate::primitives::euclidean;

use super::{CentroidConfig, DetAssignment, StepResult, Track, Tracker, TrackerKind};

/// Nearest-representative-point tracker.
///
/// Each detection independently takes the id of the closest point from the
/// previous frame (within `max_dist`). When several detections claim the same
/// previous track, the closest keeps its id and the others get fresh ids that
/// inherit it, so the duplicate surfaces downstream.
#[derive(Debug, Clone)]
pub struct CentroidTracker {
    cfg: CentroidConfig,
    /// Tracks observed in the previous frame, ascending by id.
    prev: Vec<Track>,
    next_id: TrackId,
}

impl CentroidTracker {
    pub fn new(cfg: CentroidConfig) -> Self {
        Self {
            cfg,
            prev: Vec::new(),
            next_id: 1,
        }
    }

    /// Index into the previous tracks of the nearest point and its distance;
    /// ties go to the lowest track id.
    fn nearest(&self, p: crate::model::Point) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, t) in self.prev.iter().enumerate() {
            let d = euclidean(p, t.repr_point);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best
    }
}

impl Tracker for CentroidTracker {
    fn step(&mut self, obs: &FrameObservations) -> StepResult {
        let points: Vec<_> = obs.detections.iter().map(representative_point).collect();
        let claims: Vec<Option<(usize, f64)>> = points
            .iter()
            .map(|&p| self.nearest(p).filter(|&(_, d)| d <= self.cfg.max_dist))
            .collect();

        // Owner of each claimed previous track: smallest distance, then lowest detection index.
        let mut owner: Vec<Option<(usize, f64)>> = vec![None; self.prev.len()];
        for (j, c) in claims.iter().enumerate() {
            if let Some((i, d)) = *c {
                if owner[i].is_none_or(|(_, od)| d < od) {
                    owner[i] = Some((j, d));
                }
            }
        }

        let mut result = StepResult::default();
        let mut next = Vec::with_capacity(points.len());
        for (j, det) in obs.detections.iter().enumerate() {
            let assignment = match claims[j] {
                Some((i, _)) if owner[i].map(|o| o.0) == Some(j) => {
                    let mut t = self.prev[i].clone();
                    t.repr_point = points[j];
                    t.bbox = det.bbox;
                    t.hits += 1;
                    t.hit_streak += 1;
                    next.push(t);
                    DetAssignment {
                        det_index: j,
                        track_id: self.prev[i].track_id,
                        is_new_track: false,
                        inherited_from: None,
                    }
                }
                claim => {
                    let id = self.next_id;
                    self.next_id += 1;
                    let mut t = Track::new(id, points[j], det.bbox);
                    t.confirmed = true;
                    next.push(t);
                    let inherited_from = claim.map(|(i, _)| self.prev[i].track_id);
                    DetAssignment {
                        det_index: j,
                        track_id: id,
                        is_new_track: inherited_from.is_none(),
                        inherited_from,
                    }
                }
            };
            result.assignments.push(assignment);
        }

        result.retired = self
            .prev
            .iter()
            .enumerate()
            .filter(|(i, _)| owner[*i].is_none())
            .map(|(_, t)| t.track_id)
            .collect();
        next.sort_by_key(|t| t.track_id);
        self.prev = next;
        result
    }

    fn tracks(&self) -> &[Track] {
        &self.prev
    }

    fn kind(&self) -> TrackerKind {
        TrackerKind::Centroid
    }
}
