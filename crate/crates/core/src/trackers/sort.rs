use crate::model::{representative_point, BBox, Detection, FrameObservations, TrackId};
use crate::primitives::{hungarian, iou, kf_init, kf_predict, kf_update, CostMatrix, KalmanState};

use super::{DetAssignment, SortConfig, StepResult, Track, Tracker, TrackerKind};

const MIN_SIDE: f64 = 1e-3;

/// Boxes fed to the filter need a positive area.
fn filterable(b: &BBox) -> BBox {
    BBox::new(b.x, b.y, b.w.max(MIN_SIDE), b.h.max(MIN_SIDE))
}

/// Kalman/IoU machinery shared by SORT and the DeepSORT second stage.
#[derive(Debug, Clone)]
pub(crate) struct SortCore {
    pub cfg: SortConfig,
    pub tracks: Vec<Track>,
    next_id: TrackId,
    /// Appearance samples kept per track; `None` keeps no gallery.
    nn_budget: Option<usize>,
}

impl SortCore {
    pub fn new(cfg: SortConfig, nn_budget: Option<usize>) -> Self {
        Self {
            cfg,
            tracks: Vec::new(),
            next_id: 1,
            nn_budget,
        }
    }

    pub fn predict_all(&mut self) {
        for t in &mut self.tracks {
            if let Some(k) = &t.kstate {
                let k = kf_predict(k, &self.cfg.kalman);
                t.bbox = k.bbox();
                t.kstate = Some(k);
            }
            t.age_since_update += 1;
        }
    }

    /// IoU association between the listed tracks and detections. Returns
    /// `(track index, det index)` pairs passing `iou_thresh`.
    pub fn associate_iou(&self, track_idx: &[usize], det_idx: &[usize], dets: &[Detection]) -> Vec<(usize, usize)> {
        let cost = CostMatrix::from_fn(track_idx.len(), det_idx.len(), |i, j| {
            1.0 - iou(&self.tracks[track_idx[i]].bbox, &dets[det_idx[j]].bbox)
        });
        hungarian(&cost)
            .pairs
            .into_iter()
            .filter(|&(i, j)| 1.0 - cost.get(i, j) >= self.cfg.iou_thresh)
            .map(|(i, j)| (track_idx[i], det_idx[j]))
            .collect()
    }

    /// Applies matches, spawns tracks for `candidates` left unmatched and
    /// retires stale tracks.
    pub fn finish(
        &mut self,
        matches: &[(usize, usize)],
        candidates: &[usize],
        dets: &[Detection],
        suppressed: Vec<usize>,
    ) -> StepResult {
        let mut matched_track = vec![false; self.tracks.len()];
        let mut det_track: Vec<Option<(TrackId, bool)>> = vec![None; dets.len()];
        for &(ti, di) in matches {
            let det = &dets[di];
            let t = &mut self.tracks[ti];
            let z = filterable(&det.bbox);
            t.kstate = Some(match &t.kstate {
                Some(k) => kf_update(k, &z, &self.cfg.kalman),
                None => init_state(&z, &self.cfg),
            });
            t.bbox = det.bbox;
            t.repr_point = representative_point(det);
            t.hits += 1;
            t.hit_streak += 1;
            t.age_since_update = 0;
            if let (Some(budget), Some(e)) = (self.nn_budget, &det.embedding) {
                t.appearance_gallery.push_back(e.clone());
                while t.appearance_gallery.len() > budget {
                    t.appearance_gallery.pop_front();
                }
            }
            matched_track[ti] = true;
            det_track[di] = Some((t.track_id, false));
        }
        for (t, &m) in self.tracks.iter_mut().zip(&matched_track) {
            if !m {
                t.hit_streak = 0;
            }
        }

        let mut sorted: Vec<usize> = candidates.to_vec();
        sorted.sort_unstable();
        for di in sorted {
            if det_track[di].is_some() {
                continue;
            }
            let det = &dets[di];
            let id = self.next_id;
            self.next_id += 1;
            let mut t = Track::new(id, representative_point(det), det.bbox);
            t.kstate = Some(init_state(&filterable(&det.bbox), &self.cfg));
            if let (Some(_), Some(e)) = (self.nn_budget, &det.embedding) {
                t.appearance_gallery.push_back(e.clone());
            }
            self.tracks.push(t);
            det_track[di] = Some((id, true));
        }

        for t in &mut self.tracks {
            if t.hit_streak >= self.cfg.min_hits {
                t.confirmed = true;
            }
        }
        let max_age = self.cfg.max_age;
        let retired = self
            .tracks
            .iter()
            .filter(|t| t.age_since_update > max_age)
            .map(|t| t.track_id)
            .collect();
        self.tracks.retain(|t| t.age_since_update <= max_age);

        StepResult {
            assignments: det_track
                .into_iter()
                .enumerate()
                .filter_map(|(det_index, a)| {
                    a.map(|(track_id, is_new_track)| DetAssignment {
                        det_index,
                        track_id,
                        is_new_track,
                        inherited_from: None,
                    })
                })
                .collect(),
            retired,
            suppressed,
        }
    }
}

fn init_state(b: &BBox, cfg: &SortConfig) -> KalmanState {
    kf_init(b, &cfg.kalman).expect("box widened to positive area")
}

/// Kalman-predicted boxes matched to detections by IoU.
#[derive(Debug, Clone)]
pub struct SortTracker {
    core: SortCore,
}

impl SortTracker {
    pub fn new(cfg: SortConfig) -> Self {
        Self {
            core: SortCore::new(cfg, None),
        }
    }
}

impl Tracker for SortTracker {
    fn step(&mut self, obs: &FrameObservations) -> StepResult {
        self.core.predict_all();
        let tracks: Vec<usize> = (0..self.core.tracks.len()).collect();
        let dets: Vec<usize> = (0..obs.detections.len()).collect();
        let matches = self.core.associate_iou(&tracks, &dets, &obs.detections);
        self.core.finish(&matches, &dets, &obs.detections, Vec::new())
    }

    fn tracks(&self) -> &[Track] {
        &self.core.tracks
    }

    fn kind(&self) -> TrackerKind {
        TrackerKind::Sort
    }
}
