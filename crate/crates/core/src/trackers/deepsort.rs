use crate::model::{Detection, FrameObservations};
use crate::primitives::{cosine_distance, hungarian, iou, CostMatrix};

use super::sort::SortCore;
use super::{DeepSortConfig, StepResult, Track, Tracker, TrackerKind};

/// Greedy overlap suppression: visiting detections by descending confidence
/// (lowest index first on ties), drop any whose IoU with a kept one exceeds
/// `overlap`. Returns `(kept, suppressed)`, both ascending.
pub fn nms(dets: &[Detection], overlap: f64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].conf.total_cmp(&dets[a].conf).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    let mut suppressed = Vec::new();
    for i in order {
        if kept.iter().any(|&k| iou(&dets[k].bbox, &dets[i].bbox) > overlap) {
            suppressed.push(i);
        } else {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    suppressed.sort_unstable();
    (kept, suppressed)
}

/// SORT with an appearance matching cascade in front of the IoU stage.
#[derive(Debug, Clone)]
pub struct DeepSortTracker {
    cfg: DeepSortConfig,
    core: SortCore,
}

impl DeepSortTracker {
    pub fn new(cfg: DeepSortConfig) -> Self {
        Self {
            cfg,
            core: SortCore::new(cfg.sort, Some(cfg.nn_budget)),
        }
    }

    /// Smallest cosine distance between the detection and the track gallery.
    fn appearance_cost(&self, t: &Track, d: &Detection) -> Option<f64> {
        let e = d.embedding.as_ref()?;
        t.appearance_gallery
            .iter()
            .filter_map(|g| cosine_distance(g, e).ok())
            .min_by(f64::total_cmp)
    }

    /// Matching cascade over confirmed tracks, most recently updated first.
    fn appearance_stage(&self, dets: &[Detection], kept: &[usize]) -> Vec<(usize, usize)> {
        let gate = self.cfg.max_cos_dist;
        let mut remaining: Vec<usize> = kept.iter().copied().filter(|&j| dets[j].embedding.is_some()).collect();
        let mut levels: Vec<u32> = self
            .core
            .tracks
            .iter()
            .filter(|t| t.confirmed && !t.appearance_gallery.is_empty())
            .map(|t| t.age_since_update)
            .collect();
        levels.sort_unstable();
        levels.dedup();

        let mut matches = Vec::new();
        for level in levels {
            if remaining.is_empty() {
                break;
            }
            let tracks: Vec<usize> = (0..self.core.tracks.len())
                .filter(|&i| {
                    let t = &self.core.tracks[i];
                    t.confirmed && t.age_since_update == level && !t.appearance_gallery.is_empty()
                })
                .collect();
            let gated = gate + 1.0;
            let cost = CostMatrix::from_fn(tracks.len(), remaining.len(), |i, j| {
                self.appearance_cost(&self.core.tracks[tracks[i]], &dets[remaining[j]])
                    .filter(|&c| c <= gate)
                    .unwrap_or(gated)
            });
            let mut taken = vec![false; remaining.len()];
            for (i, j) in hungarian(&cost).pairs {
                if cost.get(i, j) <= gate {
                    matches.push((tracks[i], remaining[j]));
                    taken[j] = true;
                }
            }
            remaining = remaining
                .into_iter()
                .zip(taken)
                .filter_map(|(j, t)| (!t).then_some(j))
                .collect();
        }
        matches
    }
}

impl Tracker for DeepSortTracker {
    fn step(&mut self, obs: &FrameObservations) -> StepResult {
        let dets = &obs.detections;
        let (kept, suppressed) = nms(dets, self.cfg.nms_overlap);
        self.core.predict_all();

        let mut matches = self.appearance_stage(dets, &kept);
        let mut track_used = vec![false; self.core.tracks.len()];
        let mut det_used = vec![false; dets.len()];
        for &(t, d) in &matches {
            track_used[t] = true;
            det_used[d] = true;
        }
        let rest_tracks: Vec<usize> = (0..self.core.tracks.len()).filter(|&t| !track_used[t]).collect();
        let rest_dets: Vec<usize> = kept.iter().copied().filter(|&d| !det_used[d]).collect();
        matches.extend(self.core.associate_iou(&rest_tracks, &rest_dets, dets));

        self.core.finish(&matches, &kept, dets, suppressed)
    }

    fn tracks(&self) -> &[Track] {
        &self.core.tracks
    }

    fn kind(&self) -> TrackerKind {
        TrackerKind::DeepSort
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BBox, Embedding, TrackId};
    use crate::trackers::{SortConfig, SortTracker};

    fn unit(dim: usize, axis: usize, wobble: f32) -> Embedding {
        let mut v = vec![0.0f32; dim];
        v[axis] = 1.0;
        v[(axis + 1) % dim] = wobble;
        Embedding(v)
    }

    /// Two agents walk toward each other on the same row and pass through.
    fn crossing(frames: u64, with_emb: bool) -> Vec<FrameObservations> {
        (0..frames)
            .map(|f| {
                let t = f as f64;
                let a = BBox::new(100.0 + 6.0 * t, 200.0, 40.0, 100.0);
                let b = BBox::new(400.0 - 6.0 * t, 204.0, 40.0, 100.0);
                let wob = ((f % 7) as f32) * 0.01;
                let mut da = Detection::from_box(f, a);
                let mut db = Detection::from_box(f, b);
                da.conf = 0.9;
                db.conf = 0.8;
                if with_emb {
                    da.embedding = Some(unit(8, 0, wob));
                    db.embedding = Some(unit(8, 3, wob));
                }
                FrameObservations::new(f, vec![da, db])
            })
            .collect()
    }

    #[test]
    fn nms_drops_lower_confidence_overlap() {
        let mut a = Detection::from_box(0, BBox::new(0.0, 0.0, 10.0, 10.0));
        let mut b = Detection::from_box(0, BBox::new(1.0, 0.0, 10.0, 10.0));
        let c = Detection::from_box(0, BBox::new(50.0, 0.0, 10.0, 10.0));
        a.conf = 0.6;
        b.conf = 0.9;
        let (kept, sup) = nms(&[a, b, c], 0.5);
        assert_eq!(kept, vec![1, 2]);
        assert_eq!(sup, vec![0]);
    }

    #[test]
    fn appearance_prevents_swap_through_crossing() {
        let frames = crossing(50, true);
        let mut t = DeepSortTracker::new(DeepSortConfig {
            nms_overlap: 0.95,
            ..DeepSortConfig::default()
        });
        // Oracle: the class of each detection is the gallery axis it points along.
        let mut label_of: std::collections::BTreeMap<TrackId, usize> = Default::default();
        for obs in &frames {
            let r = t.step(obs);
            for a in &r.assignments {
                let e = obs.detections[a.det_index].embedding.as_ref().unwrap();
                let class = if e.0[0] > 0.5 { 0 } else { 3 };
                assert_eq!(
                    *label_of.entry(a.track_id).or_insert(class),
                    class,
                    "frame {}",
                    obs.frame
                );
            }
        }
        assert_eq!(label_of.len(), 2);
    }

    #[test]
    fn without_embeddings_equals_sort() {
        let sort_cfg = SortConfig::default();
        let mut ds = DeepSortTracker::new(DeepSortConfig {
            sort: sort_cfg,
            ..DeepSortConfig::default()
        });
        let mut s = SortTracker::new(sort_cfg);
        for obs in crossing(60, false) {
            let (kept, _) = nms(&obs.detections, 0.5);
            let filtered = FrameObservations::new(obs.frame, kept.iter().map(|&i| obs.detections[i].clone()).collect());
            let rd = ds.step(&obs);
            let mut rs = s.step(&filtered);
            for a in &mut rs.assignments {
                a.det_index = kept[a.det_index];
            }
            assert_eq!(rd.assignments, rs.assignments);
            assert_eq!(rd.retired, rs.retired);
        }
    }

    #[test]
    fn gallery_is_bounded() {
        let mut t = DeepSortTracker::new(DeepSortConfig::default());
        for f in 0..500u64 {
            let d = Detection::from_box(f, BBox::new(100.0 + (f % 5) as f64, 100.0, 40.0, 100.0)).with_embedding(unit(
                8,
                2,
                (f % 11) as f32 * 0.01,
            ));
            t.step(&FrameObservations::new(f, vec![d]));
            assert!(t.tracks().iter().all(|tr| tr.appearance_gallery.len() <= 100));
        }
        assert_eq!(t.tracks()[0].appearance_gallery.len(), 100);
    }
}
