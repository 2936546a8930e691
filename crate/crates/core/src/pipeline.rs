//! Frame-by-frame orchestration: run the tracker, then repair identities.
//!
//! Identity repair is driven by three trigger rules:
//!
//! 1. a track that is new, or whose identity is still unknown, is classified
//!    from its current detection;
//! 2. when a known label sits on two or more tracks in the same frame, every
//!    holder is re-classified and the conflict is resolved by confidence
//!    (see [`resolve_duplicates`]);
//! 3. optionally, a track whose representative point jumps farther than a
//!    speed limit between observations is re-classified.
//!
//! Every firing is recorded as a [`ReidEvent`].

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{representative_point, BBox, Detection, FrameIndex, FrameObservations, Identity, Point, TrackId};
use crate::primitives::euclidean;
use crate::reid::RbfSvmModel;
use crate::trackers::{build_tracker, Tracker, TrackerConfig, TrackerKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct PipelineConfig {
    pub tracker: TrackerConfig,
    /// Overrides the classifier's own threshold when set.
    pub min_conf: Option<f64>,
    /// Rule 3 threshold in pixels per observation; off when `None`.
    pub speed_limit: Option<f64>,
}

impl PipelineConfig {
    pub fn new(tracker: TrackerConfig) -> Self {
        Self {
            tracker,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.tracker.validate().map_err(Error::InvalidConfig)?;
        if let Some(s) = self.speed_limit {
            if !(s > 0.0) {
                return Err(Error::InvalidConfig("speed_limit must be > 0".into()));
            }
        }
        if let Some(c) = self.min_conf {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::InvalidConfig("min_conf must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReidRule {
    NewOrUnknown,
    DuplicateId,
    SpeedLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReidOutcome {
    pub track_id: TrackId,
    pub old: Identity,
    pub new: Identity,
    /// `None` when the detection carried no embedding.
    pub confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReidEvent {
    pub frame: FrameIndex,
    pub rule: ReidRule,
    pub track_ids: Vec<TrackId>,
    pub outcomes: Vec<ReidOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub track_id: TrackId,
    pub identity: Identity,
    #[serde(rename = "box")]
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameOutput {
    pub frame: FrameIndex,
    pub entries: Vec<OutputEntry>,
}

impl FrameOutput {
    /// True when no known label appears on two entries.
    pub fn labels_unique(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.entries
            .iter()
            .filter_map(|e| e.identity.label())
            .all(|l| seen.insert(l))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackOutput {
    pub tracker: TrackerKind,
    pub reid_attached: bool,
    /// Classified tracks summed over events.
    pub reid_count: u64,
    pub frames: Vec<FrameOutput>,
    pub events: Vec<ReidEvent>,
}

impl TrackOutput {
    pub fn new(tracker: TrackerKind, reid_attached: bool) -> Self {
        Self {
            tracker,
            reid_attached,
            reid_count: 0,
            frames: Vec::new(),
            events: Vec::new(),
        }
    }

    pub fn reid_events(&self) -> u64 {
        self.events.len() as u64
    }

    /// Number of frames covered, `last frame + 1`.
    pub fn frame_span(&self) -> u64 {
        self.frames.last().map_or(0, |f| f.frame + 1)
    }
}

/// A track taking part in duplicate resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub track_id: TrackId,
    /// Labels with confidences, best first; `None` without an embedding.
    pub ranked: Option<Vec<(String, f64)>>,
}

impl Candidate {
    fn top(&self) -> f64 {
        self.ranked
            .as_ref()
            .and_then(|r| r.first())
            .map_or(f64::NEG_INFINITY, |r| r.1)
    }
}

/// Assigns labels to re-classified duplicates.
///
/// Candidates are visited by descending top confidence, then ascending track
/// id. Each takes its best label that clears `min_conf` and is neither in
/// `taken` nor claimed by an earlier candidate; otherwise it becomes Unknown.
/// Returns `(track_id, identity, confidence)` in visiting order.
pub fn resolve_duplicates(
    candidates: &[Candidate],
    taken: &BTreeSet<String>,
    min_conf: f64,
) -> Vec<(TrackId, Identity, Option<f64>)> {
    let mut order: Vec<&Candidate> = candidates.iter().collect();
    order.sort_by(|a, b| b.top().total_cmp(&a.top()).then(a.track_id.cmp(&b.track_id)));
    let mut claimed: BTreeSet<&str> = BTreeSet::new();
    let mut out = Vec::with_capacity(order.len());
    for c in order {
        let Some(ranked) = &c.ranked else {
            out.push((c.track_id, Identity::Unknown, None));
            continue;
        };
        let pick = ranked
            .iter()
            .find(|(l, conf)| *conf >= min_conf && !taken.contains(l) && !claimed.contains(l.as_str()));
        match pick {
            Some((l, conf)) => {
                claimed.insert(l);
                out.push((c.track_id, Identity::known(l.clone()), Some(*conf)));
            }
            None => out.push((c.track_id, Identity::Unknown, ranked.first().map(|r| r.1))),
        }
    }
    out
}

/// Result of one processed frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameReport {
    pub output: FrameOutput,
    pub events: Vec<ReidEvent>,
}

pub struct Pipeline {
    cfg: PipelineConfig,
    tracker: Box<dyn Tracker>,
    model: Option<Arc<RbfSvmModel>>,
    identities: BTreeMap<TrackId, Identity>,
    last_point: BTreeMap<TrackId, Point>,
    last_frame: Option<FrameIndex>,
    reid_count: u64,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig, model: Option<Arc<RbfSvmModel>>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            tracker: build_tracker(&cfg.tracker),
            cfg,
            model,
            identities: BTreeMap::new(),
            last_point: BTreeMap::new(),
            last_frame: None,
            reid_count: 0,
        })
    }

    pub fn tracker(&self) -> &dyn Tracker {
        self.tracker.as_ref()
    }

    pub fn reid_count(&self) -> u64 {
        self.reid_count
    }

    pub fn identity(&self, id: TrackId) -> Identity {
        self.identities.get(&id).cloned().unwrap_or_default()
    }

    fn min_conf(&self, m: &RbfSvmModel) -> f64 {
        self.cfg.min_conf.unwrap_or(m.min_conf)
    }

    fn rank(&self, m: &RbfSvmModel, det: &Detection) -> Option<Vec<(String, f64)>> {
        det.embedding.as_ref().and_then(|e| m.ranked(e).ok())
    }

    /// Classifies one track in isolation and records the event.
    fn reclassify_single(
        &mut self,
        m: &RbfSvmModel,
        frame: FrameIndex,
        rule: ReidRule,
        id: TrackId,
        det: &Detection,
    ) -> ReidEvent {
        let old = self.identity(id);
        let (new, confidence) = match self.rank(m, det) {
            Some(r) => {
                let (label, conf) = r[0].clone();
                let new = if conf >= self.min_conf(m) {
                    Identity::known(label)
                } else {
                    Identity::Unknown
                };
                (new, Some(conf))
            }
            None => (Identity::Unknown, None),
        };
        self.identities.insert(id, new.clone());
        ReidEvent {
            frame,
            rule,
            track_ids: vec![id],
            outcomes: vec![ReidOutcome {
                track_id: id,
                old,
                new,
                confidence,
            }],
        }
    }

    /// Rule 2 until no label is held twice in this frame.
    fn resolve_frame_duplicates(
        &mut self,
        m: &RbfSvmModel,
        frame: FrameIndex,
        present: &[(TrackId, &Detection)],
        events: &mut Vec<ReidEvent>,
    ) {
        for _ in 0..=present.len() {
            let mut holders: BTreeMap<String, Vec<TrackId>> = BTreeMap::new();
            for (id, _) in present {
                if let Identity::Known(l) = self.identity(*id) {
                    holders.entry(l).or_default().push(*id);
                }
            }
            let Some((_, group)) = holders.into_iter().find(|(_, ids)| ids.len() >= 2) else {
                return;
            };
            let taken: BTreeSet<String> = present
                .iter()
                .filter(|(id, _)| !group.contains(id))
                .filter_map(|(id, _)| self.identity(*id).label().map(str::to_owned))
                .collect();
            let candidates: Vec<Candidate> = group
                .iter()
                .map(|&id| {
                    let det = present
                        .iter()
                        .find(|(t, _)| *t == id)
                        .map(|(_, d)| *d)
                        .expect("present");
                    Candidate {
                        track_id: id,
                        ranked: self.rank(m, det),
                    }
                })
                .collect();
            let resolved = resolve_duplicates(&candidates, &taken, self.min_conf(m));
            let mut outcomes = Vec::with_capacity(resolved.len());
            for (id, new, confidence) in resolved {
                let old = self.identity(id);
                self.identities.insert(id, new.clone());
                outcomes.push(ReidOutcome {
                    track_id: id,
                    old,
                    new,
                    confidence,
                });
            }
            events.push(ReidEvent {
                frame,
                rule: ReidRule::DuplicateId,
                track_ids: group,
                outcomes,
            });
        }
    }

    pub fn process_frame(&mut self, obs: &FrameObservations) -> Result<FrameReport> {
        if let Some(last) = self.last_frame {
            if obs.frame <= last {
                return Err(Error::OutOfOrderFrame { last, got: obs.frame });
            }
        }
        self.last_frame = Some(obs.frame);
        let step = self.tracker.step(obs);

        for a in &step.assignments {
            let inherited = a.inherited_from.map(|p| self.identity(p));
            match inherited {
                Some(id) => {
                    self.identities.insert(a.track_id, id);
                }
                None if a.is_new_track => {
                    self.identities.insert(a.track_id, Identity::Unknown);
                }
                None => {
                    self.identities.entry(a.track_id).or_default();
                }
            }
        }

        let present: Vec<(TrackId, &Detection)> = step
            .assignments
            .iter()
            .map(|a| (a.track_id, &obs.detections[a.det_index]))
            .collect();
        let mut events = Vec::new();
        if let Some(m) = self.model.clone() {
            for a in &step.assignments {
                if a.is_new_track || !self.identity(a.track_id).is_known() {
                    let det = &obs.detections[a.det_index];
                    events.push(self.reclassify_single(&m, obs.frame, ReidRule::NewOrUnknown, a.track_id, det));
                }
            }
            self.resolve_frame_duplicates(&m, obs.frame, &present, &mut events);

            if let Some(limit) = self.cfg.speed_limit {
                for &(id, det) in &present {
                    let jumped = self
                        .last_point
                        .get(&id)
                        .is_some_and(|&p| euclidean(p, representative_point(det)) > limit);
                    if jumped {
                        events.push(self.reclassify_single(&m, obs.frame, ReidRule::SpeedLimit, id, det));
                    }
                }
                self.resolve_frame_duplicates(&m, obs.frame, &present, &mut events);
            }
        }

        for id in &step.retired {
            self.identities.remove(id);
            self.last_point.remove(id);
        }
        for &(id, det) in &present {
            self.last_point.insert(id, representative_point(det));
        }
        self.reid_count += events.iter().map(|e| e.outcomes.len() as u64).sum::<u64>();

        let output = FrameOutput {
            frame: obs.frame,
            entries: present
                .iter()
                .map(|&(id, det)| OutputEntry {
                    track_id: id,
                    identity: self.identity(id),
                    bbox: det.bbox,
                })
                .collect(),
        };
        Ok(FrameReport { output, events })
    }
}

/// Runs a whole stream through a fresh pipeline.
pub fn run_stream<I>(stream: I, cfg: &PipelineConfig, model: Option<Arc<RbfSvmModel>>) -> Result<TrackOutput>
where
    I: IntoIterator<Item = FrameObservations>,
{
    let mut p = Pipeline::new(*cfg, model)?;
    let mut out = TrackOutput::new(cfg.tracker.kind(), p.model.is_some());
    for obs in stream {
        let r = p.process_frame(&obs)?;
        out.frames.push(r.output);
        out.events.extend(r.events);
    }
    out.reid_count = p.reid_count();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Embedding, Keypoints, NECK};
    use crate::reid::{train_classifier, GallerySample, TrainParams};
    use crate::trackers::{CentroidConfig, TrackerKind};

    const DIM: usize = 8;

    fn class_emb(class: usize, wobble: f32) -> Embedding {
        let mut v = vec![0.0f32; DIM];
        v[class] = 4.0;
        v[(class + 4) % DIM] = wobble;
        Embedding(v)
    }

    fn model(classes: usize) -> Arc<RbfSvmModel> {
        let mut g = Vec::new();
        for k in 0..6 {
            for c in 0..classes {
                g.push(GallerySample::new(
                    format!("p{}", c + 1),
                    class_emb(c, k as f32 * 0.1 - 0.25),
                ));
            }
        }
        Arc::new(train_classifier(&g, &TrainParams::default()).unwrap())
    }

    fn det(frame: u64, x: f64, y: f64, emb: Option<Embedding>) -> Detection {
        let mut d = Detection::from_box(frame, BBox::new(x - 20.0, y - 15.0, 40.0, 100.0))
            .with_keypoints(Keypoints::sparse(&[(NECK, x, y)]));
        d.embedding = emb;
        d
    }

    fn centroid() -> PipelineConfig {
        PipelineConfig::new(TrackerConfig::Centroid(CentroidConfig::default()))
    }

    #[test]
    fn new_detection_gets_classified_once() {
        let mut p = Pipeline::new(centroid(), Some(model(3))).unwrap();
        let r = p
            .process_frame(&FrameObservations::new(
                0,
                vec![det(0, 100.0, 100.0, Some(class_emb(2, 0.0)))],
            ))
            .unwrap();
        assert_eq!(r.events.len(), 1);
        assert_eq!(r.events[0].rule, ReidRule::NewOrUnknown);
        assert_eq!(r.output.entries[0].identity, Identity::known("p3"));
        let r = p
            .process_frame(&FrameObservations::new(
                1,
                vec![det(1, 102.0, 100.0, Some(class_emb(2, 0.0)))],
            ))
            .unwrap();
        assert!(r.events.is_empty());
        assert_eq!(p.reid_count(), 1);
    }

    #[test]
    fn duplicate_label_is_split_by_reclassification() {
        let mut p = Pipeline::new(centroid(), Some(model(3))).unwrap();
        p.process_frame(&FrameObservations::new(
            0,
            vec![det(0, 100.0, 100.0, Some(class_emb(0, 0.0)))],
        ))
        .unwrap();
        // A second person appears right next to p1: both claim p1's track.
        let r = p
            .process_frame(&FrameObservations::new(
                1,
                vec![
                    det(1, 103.0, 100.0, Some(class_emb(0, 0.1))),
                    det(1, 110.0, 100.0, Some(class_emb(1, 0.0))),
                ],
            ))
            .unwrap();
        let dup: Vec<_> = r.events.iter().filter(|e| e.rule == ReidRule::DuplicateId).collect();
        assert_eq!(dup.len(), 1);
        assert_eq!(dup[0].track_ids.len(), 2);
        let ids: Vec<_> = r.output.entries.iter().map(|e| e.identity.clone()).collect();
        assert_eq!(ids, vec![Identity::known("p1"), Identity::known("p2")]);
        assert!(r.output.labels_unique());
    }

    #[test]
    fn speed_rule_off_by_default() {
        let mut p = Pipeline::new(
            PipelineConfig::new(TrackerConfig::Centroid(CentroidConfig { max_dist: 1000.0 })),
            Some(model(2)),
        )
        .unwrap();
        p.process_frame(&FrameObservations::new(
            0,
            vec![det(0, 100.0, 100.0, Some(class_emb(0, 0.0)))],
        ))
        .unwrap();
        let r = p
            .process_frame(&FrameObservations::new(
                1,
                vec![det(1, 600.0, 100.0, Some(class_emb(0, 0.0)))],
            ))
            .unwrap();
        assert!(r.events.iter().all(|e| e.rule != ReidRule::SpeedLimit));
    }

    #[test]
    fn speed_rule_fires_when_enabled() {
        let mut cfg = PipelineConfig::new(TrackerConfig::Centroid(CentroidConfig { max_dist: 1000.0 }));
        cfg.speed_limit = Some(100.0);
        let mut p = Pipeline::new(cfg, Some(model(2))).unwrap();
        p.process_frame(&FrameObservations::new(
            0,
            vec![det(0, 100.0, 100.0, Some(class_emb(0, 0.0)))],
        ))
        .unwrap();
        let r = p
            .process_frame(&FrameObservations::new(
                1,
                vec![det(1, 600.0, 100.0, Some(class_emb(1, 0.0)))],
            ))
            .unwrap();
        let speed: Vec<_> = r.events.iter().filter(|e| e.rule == ReidRule::SpeedLimit).collect();
        assert_eq!(speed.len(), 1);
        assert_eq!(r.output.entries[0].identity, Identity::known("p2"));
    }

    #[test]
    fn missing_embedding_leaves_unknown() {
        let mut p = Pipeline::new(centroid(), Some(model(2))).unwrap();
        let r = p
            .process_frame(&FrameObservations::new(0, vec![det(0, 100.0, 100.0, None)]))
            .unwrap();
        assert_eq!(r.events.len(), 1);
        assert_eq!(r.events[0].outcomes[0].confidence, None);
        assert_eq!(r.output.entries[0].identity, Identity::Unknown);
    }

    #[test]
    fn out_of_order_frames_rejected() {
        let mut p = Pipeline::new(centroid(), None).unwrap();
        p.process_frame(&FrameObservations::new(5, vec![])).unwrap();
        assert!(matches!(
            p.process_frame(&FrameObservations::new(5, vec![])),
            Err(Error::OutOfOrderFrame { .. })
        ));
        assert!(matches!(
            p.process_frame(&FrameObservations::new(3, vec![])),
            Err(Error::OutOfOrderFrame { .. })
        ));
    }

    #[test]
    fn empty_and_classifier_free_streams() {
        let out = run_stream(Vec::new(), &centroid(), None).unwrap();
        assert!(out.frames.is_empty());
        assert_eq!(out.reid_count, 0);

        let stream: Vec<_> = (0..10)
            .map(|f| FrameObservations::new(f, vec![det(f, 100.0 + f as f64, 100.0, Some(class_emb(0, 0.0)))]))
            .collect();
        let out = run_stream(stream, &centroid(), None).unwrap();
        assert_eq!(out.reid_count, 0);
        assert!(!out.reid_attached);
        assert_eq!(out.tracker, TrackerKind::Centroid);
        assert!(out
            .frames
            .iter()
            .flat_map(|f| &f.entries)
            .all(|e| e.identity == Identity::Unknown));
    }

    fn cand(id: TrackId, ranked: &[(&str, f64)]) -> Candidate {
        Candidate {
            track_id: id,
            ranked: Some(ranked.iter().map(|(l, c)| (l.to_string(), *c)).collect()),
        }
    }

    #[test]
    fn resolve_runner_up_takes_next_best() {
        let c = [
            cand(1, &[("p1", 0.9), ("p2", 0.05)]),
            cand(2, &[("p1", 0.6), ("p2", 0.5)]),
        ];
        let r = resolve_duplicates(&c, &BTreeSet::new(), 0.35);
        assert_eq!(r[0].1, Identity::known("p1"));
        assert_eq!(r[1], (2, Identity::known("p2"), Some(0.5)));
    }

    #[test]
    fn resolve_without_alternative_yields_unknown() {
        let c = [
            cand(1, &[("p1", 0.9), ("p2", 0.1)]),
            cand(2, &[("p1", 0.9), ("p2", 0.1)]),
        ];
        let r = resolve_duplicates(&c, &BTreeSet::new(), 0.35);
        assert_eq!(r[0].1, Identity::known("p1"));
        assert_eq!(r[1].1, Identity::Unknown);
    }

    #[test]
    fn resolve_tie_goes_to_lowest_track_id() {
        let c = [
            cand(9, &[("p1", 0.7)]),
            cand(3, &[("p1", 0.7)]),
            cand(5, &[("p1", 0.7)]),
        ];
        let r = resolve_duplicates(&c, &BTreeSet::new(), 0.35);
        assert_eq!(r[0], (3, Identity::known("p1"), Some(0.7)));
        assert!(r[1..].iter().all(|x| x.1 == Identity::Unknown));
    }

    #[test]
    fn resolve_respects_labels_held_elsewhere() {
        let c = [
            cand(1, &[("p1", 0.8), ("p2", 0.15)]),
            cand(2, &[("p1", 0.5), ("p2", 0.45)]),
        ];
        let taken: BTreeSet<String> = ["p2".to_string()].into();
        let r = resolve_duplicates(&c, &taken, 0.35);
        assert_eq!(r[1].1, Identity::Unknown);
    }

    #[test]
    fn replay_is_byte_identical() {
        let stream: Vec<_> = (0..30)
            .map(|f| {
                let x = f as f64 * 3.0;
                FrameObservations::new(
                    f,
                    vec![
                        det(f, 100.0 + x, 100.0, Some(class_emb(0, 0.1))),
                        det(f, 300.0 - x, 104.0, Some(class_emb(1, -0.1))),
                    ],
                )
            })
            .collect();
        let m = model(2);
        let a = serde_json::to_string(&run_stream(stream.clone(), &centroid(), Some(m.clone())).unwrap()).unwrap();
        let b = serde_json::to_string(&run_stream(stream, &centroid(), Some(m)).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
