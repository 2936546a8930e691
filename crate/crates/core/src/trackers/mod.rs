//! Tracking-by-detection behind one step contract.
//!
//! Three implementations are provided: [`CentroidTracker`] (per-detection
//! nearest representative point), [`SortTracker`] (Kalman + IoU Hungarian) and
//! [`DeepSortTracker`] (appearance cascade followed by the SORT IoU stage).

mod centroid;
mod deepsort;
mod sort;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::model::{BBox, Embedding, FrameObservations, Point, TrackId};
use crate::primitives::{KalmanParams, KalmanState};

pub use centroid::CentroidTracker;
pub use deepsort::{nms, DeepSortTracker};
pub use sort::SortTracker;

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub track_id: TrackId,
    pub repr_point: Point,
    pub bbox: BBox,
    pub kstate: Option<KalmanState>,
    /// Total matched detections.
    pub hits: u32,
    /// Consecutive matched frames, reset on a miss.
    pub hit_streak: u32,
    pub age_since_update: u32,
    pub appearance_gallery: VecDeque<Embedding>,
    pub confirmed: bool,
}

impl Track {
    pub(crate) fn new(track_id: TrackId, repr_point: Point, bbox: BBox) -> Self {
        Self {
            track_id,
            repr_point,
            bbox,
            kstate: None,
            hits: 1,
            hit_streak: 1,
            age_since_update: 0,
            appearance_gallery: VecDeque::new(),
            confirmed: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CentroidConfig {
    pub max_dist: f64,
}

impl Default for CentroidConfig {
    fn default() -> Self {
        Self { max_dist: 50.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SortConfig {
    pub max_age: u32,
    pub min_hits: u32,
    pub iou_thresh: f64,
    pub kalman: KalmanParams,
}

impl Default for SortConfig {
    fn default() -> Self {
        Self {
            max_age: 1,
            min_hits: 3,
            iou_thresh: 0.3,
            kalman: KalmanParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeepSortConfig {
    pub nn_budget: usize,
    pub nms_overlap: f64,
    pub max_cos_dist: f64,
    pub sort: SortConfig,
}

impl Default for DeepSortConfig {
    fn default() -> Self {
        Self {
            nn_budget: 100,
            nms_overlap: 0.5,
            max_cos_dist: 0.1,
            sort: SortConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrackerConfig {
    Centroid(CentroidConfig),
    Sort(SortConfig),
    DeepSort(DeepSortConfig),
}

impl TrackerConfig {
    pub fn kind(&self) -> TrackerKind {
        match self {
            TrackerConfig::Centroid(_) => TrackerKind::Centroid,
            TrackerConfig::Sort(_) => TrackerKind::Sort,
            TrackerConfig::DeepSort(_) => TrackerKind::DeepSort,
        }
    }

    pub fn default_for(kind: TrackerKind) -> Self {
        match kind {
            TrackerKind::Centroid => TrackerConfig::Centroid(CentroidConfig::default()),
            TrackerKind::Sort => TrackerConfig::Sort(SortConfig::default()),
            TrackerKind::DeepSort => TrackerConfig::DeepSort(DeepSortConfig::default()),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be > 0"))
            }
        };
        let sort = |s: &SortConfig| -> Result<(), String> {
            positive("max_age", s.max_age as f64)?;
            positive("min_hits", s.min_hits as f64)?;
            positive("iou_thresh", s.iou_thresh)
        };
        match self {
            TrackerConfig::Centroid(c) => positive("max_dist", c.max_dist),
            TrackerConfig::Sort(s) => sort(s),
            TrackerConfig::DeepSort(d) => {
                positive("nn_budget", d.nn_budget as f64)?;
                positive("nms_overlap", d.nms_overlap)?;
                positive("max_cos_dist", d.max_cos_dist)?;
                sort(&d.sort)
            }
        }
    }
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig::Centroid(CentroidConfig::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackerKind {
    Centroid,
    Sort,
    DeepSort,
}

impl TrackerKind {
    pub const ALL: [TrackerKind; 3] = [TrackerKind::Centroid, TrackerKind::Sort, TrackerKind::DeepSort];

    pub fn name(self) -> &'static str {
        match self {
            TrackerKind::Centroid => "centroid",
            TrackerKind::Sort => "sort",
            TrackerKind::DeepSort => "deepsort",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            TrackerKind::Centroid => "Centroid",
            TrackerKind::Sort => "SORT",
            TrackerKind::DeepSort => "DeepSORT",
        }
    }
}

impl std::str::FromStr for TrackerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "centroid" => Ok(TrackerKind::Centroid),
            "sort" => Ok(TrackerKind::Sort),
            "deepsort" | "deep_sort" | "deep-sort" => Ok(TrackerKind::DeepSort),
            other => Err(format!("unknown tracker `{other}`")),
        }
    }
}

/// Outcome for one input detection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetAssignment {
    pub det_index: usize,
    pub track_id: TrackId,
    pub is_new_track: bool,
    /// Set when the detection claimed a previous track already taken by a
    /// closer detection; the fresh track continues that track's identity.
    pub inherited_from: Option<TrackId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StepResult {
    /// One entry per non-suppressed detection, ordered by `det_index`.
    pub assignments: Vec<DetAssignment>,
    pub retired: Vec<TrackId>,
    /// Detections removed by overlap suppression before matching.
    pub suppressed: Vec<usize>,
}

impl StepResult {
    pub fn for_det(&self, det_index: usize) -> Option<&DetAssignment> {
        self.assignments.iter().find(|a| a.det_index == det_index)
    }
}

pub trait Tracker: Send {
    fn step(&mut self, obs: &FrameObservations) -> StepResult;
    fn tracks(&self) -> &[Track];
    fn kind(&self) -> TrackerKind;
}

pub fn build_tracker(cfg: &TrackerConfig) -> Box<dyn Tracker> {
    match cfg {
        TrackerConfig::Centroid(c) => Box::new(CentroidTracker::new(*c)),
        TrackerConfig::Sort(s) => Box::new(SortTracker::new(*s)),
        TrackerConfig::DeepSort(d) => Box::new(DeepSortTracker::new(*d)),
    }
}
