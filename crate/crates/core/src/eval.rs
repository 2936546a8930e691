//! Scoring a tracking run against per-frame ground-truth boxes.
//!
//! Predictions and ground truth are paired per frame by an IoU-maximising
//! assignment. A paired ground-truth object counts as correctly identified
//! when the prediction carries its label (re-identification runs) or, for
//! tracker-only runs, when it carries the track id first bound to that person.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BBox, FrameIndex, FrameObservations, Identity, TrackId};
use crate::pipeline::TrackOutput;
use crate::primitives::{hungarian, iou, CostMatrix};

pub const DEFAULT_IOU_MIN: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtObject {
    pub label: String,
    #[serde(rename = "box")]
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    /// One entry per frame, `0..total_frames`.
    pub frames: Vec<Vec<GtObject>>,
}

impl GroundTruth {
    pub fn new(total_frames: u64) -> Self {
        Self {
            frames: vec![Vec::new(); total_frames as usize],
        }
    }

    pub fn total_frames(&self) -> u64 {
        self.frames.len() as u64
    }

    /// Adds an object. Returns false, leaving the frame unchanged, if the
    /// label is already present in that frame. Grows the frame range as needed.
    pub fn insert(&mut self, frame: FrameIndex, label: impl Into<String>, bbox: BBox) -> bool {
        let label = label.into();
        let f = frame as usize;
        if f >= self.frames.len() {
            self.frames.resize(f + 1, Vec::new());
        }
        if self.frames[f].iter().any(|o| o.label == label) {
            return false;
        }
        self.frames[f].push(GtObject { label, bbox });
        true
    }

    pub fn total_detections(&self) -> u64 {
        self.frames.iter().map(|f| f.len() as u64).sum()
    }

    pub fn frame(&self, frame: FrameIndex) -> &[GtObject] {
        self.frames.get(frame as usize).map_or(&[], Vec::as_slice)
    }

    pub fn labels(&self) -> BTreeSet<&str> {
        self.frames.iter().flatten().map(|o| o.label.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameMatch {
    /// `(pred_index, gt_index, iou)`.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_pred: Vec<usize>,
    pub unmatched_gt: Vec<usize>,
}

/// One-to-one pairing maximising total IoU; pairs below `iou_min` are dropped.
pub fn match_frame(pred: &[BBox], gt: &[BBox], iou_min: f64) -> FrameMatch {
    let cost = CostMatrix::from_fn(pred.len(), gt.len(), |i, j| 1.0 - iou(&pred[i], &gt[j]));
    let a = hungarian(&cost);
    let mut m = FrameMatch::default();
    let mut pred_used = vec![false; pred.len()];
    let mut gt_used = vec![false; gt.len()];
    for &(i, j) in &a.pairs {
        let v = 1.0 - cost.get(i, j);
        if v >= iou_min {
            m.pairs.push((i, j, v));
            pred_used[i] = true;
            gt_used[j] = true;
        }
    }
    m.unmatched_pred = (0..pred.len()).filter(|&i| !pred_used[i]).collect();
    m.unmatched_gt = (0..gt.len()).filter(|&j| !gt_used[j]).collect();
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdScoring {
    /// Prediction must carry the ground-truth label.
    Labels,
    /// Prediction must carry the track id first bound to the person.
    TrackIds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEval {
    pub frame: FrameIndex,
    pub gt: u64,
    pub incorrect: u64,
    pub false_negatives: u64,
    pub false_positives: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scoring: IdScoring,
    pub iou_min: f64,
    pub total_gt: u64,
    pub incorrect_id: u64,
    /// Truncated (not rounded) to two decimals.
    pub correct_pct: f64,
    pub reid_count: u64,
    pub reid_events: u64,
    pub false_negatives: u64,
    pub false_positives: u64,
    pub per_frame: Vec<FrameEval>,
}

/// `100 * (total - incorrect) / total`, truncated to two decimals.
pub fn truncated_pct(total: u64, incorrect: u64) -> f64 {
    if total == 0 {
        return 100.0;
    }
    let correct = total.saturating_sub(incorrect) as u128;
    let hundredths = correct * 10_000 / total as u128;
    hundredths as f64 / 100.0
}

pub fn score(output: &TrackOutput, gt: &GroundTruth, iou_min: f64) -> Result<EvalReport> {
    if output.frame_span() != gt.total_frames() && !(output.frames.is_empty() && gt.total_detections() == 0) {
        return Err(Error::FrameRangeMismatch {
            output: output.frame_span(),
            gt: gt.total_frames(),
        });
    }
    let scoring = if output.reid_attached {
        IdScoring::Labels
    } else {
        IdScoring::TrackIds
    };
    let by_frame: BTreeMap<FrameIndex, usize> = output.frames.iter().enumerate().map(|(i, f)| (f.frame, i)).collect();

    let mut canonical: BTreeMap<&str, TrackId> = BTreeMap::new();
    let mut bound: BTreeSet<TrackId> = BTreeSet::new();
    let mut per_frame = Vec::with_capacity(gt.frames.len());
    let (mut incorrect, mut fns, mut fps) = (0u64, 0u64, 0u64);

    for (f, objects) in gt.frames.iter().enumerate() {
        let frame = f as FrameIndex;
        let entries = by_frame
            .get(&frame)
            .map_or(&[][..], |&i| output.frames[i].entries.as_slice());
        let pred: Vec<BBox> = entries.iter().map(|e| e.bbox).collect();
        let gtb: Vec<BBox> = objects.iter().map(|o| o.bbox).collect();
        let m = match_frame(&pred, &gtb, iou_min);

        let mut fe = FrameEval {
            frame,
            gt: objects.len() as u64,
            incorrect: m.unmatched_gt.len() as u64,
            false_negatives: m.unmatched_gt.len() as u64,
            false_positives: m.unmatched_pred.len() as u64,
        };
        // Label order, so binding does not depend on detection order.
        let mut pairs = m.pairs.clone();
        pairs.sort_by(|a, b| objects[a.1].label.cmp(&objects[b.1].label));
        for (pi, gi, _) in pairs {
            let entry = &entries[pi];
            let label = objects[gi].label.as_str();
            let ok = match scoring {
                IdScoring::Labels => entry.identity == Identity::known(label),
                IdScoring::TrackIds => match canonical.get(label) {
                    Some(&t) => t == entry.track_id,
                    None if bound.insert(entry.track_id) => {
                        canonical.insert(label, entry.track_id);
                        true
                    }
                    None => false,
                },
            };
            if !ok {
                fe.incorrect += 1;
            }
        }
        incorrect += fe.incorrect;
        fns += fe.false_negatives;
        fps += fe.false_positives;
        per_frame.push(fe);
    }

    let total = gt.total_detections();
    Ok(EvalReport {
        scoring,
        iou_min,
        total_gt: total,
        incorrect_id: incorrect,
        correct_pct: truncated_pct(total, incorrect),
        reid_count: output.reid_count,
        reid_events: output.reid_events(),
        false_negatives: fns,
        false_positives: fps,
        per_frame,
    })
}

/// Detector misses and spurious boxes against ground truth.
pub fn count_det_errors(stream: &[FrameObservations], gt: &GroundTruth, iou_min: f64) -> (u64, u64) {
    let by_frame: BTreeMap<FrameIndex, &FrameObservations> = stream.iter().map(|o| (o.frame, o)).collect();
    let (mut fns, mut fps) = (0u64, 0u64);
    let frames: BTreeSet<FrameIndex> = (0..gt.total_frames()).chain(by_frame.keys().copied()).collect();
    for f in frames {
        let pred: Vec<BBox> = by_frame
            .get(&f)
            .map_or(Vec::new(), |o| o.detections.iter().map(|d| d.bbox).collect());
        let gtb: Vec<BBox> = gt.frame(f).iter().map(|o| o.bbox).collect();
        let m = match_frame(&pred, &gtb, iou_min);
        fns += m.unmatched_gt.len() as u64;
        fps += m.unmatched_pred.len() as u64;
    }
    (fns, fps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub tracker: String,
    /// `None` for tracker-only rows.
    pub reider: Option<String>,
    pub reid_count: u64,
    pub incorrect_id: u64,
    pub total_gt: u64,
    pub correct_pct: f64,
}

impl TableRow {
    pub fn from_report(tracker: &str, reider: Option<&str>, r: &EvalReport) -> Self {
        Self {
            tracker: tracker.to_owned(),
            reider: reider.map(str::to_owned),
            reid_count: r.reid_count,
            incorrect_id: r.incorrect_id,
            total_gt: r.total_gt,
            correct_pct: r.correct_pct,
        }
    }
}

/// Plain-text results table. `dt` names the detector and carries its
/// false-negative and false-positive counts.
pub fn render_table(dt: &str, det_fn: u64, det_fp: u64, rows: &[TableRow]) -> String {
    let header = ["DT", "Tracker", "ReIDer", "ReID Count", "Incorrect ID", "Result"];
    let dt_cell = format!("{dt} (FN {det_fn}, FP {det_fp})");
    let body: Vec<[String; 6]> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            [
                if i == 0 { dt_cell.clone() } else { String::new() },
                r.tracker.clone(),
                r.reider.clone().unwrap_or_else(|| "-".into()),
                r.reid_count.to_string(),
                format!("{}/{}", r.incorrect_id, r.total_gt),
                format!("{:.2}%", r.correct_pct),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &body {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |cells: &[&str], out: &mut String| {
        let parts: Vec<String> = cells.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "| {} |", parts.join(" | "));
    };
    line(&header, &mut out);
    let sep: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    let _ = writeln!(out, "|-{}-|", sep.join("-|-"));
    for row in &body {
        let cells: Vec<&str> = row.iter().map(String::as_str).collect();
        line(&cells, &mut out);
    }
    out
}
