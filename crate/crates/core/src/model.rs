//! Domain types shared by every stage: boxes, BODY_25 keypoints, detections
//! and identities.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Number of entries in a BODY_25 skeleton.
pub const BODY25_LEN: usize = 25;
/// BODY_25 index of the neck.
pub const NECK: usize = 1;
/// Default padding applied around keypoint extents.
pub const DEFAULT_PAD_FRAC: f64 = 0.10;

pub type FrameIndex = u64;
pub type TrackId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Axis-aligned box in pixels, top-left origin.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn center(&self) -> Point {
        Point::new(self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x && p.x <= self.right() && p.y >= self.y && p.y <= self.bottom()
    }

    pub fn is_valid(&self) -> bool {
        [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite()) && self.w >= 0.0 && self.h >= 0.0
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }
}

// Boxes travel as `[x, y, w, h]` on the wire.
impl Serialize for BBox {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for BBox {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [x, y, w, h] = <[f64; 4]>::deserialize(d)?;
        let b = BBox::new(x, y, w, h);
        if !b.is_valid() {
            return Err(serde::de::Error::custom("box must be finite with w,h >= 0"));
        }
        Ok(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub conf: f64,
}

impl Keypoint {
    pub const fn new(x: f64, y: f64, conf: f64) -> Self {
        Self { x, y, conf }
    }

    pub fn visible(&self) -> bool {
        self.conf > 0.0
    }
}

/// A BODY_25 skeleton. Entries with `conf == 0` are missing.
#[derive(Debug, Clone, PartialEq)]
pub struct Keypoints {
    points: Vec<Keypoint>,
}

impl Keypoints {
    pub fn new(points: Vec<Keypoint>) -> Result<Self> {
        if points.len() != BODY25_LEN {
            return Err(Error::DimMismatch {
                expected: BODY25_LEN,
                got: points.len(),
            });
        }
        Ok(Self { points })
    }

    /// A skeleton with only the listed entries visible.
    pub fn sparse(visible: &[(usize, f64, f64)]) -> Self {
        let mut points = vec![Keypoint::default(); BODY25_LEN];
        for &(i, x, y) in visible {
            points[i] = Keypoint::new(x, y, 1.0);
        }
        Self { points }
    }

    pub fn points(&self) -> &[Keypoint] {
        &self.points
    }

    pub fn visible(&self) -> impl Iterator<Item = &Keypoint> {
        self.points.iter().filter(|k| k.visible())
    }

    pub fn neck(&self) -> Option<Point> {
        let k = self.points[NECK];
        k.visible().then(|| Point::new(k.x, k.y))
    }
}

impl Serialize for Keypoints {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let raw: Vec<[f64; 3]> = self.points.iter().map(|k| [k.x, k.y, k.conf]).collect();
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Keypoints {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<[f64; 3]>::deserialize(d)?;
        let points = raw.into_iter().map(|[x, y, c]| Keypoint::new(x, y, c)).collect();
        Keypoints::new(points).map_err(serde::de::Error::custom)
    }
}

/// Appearance feature vector produced by an external ReID network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding(pub Vec<f32>);

impl Embedding {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&v| v as f64).collect()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()
    }

    pub fn l2_normalized(&self) -> Embedding {
        let n = self.norm();
        if n == 0.0 {
            return self.clone();
        }
        Embedding(self.0.iter().map(|&v| (v as f64 / n) as f32).collect())
    }
}

impl From<Vec<f32>> for Embedding {
    fn from(v: Vec<f32>) -> Self {
        Embedding(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame: FrameIndex,
    pub bbox: BBox,
    pub keypoints: Option<Keypoints>,
    pub conf: f64,
    pub embedding: Option<Embedding>,
}

impl Detection {
    pub fn from_box(frame: FrameIndex, bbox: BBox) -> Self {
        Self {
            frame,
            bbox,
            keypoints: None,
            conf: 1.0,
            embedding: None,
        }
    }

    pub fn with_embedding(mut self, e: Embedding) -> Self {
        self.embedding = Some(e);
        self
    }

    pub fn with_keypoints(mut self, k: Keypoints) -> Self {
        self.keypoints = Some(k);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameObservations {
    pub frame: FrameIndex,
    pub detections: Vec<Detection>,
}

impl FrameObservations {
    pub fn new(frame: FrameIndex, detections: Vec<Detection>) -> Self {
        Self { frame, detections }
    }
}

/// Person identity as assigned by the re-identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Identity {
    Known(String),
    #[default]
    Unknown,
}

impl Identity {
    pub fn known(label: impl Into<String>) -> Self {
        let label = label.into();
        if label.is_empty() {
            Identity::Unknown
        } else {
            Identity::Known(label)
        }
    }

    pub fn label(&self) -> Option<&str> {
        match self {
            Identity::Known(l) => Some(l),
            Identity::Unknown => None,
        }
    }

    pub fn is_known(&self) -> bool {
        matches!(self, Identity::Known(_))
    }
}

impl std::fmt::Display for Identity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Identity::Known(l) => f.write_str(l),
            Identity::Unknown => f.write_str("unknown"),
        }
    }
}

// `null` for Unknown, the label string otherwise.
impl Serialize for Identity {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.label().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Identity {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(match Option::<String>::deserialize(d)? {
            Some(l) => Identity::known(l),
            None => Identity::Unknown,
        })
    }
}

/// Box spanning the visible keypoints, padded by `pad_frac` of the extent on
/// each side.
pub fn keypoints_to_bbox(kps: &Keypoints, pad_frac: f64) -> Result<BBox> {
    let mut it = kps.visible();
    let first = it.next().ok_or(Error::NoVisibleKeypoints)?;
    let (mut x0, mut y0, mut x1, mut y1) = (first.x, first.y, first.x, first.y);
    for k in it {
        x0 = x0.min(k.x);
        y0 = y0.min(k.y);
        x1 = x1.max(k.x);
        y1 = y1.max(k.y);
    }
    let pad = pad_frac.max(0.0);
    let (w, h) = (x1 - x0, y1 - y0);
    let (px, py) = (pad * w, pad * h);
    Ok(BBox::new(
        x0 - px,
        y0 - py,
        (w + 2.0 * px).max(0.0),
        (h + 2.0 * py).max(0.0),
    ))
}

/// Neck point when visible, otherwise the box center.
pub fn representative_point(det: &Detection) -> Point {
    det.keypoints
        .as_ref()
        .and_then(Keypoints::neck)
        .unwrap_or_else(|| det.bbox.center())
}
