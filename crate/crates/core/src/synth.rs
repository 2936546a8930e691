//! Deterministic synthetic scenarios: walking agents, ground truth, noisy
//! detections with body keypoints, and class-conditioned embeddings.
//!
//! Agents start in horizontal lanes and follow piecewise-linear paths of the
//! neck point. Events shape the paths:
//!
//! * `Crossing` brings two agents together and walks them past each other
//!   at 2 px/frame with necks 4.5 px apart vertically, so their boxes overlap
//!   heavily but the necks never meet;
//! * `ExitReenter` walks an agent to the nearest side edge, removes it for
//!   `[exit, reenter)` and brings it back at the same spot.
//!
//! Between events agents drift back to their lane and wander slightly. Every
//! path segment must stay at or below 8 px/frame or the spec is rejected.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::GroundTruth;
use crate::model::{BBox, Detection, Embedding, FrameIndex, FrameObservations, Keypoint, Keypoints, Point, BODY25_LEN};
use crate::primitives::iou;
use crate::reid::GallerySample;

pub const MAX_SPEED: f64 = 8.0;
const CROSS_SPEED: f64 = 2.0;
const CROSS_OFFSET: f64 = 4.5;
const RETURN_SPEED: f64 = 3.0;
const EDGE_MARGIN: f64 = 30.0;
const WANDER_GAP: u64 = 150;
const FP_CLEARANCE: f64 = 150.0;

/// Normalised BODY_25 pose; spans exactly `[0, 1]` on both axes.
const TEMPLATE: [(f64, f64); BODY25_LEN] = [
    (0.50, 0.04),
    (0.50, 0.12),
    (0.25, 0.14),
    (0.12, 0.32),
    (0.00, 0.48),
    (0.75, 0.14),
    (0.88, 0.32),
    (1.00, 0.48),
    (0.50, 0.50),
    (0.38, 0.50),
    (0.36, 0.72),
    (0.35, 0.94),
    (0.62, 0.50),
    (0.64, 0.72),
    (0.65, 0.94),
    (0.46, 0.02),
    (0.54, 0.02),
    (0.42, 0.00),
    (0.58, 0.00),
    (0.70, 1.00),
    (0.72, 0.99),
    (0.63, 0.97),
    (0.30, 1.00),
    (0.28, 0.99),
    (0.37, 0.97),
];
/// Keypoints fill the box minus a 1/12 margin, so padding their extent by
/// 10% on each side recovers the box.
const KP_MARGIN: f64 = 1.0 / 12.0;
const NECK_Y_FRAC: f64 = KP_MARGIN + TEMPLATE[1].1 * (1.0 - 2.0 * KP_MARGIN);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ScenarioEvent {
    Crossing {
        agents: [usize; 2],
        start: FrameIndex,
        end: FrameIndex,
    },
    ExitReenter {
        agent: usize,
        exit: FrameIndex,
        reenter: FrameIndex,
    },
}

impl ScenarioEvent {
    fn first_frame(&self) -> FrameIndex {
        match *self {
            ScenarioEvent::Crossing { start, .. } => start,
            ScenarioEvent::ExitReenter { exit, .. } => exit.saturating_sub(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSpec {
    pub dim: usize,
    /// Distance between class means in units of the cluster radius
    /// `noise * sqrt(dim)`.
    pub class_sep: f64,
    /// Per-dimension std around each class mean.
    pub noise: f64,
}

impl Default for EmbeddingSpec {
    fn default() -> Self {
        Self {
            dim: 64,
            class_sep: 5.0,
            noise: 1.0,
        }
    }
}

fn default_gallery() -> usize {
    30
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub agents: usize,
    pub frames: u64,
    /// `[width, height]` in pixels.
    pub image: [u32; 2],
    #[serde(default)]
    pub events: Vec<ScenarioEvent>,
    #[serde(default)]
    pub det_noise: f64,
    #[serde(default)]
    pub drop_rate: f64,
    #[serde(default)]
    pub fp_rate: f64,
    #[serde(default)]
    pub emb: EmbeddingSpec,
    #[serde(default = "default_gallery")]
    pub gallery_per_agent: usize,
    /// Drops an agent's detection while a nearer agent (larger neck y)
    /// overlaps it by more than this IoU.
    #[serde(default)]
    pub occlusion_iou: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn simple(agents: usize, frames: u64) -> Self {
        Self {
            agents,
            frames,
            image: [960, 720],
            events: Vec::new(),
            det_noise: 0.0,
            drop_rate: 0.0,
            fp_rate: 0.0,
            emb: EmbeddingSpec::default(),
            gallery_per_agent: default_gallery(),
            occlusion_iou: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.agents == 0 {
            return bad("agents must be >= 1".into());
        }
        if self.frames == 0 {
            return bad("frames must be >= 1".into());
        }
        if self.image[0] < 200 || self.image[1] < 200 {
            return bad("image must be at least 200x200".into());
        }
        if !(self.det_noise >= 0.0 && self.det_noise.is_finite()) {
            return bad("det_noise must be >= 0".into());
        }
        if !(0.0..1.0).contains(&self.drop_rate) {
            return bad("drop_rate must lie in [0, 1)".into());
        }
        if !(self.fp_rate >= 0.0 && self.fp_rate.is_finite()) {
            return bad("fp_rate must be >= 0".into());
        }
        if !(self.emb.class_sep > 0.0 && self.emb.class_sep.is_finite()) {
            return bad("class_sep must be > 0".into());
        }
        if !(self.emb.noise >= 0.0 && self.emb.noise.is_finite()) {
            return bad("embedding noise must be >= 0".into());
        }
        if self.emb.dim <= self.agents {
            return bad(format!(
                "embedding dim {} must exceed the agent count {}",
                self.emb.dim, self.agents
            ));
        }
        if let Some(t) = self.occlusion_iou {
            if !(0.0..=1.0).contains(&t) {
                return bad("occlusion_iou must lie in [0, 1]".into());
            }
        }
        for e in &self.events {
            match *e {
                ScenarioEvent::Crossing {
                    agents: [a, b],
                    start,
                    end,
                } => {
                    if a >= self.agents || b >= self.agents || a == b {
                        return bad(format!("crossing needs two distinct agents below {}", self.agents));
                    }
                    if !(start < end && end < self.frames) {
                        return bad(format!("crossing span {start}..{end} outside [0, {})", self.frames));
                    }
                }
                ScenarioEvent::ExitReenter { agent, exit, reenter } => {
                    if agent >= self.agents {
                        return bad(format!("exit agent {agent} out of range"));
                    }
                    if !(0 < exit && exit < reenter && reenter < self.frames) {
                        return bad(format!("exit {exit}..{reenter} outside (0, {})", self.frames));
                    }
                }
            }
        }
        Ok(())
    }
}

pub const PRESETS: [&str; 2] = ["normal_high", "hard_surveillance"];

/// Built-in scenarios. Agent speed never exceeds 8 px/frame.
///
/// * `normal_high`: 3 agents over 455 frames who never leave; two of them
///   cross once. 1365 ground-truth detections.
/// * `hard_surveillance`: 5 agents over 876 frames; two leave the view and
///   come back, with crossings just before an exit and right after a
///   re-entry. 1% detection drops.
pub fn preset(name: &str) -> Result<ScenarioSpec> {
    use ScenarioEvent::*;
    match name {
        "normal_high" => Ok(ScenarioSpec {
            image: [960, 540],
            events: vec![Crossing {
                agents: [0, 1],
                start: 200,
                end: 260,
            }],
            det_noise: 0.5,
            fp_rate: 0.02,
            seed: 455,
            ..ScenarioSpec::simple(3, 455)
        }),
        "hard_surveillance" => Ok(ScenarioSpec {
            image: [960, 720],
            events: vec![
                Crossing {
                    agents: [1, 2],
                    start: 100,
                    end: 160,
                },
                ExitReenter {
                    agent: 2,
                    exit: 240,
                    reenter: 340,
                },
                Crossing {
                    agents: [2, 3],
                    start: 380,
                    end: 430,
                },
                Crossing {
                    agents: [3, 4],
                    start: 470,
                    end: 520,
                },
                ExitReenter {
                    agent: 4,
                    exit: 600,
                    reenter: 700,
                },
                Crossing {
                    agents: [3, 4],
                    start: 740,
                    end: 800,
                },
            ],
            det_noise: 0.5,
            drop_rate: 0.01,
            fp_rate: 0.05,
            seed: 876,
            ..ScenarioSpec::simple(5, 876)
        }),
        other => Err(Error::UnknownPreset(other.to_owned())),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioBundle {
    pub spec: ScenarioSpec,
    pub ground_truth: GroundTruth,
    pub detections: Vec<FrameObservations>,
    pub gallery: Vec<GallerySample>,
}

impl ScenarioBundle {
    pub fn labels(&self) -> Vec<String> {
        (0..self.spec.agents).map(agent_label).collect()
    }
}

pub fn agent_label(agent: usize) -> String {
    format!("p{}", agent + 1)
}

#[derive(Debug, Clone, Copy)]
struct Anchor {
    frame: FrameIndex,
    p: Point,
    /// Set on the last anchor before a return-to-lane leg may be inserted.
    settle: bool,
}

#[derive(Debug, Clone, Default)]
struct Path {
    anchors: Vec<Anchor>,
    absent: Vec<(FrameIndex, FrameIndex)>,
}

impl Path {
    fn last(&self) -> Anchor {
        *self.anchors.last().expect("path starts with an anchor")
    }

    fn push(&mut self, frame: FrameIndex, p: Point, settle: bool) -> Result<()> {
        if frame <= self.last().frame {
            return Err(Error::InvalidSpec(format!("overlapping events at frame {frame}")));
        }
        self.anchors.push(Anchor { frame, p, settle });
        Ok(())
    }

    fn visible(&self, f: FrameIndex) -> bool {
        !self.absent.iter().any(|&(a, b)| (a..b).contains(&f))
    }

    fn at(&self, f: FrameIndex) -> Point {
        let a = &self.anchors;
        let i = a.partition_point(|k| k.frame <= f);
        if i == 0 {
            return a[0].p;
        }
        if i == a.len() {
            return a[i - 1].p;
        }
        let (k0, k1) = (a[i - 1], a[i]);
        let t = (f - k0.frame) as f64 / (k1.frame - k0.frame) as f64;
        Point::new(k0.p.x + t * (k1.p.x - k0.p.x), k0.p.y + t * (k1.p.y - k0.p.y))
    }
}

fn dist(a: Point, b: Point) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

struct Layout {
    home: Vec<Point>,
    width: f64,
}

fn layout(spec: &ScenarioSpec) -> Layout {
    let (w, h) = (spec.image[0] as f64, spec.image[1] as f64);
    let n = spec.agents;
    let spacing = if n > 1 {
        (130.0f64).min((h - 160.0) / (n - 1) as f64)
    } else {
        0.0
    };
    let home = (0..n)
        .map(|i| Point::new(w * (i + 1) as f64 / (n + 1) as f64, 60.0 + spacing * i as f64))
        .collect();
    Layout { home, width: w }
}

/// Inserts a lane-return anchor after a settled anchor when the gap allows.
fn settle_before(path: &mut Path, home: Point, next_frame: FrameIndex) {
    let last = path.last();
    if !last.settle {
        return;
    }
    let target = Point::new(last.p.x, home.y);
    let legs = (dist(last.p, target) / RETURN_SPEED).ceil() as u64;
    if legs > 0 && last.frame + 2 * legs + 20 <= next_frame {
        path.anchors.push(Anchor {
            frame: last.frame + legs,
            p: target,
            settle: false,
        });
    }
}

fn build_paths(spec: &ScenarioSpec, rng: &mut ChaCha8Rng) -> Result<Vec<Path>> {
    let lay = layout(spec);
    let mut paths: Vec<Path> = lay
        .home
        .iter()
        .map(|&p| Path {
            anchors: vec![Anchor {
                frame: 0,
                p,
                settle: false,
            }],
            absent: Vec::new(),
        })
        .collect();

    let mut events = spec.events.clone();
    events.sort_by_key(ScenarioEvent::first_frame);
    for e in &events {
        match *e {
            ScenarioEvent::Crossing {
                agents: [a, b],
                start,
                end,
            } => {
                settle_before(&mut paths[a], lay.home[a], start);
                settle_before(&mut paths[b], lay.home[b], start);
                let (pa, pb) = (paths[a].last().p, paths[b].last().p);
                let half = CROSS_SPEED * (end - start) as f64 / 2.0;
                let lo = EDGE_MARGIN + half;
                let hi = (lay.width - EDGE_MARGIN - half).max(lo);
                let cx = ((pa.x + pb.x) / 2.0).clamp(lo, hi);
                let ym = (pa.y + pb.y) / 2.0;
                let dir = if pa.x <= pb.x { 1.0 } else { -1.0 };
                let (ya, yb) = if pa.y <= pb.y {
                    (ym - CROSS_OFFSET / 2.0, ym + CROSS_OFFSET / 2.0)
                } else {
                    (ym + CROSS_OFFSET / 2.0, ym - CROSS_OFFSET / 2.0)
                };
                paths[a].push(start, Point::new(cx - dir * half, ya), false)?;
                paths[a].push(end, Point::new(cx + dir * half, ya), true)?;
                paths[b].push(start, Point::new(cx + dir * half, yb), false)?;
                paths[b].push(end, Point::new(cx - dir * half, yb), true)?;
            }
            ScenarioEvent::ExitReenter { agent, exit, reenter } => {
                settle_before(&mut paths[agent], lay.home[agent], exit - 1);
                let p = paths[agent].last().p;
                let edge = if p.x < lay.width / 2.0 {
                    EDGE_MARGIN
                } else {
                    lay.width - EDGE_MARGIN
                };
                let q = Point::new(edge, p.y);
                paths[agent].push(exit - 1, q, false)?;
                paths[agent].push(reenter, q, true)?;
                paths[agent].absent.push((exit, reenter));
            }
        }
    }

    let end = spec.frames - 1;
    for (i, path) in paths.iter_mut().enumerate() {
        if path.last().frame < end {
            let home = lay.home[i];
            // Head back towards the home spot once events are done.
            let last = path.last();
            if last.settle {
                let legs = (dist(last.p, home) / RETURN_SPEED).ceil() as u64;
                if legs > 0 && last.frame + legs <= end {
                    path.anchors.push(Anchor {
                        frame: last.frame + legs,
                        p: home,
                        settle: false,
                    });
                }
            }
            if path.last().frame < end {
                let p = path.last().p;
                path.anchors.push(Anchor {
                    frame: end,
                    p,
                    settle: false,
                });
            }
        }
        add_wander(path, rng);
        check_speeds(i, path)?;
    }
    Ok(paths)
}

/// Breaks long quiet stretches with small random offsets.
fn add_wander(path: &mut Path, rng: &mut ChaCha8Rng) {
    let mut out = Vec::with_capacity(path.anchors.len());
    for w in path.anchors.windows(2) {
        let (k0, k1) = (w[0], w[1]);
        out.push(k0);
        let gap = k1.frame - k0.frame;
        let absent = path.absent.iter().any(|&(a, b)| k0.frame < b && a <= k1.frame);
        if gap <= WANDER_GAP || absent {
            continue;
        }
        let pieces = gap / 100 + 1;
        for j in 1..pieces {
            let f = k0.frame + gap * j / pieces;
            let t = (f - k0.frame) as f64 / gap as f64;
            let base = Point::new(k0.p.x + t * (k1.p.x - k0.p.x), k0.p.y + t * (k1.p.y - k0.p.y));
            let p = Point::new(
                base.x + rng.random_range(-20.0..20.0),
                base.y + rng.random_range(-8.0..8.0),
            );
            out.push(Anchor {
                frame: f,
                p,
                settle: false,
            });
        }
    }
    out.push(path.last());
    path.anchors = out;
}

fn check_speeds(agent: usize, path: &Path) -> Result<()> {
    for w in path.anchors.windows(2) {
        let (k0, k1) = (w[0], w[1]);
        if path.absent.iter().any(|&(a, b)| k0.frame < b && a <= k1.frame) {
            continue;
        }
        let v = dist(k0.p, k1.p) / (k1.frame - k0.frame) as f64;
        if v > MAX_SPEED + 1e-9 {
            return Err(Error::InvalidSpec(format!(
                "agent {agent} would move {v:.1} px/frame between frames {} and {} (limit {MAX_SPEED})",
                k0.frame, k1.frame
            )));
        }
    }
    Ok(())
}

fn box_from_neck(neck: Point, w: f64, h: f64) -> BBox {
    BBox::new(neck.x - w / 2.0, neck.y - NECK_Y_FRAC * h, w, h)
}

/// Full-body keypoints laid out inside `b`.
pub fn keypoints_in_box(b: &BBox) -> Keypoints {
    let (mx, my) = (b.w * KP_MARGIN, b.h * KP_MARGIN);
    let (iw, ih) = (b.w - 2.0 * mx, b.h - 2.0 * my);
    let pts = TEMPLATE
        .iter()
        .map(|&(u, v)| Keypoint::new(b.x + mx + u * iw, b.y + my + v * ih, 0.9))
        .collect();
    Keypoints::new(pts).expect("template has 25 points")
}

struct EmbeddingSampler {
    scale: f64,
    noise: Option<Normal<f64>>,
    dim: usize,
}

impl EmbeddingSampler {
    fn new(e: &EmbeddingSpec) -> Self {
        let unit = if e.noise > 0.0 { e.noise } else { 1.0 };
        Self {
            scale: e.class_sep * unit * (e.dim as f64).sqrt() / std::f64::consts::SQRT_2,
            noise: (e.noise > 0.0).then(|| Normal::new(0.0, e.noise).expect("finite std")),
            dim: e.dim,
        }
    }

    /// Class `axis` sits at `scale * e_axis`; `mult` pushes it further out.
    fn sample(&self, axis: usize, mult: f64, rng: &mut ChaCha8Rng) -> Embedding {
        let mut v = vec![0.0f32; self.dim];
        for x in v.iter_mut() {
            *x = self.noise.map_or(0.0, |n| n.sample(rng)) as f32;
        }
        v[axis] += (self.scale * mult) as f32;
        Embedding(v)
    }
}

const STREAM_LAYOUT: u64 = 0;
const STREAM_NOISE: u64 = 1;
const STREAM_DROP: u64 = 2;
const STREAM_FP: u64 = 3;
const STREAM_EMB: u64 = 4;
const STREAM_GALLERY: u64 = 5;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub fn generate(spec: &ScenarioSpec) -> Result<ScenarioBundle> {
    spec.validate()?;
    let mut lay_rng = rng(spec.seed, STREAM_LAYOUT);
    let sizes: Vec<(f64, f64)> = (0..spec.agents)
        .map(|_| (lay_rng.random_range(40.0..50.0), lay_rng.random_range(100.0..120.0)))
        .collect();
    let paths = build_paths(spec, &mut lay_rng)?;

    let mut noise_rng = rng(spec.seed, STREAM_NOISE);
    let mut drop_rng = rng(spec.seed, STREAM_DROP);
    let mut fp_rng = rng(spec.seed, STREAM_FP);
    let mut emb_rng = rng(spec.seed, STREAM_EMB);
    let mut gal_rng = rng(spec.seed, STREAM_GALLERY);

    let pos_noise = (spec.det_noise > 0.0).then(|| Normal::new(0.0, spec.det_noise).expect("finite std"));
    let size_noise = (spec.det_noise > 0.0).then(|| Normal::new(0.0, spec.det_noise / 2.0).expect("finite std"));
    let mut jitter = |n: &Option<Normal<f64>>| n.map_or(0.0, |d| d.sample(&mut noise_rng));
    let fp_count = (spec.fp_rate > 0.0).then(|| Poisson::new(spec.fp_rate).expect("positive rate"));
    let sampler = EmbeddingSampler::new(&spec.emb);
    let (iw, ih) = (spec.image[0] as f64, spec.image[1] as f64);

    let mut gt = GroundTruth::new(spec.frames);
    let mut detections = Vec::with_capacity(spec.frames as usize);
    for f in 0..spec.frames {
        let visible: Vec<(usize, BBox)> = (0..spec.agents)
            .filter(|&a| paths[a].visible(f))
            .map(|a| (a, box_from_neck(paths[a].at(f), sizes[a].0, sizes[a].1)))
            .collect();
        let mut dets = Vec::with_capacity(visible.len());
        for &(a, b) in &visible {
            gt.insert(f, agent_label(a), b);
            let occluded = spec.occlusion_iou.is_some_and(|t| {
                let neck_y = paths[a].at(f).y;
                visible
                    .iter()
                    .any(|&(o, ob)| o != a && paths[o].at(f).y > neck_y && iou(&b, &ob) > t)
            });
            // Draw every random number regardless of outcome so streams stay aligned.
            let dropped = drop_rng.random::<f64>() < spec.drop_rate;
            let nb = BBox::new(
                b.x + jitter(&pos_noise),
                b.y + jitter(&pos_noise),
                (b.w + jitter(&size_noise)).max(1.0),
                (b.h + jitter(&size_noise)).max(1.0),
            );
            let emb = sampler.sample(a, 1.0, &mut emb_rng);
            if occluded || dropped {
                continue;
            }
            let mut d = Detection::from_box(f, nb)
                .with_keypoints(keypoints_in_box(&nb))
                .with_embedding(emb);
            d.conf = 0.9;
            dets.push(d);
        }
        let n_fp = fp_count.map_or(0, |p| p.sample(&mut fp_rng) as usize);
        for _ in 0..n_fp {
            let w = fp_rng.random_range(40.0..50.0);
            let h = fp_rng.random_range(100.0..120.0);
            let mut placed = None;
            for _ in 0..20 {
                let neck = Point::new(
                    fp_rng.random_range(w..iw - w),
                    fp_rng.random_range(h * NECK_Y_FRAC + 5.0..ih - h),
                );
                let clear = visible.iter().all(|&(a, _)| dist(neck, paths[a].at(f)) > FP_CLEARANCE);
                if clear {
                    placed = Some(neck);
                    break;
                }
            }
            if let Some(neck) = placed {
                let b = box_from_neck(neck, w, h);
                let mut d = Detection::from_box(f, b)
                    .with_keypoints(keypoints_in_box(&b))
                    .with_embedding(sampler.sample(spec.agents, 2.0, &mut fp_rng));
                d.conf = 0.5;
                dets.push(d);
            }
        }
        detections.push(FrameObservations::new(f, dets));
    }

    let mut gallery = Vec::with_capacity(spec.agents * spec.gallery_per_agent);
    for a in 0..spec.agents {
        for _ in 0..spec.gallery_per_agent {
            gallery.push(GallerySample::new(agent_label(a), sampler.sample(a, 1.0, &mut gal_rng)));
        }
    }

    Ok(ScenarioBundle {
        spec: spec.clone(),
        ground_truth: gt,
        detections,
        gallery,
    })
}

/// Ground-truth neck point of every visible agent in frame `f`.
pub fn neck_positions(spec: &ScenarioSpec, f: FrameIndex) -> Result<Vec<(usize, Point)>> {
    spec.validate()?;
    let mut lay_rng = rng(spec.seed, STREAM_LAYOUT);
    for _ in 0..spec.agents {
        let _: f64 = lay_rng.random_range(40.0..50.0);
        let _: f64 = lay_rng.random_range(100.0..120.0);
    }
    let paths = build_paths(spec, &mut lay_rng)?;
    Ok((0..spec.agents)
        .filter(|&a| paths[a].visible(f))
        .map(|a| (a, paths[a].at(f)))
        .collect())
}
