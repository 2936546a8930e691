use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{display, read_all};
use crate::error::{Error, Result};
use crate::eval::DEFAULT_IOU_MIN;
use crate::pipeline::PipelineConfig;
use crate::reid::TrainParams;
use crate::trackers::{CentroidConfig, DeepSortConfig, SortConfig, TrackerConfig, TrackerKind};

/// Parameters for every tracker kind; `kind` picks the active one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerSettings {
    pub kind: TrackerKind,
    pub centroid: CentroidConfig,
    /// Shared by SORT and the motion stage of DeepSORT.
    pub sort: SortConfig,
    pub nn_budget: usize,
    pub nms_overlap: f64,
    pub max_cos_dist: f64,
}

impl Default for TrackerSettings {
    fn default() -> Self {
        let d = DeepSortConfig::default();
        Self {
            kind: TrackerKind::Centroid,
            centroid: CentroidConfig::default(),
            sort: SortConfig::default(),
            nn_budget: d.nn_budget,
            nms_overlap: d.nms_overlap,
            max_cos_dist: d.max_cos_dist,
        }
    }
}

impl TrackerSettings {
    pub fn config(&self) -> TrackerConfig {
        self.config_for(self.kind)
    }

    pub fn config_for(&self, kind: TrackerKind) -> TrackerConfig {
        match kind {
            TrackerKind::Centroid => TrackerConfig::Centroid(self.centroid),
            TrackerKind::Sort => TrackerConfig::Sort(self.sort),
            TrackerKind::DeepSort => TrackerConfig::DeepSort(DeepSortConfig {
                nn_budget: self.nn_budget,
                nms_overlap: self.nms_overlap,
                max_cos_dist: self.max_cos_dist,
                sort: self.sort,
            }),
        }
    }
}

/// Everything needed to reproduce a run. Read from a flat `key = value`
/// file; `#` starts a comment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub tracker: TrackerSettings,
    /// Trackers evaluated by a multi-tracker run.
    pub trackers: Vec<TrackerKind>,
    /// Also score each tracker without re-identification.
    pub baseline: bool,
    pub reid_enabled: bool,
    pub reid_min_conf: f64,
    pub reid_gamma: Option<f64>,
    pub reid_c: f64,
    pub speed_limit: Option<f64>,
    pub iou_min: f64,
    pub detections: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub gallery: Option<PathBuf>,
    pub preset: Option<String>,
    pub report: Option<PathBuf>,
    pub table: Option<PathBuf>,
    pub track_output: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainParams::default();
        Self {
            tracker: TrackerSettings::default(),
            trackers: TrackerKind::ALL.to_vec(),
            baseline: true,
            reid_enabled: true,
            reid_min_conf: t.min_conf,
            reid_gamma: t.gamma,
            reid_c: t.c,
            speed_limit: None,
            iou_min: DEFAULT_IOU_MIN,
            detections: None,
            embeddings: None,
            ground_truth: None,
            model: None,
            gallery: None,
            preset: None,
            report: None,
            table: None,
            track_output: None,
            seed: None,
        }
    }
}

pub const CONFIG_KEYS: [&str; 29] = [
    "tracker.kind",
    "tracker.max_dist",
    "tracker.max_age",
    "tracker.min_hits",
    "tracker.iou_thresh",
    "tracker.nn_budget",
    "tracker.nms_overlap",
    "tracker.max_cos_dist",
    "tracker.kalman.meas_std",
    "tracker.kalman.init_std",
    "tracker.kalman.process_std",
    "reid.enabled",
    "reid.min_conf",
    "reid.gamma",
    "reid.c",
    "pipeline.speed_limit",
    "eval.iou_min",
    "input.detections",
    "input.embeddings",
    "input.gt",
    "input.model",
    "input.gallery",
    "input.preset",
    "output.report",
    "output.table",
    "output.tracks",
    "run.trackers",
    "run.baseline",
    "seed",
];

fn num<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("bad value `{v}`"))
}

fn list<const N: usize>(v: &str) -> std::result::Result<[f64; N], String> {
    let parts: Vec<f64> = v
        .split(',')
        .map(|p| num(p.trim()))
        .collect::<std::result::Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|_| format!("expected {N} comma-separated numbers"))
}

/// `all` or a comma-separated list of tracker names.
pub fn parse_trackers(v: &str) -> std::result::Result<Vec<TrackerKind>, String> {
    if v.trim().eq_ignore_ascii_case("all") {
        return Ok(TrackerKind::ALL.to_vec());
    }
    let mut out: Vec<TrackerKind> = Vec::new();
    for p in v.split(',') {
        let k: TrackerKind = p.trim().parse()?;
        if !out.contains(&k) {
            out.push(k);
        }
    }
    Ok(out)
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

impl RunConfig {
    /// Applies one setting.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let v = value.trim();
        let t = &mut self.tracker;
        match key {
            "tracker.kind" => t.kind = v.parse()?,
            "tracker.max_dist" => t.centroid.max_dist = num(v)?,
            "tracker.max_age" => t.sort.max_age = num(v)?,
            "tracker.min_hits" => t.sort.min_hits = num(v)?,
            "tracker.iou_thresh" => t.sort.iou_thresh = num(v)?,
            "tracker.nn_budget" => t.nn_budget = num(v)?,
            "tracker.nms_overlap" => t.nms_overlap = num(v)?,
            "tracker.max_cos_dist" => t.max_cos_dist = num(v)?,
            "tracker.kalman.meas_std" => t.sort.kalman.meas_std = list(v)?,
            "tracker.kalman.init_std" => t.sort.kalman.init_std = list(v)?,
            "tracker.kalman.process_std" => t.sort.kalman.process_std = list(v)?,
            "reid.enabled" => self.reid_enabled = num(v)?,
            "reid.min_conf" => self.reid_min_conf = num(v)?,
            "reid.gamma" => self.reid_gamma = Some(num(v)?),
            "reid.c" => self.reid_c = num(v)?,
            "pipeline.speed_limit" => self.speed_limit = Some(num(v)?),
            "eval.iou_min" => self.iou_min = num(v)?,
            "input.detections" => self.detections = Some(v.into()),
            "input.embeddings" => self.embeddings = Some(v.into()),
            "input.gt" => self.ground_truth = Some(v.into()),
            "input.model" => self.model = Some(v.into()),
            "input.gallery" => self.gallery = Some(v.into()),
            "input.preset" => self.preset = Some(v.into()),
            "output.report" => self.report = Some(v.into()),
            "output.table" => self.table = Some(v.into()),
            "output.tracks" => self.track_output = Some(v.into()),
            "run.trackers" => self.trackers = parse_trackers(v)?,
            "run.baseline" => self.baseline = num(v)?,
            "seed" => self.seed = Some(num(v)?),
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    pub fn parse(path: &str, text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("{path}:{}: expected `key = value`", i + 1)))?;
            cfg.set(k.trim(), v)
                .map_err(|m| Error::InvalidConfig(format!("{path}:{}: {}: {m}", i + 1, k.trim())))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = String::from_utf8(read_all(path)?).map_err(|e| Error::parse(display(path), 0, e))?;
        Self::parse(&display(path), &text)
    }

    /// Settings as key/value pairs. Output paths are left out unless asked
    /// for, so the echo does not depend on where results are written.
    pub fn pairs(&self, with_outputs: bool) -> BTreeMap<String, String> {
        let t = &self.tracker;
        let k = &t.sort.kalman;
        let mut m = BTreeMap::new();
        let mut put = |key: &str, v: String| {
            m.insert(key.to_owned(), v);
        };
        put("tracker.kind", t.kind.name().into());
        put("tracker.max_dist", t.centroid.max_dist.to_string());
        put("tracker.max_age", t.sort.max_age.to_string());
        put("tracker.min_hits", t.sort.min_hits.to_string());
        put("tracker.iou_thresh", t.sort.iou_thresh.to_string());
        put("tracker.nn_budget", t.nn_budget.to_string());
        put("tracker.nms_overlap", t.nms_overlap.to_string());
        put("tracker.max_cos_dist", t.max_cos_dist.to_string());
        put("tracker.kalman.meas_std", join(&k.meas_std));
        put("tracker.kalman.init_std", join(&k.init_std));
        put("tracker.kalman.process_std", join(&k.process_std));
        put("reid.enabled", self.reid_enabled.to_string());
        put("reid.min_conf", self.reid_min_conf.to_string());
        put("reid.c", self.reid_c.to_string());
        put("eval.iou_min", self.iou_min.to_string());
        put(
            "run.trackers",
            self.trackers.iter().map(|k| k.name()).collect::<Vec<_>>().join(","),
        );
        put("run.baseline", self.baseline.to_string());
        if let Some(g) = self.reid_gamma {
            put("reid.gamma", g.to_string());
        }
        if let Some(s) = self.speed_limit {
            put("pipeline.speed_limit", s.to_string());
        }
        let inputs = [
            ("input.detections", &self.detections),
            ("input.embeddings", &self.embeddings),
            ("input.gt", &self.ground_truth),
            ("input.model", &self.model),
            ("input.gallery", &self.gallery),
        ];
        for (key, p) in inputs {
            if let Some(p) = p {
                put(key, path_str(p));
            }
        }
        if let Some(p) = &self.preset {
            put("input.preset", p.clone());
        }
        if let Some(s) = self.seed {
            put("seed", s.to_string());
        }
        if with_outputs {
            let outputs = [
                ("output.report", &self.report),
                ("output.table", &self.table),
                ("output.tracks", &self.track_output),
            ];
            for (key, p) in outputs {
                if let Some(p) = p {
                    put(key, path_str(p));
                }
            }
        }
        m
    }

    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in pairs {
            cfg.set(k, v).map_err(|m| Error::InvalidConfig(format!("{k}: {m}")))?;
        }
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        self.pairs(true).iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn pipeline_config(&self, kind: TrackerKind) -> PipelineConfig {
        PipelineConfig {
            tracker: self.tracker.config_for(kind),
            min_conf: Some(self.reid_min_conf),
            speed_limit: self.speed_limit,
        }
    }

    pub fn train_params(&self) -> TrainParams {
        TrainParams {
            gamma: self.reid_gamma,
            c: self.reid_c,
            min_conf: self.reid_min_conf,
            ..TrainParams::default()
        }
    }

    /// Range checks plus existence of every referenced input file.
    pub fn validate(&self) -> Result<()> {
        for kind in TrackerKind::ALL {
            self.tracker.config_for(kind).validate().map_err(Error::InvalidConfig)?;
        }
        self.pipeline_config(self.tracker.kind).validate()?;
        if !(self.reid_c > 0.0) {
            return Err(Error::InvalidConfig("reid.c must be > 0".into()));
        }
        if let Some(g) = self.reid_gamma {
            if !(g > 0.0) {
                return Err(Error::InvalidConfig("reid.gamma must be > 0".into()));
            }
        }
        if self.trackers.is_empty() {
            return Err(Error::InvalidConfig("run.trackers is empty".into()));
        }
        if !(0.0..=1.0).contains(&self.iou_min) {
            return Err(Error::InvalidConfig("eval.iou_min must lie in [0, 1]".into()));
        }
        let inputs = [
            &self.detections,
            &self.embeddings,
            &self.ground_truth,
            &self.model,
            &self.gallery,
        ];
        for p in inputs.into_iter().flatten() {
            if p != Path::new("-") && !p.exists() {
                return Err(Error::InvalidConfig(format!("input file `{}` not found", p.display())));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_parameters() {
        let c = RunConfig::default();
        assert_eq!(c.tracker.centroid.max_dist, 50.0);
        assert_eq!(c.tracker.sort.max_age, 1);
        assert_eq!(c.tracker.sort.min_hits, 3);
        assert_eq!(c.tracker.sort.iou_thresh, 0.3);
        assert_eq!(c.tracker.nn_budget, 100);
        assert_eq!(c.tracker.nms_overlap, 0.5);
        assert_eq!(c.tracker.max_cos_dist, 0.1);
        assert_eq!(c.iou_min, 0.5);
    }

    #[test]
    fn parses_and_rejects_unknown_keys() {
        let text = "# comment\ntracker.kind = sort\ntracker.max_age = 4 # trailing\n\nreid.gamma=2.5\npipeline.speed_limit = 60\nseed = 7\n";
        let c = RunConfig::parse("c.cfg", text).unwrap();
        assert_eq!(c.tracker.kind, TrackerKind::Sort);
        assert_eq!(c.tracker.sort.max_age, 4);
        assert_eq!(c.reid_gamma, Some(2.5));
        assert_eq!(c.speed_limit, Some(60.0));
        assert_eq!(c.seed, Some(7));
        let e = RunConfig::parse("c.cfg", "tracker.kind = sort\nbogus.key = 1\n").unwrap_err();
        assert!(e.to_string().contains("c.cfg:2") && e.to_string().contains("bogus.key"));
        assert!(RunConfig::parse("c", "tracker.max_age = -1").is_err());
        assert!(RunConfig::parse("c", "no equals sign").is_err());
        assert!(RunConfig::parse("c", "tracker.kalman.meas_std = 1,2").is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::default();
        for (k, v) in [
            ("tracker.kind", "deepsort"),
            ("tracker.kalman.process_std", "1,1,10,0.001,0.1,0.1,1"),
            ("reid.min_conf", "0.6"),
            ("input.preset", "hard_surveillance"),
            ("output.report", "out/r.json"),
            ("seed", "11"),
        ] {
            c.set(k, v).unwrap();
        }
        let back = RunConfig::parse("x", &c.to_text()).unwrap();
        assert_eq!(back, c);
        let echo = RunConfig::from_pairs(&c.pairs(false)).unwrap();
        assert_eq!(echo.report, None);
        assert_eq!(echo.tracker, c.tracker);
        for k in c.pairs(true).keys() {
            assert!(CONFIG_KEYS.contains(&k.as_str()), "{k}");
        }
    }

    #[test]
    fn validate_checks_inputs() {
        let mut c = RunConfig::default();
        c.validate().unwrap();
        c.detections = Some("/definitely/not/here.jsonl".into());
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
        c.detections = Some("-".into());
        c.validate().unwrap();
        c.iou_min = 2.0;
        assert!(c.validate().is_err());
    }
}
