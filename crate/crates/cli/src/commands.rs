use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::thread;

use serde::Serialize;

use reidtrack::eval::{count_det_errors, score, EvalReport, GroundTruth, DEFAULT_IOU_MIN};
use reidtrack::io::{
    create_writer, open_reader, read_detections, read_gallery, read_ground_truth, read_model, read_report,
    read_sidecar, read_track_output, write_detections, write_gallery, write_ground_truth, write_model, write_report,
    write_track_output, DetectionReader, DetectorErrors, ReportDocument, ReportEntry, RunConfig,
};
use reidtrack::model::FrameObservations;
use reidtrack::pipeline::{run_stream, Pipeline, TrackOutput};
use reidtrack::reid::{train_classifier, GallerySample, RbfSvmModel, TrainParams};
use reidtrack::synth::{generate, preset, ScenarioSpec};
use reidtrack::trackers::TrackerKind;
use reidtrack::Error;

use crate::{Cli, Command, EvalArgs, ReportArgs, RunArgs, SynthArgs, TrackArgs, TrainArgs};

pub(crate) const REIDER: &str = "RBF-SVM";

pub(crate) const DETECTIONS_FILE: &str = "detections.jsonl";
pub(crate) const EMBEDDINGS_FILE: &str = "embeddings.emb";
pub(crate) const GT_FILE: &str = "gt.csv";
pub(crate) const GALLERY_FILE: &str = "gallery.jsonl";
pub(crate) const SCENARIO_FILE: &str = "scenario.json";

#[derive(Debug, thiserror::Error)]
pub(crate) enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub(crate) fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Core(Error::InvalidConfig(_) | Error::UnknownPreset(_)) => 1,
            CliError::Core(_) => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn dispatch(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Synth(a) => synth(a, seed),
        Command::TrainReid(a) => train(a),
        Command::Track(a) => track(a),
        Command::Eval(a) => eval(a),
        Command::Run(a) => run(a, seed),
        Command::Report(a) => report(a),
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
    .into()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create_writer(path)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| io_err(path, e))
}

fn set(cfg: &mut RunConfig, key: &str, value: impl ToString) -> Result<()> {
    cfg.set(key, &value.to_string())
        .map_err(|m| CliError::Usage(format!("{key}: {m}")))
}

fn path_arg(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

#[derive(Serialize)]
struct ScenarioManifest<'a> {
    spec: &'a ScenarioSpec,
    frames: usize,
    detections: usize,
    gt_boxes: usize,
    gallery: usize,
}

fn synth(a: SynthArgs, seed: Option<u64>) -> Result<()> {
    let mut spec = match (&a.preset, &a.spec) {
        (Some(name), _) => preset(name)?,
        (None, Some(path)) => {
            let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
            let parse_err = |e: serde_json::Error| Error::Parse {
                path: path.display().to_string(),
                line: e.line(),
                msg: e.to_string(),
            };
            let mut v: serde_json::Value = serde_json::from_slice(&bytes).map_err(parse_err)?;
            // A scenario.json written by an earlier synth run is accepted too.
            if let Some(inner) = v.get_mut("spec") {
                v = inner.take();
            }
            serde_json::from_value(v).map_err(parse_err)?
        }
        (None, None) => return Err(CliError::Usage("give --preset or --spec".into())),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let b = generate(&spec)?;
    let out = &a.out;
    std::fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let sidecar = out.join(EMBEDDINGS_FILE);
    write_detections(
        &b.detections,
        &out.join(DETECTIONS_FILE),
        (!a.inline_embeddings).then_some(sidecar.as_path()),
    )?;
    write_ground_truth(&b.ground_truth, &out.join(GT_FILE))?;
    write_gallery(&b.gallery, &out.join(GALLERY_FILE))?;
    let manifest = ScenarioManifest {
        spec: &b.spec,
        frames: b.detections.len(),
        detections: b.detections.iter().map(|f| f.detections.len()).sum(),
        gt_boxes: b.ground_truth.total_detections() as usize,
        gallery: b.gallery.len(),
    };
    let mut json = serde_json::to_string_pretty(&manifest).expect("serializable");
    json.push('\n');
    write_text(&out.join(SCENARIO_FILE), &json)?;
    eprintln!(
        "{}: {} frames, {} detections, {} ground-truth boxes, {} gallery samples",
        out.display(),
        manifest.frames,
        manifest.detections,
        manifest.gt_boxes,
        manifest.gallery
    );
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let gallery = read_gallery(&a.gallery)?;
    let d = TrainParams::default();
    let params = TrainParams {
        gamma: a.gamma,
        c: a.c.unwrap_or(d.c),
        min_conf: a.min_conf.unwrap_or(d.min_conf),
        normalize: a.normalize,
        ..d
    };
    if !(params.c > 0.0) || a.gamma.is_some_and(|g| !(g > 0.0)) || !(0.0..=1.0).contains(&params.min_conf) {
        return Err(CliError::Usage(
            "--c and --gamma must be > 0, --min-conf in [0, 1]".into(),
        ));
    }
    let m = train_classifier(&gallery, &params)?;
    write_model(&m, &a.out)?;
    eprintln!(
        "{}: {} classes, dim {}, gamma {}",
        a.out.display(),
        m.classes.len(),
        m.dim,
        m.gamma
    );
    Ok(())
}

fn track(a: TrackArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(t) = &a.tracker {
        set(&mut cfg, "tracker.kind", t)?;
    }
    if let Some(s) = a.speed_limit {
        set(&mut cfg, "pipeline.speed_limit", s)?;
    }
    if let Some(c) = a.min_conf {
        set(&mut cfg, "reid.min_conf", c)?;
    }
    if let Some(m) = &a.model {
        set(&mut cfg, "input.model", path_arg(m))?;
    }
    if let Some(e) = &a.embeddings {
        set(&mut cfg, "input.embeddings", path_arg(e))?;
    }
    cfg.validate()?;
    let model = match (&cfg.model, cfg.reid_enabled) {
        (Some(p), true) => Some(Arc::new(read_model(p)?)),
        _ => None,
    };
    let sidecar = cfg.embeddings.as_deref().map(read_sidecar).transpose()?;
    let reader = DetectionReader::new(a.detections.display().to_string(), open_reader(&a.detections)?, sidecar);
    let pcfg = cfg.pipeline_config(cfg.tracker.kind);
    let mut p = Pipeline::new(pcfg, model.clone())?;
    let mut out = TrackOutput::new(cfg.tracker.kind, model.is_some());
    for obs in reader {
        let r = p.process_frame(&obs?)?;
        out.frames.push(r.output);
        out.events.extend(r.events);
    }
    out.reid_count = p.reid_count();
    write_track_output(&out, &a.out)?;
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let iou = a.iou_min.unwrap_or(DEFAULT_IOU_MIN);
    if !(0.0..=1.0).contains(&iou) {
        return Err(CliError::Usage("--iou-min must lie in [0, 1]".into()));
    }
    let out = read_track_output(&a.tracks)?;
    let gt = read_ground_truth(&a.gt)?;
    let r = score(&out, &gt, iou)?;
    // Without the raw detections the unmatched counts of the scored output
    // stand in for the detector errors.
    let detector = match &a.detections {
        Some(d) => {
            let stream = read_detections(d, a.embeddings.as_deref())?;
            let (fneg, fpos) = count_det_errors(&stream, &gt, iou);
            DetectorErrors {
                false_negatives: fneg,
                false_positives: fpos,
            }
        }
        None => DetectorErrors {
            false_negatives: r.false_negatives,
            false_positives: r.false_positives,
        },
    };
    let config = [("eval.iou_min".to_owned(), iou.to_string())].into_iter().collect();
    let mut doc = ReportDocument::new("input", detector, config);
    doc.entries.push(ReportEntry {
        tracker: out.tracker.display_name().into(),
        reider: out.reid_attached.then(|| REIDER.to_owned()),
        report: r,
    });
    write_report(&doc, &a.out)?;
    if let Some(t) = &a.table {
        write_text(t, &doc.table())?;
    }
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let doc = read_report(&a.report)?;
    write_text(&a.out, &doc.table())
}

struct Inputs {
    dt: String,
    stream: Vec<FrameObservations>,
    gt: GroundTruth,
    gallery: Option<Vec<GallerySample>>,
}

fn scenario_inputs(cfg: &mut RunConfig, dir: &Path) -> Result<()> {
    let det = dir.join(DETECTIONS_FILE);
    if !det.exists() {
        return Err(CliError::Usage(format!("{} holds no {DETECTIONS_FILE}", dir.display())));
    }
    set(cfg, "input.detections", path_arg(&det))?;
    set(cfg, "input.gt", path_arg(&dir.join(GT_FILE)))?;
    for (key, file) in [("input.embeddings", EMBEDDINGS_FILE), ("input.gallery", GALLERY_FILE)] {
        let p = dir.join(file);
        if p.exists() {
            set(cfg, key, path_arg(&p))?;
        }
    }
    Ok(())
}

fn run_config(a: &RunArgs, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &a.preset {
        set(&mut cfg, "input.preset", p)?;
    }
    if let Some(d) = &a.scenario {
        scenario_inputs(&mut cfg, d)?;
    }
    let paths = [
        ("input.detections", &a.detections),
        ("input.embeddings", &a.embeddings),
        ("input.gt", &a.gt),
        ("input.gallery", &a.gallery),
        ("input.model", &a.model),
        ("output.report", &a.report),
        ("output.table", &a.table),
        ("output.tracks", &a.tracks),
    ];
    for (key, p) in paths {
        if let Some(p) = p {
            set(&mut cfg, key, path_arg(p))?;
        }
    }
    if let Some(dir) = &a.out {
        if a.report.is_none() {
            set(&mut cfg, "output.report", path_arg(&dir.join("report.json")))?;
        }
        if a.table.is_none() {
            set(&mut cfg, "output.table", path_arg(&dir.join("report.txt")))?;
        }
    }
    if let Some(t) = &a.tracker {
        set(&mut cfg, "run.trackers", t)?;
    }
    if a.no_baseline {
        set(&mut cfg, "run.baseline", false)?;
    }
    if a.no_reid {
        set(&mut cfg, "reid.enabled", false)?;
    }
    if let Some(s) = a.speed_limit {
        set(&mut cfg, "pipeline.speed_limit", s)?;
    }
    if let Some(c) = a.min_conf {
        set(&mut cfg, "reid.min_conf", c)?;
    }
    if let Some(i) = a.iou_min {
        set(&mut cfg, "eval.iou_min", i)?;
    }
    if let Some(s) = seed {
        set(&mut cfg, "seed", s)?;
    }
    if cfg.preset.is_some() && cfg.detections.is_some() {
        return Err(CliError::Usage(
            "a preset and a detections file are mutually exclusive".into(),
        ));
    }
    if cfg.preset.is_none() && (cfg.detections.is_none() || cfg.ground_truth.is_none()) {
        return Err(CliError::Usage(
            "no input: give --preset, --scenario DIR, or --detections with --gt".into(),
        ));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    if let Some(name) = &cfg.preset {
        let mut spec = preset(name)?;
        if let Some(s) = cfg.seed {
            spec.seed = s;
        }
        let b = generate(&spec)?;
        return Ok(Inputs {
            dt: "synthetic".into(),
            stream: b.detections,
            gt: b.ground_truth,
            gallery: Some(b.gallery),
        });
    }
    let det = cfg.detections.as_deref().expect("checked by run_config");
    let gt = cfg.ground_truth.as_deref().expect("checked by run_config");
    let want_gallery = cfg.reid_enabled && cfg.model.is_none();
    thread::scope(|s| {
        let d = s.spawn(|| read_detections(det, cfg.embeddings.as_deref()));
        let g = s.spawn(|| read_ground_truth(gt));
        let gal = cfg
            .gallery
            .as_deref()
            .filter(|_| want_gallery)
            .map(|p| s.spawn(move || read_gallery(p)));
        Ok(Inputs {
            dt: "input".into(),
            stream: d.join().expect("reader thread")?,
            gt: g.join().expect("reader thread")?,
            gallery: gal.map(|h| h.join().expect("reader thread")).transpose()?,
        })
    })
}

fn job_file(kind: TrackerKind, reid: bool) -> String {
    format!("{}{}.json", kind.name(), if reid { "-reid" } else { "" })
}

fn run(a: RunArgs, seed: Option<u64>) -> Result<()> {
    let cfg = run_config(&a, seed)?;
    let inputs = load_inputs(&cfg)?;
    let model: Option<Arc<RbfSvmModel>> = match (&cfg.model, &inputs.gallery) {
        _ if !cfg.reid_enabled => None,
        (Some(p), _) => Some(Arc::new(read_model(p)?)),
        (None, Some(g)) => Some(Arc::new(train_classifier(g, &cfg.train_params())?)),
        (None, None) => None,
    };
    let mut jobs = Vec::new();
    for &kind in &cfg.trackers {
        if cfg.baseline {
            jobs.push((kind, false));
        }
        if model.is_some() {
            jobs.push((kind, true));
        }
    }
    if jobs.is_empty() {
        return Err(CliError::Usage(
            "nothing to run: baseline rows are off and no re-identifier is available".into(),
        ));
    }

    let results: Vec<reidtrack::Result<(TrackOutput, EvalReport)>> = thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(kind, reid)| {
                let (cfg, inputs, model) = (&cfg, &inputs, model.clone());
                s.spawn(move || {
                    let m = if reid { model } else { None };
                    let out = run_stream(inputs.stream.iter().cloned(), &cfg.pipeline_config(kind), m)?;
                    let r = score(&out, &inputs.gt, cfg.iou_min)?;
                    Ok((out, r))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("tracker thread")).collect()
    });

    let (fneg, fpos) = count_det_errors(&inputs.stream, &inputs.gt, cfg.iou_min);
    let detector = DetectorErrors {
        false_negatives: fneg,
        false_positives: fpos,
    };
    let mut doc = ReportDocument::new(inputs.dt, detector, cfg.pairs(false));
    for (&(kind, reid), res) in jobs.iter().zip(results) {
        let (out, r) = res?;
        if let Some(dir) = &cfg.track_output {
            write_track_output(&out, &dir.join(job_file(kind, reid)))?;
        }
        doc.entries.push(ReportEntry {
            tracker: kind.display_name().into(),
            reider: reid.then(|| REIDER.to_owned()),
            report: r,
        });
    }

    let table = doc.table();
    if let Some(p) = &cfg.report {
        write_report(&doc, p)?;
    }
    if let Some(p) = &cfg.table {
        write_text(p, &table)?;
    }
    if !a.quiet {
        print!("{table}");
    }
    Ok(())
}
