//! WebAssembly bindings for the demo page in `www/`.
//!
//! Every export takes plain numbers or strings and returns a JSON string, so
//! the page needs no generated glue beyond `wasm-bindgen`'s own.

use std::sync::Arc;

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use reidtrack::eval::{score, DEFAULT_IOU_MIN};
use reidtrack::model::Embedding;
use reidtrack::pipeline::{run_stream, PipelineConfig};
use reidtrack::reid::{rbf_kernel, train_classifier, GallerySample, TrainParams};
use reidtrack::synth::{generate, preset};
use reidtrack::trackers::{TrackerConfig, TrackerKind};

fn to_js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// Tracks a built-in scenario and scores it.
///
/// Returns `{image, frames: [{frame, incorrect, tracks: [{id, label, box}],
/// gt: [{label, box}]}], score: {...}}`.
pub fn simulate_json(preset_name: &str, tracker: &str, reid: bool, seed: u64) -> Result<String, String> {
    let mut spec = preset(preset_name).map_err(|e| e.to_string())?;
    spec.seed = seed;
    let kind: TrackerKind = tracker.parse()?;
    let b = generate(&spec).map_err(|e| e.to_string())?;
    let model = if reid {
        Some(Arc::new(
            train_classifier(&b.gallery, &TrainParams::default()).map_err(|e| e.to_string())?,
        ))
    } else {
        None
    };
    let cfg = PipelineConfig::new(TrackerConfig::default_for(kind));
    let out = run_stream(b.detections, &cfg, model).map_err(|e| e.to_string())?;
    let r = score(&out, &b.ground_truth, DEFAULT_IOU_MIN).map_err(|e| e.to_string())?;
    let bx = |b: &reidtrack::model::BBox| json!([round2(b.x), round2(b.y), round2(b.w), round2(b.h)]);
    let frames: Vec<Value> = out
        .frames
        .iter()
        .zip(&r.per_frame)
        .map(|(f, e)| {
            let tracks: Vec<Value> = f
                .entries
                .iter()
                .map(|t| json!({"id": t.track_id, "label": t.identity.label(), "box": bx(&t.bbox)}))
                .collect();
            let gt: Vec<Value> = b
                .ground_truth
                .frame(f.frame)
                .iter()
                .map(|g| json!({"label": g.label, "box": bx(&g.bbox)}))
                .collect();
            json!({"frame": f.frame, "incorrect": e.incorrect, "tracks": tracks, "gt": gt})
        })
        .collect();
    let doc = json!({
        "image": spec.image,
        "frames": frames,
        "score": {
            "tracker": kind.display_name(),
            "reid": reid,
            "correct_pct": format!("{:.2}", r.correct_pct),
            "incorrect_id": r.incorrect_id,
            "total_gt": r.total_gt,
            "reid_count": r.reid_count,
            "false_negatives": r.false_negatives,
            "false_positives": r.false_positives,
        },
    });
    Ok(doc.to_string())
}

/// Kernel value against distance, `[[d, k(d)], ...]` for `steps + 1` points
/// from 0 to `max_dist`.
pub fn kernel_profile_json(gamma: f64, max_dist: f64, steps: u32) -> Result<String, String> {
    if !(max_dist > 0.0) || steps == 0 {
        return Err("max_dist must be > 0 and steps >= 1".into());
    }
    let pts = (0..=steps)
        .map(|i| {
            let d = max_dist * i as f64 / steps as f64;
            rbf_kernel(&[0.0], &[d], gamma).map(|k| json!([d, k]))
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    Ok(Value::Array(pts).to_string())
}

/// Trains the classifier on a 2-D gallery and evaluates it over a grid.
///
/// `gallery` is `[{"label": "a", "x": 1.0, "y": 2.0}, ...]`; `gamma <= 0`
/// selects the median pairwise distance. Returns `{labels, gamma, size,
/// extent, cells: [[class index or -1, confidence], ...]}` in row-major
/// order, with -1 where the best confidence is below `min_conf`.
pub fn confidence_map_json(gallery: &str, gamma: f64, min_conf: f64, size: u32, extent: f64) -> Result<String, String> {
    let raw: Vec<Value> = serde_json::from_str(gallery).map_err(|e| e.to_string())?;
    let mut samples = Vec::with_capacity(raw.len());
    for (i, v) in raw.iter().enumerate() {
        let label = v["label"].as_str().ok_or(format!("sample {i}: missing label"))?;
        let x = v["x"].as_f64().ok_or(format!("sample {i}: missing x"))?;
        let y = v["y"].as_f64().ok_or(format!("sample {i}: missing y"))?;
        samples.push(GallerySample::new(label, Embedding(vec![x as f32, y as f32])));
    }
    if size == 0 || size > 256 || !(extent > 0.0) {
        return Err("size must lie in 1..=256 and extent be > 0".into());
    }
    let params = TrainParams {
        gamma: (gamma > 0.0).then_some(gamma),
        min_conf,
        ..TrainParams::default()
    };
    let m = train_classifier(&samples, &params).map_err(|e| e.to_string())?;
    let labels: Vec<&str> = m.labels().collect();
    let mut cells = Vec::with_capacity((size * size) as usize);
    for row in 0..size {
        for col in 0..size {
            let at = |i: u32| (i as f64 + 0.5) / size as f64 * 2.0 * extent - extent;
            let e = Embedding(vec![at(col) as f32, -at(row) as f32]);
            let conf = m.confidences(&e).map_err(|e| e.to_string())?;
            let (best, c) =
                conf.iter().copied().enumerate().fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (i, c)| if c > acc.1 { (i, c) } else { acc },
                );
            let idx = if c >= m.min_conf { best as i64 } else { -1 };
            cells.push(json!([idx, (c * 1000.0).round() / 1000.0]));
        }
    }
    Ok(json!({"labels": labels, "gamma": m.gamma, "size": size, "extent": extent, "cells": cells}).to_string())
}

#[wasm_bindgen]
pub fn simulate(preset_name: &str, tracker: &str, reid: bool, seed: u32) -> Result<String, JsValue> {
    to_js(simulate_json(preset_name, tracker, reid, seed as u64))
}

#[wasm_bindgen(js_name = kernelProfile)]
pub fn kernel_profile(gamma: f64, max_dist: f64, steps: u32) -> Result<String, JsValue> {
    to_js(kernel_profile_json(gamma, max_dist, steps))
}

#[wasm_bindgen(js_name = confidenceMap)]
pub fn confidence_map(gallery: &str, gamma: f64, min_conf: f64, size: u32, extent: f64) -> Result<String, JsValue> {
    to_js(confidence_map_json(gallery, gamma, min_conf, size, extent))
}
