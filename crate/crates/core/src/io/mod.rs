//! On-disk formats and run configuration.
//!
//! | kind        | format                                               |
//! |-------------|------------------------------------------------------|
//! | detections  | JSON Lines, one frame per line, optional f32 sidecar |
//! | ground truth| CSV `frame,label,x,y,w,h`                            |
//! | gallery     | JSON Lines `{"label", "emb"}`                        |
//! | model       | little-endian binary with magic and version          |
//! | track output| JSON                                                 |
//! | report      | JSON document plus a text table                      |
//! | config      | flat `key = value` text with dotted keys             |
//!
//! The path `-` means stdin for readers and stdout for writers.

mod config;
mod detections;
mod gallery;
mod ground_truth;
mod model_file;
mod report;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pipeline::TrackOutput;

pub use config::{parse_trackers, RunConfig, TrackerSettings, CONFIG_KEYS};
pub use detections::{
    read_detections, read_sidecar, write_detections, write_sidecar, DetectionReader, Sidecar, DETECTIONS_FORMAT,
    DETECTIONS_VERSION,
};
pub use gallery::{read_gallery, write_gallery};
pub use ground_truth::{parse_ground_truth, read_ground_truth, write_ground_truth, GT_VERSION};
pub use model_file::{decode_model, encode_model, read_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use report::{
    read_report, write_report, DetectorErrors, ReportDocument, ReportEntry, REPORT_FORMAT, REPORT_VERSION,
};

pub const TRACK_OUTPUT_FORMAT: &str = "reidtrack-tracks";
pub const TRACK_OUTPUT_VERSION: u32 = 1;

pub(crate) fn display(path: &Path) -> String {
    path.display().to_string()
}

pub fn open_reader(path: &Path) -> Result<Box<dyn BufRead>> {
    if path == Path::new("-") {
        return Ok(Box::new(BufReader::new(std::io::stdin())));
    }
    let f = File::open(path).map_err(|e| Error::io(display(path), e))?;
    Ok(Box::new(BufReader::new(f)))
}

pub fn create_writer(path: &Path) -> Result<Box<dyn Write>> {
    if path == Path::new("-") {
        return Ok(Box::new(BufWriter::new(std::io::stdout())));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(display(dir), e))?;
    }
    let f = File::create(path).map_err(|e| Error::io(display(path), e))?;
    Ok(Box::new(BufWriter::new(f)))
}

pub(crate) fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    open_reader(path)?
        .read_to_end(&mut buf)
        .map_err(|e| Error::io(display(path), e))?;
    Ok(buf)
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut w = create_writer(path)?;
    w.write_all(bytes)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(display(path), e))
}

pub(crate) fn to_json_pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

pub(crate) fn from_json<T: DeserializeOwned>(path: &Path, bytes: &[u8]) -> Result<T> {
    serde_json::from_slice(bytes).map_err(|e| Error::parse(display(path), e.line(), e))
}

#[derive(Serialize, serde::Deserialize)]
struct TrackOutputFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    output: TrackOutput,
}

pub fn write_track_output(output: &TrackOutput, path: &Path) -> Result<()> {
    let doc = TrackOutputFile {
        format: TRACK_OUTPUT_FORMAT.into(),
        version: TRACK_OUTPUT_VERSION,
        output: output.clone(),
    };
    write_bytes(path, to_json_pretty(&doc).as_bytes())
}

pub fn read_track_output(path: &Path) -> Result<TrackOutput> {
    let doc: TrackOutputFile = from_json(path, &read_all(path)?)?;
    if doc.version != TRACK_OUTPUT_VERSION || doc.format != TRACK_OUTPUT_FORMAT {
        return Err(Error::VersionMismatch {
            path: display(path),
            found: doc.version,
            expected: TRACK_OUTPUT_VERSION,
        });
    }
    Ok(doc.output)
}
