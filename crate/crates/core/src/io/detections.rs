use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{create_writer, display, open_reader, read_all, write_bytes};
use crate::error::{Error, Result};
use crate::model::{
    keypoints_to_bbox, BBox, Detection, Embedding, FrameIndex, FrameObservations, Keypoints, DEFAULT_PAD_FRAC,
};

pub const DETECTIONS_FORMAT: &str = "reidtrack-detections";
pub const DETECTIONS_VERSION: u32 = 1;
const SIDECAR_MAGIC: [u8; 4] = *b"RTRK";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetRecord {
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    bbox: Option<BBox>,
    #[serde(default = "one")]
    conf: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kps: Option<Keypoints>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    emb: Option<Vec<f32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    emb_ref: Option<usize>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRecord {
    frame: FrameIndex,
    dets: Vec<DetRecord>,
}

/// Embedding vectors stored outside the JSON, addressed by index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sidecar {
    pub dim: usize,
    pub data: Vec<f32>,
}

impl Sidecar {
    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> Option<Embedding> {
        (i < self.len()).then(|| Embedding(self.data[i * self.dim..(i + 1) * self.dim].to_vec()))
    }

    /// Appends a vector and returns its index.
    pub fn push(&mut self, e: &Embedding) -> Result<usize> {
        if self.dim == 0 && self.data.is_empty() {
            self.dim = e.dim();
        }
        if e.dim() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: e.dim(),
            });
        }
        self.data.extend_from_slice(e.as_slice());
        Ok(self.len() - 1)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 4 * self.data.len());
        out.extend_from_slice(&SIDECAR_MAGIC);
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(path: &str, b: &[u8]) -> Result<Self> {
        if b.len() < 8 || b[..4] != SIDECAR_MAGIC {
            return Err(Error::parse(path, 0, "missing embedding sidecar header"));
        }
        let dim = u32::from_le_bytes(b[4..8].try_into().expect("4 bytes")) as usize;
        let body = &b[8..];
        if !body.len().is_multiple_of(4)
            || (dim == 0 && !body.is_empty())
            || (dim > 0 && !(body.len() / 4).is_multiple_of(dim))
        {
            return Err(Error::parse(path, 0, "sidecar length is not a whole number of vectors"));
        }
        let data = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Ok(Self { dim, data })
    }
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar> {
    Sidecar::from_bytes(&display(path), &read_all(path)?)
}

pub fn write_sidecar(sidecar: &Sidecar, path: &Path) -> Result<()> {
    write_bytes(path, &sidecar.to_bytes())
}

/// Streaming reader yielding one [`FrameObservations`] per line.
pub struct DetectionReader<R> {
    path: String,
    lines: std::io::Lines<R>,
    line_no: usize,
    prev: Option<FrameIndex>,
    dim: Option<usize>,
    sidecar: Option<Sidecar>,
}

impl<R: BufRead> DetectionReader<R> {
    pub fn new(path: impl Into<String>, reader: R, sidecar: Option<Sidecar>) -> Self {
        Self {
            path: path.into(),
            lines: reader.lines(),
            line_no: 0,
            prev: None,
            dim: None,
            sidecar,
        }
    }

    fn check_dim(&mut self, d: usize) -> Result<()> {
        match self.dim {
            None => {
                self.dim = Some(d);
                Ok(())
            }
            Some(e) if e == d => Ok(()),
            Some(e) => Err(Error::EmbeddingDimMismatch {
                path: self.path.clone(),
                expected: e,
                got: d,
            }),
        }
    }

    fn parse_line(&mut self, line: &str) -> Result<Option<FrameObservations>> {
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| Error::parse(&self.path, self.line_no, e))?;
        if value.get("format").is_some() {
            let h: Header = serde_json::from_value(value).map_err(|e| Error::parse(&self.path, self.line_no, e))?;
            if h.format != DETECTIONS_FORMAT {
                return Err(Error::parse(
                    &self.path,
                    self.line_no,
                    format!("unexpected format `{}`", h.format),
                ));
            }
            if h.version != DETECTIONS_VERSION {
                return Err(Error::VersionMismatch {
                    path: self.path.clone(),
                    found: h.version,
                    expected: DETECTIONS_VERSION,
                });
            }
            return Ok(None);
        }
        let rec: FrameRecord = serde_json::from_value(value).map_err(|e| Error::parse(&self.path, self.line_no, e))?;
        if let Some(prev) = self.prev {
            if rec.frame <= prev {
                return Err(Error::NonMonotonicFrame {
                    path: self.path.clone(),
                    line: self.line_no,
                    prev,
                    frame: rec.frame,
                });
            }
        }
        self.prev = Some(rec.frame);
        let mut dets = Vec::with_capacity(rec.dets.len());
        for d in rec.dets {
            let bbox = match (d.bbox, &d.kps) {
                (Some(b), _) => b,
                (None, Some(k)) => {
                    keypoints_to_bbox(k, DEFAULT_PAD_FRAC).map_err(|e| Error::parse(&self.path, self.line_no, e))?
                }
                (None, None) => return Err(Error::parse(&self.path, self.line_no, "detection needs `box` or `kps`")),
            };
            let embedding = match (d.emb, d.emb_ref) {
                (Some(_), Some(_)) => {
                    return Err(Error::parse(&self.path, self.line_no, "both `emb` and `emb_ref` given"))
                }
                (Some(v), None) => Some(Embedding(v)),
                (None, Some(i)) => {
                    let e = self
                        .sidecar
                        .as_ref()
                        .ok_or_else(|| {
                            Error::parse(&self.path, self.line_no, "`emb_ref` without an embeddings sidecar")
                        })?
                        .get(i)
                        .ok_or_else(|| Error::parse(&self.path, self.line_no, format!("`emb_ref` {i} out of range")))?;
                    Some(e)
                }
                (None, None) => None,
            };
            if let Some(e) = &embedding {
                self.check_dim(e.dim())?;
            }
            dets.push(Detection {
                frame: rec.frame,
                bbox,
                keypoints: d.kps,
                conf: d.conf,
                embedding,
            });
        }
        Ok(Some(FrameObservations::new(rec.frame, dets)))
    }
}

impl<R: BufRead> Iterator for DetectionReader<R> {
    type Item = Result<FrameObservations>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(Error::io(self.path.clone(), e))),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            match self.parse_line(&line) {
                Ok(Some(f)) => return Some(Ok(f)),
                Ok(None) => continue,
                Err(e) => return Some(Err(e)),
            }
        }
    }
}

pub fn read_detections(path: &Path, sidecar: Option<&Path>) -> Result<Vec<FrameObservations>> {
    let side = sidecar.map(read_sidecar).transpose()?;
    DetectionReader::new(display(path), open_reader(path)?, side).collect()
}

/// Writes detections; with `sidecar` set, embeddings go there and lines carry
/// `emb_ref` indices.
pub fn write_detections(frames: &[FrameObservations], path: &Path, sidecar: Option<&Path>) -> Result<()> {
    let p = display(path);
    let mut w = create_writer(path)?;
    let mut side = Sidecar::default();
    let header = Header {
        format: DETECTIONS_FORMAT.into(),
        version: DETECTIONS_VERSION,
    };
    let put = |s: String, w: &mut Box<dyn Write>| writeln!(w, "{s}").map_err(|e| Error::io(p.clone(), e));
    put(serde_json::to_string(&header).expect("serializable"), &mut w)?;
    for f in frames {
        let mut dets = Vec::with_capacity(f.detections.len());
        for d in &f.detections {
            let (emb, emb_ref) = match (&d.embedding, sidecar) {
                (Some(e), Some(_)) => (None, Some(side.push(e)?)),
                (Some(e), None) => (Some(e.0.clone()), None),
                (None, _) => (None, None),
            };
            dets.push(DetRecord {
                bbox: Some(d.bbox),
                conf: d.conf,
                kps: d.keypoints.clone(),
                emb,
                emb_ref,
            });
        }
        let rec = FrameRecord { frame: f.frame, dets };
        put(serde_json::to_string(&rec).expect("serializable"), &mut w)?;
    }
    w.flush().map_err(|e| Error::io(display(path), e))?;
    if let Some(sp) = sidecar {
        write_sidecar(&side, sp)?;
    }
    Ok(())
}
