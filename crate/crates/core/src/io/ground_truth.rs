use std::path::Path;

use super::{display, read_all, write_bytes};
use crate::error::{Error, Result};
use crate::eval::GroundTruth;
use crate::model::BBox;

pub const GT_VERSION: u32 = 1;

/// Parses ground-truth CSV text. Leading `#key=value` lines carry metadata:
/// `#version` and `#frames` (total frame count; otherwise last frame + 1).
pub fn parse_ground_truth(path: &str, text: &str) -> Result<GroundTruth> {
    let mut frames: Option<u64> = None;
    for (i, line) in text.lines().enumerate() {
        let Some(meta) = line.trim().strip_prefix('#') else {
            continue;
        };
        let Some((k, v)) = meta.split_once('=') else {
            continue;
        };
        let v = v.trim();
        match k.trim() {
            "version" => {
                let found: u32 = v.parse().map_err(|_| Error::parse(path, i + 1, "bad version"))?;
                if found != GT_VERSION {
                    return Err(Error::VersionMismatch {
                        path: path.into(),
                        found,
                        expected: GT_VERSION,
                    });
                }
            }
            "frames" => frames = Some(v.parse().map_err(|_| Error::parse(path, i + 1, "bad frame count"))?),
            _ => {}
        }
    }

    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::parse(path, 1, e))?.clone();
    let expected = ["frame", "label", "x", "y", "w", "h"];
    if !headers.is_empty() && headers.iter().ne(expected) {
        return Err(Error::parse(
            path,
            1,
            format!("expected header `{}`", expected.join(",")),
        ));
    }
    let mut gt = GroundTruth::new(frames.unwrap_or(0));
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(path, line, e)
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(path, line, format!("bad `{}` value `{}`", expected[i], &rec[i])))
        };
        let frame: u64 = rec[0]
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad frame `{}`", &rec[0])))?;
        if let Some(n) = frames {
            if frame >= n {
                return Err(Error::parse(
                    path,
                    line,
                    format!("frame {frame} beyond declared count {n}"),
                ));
            }
        }
        let label = rec[1].to_owned();
        if label.is_empty() {
            return Err(Error::parse(path, line, "empty label"));
        }
        let b = BBox::new(num(2)?, num(3)?, num(4)?, num(5)?);
        if !b.is_valid() {
            return Err(Error::parse(path, line, "negative box size"));
        }
        if !gt.insert(frame, label.clone(), b) {
            return Err(Error::DuplicateLabelInFrame {
                path: path.into(),
                line,
                frame,
                label,
            });
        }
    }
    Ok(gt)
}

pub fn read_ground_truth(path: &Path) -> Result<GroundTruth> {
    let bytes = read_all(path)?;
    let text = String::from_utf8(bytes).map_err(|e| Error::parse(display(path), 0, e))?;
    parse_ground_truth(&display(path), &text)
}

pub fn write_ground_truth(gt: &GroundTruth, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::io(display(path), std::io::Error::other(e));
    w.write_record(["frame", "label", "x", "y", "w", "h"])
        .map_err(csv_err)?;
    for (f, objs) in gt.frames.iter().enumerate() {
        for o in objs {
            let b = o.bbox;
            w.write_record([
                f.to_string(),
                o.label.clone(),
                b.x.to_string(),
                b.y.to_string(),
                b.w.to_string(),
                b.h.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    let body = w
        .into_inner()
        .map_err(|e| Error::io(display(path), std::io::Error::other(e.to_string())))?;
    let mut out = format!("#version={GT_VERSION}\n#frames={}\n", gt.total_frames()).into_bytes();
    out.extend(body);
    write_bytes(path, &out)
}
