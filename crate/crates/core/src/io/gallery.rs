use std::io::{BufRead, Write};
use std::path::Path;

use super::{create_writer, display, open_reader};
use crate::error::{Error, Result};
use crate::reid::GallerySample;

/// One `{"label": .., "emb": [..]}` object per line.
pub fn read_gallery(path: &Path) -> Result<Vec<GallerySample>> {
    let p = display(path);
    let mut out: Vec<GallerySample> = Vec::new();
    for (i, line) in open_reader(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(p.clone(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let s: GallerySample = serde_json::from_str(&line).map_err(|e| Error::parse(&p, i + 1, e))?;
        if let Some(first) = out.first() {
            if first.embedding.dim() != s.embedding.dim() {
                return Err(Error::EmbeddingDimMismatch {
                    path: p,
                    expected: first.embedding.dim(),
                    got: s.embedding.dim(),
                });
            }
        }
        out.push(s);
    }
    Ok(out)
}

pub fn write_gallery(samples: &[GallerySample], path: &Path) -> Result<()> {
    let mut w = create_writer(path)?;
    let err = |e| Error::io(display(path), e);
    for s in samples {
        writeln!(w, "{}", serde_json::to_string(s).expect("serializable")).map_err(err)?;
    }
    w.flush().map_err(err)
}
