//! Binary classifier file, all integers and floats little-endian:
//!
//! ```text
//! magic "RTRKSVM1"  u32 version
//! f64 gamma  f64 c  f64 min_conf  u32 dim  u8 normalize  u32 classes
//! per class: u32 label_len, label bytes (UTF-8), f64 bias, u32 n_sv,
//!            per support vector: f64 coef, dim x f64
//! ```

use std::path::Path;

use super::{display, read_all, write_bytes};
use crate::error::{Error, Result};
use crate::reid::{ClassModel, RbfSvmModel};

pub const MODEL_MAGIC: [u8; 8] = *b"RTRKSVM1";
pub const MODEL_VERSION: u32 = 1;

pub fn encode_model(m: &RbfSvmModel) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(&MODEL_MAGIC);
    b.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    for v in [m.gamma, m.c, m.min_conf] {
        b.extend_from_slice(&v.to_le_bytes());
    }
    b.extend_from_slice(&(m.dim as u32).to_le_bytes());
    b.push(m.normalize as u8);
    b.extend_from_slice(&(m.classes.len() as u32).to_le_bytes());
    for c in &m.classes {
        b.extend_from_slice(&(c.label.len() as u32).to_le_bytes());
        b.extend_from_slice(c.label.as_bytes());
        b.extend_from_slice(&c.bias.to_le_bytes());
        b.extend_from_slice(&(c.support_vectors.len() as u32).to_le_bytes());
        for (sv, a) in c.support_vectors.iter().zip(&c.dual_coef) {
            b.extend_from_slice(&a.to_le_bytes());
            for v in sv {
                b.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    b
}

struct Cursor<'a> {
    path: &'a str,
    b: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.b.len());
        let end = end.ok_or_else(|| Error::parse(self.path, 0, format!("truncated model at byte {}", self.at)))?;
        let s = &self.b[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_model(path: &str, bytes: &[u8]) -> Result<RbfSvmModel> {
    let mut c = Cursor { path, b: bytes, at: 0 };
    if c.take(8).ok() != Some(&MODEL_MAGIC[..]) {
        return Err(Error::parse(path, 0, "not a model file (bad magic)"));
    }
    let version = c.u32()?;
    if version != MODEL_VERSION {
        return Err(Error::VersionMismatch {
            path: path.into(),
            found: version,
            expected: MODEL_VERSION,
        });
    }
    let (gamma, cost, min_conf) = (c.f64()?, c.f64()?, c.f64()?);
    let dim = c.u32()? as usize;
    let normalize = match c.take(1)?[0] {
        0 => false,
        1 => true,
        v => return Err(Error::parse(path, 0, format!("bad normalize flag {v}"))),
    };
    let n = c.u32()? as usize;
    let mut classes = Vec::with_capacity(n.min(1024));
    for _ in 0..n {
        let len = c.u32()? as usize;
        let label = String::from_utf8(c.take(len)?.to_vec()).map_err(|e| Error::parse(path, 0, e))?;
        let bias = c.f64()?;
        let nsv = c.u32()? as usize;
        let mut svs = Vec::with_capacity(nsv.min(1 << 16));
        let mut coef = Vec::with_capacity(nsv.min(1 << 16));
        for _ in 0..nsv {
            coef.push(c.f64()?);
            let sv = (0..dim).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
            svs.push(sv);
        }
        classes.push(ClassModel {
            label,
            support_vectors: svs,
            dual_coef: coef,
            bias,
        });
    }
    if c.at != bytes.len() {
        return Err(Error::parse(path, 0, "trailing bytes after model"));
    }
    if !(gamma > 0.0) || classes.len() < 2 {
        return Err(Error::parse(path, 0, "model needs gamma > 0 and at least two classes"));
    }
    Ok(RbfSvmModel {
        classes,
        dim,
        gamma,
        c: cost,
        min_conf,
        normalize,
    })
}

pub fn read_model(path: &Path) -> Result<RbfSvmModel> {
    decode_model(&display(path), &read_all(path)?)
}

pub fn write_model(m: &RbfSvmModel, path: &Path) -> Result<()> {
    write_bytes(path, &encode_model(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Embedding;
    use crate::reid::{train_classifier, GallerySample, TrainParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model() -> RbfSvmModel {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut g = Vec::new();
        for c in 0..3 {
            for _ in 0..10 {
                let mut v: Vec<f32> = (0..6).map(|_| rng.random_range(-0.5..0.5)).collect();
                v[c] += 4.0;
                g.push(GallerySample::new(format!("p{c}"), Embedding(v)));
            }
        }
        train_classifier(&g, &TrainParams::default()).unwrap()
    }

    #[test]
    fn round_trip_classifies_identically() {
        let m = model();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        write_model(&m, &p).unwrap();
        let back = read_model(&p).unwrap();
        assert_eq!(back, m);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let e = Embedding((0..6).map(|_| rng.random_range(-1.0..5.0)).collect());
            let (a, b) = (m.classify(&e).unwrap(), back.classify(&e).unwrap());
            assert_eq!(a.0, b.0);
            assert_eq!(a.1.to_bits(), b.1.to_bits());
        }
    }

    #[test]
    fn rejects_bad_files() {
        let mut b = encode_model(&model());
        assert!(matches!(decode_model("m", &b[..b.len() - 1]), Err(Error::Parse { .. })));
        b[8] = 2;
        assert!(matches!(
            decode_model("m", &b),
            Err(Error::VersionMismatch {
                found: 2,
                expected: 1,
                ..
            })
        ));
        assert!(matches!(decode_model("m", b"garbage!"), Err(Error::Parse { .. })));
    }
}
