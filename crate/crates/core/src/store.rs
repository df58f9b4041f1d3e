//! Binary record framing shared by feature files, codebooks and models.
//!
//! Each record is one JSON header line carrying `len` plus arbitrary metadata,
//! followed by `len` little-endian `f64` values.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureVector};

#[derive(Serialize, Deserialize)]
struct Frame<H> {
    len: usize,
    #[serde(flatten)]
    header: H,
}

pub fn write_record<W: Write, H: Serialize>(w: &mut W, header: &H, values: &[f64]) -> Result<()> {
    let mut line = serde_json::to_vec(&Frame {
        len: values.len(),
        header,
    })?;
    line.push(b'\n');
    let mut buf = line;
    buf.reserve(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf).map_err(|e| Error::Format(format!("write failed: {e}")))
}

/// Reads the next record, or `None` at a clean end of input.
pub fn read_record<R: BufRead, H: DeserializeOwned>(r: &mut R) -> Result<Option<(H, Vec<f64>)>> {
    let mut line = Vec::new();
    let n = r
        .read_until(b'\n', &mut line)
        .map_err(|e| Error::Format(format!("read failed: {e}")))?;
    if n == 0 {
        return Ok(None);
    }
    if line.last() != Some(&b'\n') {
        return Err(Error::Format("truncated record header".into()));
    }
    let frame: Frame<H> = serde_json::from_slice(&line[..line.len() - 1])?;
    let mut bytes = vec![0u8; frame.len * 8];
    r.read_exact(&mut bytes)
        .map_err(|_| Error::Format(format!("record truncated: expected {} values", frame.len)))?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(Some((frame.header, values)))
}

pub fn read_all<H: DeserializeOwned>(path: &Path) -> Result<Vec<(H, Vec<f64>)>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = std::io::BufReader::new(file);
    let mut out = Vec::new();
    while let Some(rec) = read_record(&mut r)? {
        out.push(rec);
    }
    Ok(out)
}

/// Header of one feature record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureHeader {
    pub kind: FeatureKind,
    pub dim: usize,
    pub id: String,
    #[serde(default)]
    pub empty: bool,
}

/// One `(sample id, vector)` pair per record; several records may share an id.
pub fn write_features(path: &Path, records: &[(String, FeatureVector)]) -> Result<()> {
    let mut buf = Vec::new();
    for (id, v) in records {
        let header = FeatureHeader {
            kind: v.kind,
            dim: v.dim(),
            id: id.clone(),
            empty: v.empty,
        };
        write_record(&mut buf, &header, &v.values)?;
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_features(path: &Path) -> Result<Vec<(String, FeatureVector)>> {
    read_all::<FeatureHeader>(path)?
        .into_iter()
        .map(|(h, values)| {
            if values.len() != h.dim {
                return Err(Error::Format(format!(
                    "record {} declares dim {} but holds {} values",
                    h.id,
                    h.dim,
                    values.len()
                )));
            }
            Ok((
                h.id,
                FeatureVector {
                    kind: h.kind,
                    values,
                    empty: h.empty,
                    skipped_contours: 0,
                },
            ))
        })
        .collect()
}

/// Plain CSV: `id,v0,v1,...` with shortest round-trip float formatting.
pub fn write_features_csv(path: &Path, records: &[(String, FeatureVector)]) -> Result<()> {
    let mut out = String::new();
    for (id, v) in records {
        out.push_str(id);
        for x in &v.values {
            out.push(',');
            out.push_str(&x.to_string());
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
