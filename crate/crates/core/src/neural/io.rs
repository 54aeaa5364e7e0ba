//! Checkpoint container and external vector files.
//!
//! Checkpoint layout, all integers little-endian:
//!
//! ```text
//! "DNER" | u32 version | u64 n | n bytes of JSON metadata
//! u32 tensor count | per tensor: u32 name length, name, u64 rows, u64 cols, rows*cols f64
//! ```

use serde::{Deserialize, Serialize};

use super::model::Model;
use super::params::{ScorerParams, Tensor, Vocab};
use super::{NeuralError, ScorerConfig};
use crate::transitions::Action;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"DNER";

#[derive(Serialize, Deserialize)]
struct Metadata {
    config: ScorerConfig,
    vocab: Vocab,
    types: Vec<String>,
}

pub fn save_checkpoint(model: &Model) -> Vec<u8> {
    let meta = Metadata {
        config: model.config.clone(),
        vocab: model.vocab.clone(),
        types: model.types.clone(),
    };
    let json = serde_json::to_vec(&meta).expect("metadata serializes");
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&(model.params.tensors.len() as u32).to_le_bytes());
    for t in &model.params.tensors {
        out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.extend_from_slice(&(t.rows as u64).to_le_bytes());
        out.extend_from_slice(&(t.cols as u64).to_le_bytes());
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NeuralError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| NeuralError::Checkpoint("truncated".to_string()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NeuralError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<usize, NeuralError> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| NeuralError::Checkpoint("size overflow".to_string()))
    }
}

pub fn load_checkpoint(bytes: &[u8]) -> Result<Model, NeuralError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(NeuralError::Checkpoint("bad magic".to_string()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(NeuralError::Checkpoint(format!(
            "version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let n = r.u64()?;
    let meta: Metadata = serde_json::from_slice(r.take(n)?)
        .map_err(|e| NeuralError::Checkpoint(format!("metadata: {e}")))?;
    let count = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = String::from_utf8(r.take(len)?.to_vec())
            .map_err(|_| NeuralError::Checkpoint("tensor name".to_string()))?;
        let rows = r.u64()?;
        let cols = r.u64()?;
        let size = rows.checked_mul(cols).and_then(|s| s.checked_mul(8));
        let raw =
            r.take(size.ok_or_else(|| NeuralError::Checkpoint("size overflow".to_string()))?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        tensors.push(Tensor {
            name,
            rows,
            cols,
            data,
        });
    }
    if r.pos != bytes.len() {
        return Err(NeuralError::Checkpoint("trailing bytes".to_string()));
    }
    meta.config.validate()?;
    let vocab = meta.vocab.reindex();
    let params = ScorerParams { tensors };
    params.check_shapes(&meta.config, &vocab, Action::inventory(&meta.types).len())?;
    Ok(Model {
        config: meta.config,
        vocab,
        types: meta.types,
        params,
    })
}

/// One line of space-separated floats per token, a blank line after each
/// sentence.
pub fn parse_external_vectors(text: &str) -> Result<Vec<Vec<Vec<f64>>>, NeuralError> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    let mut dim = None;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            out.push(std::mem::take(&mut current));
            continue;
        }
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|x| x.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| NeuralError::ExternalParse {
                line: i + 1,
                msg: e.to_string(),
            })?;
        match dim {
            None => dim = Some(v.len()),
            Some(d) if d != v.len() => {
                return Err(NeuralError::ExternalParse {
                    line: i + 1,
                    msg: format!("{} values, expected {d}", v.len()),
                })
            }
            _ => {}
        }
        current.push(v);
    }
    if !current.is_empty() {
        out.push(current);
    }
    Ok(out)
}

pub fn write_external_vectors(vectors: &[Vec<Vec<f64>>]) -> String {
    let mut out = String::new();
    for sentence in vectors {
        for v in sentence {
            let parts: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
            out.push_str(&parts.join(" "));
            out.push('\n');
        }
        out.push('\n');
    }
    out
}
