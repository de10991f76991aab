//! Binary checkpoint format.
//!
//! ```text
//! "LFS1"
//! u32 layer_count
//! per layer: u32 rows, u32 cols, rows*cols f64 weights (row-major), rows f64 biases
//! head:      u32 K, u32 d, f64 scale, K*d f64 weights (row-major)
//! ```
//!
//! All integers and floats are little-endian. Trailing bytes are rejected.

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ClassifierHead, EmbeddingModel, Layer};
use crate::numerics::DenseMatrix;

pub const MAGIC: &[u8; 4] = b"LFS1";

pub fn encode(model: &EmbeddingModel, head: &ClassifierHead) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(model.layers.len() as u32).to_le_bytes());
    for layer in &model.layers {
        out.extend_from_slice(&(layer.weights.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.weights.cols() as u32).to_le_bytes());
        for v in layer.weights.as_slice().iter().chain(&layer.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend_from_slice(&(head.class_weights.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(head.class_weights.cols() as u32).to_le_bytes());
    out.extend_from_slice(&head.scale.to_le_bytes());
    for v in head.class_weights.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Format(format!(
                "truncated while reading {what} at byte {} of {}",
                self.pos,
                self.bytes.len()
            ))),
        }
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let len = n
            .checked_mul(8)
            .ok_or_else(|| Error::Format(format!("{what}: size overflow")))?;
        let b = self.take(len, what)?;
        let values: Vec<f64> = b
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format(format!("{what}: non-finite value")));
        }
        Ok(values)
    }
}

pub fn decode(bytes: &[u8]) -> Result<(EmbeddingModel, ClassifierHead)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::Format("bad magic, expected LFS1".into()));
    }
    let layer_count = r.u32("layer count")?;
    if layer_count == 0 {
        return Err(Error::Format("zero layers".into()));
    }
    let mut layers = Vec::new();
    for i in 0..layer_count {
        let rows = r.u32("layer rows")?;
        let cols = r.u32("layer cols")?;
        let weights = r.f64s(rows * cols, &format!("layer {i} weights"))?;
        let bias = r.f64s(rows, &format!("layer {i} biases"))?;
        layers.push(Layer {
            weights: DenseMatrix::from_vec(rows, cols, weights)
                .map_err(|e| Error::Format(e.to_string()))?,
            bias,
        });
    }
    let k = r.u32("head classes")?;
    let d = r.u32("head dim")?;
    let scale = r.f64s(1, "head scale")?[0];
    let weights = r.f64s(k * d, "head weights")?;
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after head",
            bytes.len() - r.pos
        )));
    }
    let model = EmbeddingModel::from_layers(layers).map_err(|e| Error::Format(e.to_string()))?;
    let head = DenseMatrix::from_vec(k, d, weights)
        .and_then(|w| ClassifierHead::new(w, scale))
        .map_err(|e| Error::Format(e.to_string()))?;
    if head.class_weights.cols() != model.embedding_dim() {
        return Err(Error::Format(format!(
            "head dim {d} does not match embedding dim {}",
            model.embedding_dim()
        )));
    }
    Ok((model, head))
}

pub fn write(path: &Path, model: &EmbeddingModel, head: &ClassifierHead) -> Result<()> {
    std::fs::write(path, encode(model, head))
        .map_err(|e| Error::io(format!("writing checkpoint {}", path.display()), e))
}

pub fn read(path: &Path) -> Result<(EmbeddingModel, ClassifierHead)> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::io(format!("reading checkpoint {}", path.display()), e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_model;
    use crate::numerics::RngStream;

    #[test]
    fn round_trip_is_exact() {
        let (m, h) = init_model(&[6, 5, 3], 4, 32.0, &RngStream::new(1, "ckpt")).unwrap();
        let bytes = encode(&m, &h);
        assert_eq!(&bytes[..4], b"LFS1");
        // 4 magic + 4 count + 2*(8 dims) + (30+5 + 15+3)*8 + 8 dims + 8 scale + 12*8
        assert_eq!(bytes.len(), 4 + 4 + 16 + 53 * 8 + 8 + 8 + 96);
        let (m2, h2) = decode(&bytes).unwrap();
        assert_eq!(m, m2);
        assert_eq!(h, h2);
    }

    #[test]
    fn corrupt_inputs_are_format_errors() {
        let (m, h) = init_model(&[3, 2], 2, 8.0, &RngStream::new(2, "ckpt")).unwrap();
        let bytes = encode(&m, &h);
        for cut in [0, 3, 4, 9, bytes.len() - 1] {
            assert!(matches!(decode(&bytes[..cut]), Err(Error::Format(_))), "cut {cut}");
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(Error::Format(_))));
        let mut long = bytes;
        long.push(0);
        assert!(matches!(decode(&long), Err(Error::Format(_))));
    }
}
