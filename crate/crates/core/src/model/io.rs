//! Binary model container.
//!
//! ```text
//! offset  size  content
//! 0       4     magic "SOMD"
//! 4       4     format version, u32 LE
//! 8       4     header length L, u32 LE
//! 12      L     JSON header (UTF-8)
//! 12+L    ...   payload: f64 LE blocks
//! ```
//!
//! Payload blocks, in order:
//! 1. embedding: one `F × k` row-major matrix for shared strategies, or
//!    `H·W` of them (row-major location order) for per-location strategies;
//! 2. means: `H·W × F`;
//! 3. Cholesky factors: `H·W` packed lower triangles, `k(k+1)/2` each,
//!    row by row.
//!
//! The header records the payload length and its SHA-256 so truncation and
//! corruption are detected before any block is decoded.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{GaussianModel, LocationGaussian, Provenance, RunConfig};
use crate::embedding::{Embedding, EmbeddingGrid, EmbeddingMatrix, Strategy};
use crate::error::{Error, Result};
use crate::linalg::{CholeskyFactor, Matrix};

pub const MODEL_MAGIC: &[u8; 4] = b"SOMD";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ModelHeader {
    format_version: u32,
    height: usize,
    width: usize,
    features: usize,
    k: usize,
    strategy: Strategy,
    embedding_layout: String,
    embedding_seed: Option<u64>,
    config: RunConfig,
    provenance: Provenance,
    payload_bytes: u64,
    payload_sha256: String,
}

fn push_f64s(buf: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serializes a model into its on-disk byte representation.
pub fn model_to_bytes(model: &GaussianModel) -> Result<Vec<u8>> {
    let mut payload = Vec::new();
    let layout = match &model.embedding {
        Embedding::Shared(w) => {
            push_f64s(&mut payload, w.matrix().as_slice());
            "shared"
        }
        Embedding::PerLocation(grid) => {
            for w in grid.matrices() {
                push_f64s(&mut payload, w.matrix().as_slice());
            }
            "per-location"
        }
    };
    for g in &model.grid {
        push_f64s(&mut payload, &g.mean);
    }
    for g in &model.grid {
        push_f64s(&mut payload, g.chol.packed());
    }

    let header = ModelHeader {
        format_version: MODEL_FORMAT_VERSION,
        height: model.height,
        width: model.width,
        features: model.features,
        k: model.config.k,
        strategy: model.embedding.strategy(),
        embedding_layout: layout.to_string(),
        embedding_seed: match &model.embedding {
            Embedding::Shared(w) => w.seed(),
            Embedding::PerLocation(_) => None,
        },
        config: model.config.clone(),
        provenance: model.provenance.clone(),
        payload_bytes: payload.len() as u64,
        payload_sha256: hex::encode(Sha256::digest(&payload)),
    };
    let header_json = serde_json::to_vec(&header).map_err(|e| Error::json("<model header>", e))?;

    let mut out = Vec::with_capacity(12 + header_json.len() + payload.len());
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_json);
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn save_model(model: &GaussianModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = model_to_bytes(model)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

struct PayloadReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PayloadReader<'_> {
    fn take(&mut self, count: usize, what: &str) -> Result<Vec<f64>> {
        let end = self.pos + count * 8;
        let chunk = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::CorruptModel(format!("payload too short for {what}")))?;
        self.pos = end;
        Ok(chunk
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
            .collect())
    }
}

/// Parses a model from its byte representation.
pub fn model_from_bytes(bytes: &[u8]) -> Result<GaussianModel> {
    let corrupt = |msg: &str| Error::CorruptModel(msg.to_string());
    if bytes.len() < 12 {
        return Err(corrupt("file shorter than the fixed preamble"));
    }
    if &bytes[..4] != MODEL_MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::CorruptModel(format!(
            "unsupported format version {version} (expected {MODEL_FORMAT_VERSION})"
        )));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let header_bytes = bytes
        .get(12..12 + header_len)
        .ok_or_else(|| corrupt("truncated header"))?;
    let header: ModelHeader = serde_json::from_slice(header_bytes)
        .map_err(|e| Error::CorruptModel(format!("unreadable header: {e}")))?;
    if header.format_version != version {
        return Err(corrupt("header version disagrees with preamble"));
    }

    let payload = &bytes[12 + header_len..];
    if payload.len() as u64 != header.payload_bytes {
        return Err(Error::CorruptModel(format!(
            "payload is {} bytes, header declares {}",
            payload.len(),
            header.payload_bytes
        )));
    }
    if hex::encode(Sha256::digest(payload)) != header.payload_sha256 {
        return Err(corrupt("payload digest mismatch"));
    }

    let ModelHeader {
        height: h,
        width: w,
        features: f,
        k,
        strategy,
        ..
    } = header;
    if k == 0 || k > f || h == 0 || w == 0 {
        return Err(Error::CorruptModel(format!("implausible dims F={f} k={k} H={h} W={w}")));
    }
    if header.config.k != k || header.config.strategy != strategy {
        return Err(corrupt("config disagrees with header dims"));
    }
    let locations = h * w;
    let mut reader = PayloadReader { bytes: payload, pos: 0 };
    let to_embedding = |data: Vec<f64>, seed: Option<u64>| -> Result<EmbeddingMatrix> {
        let m = Matrix::from_vec(f, k, data)?;
        EmbeddingMatrix::from_parts(m, strategy, seed)
            .map_err(|e| Error::CorruptModel(format!("invalid embedding: {e}")))
    };

    let embedding = match header.embedding_layout.as_str() {
        "shared" => {
            if strategy.is_per_location() {
                return Err(corrupt("per-location strategy stored with a shared embedding"));
            }
            Embedding::Shared(to_embedding(reader.take(f * k, "embedding")?, header.embedding_seed)?)
        }
        "per-location" => {
            let mats = (0..locations)
                .map(|_| to_embedding(reader.take(f * k, "embedding grid")?, None))
                .collect::<Result<Vec<_>>>()?;
            Embedding::PerLocation(EmbeddingGrid::new(h, w, mats)?)
        }
        other => return Err(Error::CorruptModel(format!("unknown embedding layout {other:?}"))),
    };

    let means = (0..locations)
        .map(|_| reader.take(f, "means"))
        .collect::<Result<Vec<_>>>()?;
    let packed_len = k * (k + 1) / 2;
    let mut grid = Vec::with_capacity(locations);
    for mean in means {
        let chol = CholeskyFactor::from_packed(k, reader.take(packed_len, "cholesky factors")?)?;
        grid.push(LocationGaussian { mean, chol });
    }
    if reader.pos != payload.len() {
        return Err(corrupt("trailing bytes after the last block"));
    }

    Ok(GaussianModel::from_parts(
        h,
        w,
        f,
        header.config,
        embedding,
        grid,
        header.provenance,
    ))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<GaussianModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes)
}
