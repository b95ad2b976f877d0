use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedpath::{EmbeddingVector, EMBEDDING_DIM};
use crate::error::{Error, Result};
use crate::fsutil::{self, Reader};

pub const EMBEDDING_MAGIC: &[u8; 5] = b"GEMB1";

/// Identifies one observation: timestep index and node index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RecordId {
    pub time: u64,
    pub node: u64,
}

pub trait Encoder {
    /// Short description recorded in manifests.
    fn describe(&self) -> String;
    fn encode(&self, id: RecordId, text: &str) -> Result<EmbeddingVector>;
}

/// Built-in hashing encoder; needs no model weights.
///
/// Features are word unigrams and bigrams plus, for every number, each of
/// its leading-character prefixes tagged with the two words before it. So
/// `temperature is 291.6` yields `2`, `29`, `291`, `291.6` under the
/// `temperature is` context and nearby values share coarse features. Each
/// feature is hashed with the seed into one of 768 bins with a hashed sign;
/// the count vector is scaled to unit length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StubEncoder {
    pub seed: u64,
}

impl StubEncoder {
    pub fn new(seed: u64) -> Self {
        StubEncoder { seed }
    }

    pub fn features(text: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut words: Vec<String> = Vec::new();
        for raw in text.split_whitespace() {
            let tok = raw.trim_end_matches(',');
            let num = tok.strip_suffix('.').unwrap_or(tok);
            if !num.is_empty() && num.parse::<f64>().is_ok() {
                let ctx = words[words.len().saturating_sub(2)..].join(" ");
                for (i, ch) in num.char_indices() {
                    let end = i + ch.len_utf8();
                    if ch != '.' {
                        out.push(format!("n:{ctx}:{}", &num[..end]));
                    }
                }
                continue;
            }
            let w = tok.trim_end_matches('.').to_lowercase();
            if w.is_empty() {
                continue;
            }
            out.push(format!("w:{w}"));
            if let Some(prev) = words.last() {
                out.push(format!("b:{prev}|{w}"));
            }
            words.push(w);
        }
        out
    }
}

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed.to_le_bytes().iter().chain(bytes) {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    // final avalanche so low bits depend on every byte
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h
}

impl Encoder for StubEncoder {
    fn describe(&self) -> String {
        format!("stub(seed={})", self.seed)
    }

    fn encode(&self, _id: RecordId, text: &str) -> Result<EmbeddingVector> {
        let mut v = vec![0.0; EMBEDDING_DIM];
        for f in StubEncoder::features(text) {
            let h = fnv1a(self.seed, f.as_bytes());
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            v[(h % EMBEDDING_DIM as u64) as usize] += sign;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Encoder(format!("no features in `{text}`")));
        }
        v.iter_mut().for_each(|x| *x /= norm);
        EmbeddingVector::new(v)
    }
}

/// Precomputed vectors read from a `GEMB1` file.
///
/// Layout: magic, u64 record count, then per record u64 timestep index,
/// u64 node index and 768 f64, all little-endian.
#[derive(Debug, Clone, PartialEq)]
pub struct FileEncoder {
    source: String,
    vectors: HashMap<RecordId, EmbeddingVector>,
}

impl FileEncoder {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fsutil::read_bytes(path)?;
        let mut enc = FileEncoder::decode(&bytes)?;
        enc.source = format!("file({}, sha256={})", path.display(), fsutil::sha256_hex(&bytes));
        Ok(enc)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "embedding file");
        r.expect_magic(EMBEDDING_MAGIC)?;
        let count = r.u64()? as usize;
        let mut vectors = HashMap::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let id = RecordId {
                time: r.u64()?,
                node: r.u64()?,
            };
            let v = EmbeddingVector::new(r.f64_vec(EMBEDDING_DIM)?)?;
            if vectors.insert(id, v).is_some() {
                return Err(Error::format("embedding file", format!("duplicate record {id:?}")));
            }
        }
        r.finish()?;
        Ok(FileEncoder {
            source: "file(memory)".into(),
            vectors,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

impl Encoder for FileEncoder {
    fn describe(&self) -> String {
        self.source.clone()
    }

    fn encode(&self, id: RecordId, _text: &str) -> Result<EmbeddingVector> {
        self.vectors
            .get(&id)
            .cloned()
            .ok_or_else(|| Error::Encoder(format!("no vector for record {id:?}")))
    }
}

pub fn encode_embedding_file(records: &[(RecordId, EmbeddingVector)]) -> Vec<u8> {
    let mut out = Vec::with_capacity(13 + records.len() * (16 + 8 * EMBEDDING_DIM));
    out.extend_from_slice(EMBEDDING_MAGIC);
    out.extend_from_slice(&(records.len() as u64).to_le_bytes());
    for (id, v) in records {
        out.extend_from_slice(&id.time.to_le_bytes());
        out.extend_from_slice(&id.node.to_le_bytes());
        for x in v.as_slice() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}
