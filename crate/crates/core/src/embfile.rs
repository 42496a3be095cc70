//! Embedding containers.
//!
//! Binary `SEMB` layout, all integers little-endian:
//!
//! ```text
//! magic   b"SEMB"
//! version u32 (= 1)
//! dim     u32
//! count   u64
//! count × { id_len u16, id bytes (UTF-8), dim × f32 }
//! ```
//!
//! The JSON-lines form holds one `{"id": ..., "v": [...]}` object per line.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::SentencePair;
use crate::vecmath::SentenceEmbedding;

pub const MAGIC: &[u8; 4] = b"SEMB";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EmbeddingFileError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a SEMB container (bad magic)")]
    BadMagic,
    #[error("unsupported SEMB version {0}")]
    UnsupportedVersion(u32),
    #[error("container ends before record {0}")]
    Truncated(u64),
    #[error("{0} trailing bytes after the last record")]
    TrailingBytes(usize),
    #[error("record {0}: id is not valid UTF-8")]
    InvalidId(u64),
    #[error("id {0:?} longer than 65535 bytes")]
    IdTooLong(String),
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("{id:?}: expected dim {expected}, found {found}")]
    DimMismatch {
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("{0:?}: non-finite value")]
    NonFinite(String),
    #[error("line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("no embedding for id {0:?}")]
    MissingId(String),
}

/// A loaded set of embeddings sharing one dimension, addressable by id.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingSet {
    dim: usize,
    records: Vec<SentenceEmbedding>,
    index: HashMap<String, usize>,
}

impl EmbeddingSet {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ..Self::default()
        }
    }

    pub fn from_records(
        dim: usize,
        records: Vec<SentenceEmbedding>,
    ) -> Result<Self, EmbeddingFileError> {
        let mut set = Self::new(dim);
        for r in records {
            set.push(r)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, emb: SentenceEmbedding) -> Result<(), EmbeddingFileError> {
        if emb.dim() != self.dim {
            return Err(EmbeddingFileError::DimMismatch {
                id: emb.id,
                expected: self.dim,
                found: emb.values.len(),
            });
        }
        if emb.values.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingFileError::NonFinite(emb.id));
        }
        if self.index.contains_key(&emb.id) {
            return Err(EmbeddingFileError::DuplicateId(emb.id));
        }
        self.index.insert(emb.id.clone(), self.records.len());
        self.records.push(emb);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[SentenceEmbedding] {
        &self.records
    }

    pub fn get(&self, id: &str) -> Option<&SentenceEmbedding> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    pub fn require(&self, id: &str) -> Result<&SentenceEmbedding, EmbeddingFileError> {
        self.get(id)
            .ok_or_else(|| EmbeddingFileError::MissingId(id.to_string()))
    }

    /// Checks that both sides (`<pair_id>.a`, `<pair_id>.b`) of every pair
    /// are present. Reports the first missing id in pair order.
    pub fn check_coverage(&self, pairs: &[SentencePair]) -> Result<(), EmbeddingFileError> {
        for p in pairs {
            self.require(&p.id_a())?;
            self.require(&p.id_b())?;
        }
        Ok(())
    }
}

fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8], record: u64) -> Result<(), EmbeddingFileError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => EmbeddingFileError::Truncated(record),
        _ => EmbeddingFileError::Io(e),
    })
}

pub fn read_semb<R: Read>(mut r: R) -> Result<EmbeddingSet, EmbeddingFileError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| EmbeddingFileError::BadMagic)?;
    if &magic != MAGIC {
        return Err(EmbeddingFileError::BadMagic);
    }
    let mut u32buf = [0u8; 4];
    read_exact_or(&mut r, &mut u32buf, 0)?;
    let version = u32::from_le_bytes(u32buf);
    if version != VERSION {
        return Err(EmbeddingFileError::UnsupportedVersion(version));
    }
    read_exact_or(&mut r, &mut u32buf, 0)?;
    let dim = u32::from_le_bytes(u32buf) as usize;
    let mut u64buf = [0u8; 8];
    read_exact_or(&mut r, &mut u64buf, 0)?;
    let count = u64::from_le_bytes(u64buf);

    let mut set = EmbeddingSet::new(dim);
    let mut values_buf = vec![0u8; dim * 4];
    for i in 0..count {
        let mut len_buf = [0u8; 2];
        read_exact_or(&mut r, &mut len_buf, i)?;
        let mut id_buf = vec![0u8; u16::from_le_bytes(len_buf) as usize];
        read_exact_or(&mut r, &mut id_buf, i)?;
        let id = String::from_utf8(id_buf).map_err(|_| EmbeddingFileError::InvalidId(i))?;
        read_exact_or(&mut r, &mut values_buf, i)?;
        let values = values_buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        set.push(SentenceEmbedding { id, values })?;
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(EmbeddingFileError::TrailingBytes(rest.len()));
    }
    Ok(set)
}

/// Values are narrowed to `f32`; anything that does not fit is rejected.
pub fn write_semb<W: Write>(set: &EmbeddingSet, mut w: W) -> Result<(), EmbeddingFileError> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(set.dim as u32).to_le_bytes())?;
    w.write_all(&(set.records.len() as u64).to_le_bytes())?;
    for rec in &set.records {
        let id = rec.id.as_bytes();
        let id_len =
            u16::try_from(id.len()).map_err(|_| EmbeddingFileError::IdTooLong(rec.id.clone()))?;
        w.write_all(&id_len.to_le_bytes())?;
        w.write_all(id)?;
        for v in &rec.values {
            let f = *v as f32;
            if !f.is_finite() {
                return Err(EmbeddingFileError::NonFinite(rec.id.clone()));
            }
            w.write_all(&f.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct JsonRecord {
    id: String,
    v: Vec<f64>,
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<EmbeddingSet, EmbeddingFileError> {
    let mut set: Option<EmbeddingSet> = None;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonRecord = serde_json::from_str(&line).map_err(|e| EmbeddingFileError::Json {
            line: i + 1,
            message: e.to_string(),
        })?;
        let set = set.get_or_insert_with(|| EmbeddingSet::new(rec.v.len()));
        set.push(SentenceEmbedding::new(rec.id, rec.v))?;
    }
    Ok(set.unwrap_or_default())
}

pub fn write_jsonl<W: Write>(set: &EmbeddingSet, mut w: W) -> Result<(), EmbeddingFileError> {
    for rec in &set.records {
        let line = serde_json::to_string(&JsonRecord {
            id: rec.id.clone(),
            v: rec.values.clone(),
        })
        .expect("finite floats serialize");
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

/// Loads either container, sniffing the `SEMB` magic.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingSet, EmbeddingFileError> {
    let mut reader = BufReader::new(File::open(path)?);
    let is_binary = reader.fill_buf()?.starts_with(MAGIC);
    if is_binary {
        read_semb(reader)
    } else {
        read_jsonl(reader)
    }
}

/// Writes JSON lines for `.jsonl`/`.json` paths and `SEMB` otherwise.
pub fn save_embeddings(set: &EmbeddingSet, path: &Path) -> Result<(), EmbeddingFileError> {
    let w = BufWriter::new(File::create(path)?);
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl" | "json") => write_jsonl(set, w),
        _ => write_semb(set, w),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> EmbeddingSet {
        EmbeddingSet::from_records(
            3,
            vec![
                SentenceEmbedding::new("p1.a", vec![0.5, -1.25, 3.0]),
                SentenceEmbedding::new("p1.b", vec![0.0, 2.0, -0.125]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn coverage_names_first_missing_side() {
        let pair = |id: &str| SentencePair {
            pair_id: id.into(),
            lang: "eng".into(),
            text_a: "x".into(),
            text_b: "y".into(),
            gold_score: None,
        };
        let set = sample();
        assert!(set.check_coverage(&[pair("p1")]).is_ok());
        assert!(matches!(
            set.check_coverage(&[pair("p1"), pair("p2")]),
            Err(EmbeddingFileError::MissingId(id)) if id == "p2.a"
        ));
    }

    #[test]
    fn header_layout() {
        let mut buf = Vec::new();
        write_semb(&sample(), &mut buf).unwrap();
        assert_eq!(&buf[..4], b"SEMB");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(buf[12..20].try_into().unwrap()), 2);
        assert_eq!(u16::from_le_bytes(buf[20..22].try_into().unwrap()), 4);
        assert_eq!(&buf[22..26], b"p1.a");
        assert_eq!(f32::from_le_bytes(buf[26..30].try_into().unwrap()), 0.5);
        assert_eq!(buf.len(), 20 + 2 * (2 + 4 + 12));
    }

    #[test]
    fn malformed_containers() {
        let mut buf = Vec::new();
        write_semb(&sample(), &mut buf).unwrap();
        assert!(matches!(read_semb(&buf[..buf.len() - 1]), Err(EmbeddingFileError::Truncated(1))));
        let mut extra = buf.clone();
        extra.push(0);
        assert!(matches!(read_semb(extra.as_slice()), Err(EmbeddingFileError::TrailingBytes(1))));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_semb(bad.as_slice()), Err(EmbeddingFileError::BadMagic)));
        let mut v2 = buf.clone();
        v2[4] = 2;
        assert!(matches!(read_semb(v2.as_slice()), Err(EmbeddingFileError::UnsupportedVersion(2))));
    }

    #[test]
    fn set_validation() {
        let mut set = sample();
        assert!(matches!(
            set.push(SentenceEmbedding::new("p1.a", vec![0.0; 3])),
            Err(EmbeddingFileError::DuplicateId(_))
        ));
        assert!(matches!(
            set.push(SentenceEmbedding::new("x", vec![0.0; 2])),
            Err(EmbeddingFileError::DimMismatch { expected: 3, found: 2, .. })
        ));
        assert!(matches!(
            set.push(SentenceEmbedding::new("y", vec![0.0, f64::NAN, 0.0])),
            Err(EmbeddingFileError::NonFinite(_))
        ));
        assert!(set.require("missing").is_err());
    }

    #[test]
    fn jsonl_reads_and_sniffing() {
        let text = "{\"id\":\"a\",\"v\":[1.0,2.0]}\n\n{\"id\":\"b\",\"v\":[3.0,4.5]}\n";
        let set = read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(set.dim(), 2);
        assert_eq!(set.get("b").unwrap().values, [3.0, 4.5]);
        let dir = tempfile::tempdir().unwrap();
        for name in ["e.semb", "e.jsonl"] {
            let path = dir.path().join(name);
            save_embeddings(&sample(), &path).unwrap();
            let loaded = load_embeddings(&path).unwrap();
            assert_eq!(loaded.records(), sample().records());
        }
    }

    proptest! {
        #[test]
        fn semb_round_trip(rows in proptest::collection::vec(
            ("[a-z0-9.]{1,12}", proptest::collection::vec(-1e6f32..1e6, 4)), 0..10)
        ) {
            let mut set = EmbeddingSet::new(4);
            for (id, v) in rows {
                let _ = set.push(SentenceEmbedding::new(id, v.into_iter().map(f64::from).collect()));
            }
            let mut buf = Vec::new();
            write_semb(&set, &mut buf).unwrap();
            let back = read_semb(buf.as_slice()).unwrap();
            prop_assert_eq!(back.records(), set.records());
        }
    }
}
