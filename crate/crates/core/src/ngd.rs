//! Normalized Google Distance over a local document collection.
//!
//! Document frequencies `f(x)` and co-occurrence frequencies `f(x, y)` come
//! from presence counts in a user-supplied corpus instead of search-engine
//! hit counts:
//!
//! ```text
//! NGD(x, y) = (max(ln f(x), ln f(y)) - ln f(x, y)) / (ln N - min(ln f(x), ln f(y)))
//! ```
//!
//! Sentence relatedness removes stopwords, optionally POS-tags the remaining
//! words, and averages the clamped NGD of every cross-sentence word pair
//! (restricted to equal tags when a tagger is supplied).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::TokenizedSentence;

#[derive(Debug, Error)]
pub enum NgdError {
    #[error("corpus has no documents")]
    EmptyCorpus,
    #[error("term {0:?} does not occur in the corpus")]
    UnknownTerm(String),
    #[error("terms {0:?} and {1:?} never co-occur")]
    NeverCooccur(String, String),
    #[error("corpus too small: terms {0:?} and {1:?} occur in every document")]
    DegenerateCorpus(String, String),
    #[error("no comparable word pairs between the sentences")]
    NoComparablePairs,
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("index header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("index file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("stopword list does not match the index (hash {expected} vs {found})")]
    StopwordMismatch { expected: String, found: String },
}

const ENGLISH_STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
    "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
    "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "few", "for",
    "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers", "herself",
    "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just",
    "me", "more", "most", "my", "myself", "no", "nor", "not", "now", "of", "off", "on", "once",
    "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own", "same", "she",
    "should", "so", "some", "such", "than", "that", "the", "their", "theirs", "them",
    "themselves", "then", "there", "these", "they", "this", "those", "through", "to", "too",
    "under", "until", "up", "very", "was", "we", "were", "what", "when", "where", "which",
    "while", "who", "whom", "why", "will", "with", "would", "you", "your", "yours", "yourself",
    "yourselves",
];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stopwords(BTreeSet<String>);

impl Stopwords {
    pub fn none() -> Self {
        Self::default()
    }

    /// Built-in list for `lang`; only English ships one, other languages get
    /// an empty set.
    pub fn builtin(lang: &str) -> Self {
        match lang {
            "eng" | "en" | "english" => ENGLISH_STOPWORDS.iter().copied().collect(),
            _ => Self::none(),
        }
    }

    /// One word per line; blank lines and `#` comments are skipped. Words are
    /// lowercased to match the tokenizer.
    pub fn from_reader<R: BufRead>(r: R) -> std::io::Result<Self> {
        let mut set = BTreeSet::new();
        for line in r.lines() {
            let line = line?;
            let word = line.trim();
            if !word.is_empty() && !word.starts_with('#') {
                set.insert(word.to_lowercase());
            }
        }
        Ok(Self(set))
    }

    pub fn contains(&self, term: &str) -> bool {
        self.0.contains(term)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    /// SHA-256 of the sorted words joined by newlines, hex encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (i, w) in self.0.iter().enumerate() {
            if i > 0 {
                h.update(b"\n");
            }
            h.update(w.as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl<S: Into<String>> FromIterator<S> for Stopwords {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(iter.into_iter().map(Into::into).collect())
    }
}

fn pair_key(x: &str, y: &str) -> (String, String) {
    if x <= y {
        (x.to_string(), y.to_string())
    } else {
        (y.to_string(), x.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusIndex {
    n_docs: u64,
    doc_freq: BTreeMap<String, u64>,
    pair_freq: BTreeMap<(String, String), u64>,
    stopwords: Stopwords,
}

/// Presence counts of terms and unordered term pairs per document, after
/// stopword removal.
pub fn build_index(docs: &[Vec<String>], stopwords: &Stopwords) -> Result<CorpusIndex, NgdError> {
    if docs.is_empty() {
        return Err(NgdError::EmptyCorpus);
    }
    let mut doc_freq = BTreeMap::new();
    let mut pair_freq = BTreeMap::new();
    for doc in docs {
        let terms: BTreeSet<&str> = doc
            .iter()
            .map(String::as_str)
            .filter(|t| !stopwords.contains(t))
            .collect();
        let terms: Vec<&str> = terms.into_iter().collect();
        for (i, x) in terms.iter().enumerate() {
            *doc_freq.entry(x.to_string()).or_insert(0) += 1;
            for y in &terms[i + 1..] {
                // terms are sorted, so (x, y) is already canonical
                *pair_freq.entry((x.to_string(), y.to_string())).or_insert(0) += 1;
            }
        }
    }
    Ok(CorpusIndex {
        n_docs: docs.len() as u64,
        doc_freq,
        pair_freq,
        stopwords: stopwords.clone(),
    })
}

#[derive(Serialize, Deserialize)]
struct IndexHeader {
    n_docs: u64,
    stopwords_sha256: String,
    stopwords: Vec<String>,
}

impl CorpusIndex {
    pub fn n_docs(&self) -> u64 {
        self.n_docs
    }

    pub fn stopwords(&self) -> &Stopwords {
        &self.stopwords
    }

    pub fn doc_freq(&self, term: &str) -> u64 {
        self.doc_freq.get(term).copied().unwrap_or(0)
    }

    /// `f(x, y)`; a term co-occurs with itself in every document holding it.
    pub fn pair_freq(&self, x: &str, y: &str) -> u64 {
        if x == y {
            return self.doc_freq(x);
        }
        self.pair_freq.get(&pair_key(x, y)).copied().unwrap_or(0)
    }

    pub fn vocabulary_size(&self) -> usize {
        self.doc_freq.len()
    }

    fn paths(prefix: &Path) -> (PathBuf, PathBuf) {
        let with = |ext: &str| {
            let mut os = prefix.as_os_str().to_owned();
            os.push(ext);
            PathBuf::from(os)
        };
        (with(".tsv"), with(".json"))
    }

    /// Writes `<prefix>.tsv` (sorted `term\tcount` and `term\tterm2\tcount`
    /// lines) and `<prefix>.json` (document count and stopwords).
    pub fn save(&self, prefix: &Path) -> Result<(), NgdError> {
        let (tsv, json) = Self::paths(prefix);
        let mut w = BufWriter::new(File::create(tsv)?);
        self.write_counts(&mut w)?;
        w.flush()?;
        let header = IndexHeader {
            n_docs: self.n_docs,
            stopwords_sha256: self.stopwords.hash(),
            stopwords: self.stopwords.words().map(str::to_string).collect(),
        };
        let mut text = serde_json::to_string_pretty(&header)?;
        text.push('\n');
        std::fs::write(json, text)?;
        Ok(())
    }

    pub fn write_counts<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        // unigram and pair lines interleaved in one lexicographic order
        let mut lines: Vec<String> = self
            .doc_freq
            .iter()
            .map(|(t, c)| format!("{t}\t{c}"))
            .chain(
                self.pair_freq
                    .iter()
                    .map(|((x, y), c)| format!("{x}\t{y}\t{c}")),
            )
            .collect();
        lines.sort();
        for line in lines {
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn load(prefix: &Path) -> Result<Self, NgdError> {
        let (tsv, json) = Self::paths(prefix);
        let header: IndexHeader = serde_json::from_reader(BufReader::new(File::open(json)?))?;
        let stopwords: Stopwords = header.stopwords.into_iter().collect();
        if stopwords.hash() != header.stopwords_sha256 {
            return Err(NgdError::StopwordMismatch {
                expected: header.stopwords_sha256,
                found: stopwords.hash(),
            });
        }
        let mut doc_freq = BTreeMap::new();
        let mut pair_freq = BTreeMap::new();
        for (i, line) in BufReader::new(File::open(tsv)?).lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let bad = |message: &str| NgdError::Format {
                line: i + 1,
                message: message.to_string(),
            };
            let fields: Vec<&str> = line.split('\t').collect();
            let count: u64 = fields
                .last()
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| bad("bad count"))?;
            match fields.as_slice() {
                [term, _] => {
                    doc_freq.insert(term.to_string(), count);
                }
                [x, y, _] if x < y => {
                    pair_freq.insert((x.to_string(), y.to_string()), count);
                }
                _ => return Err(bad("expected 2 or 3 fields with ordered terms")),
            }
        }
        Ok(Self {
            n_docs: header.n_docs,
            doc_freq,
            pair_freq,
            stopwords,
        })
    }
}

/// NGD between two indexed terms.
pub fn ngd_word(x: &str, y: &str, idx: &CorpusIndex) -> Result<f64, NgdError> {
    let fx = idx.doc_freq(x);
    if fx == 0 {
        return Err(NgdError::UnknownTerm(x.to_string()));
    }
    let fy = idx.doc_freq(y);
    if fy == 0 {
        return Err(NgdError::UnknownTerm(y.to_string()));
    }
    let fxy = idx.pair_freq(x, y);
    if fxy == 0 {
        return Err(NgdError::NeverCooccur(x.to_string(), y.to_string()));
    }
    ngd_from_counts(idx.n_docs, fx, fy, fxy)
        .ok_or_else(|| NgdError::DegenerateCorpus(x.to_string(), y.to_string()))
}

/// The NGD formula on raw counts; `None` when `ln N - min(ln f) ≤ 0`.
pub fn ngd_from_counts(n: u64, fx: u64, fy: u64, fxy: u64) -> Option<f64> {
    let (lx, ly) = ((fx as f64).ln(), (fy as f64).ln());
    let denom = (n as f64).ln() - lx.min(ly);
    if denom <= 0.0 {
        return None;
    }
    Some((lx.max(ly) - (fxy as f64).ln()) / denom)
}

/// Assigns one tag per token of an already stopword-filtered sentence.
pub trait PosTagger {
    fn tag(&self, tokens: &[String]) -> Vec<String>;
}

/// Word → tag lookup with a fallback tag for unlisted words.
#[derive(Debug, Clone, Default)]
pub struct LexiconTagger {
    lexicon: HashMap<String, String>,
    fallback: String,
}

impl LexiconTagger {
    pub fn new(lexicon: HashMap<String, String>, fallback: impl Into<String>) -> Self {
        Self {
            lexicon,
            fallback: fallback.into(),
        }
    }

    /// `word\ttag` lines.
    pub fn from_reader<R: BufRead>(r: R) -> std::io::Result<Self> {
        let mut lexicon = HashMap::new();
        for line in r.lines() {
            let line = line?;
            if let Some((word, tag)) = line.split_once('\t') {
                lexicon.insert(word.trim().to_lowercase(), tag.trim().to_string());
            }
        }
        Ok(Self::new(lexicon, "X"))
    }
}

impl PosTagger for LexiconTagger {
    fn tag(&self, tokens: &[String]) -> Vec<String> {
        tokens
            .iter()
            .map(|t| self.lexicon.get(t).unwrap_or(&self.fallback).clone())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NgdScore {
    /// Mean clamped NGD; 0 is maximally related.
    pub value: f64,
    pub word_pairs_used: Vec<(String, String, f64)>,
}

fn content_words(
    s: &TokenizedSentence,
    idx: &CorpusIndex,
    tagger: Option<&dyn PosTagger>,
) -> BTreeSet<(String, Option<String>)> {
    let kept: Vec<String> = s
        .tokens
        .iter()
        .filter(|t| !idx.stopwords.contains(t))
        .cloned()
        .collect();
    let tags: Vec<Option<String>> = match tagger {
        Some(t) => t.tag(&kept).into_iter().map(Some).collect(),
        None => vec![None; kept.len()],
    };
    kept.into_iter()
        .zip(tags)
        .filter(|(w, _)| idx.doc_freq(w) > 0)
        .collect()
}

/// Averages clamped NGD over cross-sentence word pairs. Pairs that never
/// co-occur count as 1; pairs present in every document count as 0.
pub fn ngd_sentences(
    a: &TokenizedSentence,
    b: &TokenizedSentence,
    idx: &CorpusIndex,
    tagger: Option<&dyn PosTagger>,
) -> Result<NgdScore, NgdError> {
    let wa = content_words(a, idx, tagger);
    let wb = content_words(b, idx, tagger);
    let mut pairs = Vec::new();
    for (x, tx) in &wa {
        for (y, ty) in &wb {
            if tx != ty {
                continue;
            }
            let v = match ngd_word(x, y, idx) {
                Ok(v) => v.clamp(0.0, 1.0),
                Err(NgdError::NeverCooccur(..)) => 1.0,
                Err(NgdError::DegenerateCorpus(..)) => 0.0,
                Err(e) => return Err(e),
            };
            pairs.push((x.clone(), y.clone(), v));
        }
    }
    if pairs.is_empty() {
        return Err(NgdError::NoComparablePairs);
    }
    let value = pairs.iter().map(|p| p.2).sum::<f64>() / pairs.len() as f64;
    Ok(NgdScore {
        value: value.clamp(0.0, 1.0),
        word_pairs_used: pairs,
    })
}
