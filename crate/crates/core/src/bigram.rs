//! Unsupervised relatedness from co-occurrence counts.
//!
//! A "bigram" here is an unordered pair of distinct words that share a
//! sentence, paragraph or document. Each pair carries three counts, which
//! weight a skip-gram style embedding objective with one random negative per
//! positive draw. The learned word vectors can be clustered and blended with
//! token overlap into a sentence-pair score.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{tokenize, TokenizedSentence};
use crate::embfile::{load_embeddings, save_embeddings, EmbeddingFileError, EmbeddingSet};
use crate::lexical::jaccard;
use crate::vecmath::{cosine, SentenceEmbedding};

#[derive(Debug, Error)]
pub enum BigramError {
    #[error("corpus has no co-occurring word pairs")]
    EmptyCorpus,
    #[error("no bigram records to train on")]
    EmptyRecords,
    #[error("weights must be non-negative, finite and give some record positive mass")]
    InvalidWeights,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("training loss diverged at epoch {0}")]
    DivergedLoss(usize),
    #[error("k = {k} exceeds vocabulary size {vocab}")]
    KTooLarge { k: usize, vocab: usize },
    #[error("k must be at least 1")]
    KZero,
    #[error("alpha {0} outside [0, 1]")]
    InvalidAlpha(f64),
    #[error("bigram file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Embeddings(#[from] EmbeddingFileError),
}

/// Paragraphs of sentences of tokens.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Document {
    pub paragraphs: Vec<Vec<Vec<String>>>,
}

pub const DEFAULT_SENTENCE_TERMINATORS: &str = ".!?";

impl Document {
    /// Blank lines separate paragraphs; any character in `terminators` ends a
    /// sentence. Sentences with no tokens are skipped, as are empty
    /// paragraphs.
    pub fn parse(text: &str, terminators: &str) -> Self {
        let mut paragraphs = Vec::new();
        let mut current = String::new();
        let flush = |buf: &mut String, out: &mut Vec<Vec<Vec<String>>>| {
            let sentences: Vec<Vec<String>> = buf
                .split(|c| terminators.contains(c))
                .map(|s| tokenize(s, "").tokens)
                .filter(|t| !t.is_empty())
                .collect();
            if !sentences.is_empty() {
                out.push(sentences);
            }
            buf.clear();
        };
        for line in text.lines() {
            if line.trim().is_empty() {
                flush(&mut current, &mut paragraphs);
            } else {
                current.push_str(line);
                current.push('\n');
            }
        }
        flush(&mut current, &mut paragraphs);
        Self { paragraphs }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountMode {
    /// Per document, a pair scores 1 in each scope where it co-occurs.
    #[default]
    Binary,
    /// A pair counts `n(w1) · n(w2)` per scope instance.
    Multiplicity,
}

impl std::str::FromStr for CountMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "binary" => Ok(Self::Binary),
            "multiplicity" => Ok(Self::Multiplicity),
            other => Err(format!("unknown count mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BigramRecord {
    pub w1: String,
    pub w2: String,
    pub sent_count: u64,
    pub para_count: u64,
    pub doc_count: u64,
}

type Counts = BTreeMap<(String, String), [u64; 3]>;

fn scope_pairs<'a, I>(tokens: I) -> Vec<((&'a str, &'a str), u64)>
where
    I: IntoIterator<Item = &'a String>,
{
    let mut freq: BTreeMap<&str, u64> = BTreeMap::new();
    for t in tokens {
        *freq.entry(t.as_str()).or_insert(0) += 1;
    }
    let terms: Vec<(&str, u64)> = freq.into_iter().collect();
    let mut out = Vec::new();
    for (i, &(x, nx)) in terms.iter().enumerate() {
        for &(y, ny) in &terms[i + 1..] {
            out.push(((x, y), nx * ny));
        }
    }
    out
}

/// Counts for one document. In binary mode each scope count is 0 or 1: does
/// some sentence (paragraph, the document) hold both words. Summed over
/// documents this keeps `sent ≤ para ≤ doc`. Multiplicity mode adds
/// `n(w1) · n(w2)` for every sentence, paragraph and the document, i.e. the
/// number of token-position pairs sharing that scope, which nests as well.
fn count_document(doc: &Document, mode: CountMode) -> Counts {
    let mut out = Counts::new();
    let mut add = |pairs: Vec<((&str, &str), u64)>, slot: usize, seen: &mut BTreeSet<(String, String)>| {
        for ((x, y), n) in pairs {
            let key = (x.to_string(), y.to_string());
            let inc = match mode {
                CountMode::Binary if !seen.insert(key.clone()) => continue,
                CountMode::Binary => 1,
                CountMode::Multiplicity => n,
            };
            out.entry(key).or_insert([0; 3])[slot] += inc;
        }
    };
    let (mut in_sent, mut in_para, mut in_doc) = (BTreeSet::new(), BTreeSet::new(), BTreeSet::new());
    for para in &doc.paragraphs {
        for sent in para {
            add(scope_pairs(sent), 0, &mut in_sent);
        }
        add(scope_pairs(para.iter().flatten()), 1, &mut in_para);
    }
    add(scope_pairs(doc.paragraphs.iter().flatten().flatten()), 2, &mut in_doc);
    out
}

/// Sentence, paragraph and document co-occurrence counts for every unordered
/// pair of distinct words, sorted by `(w1, w2)` with `w1 < w2`.
pub fn build_bigram_corpus(docs: &[Document], mode: CountMode) -> Result<Vec<BigramRecord>, BigramError> {
    let merged = docs
        .par_iter()
        .map(|d| count_document(d, mode))
        .reduce(Counts::new, |mut a, b| {
            for (k, v) in b {
                let e = a.entry(k).or_insert([0; 3]);
                for i in 0..3 {
                    e[i] += v[i];
                }
            }
            a
        });
    if merged.is_empty() {
        return Err(BigramError::EmptyCorpus);
    }
    Ok(merged
        .into_iter()
        .map(|((w1, w2), [s, p, d])| BigramRecord {
            w1,
            w2,
            sent_count: s,
            para_count: p,
            doc_count: d,
        })
        .collect())
}

pub fn write_bigram_tsv<W: Write>(records: &[BigramRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "w1\tw2\tsent_count\tpara_count\tdoc_count")?;
    for r in records {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            r.w1, r.w2, r.sent_count, r.para_count, r.doc_count
        )?;
    }
    w.flush()
}

pub fn read_bigram_tsv<R: BufRead>(r: R) -> Result<Vec<BigramRecord>, BigramError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 || line.is_empty() {
            continue;
        }
        let bad = |message: &str| BigramError::Format {
            line: i + 1,
            message: message.to_string(),
        };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(bad("expected 5 fields"));
        }
        if f[0] >= f[1] {
            return Err(bad("w1 must sort before w2"));
        }
        let n = |s: &str| s.parse::<u64>().map_err(|_| bad("bad count"));
        out.push(BigramRecord {
            w1: f[0].to_string(),
            w2: f[1].to_string(),
            sent_count: n(f[2])?,
            para_count: n(f[3])?,
            doc_count: n(f[4])?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub dim: usize,
    pub seed: u64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            learning_rate: 0.05,
            dim: 64,
            seed: 0,
        }
    }
}

/// Scope weights `(sentence, paragraph, document)`.
pub const DEFAULT_WEIGHTS: (f64, f64, f64) = (1.0, 0.5, 0.25);

#[derive(Debug, Clone, PartialEq)]
pub struct WordEmbeddingTable {
    dim: usize,
    seed: u64,
    terms: Vec<String>,
    vectors: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
}

impl WordEmbeddingTable {
    /// Terms are stored in lexicographic order.
    pub fn new(dim: usize, seed: u64, entries: BTreeMap<String, Vec<f64>>) -> Self {
        let (terms, vectors): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self {
            dim,
            seed,
            terms,
            vectors,
            index,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn get(&self, term: &str) -> Option<&[f64]> {
        self.index.get(term).map(|&i| self.vectors[i].as_slice())
    }

    pub fn to_embedding_set(&self) -> Result<EmbeddingSet, EmbeddingFileError> {
        EmbeddingSet::from_records(
            self.dim,
            self.terms
                .iter()
                .zip(&self.vectors)
                .map(|(t, v)| SentenceEmbedding::new(t.clone(), v.clone()))
                .collect(),
        )
    }

    /// Saved as an embedding container with terms as ids. The seed is not
    /// stored, so a reloaded table reports seed 0.
    pub fn save(&self, path: &Path) -> Result<(), BigramError> {
        save_embeddings(&self.to_embedding_set()?, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, BigramError> {
        let set = load_embeddings(path)?;
        let entries = set
            .records()
            .iter()
            .map(|r| (r.id.clone(), r.values.clone()))
            .collect();
        Ok(Self::new(set.dim(), 0, entries))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbedStats {
    pub positives_drawn: u64,
    pub negatives_drawn: u64,
    pub epoch_losses: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `-ln σ(x)` without overflow.
fn neg_log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// One logistic step on the pair `(i, j)` with label 1 or 0; returns the loss.
fn sgd_step(vectors: &mut [Vec<f64>], i: usize, j: usize, label: f64, lr: f64) -> f64 {
    let s: f64 = vectors[i].iter().zip(&vectors[j]).map(|(a, b)| a * b).sum();
    let g = sigmoid(s) - label;
    let loss = if label > 0.5 {
        neg_log_sigmoid(s)
    } else {
        neg_log_sigmoid(-s)
    };
    for d in 0..vectors[i].len() {
        let (vi, vj) = (vectors[i][d], vectors[j][d]);
        vectors[i][d] -= lr * g * vj;
        vectors[j][d] -= lr * g * vi;
    }
    loss
}

/// Learns one vector per word with a sigmoid dot-product objective. Every
/// epoch draws `records.len()` positive pairs with probability proportional
/// to `ws·sent + wp·para + wd·doc`; each positive `(w1, w2)` is followed by
/// exactly one negative `(w1, r)` with `r` uniform over the other words.
pub fn train_embeddings(
    records: &[BigramRecord],
    weights: (f64, f64, f64),
    cfg: &EmbedConfig,
) -> Result<(WordEmbeddingTable, EmbedStats), BigramError> {
    if records.is_empty() {
        return Err(BigramError::EmptyRecords);
    }
    let (ws, wp, wd) = weights;
    if [ws, wp, wd].iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(BigramError::InvalidWeights);
    }
    if cfg.dim == 0 {
        return Err(BigramError::InvalidConfig("dim must be positive".into()));
    }
    if !(cfg.learning_rate.is_finite() && cfg.learning_rate > 0.0) {
        return Err(BigramError::InvalidConfig("learning rate must be positive".into()));
    }
    let masses: Vec<f64> = records
        .iter()
        .map(|r| ws * r.sent_count as f64 + wp * r.para_count as f64 + wd * r.doc_count as f64)
        .collect();
    let sampler = WeightedIndex::new(&masses).map_err(|_| BigramError::InvalidWeights)?;

    let vocab: BTreeSet<&str> = records
        .iter()
        .flat_map(|r| [r.w1.as_str(), r.w2.as_str()])
        .collect();
    let terms: Vec<String> = vocab.into_iter().map(str::to_string).collect();
    let index: HashMap<&str, usize> = terms.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let pairs: Vec<(usize, usize)> = records
        .iter()
        .map(|r| (index[r.w1.as_str()], index[r.w2.as_str()]))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let scale = 0.5 / (cfg.dim as f64).sqrt();
    let mut vectors: Vec<Vec<f64>> = (0..terms.len())
        .map(|_| (0..cfg.dim).map(|_| rng.gen_range(-scale..scale)).collect())
        .collect();

    let n_terms = terms.len();
    let mut stats = EmbedStats {
        positives_drawn: 0,
        negatives_drawn: 0,
        epoch_losses: Vec::with_capacity(cfg.epochs),
    };
    for epoch in 0..cfg.epochs {
        let mut total = 0.0;
        for _ in 0..records.len() {
            let (i, j) = pairs[sampler.sample(&mut rng)];
            total += sgd_step(&mut vectors, i, j, 1.0, cfg.learning_rate);
            stats.positives_drawn += 1;
            // uniform over the vocabulary minus i
            let mut r = rng.gen_range(0..n_terms - 1);
            if r >= i {
                r += 1;
            }
            total += sgd_step(&mut vectors, i, r, 0.0, cfg.learning_rate);
            stats.negatives_drawn += 1;
        }
        let mean = total / (2 * records.len()) as f64;
        if !mean.is_finite() || vectors.iter().flatten().any(|v| !v.is_finite()) {
            return Err(BigramError::DivergedLoss(epoch));
        }
        stats.epoch_losses.push(mean);
    }
    let table = WordEmbeddingTable::new(cfg.dim, cfg.seed, terms.into_iter().zip(vectors).collect());
    Ok((table, stats))
}

fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    cosine(a, b).map(|c| 1.0 - c).unwrap_or(1.0)
}

/// Agglomerative clustering with average linkage on cosine distance, cut at
/// `k` clusters. Ties merge the pair whose smallest terms sort first. Cluster
/// ids are assigned in order of each cluster's smallest term.
pub fn cluster_words(table: &WordEmbeddingTable, k: usize) -> Result<BTreeMap<String, usize>, BigramError> {
    let n = table.len();
    if k == 0 {
        return Err(BigramError::KZero);
    }
    if k > n {
        return Err(BigramError::KTooLarge { k, vocab: n });
    }
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = cosine_distance(&table.vectors[i], &table.vectors[j]);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    // `members` stays sorted by smallest term because terms are sorted and a
    // merge always folds the later cluster into the earlier one.
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut slot: Vec<usize> = (0..n).collect();
    while members.len() > k {
        let mut best = (f64::INFINITY, 0, 0);
        for a in 0..members.len() {
            for b in a + 1..members.len() {
                let d = dist[slot[a]][slot[b]];
                if d < best.0 {
                    best = (d, a, b);
                }
            }
        }
        let (_, a, b) = best;
        let (sa, sb) = (slot[a], slot[b]);
        let (na, nb) = (members[a].len() as f64, members[b].len() as f64);
        for (c, &sc) in slot.iter().enumerate() {
            if c != a && c != b {
                let d = (na * dist[sa][sc] + nb * dist[sb][sc]) / (na + nb);
                dist[sa][sc] = d;
                dist[sc][sa] = d;
            }
        }
        let moved = members.remove(b);
        slot.remove(b);
        members[a].extend(moved);
    }
    Ok(members
        .iter()
        .enumerate()
        .flat_map(|(id, m)| m.iter().map(move |&i| (table.terms[i].clone(), id)))
        .collect())
}

fn mean_vector(s: &TokenizedSentence, table: &WordEmbeddingTable) -> Option<Vec<f64>> {
    let known: Vec<&[f64]> = s.token_set.iter().filter_map(|t| table.get(t)).collect();
    if known.is_empty() {
        return None;
    }
    let mut mean = vec![0.0; table.dim];
    for v in &known {
        for (m, x) in mean.iter_mut().zip(v.iter()) {
            *m += x;
        }
    }
    let n = known.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Some(mean)
}

/// `alpha · (1 + cos(mean_a, mean_b)) / 2 + (1 - alpha) · jaccard`, where the
/// means run over each sentence's distinct known words. Falls back to
/// Jaccard when either side has no known words or a zero mean vector.
pub fn score_pair_unsupervised(
    a: &TokenizedSentence,
    b: &TokenizedSentence,
    table: &WordEmbeddingTable,
    alpha: f64,
) -> f64 {
    let jac = jaccard(a, b).value;
    let cos = match (mean_vector(a, table), mean_vector(b, table)) {
        (Some(ma), Some(mb)) => cosine(&ma, &mb).ok(),
        _ => None,
    };
    match cos {
        Some(c) => {
            let cos01 = ((1.0 + c) / 2.0).clamp(0.0, 1.0);
            (alpha * cos01 + (1.0 - alpha) * jac).clamp(0.0, 1.0)
        }
        None => jac,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(w1: &str, w2: &str, s: u64, p: u64, d: u64) -> BigramRecord {
        BigramRecord {
            w1: w1.into(),
            w2: w2.into(),
            sent_count: s,
            para_count: p,
            doc_count: d,
        }
    }

    fn sent(words: &[&str]) -> TokenizedSentence {
        TokenizedSentence::from_tokens(words.iter().map(|w| w.to_string()).collect())
    }

    #[test]
    fn minimal_document() {
        let doc = Document::parse("a b", DEFAULT_SENTENCE_TERMINATORS);
        let recs = build_bigram_corpus(&[doc], CountMode::Binary).unwrap();
        assert_eq!(recs, vec![rec("a", "b", 1, 1, 1)]);
    }

    #[test]
    fn hand_enumeration() {
        let doc = Document::parse("a b. c a", DEFAULT_SENTENCE_TERMINATORS);
        assert_eq!(doc.paragraphs.len(), 1);
        assert_eq!(doc.paragraphs[0].len(), 2);
        let recs = build_bigram_corpus(&[doc], CountMode::Binary).unwrap();
        assert_eq!(
            recs,
            vec![rec("a", "b", 1, 1, 1), rec("a", "c", 1, 1, 1), rec("b", "c", 0, 1, 1)]
        );
    }

    #[test]
    fn paragraphs_and_multiplicity() {
        let text = "a b a.\n\nb c.\n";
        let doc = Document::parse(text, DEFAULT_SENTENCE_TERMINATORS);
        assert_eq!(doc.paragraphs.len(), 2);
        let bin = build_bigram_corpus(&[doc.clone()], CountMode::Binary).unwrap();
        assert_eq!(
            bin,
            vec![rec("a", "b", 1, 1, 1), rec("a", "c", 0, 0, 1), rec("b", "c", 1, 1, 1)]
        );
        let mult = build_bigram_corpus(&[doc], CountMode::Multiplicity).unwrap();
        // the document holds a twice and b twice
        assert_eq!(mult[0], rec("a", "b", 2, 2, 4));
        assert_eq!(mult[1], rec("a", "c", 0, 0, 2));
    }

    #[test]
    fn binary_counts_documents() {
        let doc = Document::parse("d. c\n\nd. c\n", DEFAULT_SENTENCE_TERMINATORS);
        assert_eq!(doc.paragraphs.len(), 2);
        let recs = build_bigram_corpus(&[doc.clone(), doc], CountMode::Binary).unwrap();
        assert_eq!(recs, vec![rec("c", "d", 0, 2, 2)]);
    }

    #[test]
    fn empty_corpus() {
        let doc = Document::parse("lonely", DEFAULT_SENTENCE_TERMINATORS);
        assert!(matches!(build_bigram_corpus(&[doc], CountMode::Binary), Err(BigramError::EmptyCorpus)));
        assert!(matches!(build_bigram_corpus(&[], CountMode::Binary), Err(BigramError::EmptyCorpus)));
    }

    #[test]
    fn tsv_round_trip() {
        let recs = vec![rec("a", "b", 1, 2, 3), rec("b", "c", 0, 0, 1)];
        let mut buf = Vec::new();
        write_bigram_tsv(&recs, &mut buf).unwrap();
        assert_eq!(read_bigram_tsv(buf.as_slice()).unwrap(), recs);
        let bad = b"w1\tw2\tsent_count\tpara_count\tdoc_count\nb\ta\t1\t1\t1\n";
        assert!(matches!(read_bigram_tsv(&bad[..]), Err(BigramError::Format { line: 2, .. })));
    }

    fn separable_records() -> Vec<BigramRecord> {
        vec![
            rec("a", "b", 10, 10, 10),
            rec("c", "d", 10, 10, 10),
            rec("y", "z", 10, 10, 10),
            rec("c", "y", 1, 1, 1),
        ]
    }

    #[test]
    fn training_separates_cooccurring_words() {
        let cfg = EmbedConfig {
            epochs: 300,
            learning_rate: 0.1,
            dim: 16,
            seed: 3,
        };
        let (table, stats) = train_embeddings(&separable_records(), DEFAULT_WEIGHTS, &cfg).unwrap();
        let ab = cosine(table.get("a").unwrap(), table.get("b").unwrap()).unwrap();
        let az = cosine(table.get("a").unwrap(), table.get("z").unwrap()).unwrap();
        assert!(ab > az, "cos(a,b)={ab} cos(a,z)={az}");
        assert_eq!(stats.positives_drawn, stats.negatives_drawn);
        assert_eq!(stats.positives_drawn, 300 * 4);
        let (again, _) = train_embeddings(&separable_records(), DEFAULT_WEIGHTS, &cfg).unwrap();
        assert_eq!(again, table);
    }

    #[test]
    fn training_errors() {
        let cfg = EmbedConfig::default();
        assert!(matches!(train_embeddings(&[], DEFAULT_WEIGHTS, &cfg), Err(BigramError::EmptyRecords)));
        assert!(matches!(
            train_embeddings(&separable_records(), (0.0, 0.0, 0.0), &cfg),
            Err(BigramError::InvalidWeights)
        ));
        assert!(matches!(
            train_embeddings(&separable_records(), (-1.0, 0.0, 1.0), &cfg),
            Err(BigramError::InvalidWeights)
        ));
        let wild = EmbedConfig {
            learning_rate: 1e200,
            epochs: 5,
            ..EmbedConfig::default()
        };
        assert!(matches!(
            train_embeddings(&separable_records(), DEFAULT_WEIGHTS, &wild),
            Err(BigramError::DivergedLoss(_))
        ));
    }

    fn table(entries: &[(&str, &[f64])]) -> WordEmbeddingTable {
        let dim = entries[0].1.len();
        WordEmbeddingTable::new(
            dim,
            0,
            entries.iter().map(|(t, v)| (t.to_string(), v.to_vec())).collect(),
        )
    }

    #[test]
    fn clustering_cases() {
        let t = table(&[
            ("a", &[1.0, 0.0]),
            ("b", &[0.9, 0.1]),
            ("c", &[0.0, 1.0]),
            ("d", &[0.1, 0.95]),
        ]);
        let two = cluster_words(&t, 2).unwrap();
        assert_eq!(two["a"], two["b"]);
        assert_eq!(two["c"], two["d"]);
        assert_ne!(two["a"], two["c"]);
        assert_eq!(two["a"], 0);
        let one = cluster_words(&t, 1).unwrap();
        assert!(one.values().all(|&c| c == 0));
        let four = cluster_words(&t, 4).unwrap();
        assert_eq!(four.values().copied().collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        assert!(matches!(cluster_words(&t, 5), Err(BigramError::KTooLarge { k: 5, vocab: 4 })));
        assert!(matches!(cluster_words(&t, 0), Err(BigramError::KZero)));
    }

    #[test]
    fn clustering_ties_break_lexicographically() {
        // all pairwise distances equal: first merge is (a, b)
        let t = table(&[("a", &[1.0, 0.0, 0.0]), ("b", &[0.0, 1.0, 0.0]), ("c", &[0.0, 0.0, 1.0])]);
        let two = cluster_words(&t, 2).unwrap();
        assert_eq!(two["a"], 0);
        assert_eq!(two["b"], 0);
        assert_eq!(two["c"], 1);
    }

    #[test]
    fn unsupervised_score_hand_case() {
        let t = table(&[("x", &[1.0, 0.0]), ("y", &[0.0, 1.0]), ("w", &[1.0, 1.0])]);
        let a = sent(&["x", "q"]);
        let b = sent(&["y", "q"]);
        // cosine((1,0), (0,1)) = 0, jaccard = 1/3
        let s = score_pair_unsupervised(&a, &b, &t, 0.5);
        assert!((s - (0.5 * 0.5 + 0.5 / 3.0)).abs() < 1e-12);
        let same = sent(&["x", "w"]);
        assert!((score_pair_unsupervised(&same, &same, &t, 0.5) - 1.0).abs() < 1e-12);
        assert_eq!(score_pair_unsupervised(&a, &b, &t, 0.0), jaccard(&a, &b).value);
        let unknown = sent(&["q", "r"]);
        assert_eq!(score_pair_unsupervised(&unknown, &a, &t, 0.5), jaccard(&unknown, &a).value);
    }

    #[test]
    fn table_round_trip() {
        let t = table(&[("x", &[1.0, 0.5]), ("y", &[0.25, -1.0])]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.semb");
        t.save(&path).unwrap();
        assert_eq!(WordEmbeddingTable::load(&path).unwrap(), t);
    }

    fn arb_doc() -> impl Strategy<Value = Document> {
        let sentence = proptest::collection::vec("[a-e]", 1..5);
        let para = proptest::collection::vec(sentence, 1..4);
        proptest::collection::vec(para, 1..4).prop_map(|paragraphs| Document { paragraphs })
    }

    proptest! {
        #[test]
        fn counts_nest(docs in proptest::collection::vec(arb_doc(), 1..4)) {
            for mode in [CountMode::Binary, CountMode::Multiplicity] {
                if let Ok(recs) = build_bigram_corpus(&docs, mode) {
                    for r in recs {
                        prop_assert!(r.w1 < r.w2);
                        prop_assert!(r.sent_count <= r.para_count && r.para_count <= r.doc_count);
                    }
                }
            }
        }

        #[test]
        fn reordering_invariance(doc in arb_doc()) {
            let base = build_bigram_corpus(&[doc.clone()], CountMode::Binary);
            let mut paras = doc.clone();
            paras.paragraphs.reverse();
            let mut sents = doc.clone();
            for p in &mut sents.paragraphs {
                p.reverse();
            }
            match base {
                Ok(base) => {
                    let rp = build_bigram_corpus(&[paras], CountMode::Binary).unwrap();
                    let rs = build_bigram_corpus(&[sents], CountMode::Binary).unwrap();
                    prop_assert_eq!(&base, &rp);
                    prop_assert_eq!(&base, &rs);
                }
                Err(_) => prop_assert!(build_bigram_corpus(&[paras], CountMode::Binary).is_err()),
            }
        }

        #[test]
        fn score_symmetric_bounded(
            a in proptest::collection::vec("[a-f]", 0..5),
            b in proptest::collection::vec("[a-f]", 0..5),
            alpha in 0.0f64..=1.0,
            vals in proptest::collection::vec(-1.0f64..1.0, 8),
        ) {
            let t = WordEmbeddingTable::new(
                2,
                0,
                ["a", "b", "c", "d"].iter().zip(vals.chunks(2)).map(|(w, v)| (w.to_string(), v.to_vec())).collect(),
            );
            let (sa, sb) = (TokenizedSentence::from_tokens(a), TokenizedSentence::from_tokens(b));
            let x = score_pair_unsupervised(&sa, &sb, &t, alpha);
            let y = score_pair_unsupervised(&sb, &sa, &t, alpha);
            prop_assert!((x - y).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&x));
        }
    }
}
