//! The 42-column composite feature vector.
//!
//! For every power `k` in `1..=10` both sentence embeddings are raised
//! element-wise to `k` and compared with cosine, Euclidean, Manhattan and
//! Mahalanobis; Jaccard and Dice over the token sets close the row. Columns
//! are named `"<Metric>: <k>"`, ordered by ascending power and then metric.

use std::io::{BufRead, Write};
use std::sync::OnceLock;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{tokenize, SentencePair, TokenizedSentence};
use crate::embfile::{EmbeddingFileError, EmbeddingSet};
use crate::lexical::{dice, jaccard};
use crate::vecmath::{
    self, cosine, euclidean, manhattan, mahalanobis, CovarianceModel, SentenceEmbedding, VecError,
    MAX_POWER,
};

pub const N_FEATURES: usize = 42;
const N_VECTOR_METRICS: usize = 4;
/// Powered coordinates or metric values beyond this magnitude are rejected.
pub const OVERFLOW_LIMIT: f64 = 1e100;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error(transparent)]
    Vec(#[from] VecError),
    #[error("non-finite or overflowing value in column {0:?}")]
    NonFinite(String),
    #[error("need at least 2 rows, got {0}")]
    TooFewSamples(usize),
    #[error(transparent)]
    Embeddings(#[from] EmbeddingFileError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("feature file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorMetric {
    Cosine,
    Euclidean,
    Manhattan,
    Mahalanobis,
}

impl VectorMetric {
    pub const ALL: [VectorMetric; N_VECTOR_METRICS] = [
        VectorMetric::Cosine,
        VectorMetric::Euclidean,
        VectorMetric::Manhattan,
        VectorMetric::Mahalanobis,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VectorMetric::Cosine => "Cosine",
            VectorMetric::Euclidean => "Euclidean",
            VectorMetric::Manhattan => "Manhattan",
            VectorMetric::Mahalanobis => "Mahalanobis",
        }
    }
}

pub fn column_names() -> &'static [String] {
    static NAMES: OnceLock<Vec<String>> = OnceLock::new();
    NAMES.get_or_init(|| {
        let mut names: Vec<String> = (1..=MAX_POWER)
            .flat_map(|k| VectorMetric::ALL.map(|m| format!("{}: {k}", m.name())))
            .collect();
        names.push("Jaccard".into());
        names.push("Dice".into());
        names
    })
}

pub const JACCARD_COLUMN: usize = 40;
pub const DICE_COLUMN: usize = 41;

pub fn column_index(metric: VectorMetric, power: u32) -> usize {
    let m = VectorMetric::ALL.iter().position(|x| *x == metric).unwrap();
    (power as usize - 1) * N_VECTOR_METRICS + m
}

/// Euclidean, Manhattan and Mahalanobis columns.
pub fn is_distance_column(idx: usize) -> bool {
    idx < JACCARD_COLUMN && idx % N_VECTOR_METRICS != 0
}

/// Resolves canonical names and the longer spellings such as
/// `"Cosine Distance: 2"` or `"Jaccard Similarity"`.
pub fn resolve_column(name: &str) -> Option<usize> {
    let name = name.trim();
    if let Some(i) = column_names().iter().position(|c| c == name) {
        return Some(i);
    }
    match name {
        "Jaccard Similarity" | "Jaccard Coefficient" | "Jaccard Distance" => {
            return Some(JACCARD_COLUMN)
        }
        "Dice Similarity" | "Dice Coefficient" | "Dice Distance" => return Some(DICE_COLUMN),
        _ => {}
    }
    let (metric, power) = name.rsplit_once(':')?;
    let power: u32 = power.trim().parse().ok()?;
    if !(1..=MAX_POWER).contains(&power) {
        return None;
    }
    let base = metric
        .trim()
        .trim_end_matches(" Distance")
        .trim_end_matches(" Similarity");
    let metric = VectorMetric::ALL.into_iter().find(|m| m.name() == base)?;
    Some(column_index(metric, power))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub pair_id: String,
    pub values: [f64; N_FEATURES],
}

impl FeatureVector {
    pub fn get(&self, column: &str) -> Option<f64> {
        resolve_column(column).map(|i| self.values[i])
    }
}

/// Covariance used for the Mahalanobis columns: one model reused at every
/// power, or one fitted on each powered embedding set.
#[derive(Debug, Clone)]
pub enum MahalanobisCovariance {
    Shared(CovarianceModel),
    PerPower(Vec<CovarianceModel>),
}

impl MahalanobisCovariance {
    /// Fits on the given embeddings. `ridge = None` picks the trace-scaled
    /// default for each fitted matrix.
    pub fn fit(
        embs: &[SentenceEmbedding],
        per_power: bool,
        ridge: Option<f64>,
    ) -> Result<Self, FeatureError> {
        let fit_one = |rows: Vec<Vec<f64>>| -> Result<CovarianceModel, FeatureError> {
            let cov = vecmath::sample_covariance(rows.iter().map(Vec::as_slice))?;
            let ridge = ridge.unwrap_or_else(|| vecmath::default_ridge(&cov));
            Ok(CovarianceModel::from_matrix(cov, ridge)?)
        };
        if per_power {
            let models = (1..=MAX_POWER)
                .map(|k| {
                    let rows = embs
                        .iter()
                        .map(|e| vecmath::pow_values(&e.values, k))
                        .collect::<Result<Vec<_>, _>>()?;
                    fit_one(rows)
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Self::PerPower(models))
        } else {
            Ok(Self::Shared(fit_one(
                embs.iter().map(|e| e.values.clone()).collect(),
            )?))
        }
    }

    pub fn for_power(&self, k: u32) -> &CovarianceModel {
        match self {
            Self::Shared(m) => m,
            Self::PerPower(models) => &models[k as usize - 1],
        }
    }

    pub fn dim(&self) -> usize {
        self.for_power(1).dim()
    }
}

fn checked(value: f64, column: usize) -> Result<f64, FeatureError> {
    if !value.is_finite() || value.abs() > OVERFLOW_LIMIT {
        return Err(FeatureError::NonFinite(column_names()[column].clone()));
    }
    Ok(value)
}

/// Raw (un-normalized) features for one sentence pair.
pub fn build_features(
    pair_id: &str,
    a: &[f64],
    b: &[f64],
    ta: &TokenizedSentence,
    tb: &TokenizedSentence,
    cov: &MahalanobisCovariance,
) -> Result<FeatureVector, FeatureError> {
    if a.len() != b.len() {
        return Err(VecError::DimMismatch(a.len(), b.len()).into());
    }
    if a.len() != cov.dim() {
        return Err(VecError::DimMismatch(a.len(), cov.dim()).into());
    }
    let mut values = [0.0; N_FEATURES];
    for k in 1..=MAX_POWER {
        let first = column_index(VectorMetric::Cosine, k);
        let ak = vecmath::pow_values(a, k)?;
        let bk = vecmath::pow_values(b, k)?;
        if ak.iter().chain(&bk).any(|v| !(v.abs() <= OVERFLOW_LIMIT)) {
            return Err(FeatureError::NonFinite(column_names()[first].clone()));
        }
        let row = [
            cosine(&ak, &bk)?,
            euclidean(&ak, &bk)?,
            manhattan(&ak, &bk)?,
            mahalanobis(&ak, &bk, cov.for_power(k))?,
        ];
        for (offset, v) in row.into_iter().enumerate() {
            values[first + offset] = checked(v, first + offset)?;
        }
    }
    values[JACCARD_COLUMN] = jaccard(ta, tb).value;
    values[DICE_COLUMN] = dice(ta, tb).value;
    Ok(FeatureVector {
        pair_id: pair_id.to_string(),
        values,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub features: FeatureVector,
    pub gold_score: Option<f64>,
}

/// Features for every pair, looking up `<pair_id>.a` / `<pair_id>.b` in the
/// embedding set. Runs in parallel; output order follows `pairs`.
pub fn build_feature_rows(
    pairs: &[SentencePair],
    embeddings: &EmbeddingSet,
    cov: &MahalanobisCovariance,
) -> Result<Vec<FeatureRow>, FeatureError> {
    pairs
        .par_iter()
        .map(|p| {
            let a = embeddings.require(&p.id_a())?;
            let b = embeddings.require(&p.id_b())?;
            let ta = tokenize(&p.text_a, &p.lang);
            let tb = tokenize(&p.text_b, &p.lang);
            let features = build_features(&p.pair_id, &a.values, &b.values, &ta, &tb, cov)?;
            Ok(FeatureRow {
                features,
                gold_score: p.gold_score,
            })
        })
        .collect()
}

/// Embeddings of both sides of every pair, the covariance fitting set.
pub fn pair_embeddings(
    pairs: &[SentencePair],
    embeddings: &EmbeddingSet,
) -> Result<Vec<SentenceEmbedding>, FeatureError> {
    let mut out = Vec::with_capacity(pairs.len() * 2);
    for p in pairs {
        out.push(embeddings.require(&p.id_a())?.clone());
        out.push(embeddings.require(&p.id_b())?.clone());
    }
    Ok(out)
}

/// Per-column z-scoring of the distance columns, fitted on a training split.
/// Cosine, Jaccard and Dice columns pass through unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnNormalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub normalized: Vec<bool>,
}

impl ColumnNormalizer {
    pub fn fit(rows: &[FeatureVector]) -> Result<Self, FeatureError> {
        if rows.is_empty() {
            return Err(FeatureError::TooFewSamples(0));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; N_FEATURES];
        let mut std = vec![1.0; N_FEATURES];
        let normalized: Vec<bool> = (0..N_FEATURES).map(is_distance_column).collect();
        for c in (0..N_FEATURES).filter(|&c| normalized[c]) {
            let m = rows.iter().map(|r| r.values[c]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r.values[c] - m).powi(2)).sum::<f64>() / n;
            mean[c] = m;
            std[c] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        Ok(Self {
            mean,
            std,
            normalized,
        })
    }

    pub fn identity() -> Self {
        Self {
            mean: vec![0.0; N_FEATURES],
            std: vec![1.0; N_FEATURES],
            normalized: vec![false; N_FEATURES],
        }
    }

    pub fn apply(&self, row: &FeatureVector) -> FeatureVector {
        let mut values = row.values;
        for (c, v) in values.iter_mut().enumerate() {
            if self.normalized[c] {
                *v = (*v - self.mean[c]) / self.std[c];
            }
        }
        FeatureVector {
            pair_id: row.pair_id.clone(),
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricCovariance {
    pub labels: Vec<String>,
    pub matrix: DMatrix<f64>,
}

/// Sample covariance between the 42 feature columns.
pub fn metric_covariance(rows: &[FeatureVector]) -> Result<MetricCovariance, FeatureError> {
    if rows.len() < 2 {
        return Err(FeatureError::TooFewSamples(rows.len()));
    }
    let matrix = vecmath::sample_covariance(rows.iter().map(|r| r.values.as_slice()))?;
    Ok(MetricCovariance {
        labels: column_names().to_vec(),
        matrix,
    })
}

impl MetricCovariance {
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "metric\t{}", self.labels.join("\t"))?;
        for (i, label) in self.labels.iter().enumerate() {
            let row: Vec<String> = (0..self.labels.len())
                .map(|j| self.matrix[(i, j)].to_string())
                .collect();
            writeln!(w, "{label}\t{}", row.join("\t"))?;
        }
        Ok(())
    }
}

pub fn write_feature_tsv<W: Write>(rows: &[FeatureRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "pair_id\tgold_score\t{}", column_names().join("\t"))?;
    for row in rows {
        let gold = row.gold_score.map(|g| g.to_string()).unwrap_or_default();
        let values: Vec<String> = row.features.values.iter().map(f64::to_string).collect();
        writeln!(w, "{}\t{}\t{}", row.features.pair_id, gold, values.join("\t"))?;
    }
    w.flush()
}

/// Reads a feature table. Columns may appear in any order and under alias
/// names; the `gold_score` column is optional.
pub fn read_feature_tsv<R: BufRead>(r: R) -> Result<Vec<FeatureRow>, FeatureError> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| FeatureError::Format("empty file".into()))??;
    let header: Vec<&str> = header.trim_end_matches('\r').split('\t').collect();
    let id_col = header
        .iter()
        .position(|h| *h == "pair_id")
        .ok_or_else(|| FeatureError::Format("missing pair_id column".into()))?;
    let gold_col = header.iter().position(|h| *h == "gold_score");
    let mut slots = vec![None; header.len()];
    let mut seen = [false; N_FEATURES];
    for (i, h) in header.iter().enumerate() {
        if i == id_col || Some(i) == gold_col {
            continue;
        }
        let idx = resolve_column(h)
            .ok_or_else(|| FeatureError::Format(format!("unknown column {h:?}")))?;
        if seen[idx] {
            return Err(FeatureError::Format(format!("duplicate column {h:?}")));
        }
        seen[idx] = true;
        slots[i] = Some(idx);
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(FeatureError::Format(format!(
            "missing column {:?}",
            column_names()[missing]
        )));
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != header.len() {
            return Err(FeatureError::Format(format!("row {}: wrong field count", n + 1)));
        }
        let parse = |s: &str| -> Result<f64, FeatureError> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| FeatureError::Format(format!("row {}: bad number {s:?}", n + 1)))
        };
        let mut values = [0.0; N_FEATURES];
        for (i, slot) in slots.iter().enumerate() {
            if let Some(idx) = slot {
                values[*idx] = parse(fields[i])?;
            }
        }
        let gold_score = match gold_col {
            Some(c) if !fields[c].is_empty() => Some(parse(fields[c])?),
            _ => None,
        };
        rows.push(FeatureRow {
            features: FeatureVector {
                pair_id: fields[id_col].to_string(),
                values,
            },
            gold_score,
        });
    }
    Ok(rows)
}
