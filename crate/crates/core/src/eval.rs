//! Rank-correlation metrics and leaderboard-style evaluation reports.
//!
//! [`spearman`] assigns average ranks to ties and correlates the ranks with
//! [`pearson`]. When neither input has ties it evaluates the classical
//! `1 - 6 Σd² / (n (n² - 1))` form on exact integer rank differences, which is
//! algebraically identical and avoids accumulating rounding error.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::SentencePair;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("inputs have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("correlation is undefined for constant input")]
    ConstantInput,
    #[error("need at least 2 points, got {0}")]
    TooFew(usize),
    #[error("input contains a non-finite value at position {0}")]
    NonFinite(usize),
    #[error("no prediction for gold pair {0:?}")]
    MissingPrediction(String),
    #[error("prediction for unknown pair {0:?}")]
    UnknownPair(String),
    #[error("gold pair {0:?} has no score")]
    MissingGoldScore(String),
    #[error("predictions line {line}: {message}")]
    BadPrediction { line: usize, message: String },
}

fn check_inputs(x: &[f64], y: &[f64]) -> Result<(), EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(EvalError::TooFew(x.len()));
    }
    for (i, (a, b)) in x.iter().zip(y).enumerate() {
        if !a.is_finite() || !b.is_finite() {
            return Err(EvalError::NonFinite(i));
        }
    }
    Ok(())
}

/// Pearson product-moment correlation, clamped to `[-1, 1]`.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    check_inputs(x, y)?;
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::ConstantInput);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Average ranks (1-based); tied values share the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

fn has_ties(ranks: &[f64]) -> bool {
    let mut seen = HashSet::with_capacity(ranks.len());
    !ranks.iter().all(|r| seen.insert(r.to_bits()))
}

/// Spearman rank correlation with average-rank tie handling.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    check_inputs(x, y)?;
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    if has_ties(&rx) || has_ties(&ry) {
        return pearson(&rx, &ry);
    }
    // integer ranks: Σd² is exact
    let n = x.len() as u64;
    let sum_d2: u64 = rx
        .iter()
        .zip(&ry)
        .map(|(a, b)| {
            let d = (*a as i64 - *b as i64).unsigned_abs();
            d * d
        })
        .sum();
    let rho = 1.0 - (6 * sum_d2) as f64 / (n * (n * n - 1)) as f64;
    Ok(rho.clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageRow {
    pub lang: String,
    /// `None` when the correlation is undefined (fewer than two pairs or
    /// constant scores).
    pub system_score: Option<f64>,
    pub baseline_score: Option<f64>,
    pub n_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<LanguageRow>,
    pub overall: LanguageRow,
}

/// Per-language and pooled Spearman correlation of predictions against gold
/// scores. Rows are ordered by language tag.
pub fn evaluate(
    predictions: &HashMap<String, f64>,
    golds: &[SentencePair],
    baselines: Option<&BTreeMap<String, f64>>,
) -> Result<EvalReport, EvalError> {
    let gold_ids: HashSet<&str> = golds.iter().map(|p| p.pair_id.as_str()).collect();
    let mut unknown: Vec<&String> = predictions
        .keys()
        .filter(|k| !gold_ids.contains(k.as_str()))
        .collect();
    unknown.sort();
    if let Some(id) = unknown.first() {
        return Err(EvalError::UnknownPair((*id).clone()));
    }

    let mut by_lang: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let (mut all_pred, mut all_gold) = (Vec::new(), Vec::new());
    for pair in golds {
        let pred = *predictions
            .get(&pair.pair_id)
            .ok_or_else(|| EvalError::MissingPrediction(pair.pair_id.clone()))?;
        let gold = pair
            .gold_score
            .ok_or_else(|| EvalError::MissingGoldScore(pair.pair_id.clone()))?;
        let entry = by_lang.entry(pair.lang.as_str()).or_default();
        entry.0.push(pred);
        entry.1.push(gold);
        all_pred.push(pred);
        all_gold.push(gold);
    }

    let row = |lang: &str, pred: &[f64], gold: &[f64]| -> Result<LanguageRow, EvalError> {
        let system_score = match spearman(pred, gold) {
            Ok(rho) => Some(rho),
            Err(EvalError::ConstantInput | EvalError::TooFew(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(LanguageRow {
            lang: lang.to_string(),
            system_score,
            baseline_score: baselines.and_then(|b| b.get(lang).copied()),
            n_pairs: pred.len(),
        })
    };

    let rows = by_lang
        .iter()
        .map(|(lang, (pred, gold))| row(lang, pred, gold))
        .collect::<Result<Vec<_>, _>>()?;
    let overall = row("overall", &all_pred, &all_gold)?;
    Ok(EvalReport { rows, overall })
}

fn fmt_score(score: Option<f64>, precision: usize) -> String {
    match score {
        Some(v) => format!("{v:.precision$}"),
        None => "n/a".to_string(),
    }
}

impl EvalReport {
    /// Aligned plain-text table in the leaderboard column scheme
    /// (Language, Score, Baseline Score) plus the pair count.
    pub fn render_table(&self, precision: usize) -> String {
        let header = ["Language", "Score", "Baseline Score", "Pairs"];
        let mut lines: Vec<[String; 4]> = Vec::new();
        for row in self.rows.iter().chain(std::iter::once(&self.overall)) {
            lines.push([
                row.lang.clone(),
                fmt_score(row.system_score, precision),
                row.baseline_score
                    .map(|b| format!("{b:.precision$}"))
                    .unwrap_or_else(|| "-".to_string()),
                row.n_pairs.to_string(),
            ]);
        }
        let mut widths = header.map(str::len);
        for line in &lines {
            for (w, cell) in widths.iter_mut().zip(line) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let mut out = String::new();
        let write_row = |out: &mut String, cells: [&str; 4]| {
            let _ = writeln!(
                out,
                "{:<w0$}  {:>w1$}  {:>w2$}  {:>w3$}",
                cells[0],
                cells[1],
                cells[2],
                cells[3],
                w0 = widths[0],
                w1 = widths[1],
                w2 = widths[2],
                w3 = widths[3],
            );
        };
        write_row(&mut out, header);
        let total: usize = widths.iter().sum::<usize>() + 6;
        let _ = writeln!(out, "{}", "-".repeat(total));
        let n_rows = lines.len();
        for (i, line) in lines.iter().enumerate() {
            if i + 1 == n_rows {
                let _ = writeln!(out, "{}", "-".repeat(total));
            }
            write_row(&mut out, [&line[0], &line[1], &line[2], &line[3]]);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Reads `pair_id\tscore` lines after a header row.
pub fn read_predictions<R: BufRead>(r: R) -> Result<HashMap<String, f64>, EvalError> {
    let mut out = HashMap::new();
    for (i, line) in r.lines().enumerate() {
        let bad = |message: String| EvalError::BadPrediction { line: i + 1, message };
        let line = line.map_err(|e| bad(e.to_string()))?;
        let line = line.trim_end_matches('\r');
        if i == 0 || line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(id), Some(score)) = (fields.next(), fields.next()) else {
            return Err(bad("expected pair_id and score".into()));
        };
        let score: f64 = score
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| bad(format!("bad score {score:?}")))?;
        if out.insert(id.to_string(), score).is_some() {
            return Err(bad(format!("duplicate pair {id:?}")));
        }
    }
    Ok(out)
}

/// Writes a `pair_id\tscore` table in the given order.
pub fn write_predictions<W: std::io::Write>(rows: &[(String, f64)], mut w: W) -> std::io::Result<()> {
    writeln!(w, "pair_id\tscore")?;
    for (id, score) in rows {
        writeln!(w, "{id}\t{score}")?;
    }
    w.flush()
}
