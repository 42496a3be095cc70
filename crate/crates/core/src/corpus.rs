//! Sentence-pair datasets: loading, writing, tokenization, and the
//! length-versus-score diagnostic.
//!
//! Two on-disk formats are supported:
//!
//! * `tsv`: UTF-8, mandatory header, tab separated, no quoting. Columns are
//!   matched by name: `pair_id`, `lang`, `text_a`, `text_b` and an optional
//!   `score` (an empty cell means "no gold score").
//! * `semrel_csv`: RFC-4180 CSV with `PairID`, `Text` and an optional
//!   `Score`, where `Text` holds both sentences separated by a newline. An
//!   optional `Lang` column is honoured; without it the language is the
//!   lowercased `PairID` prefix before the first `-` or `_`.
//!
//! Row numbers in errors count data rows from 1, excluding the header.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_general_category::{get_general_category, GeneralCategory};

use crate::eval::{self, EvalError};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: malformed score {value:?} (must be a number in [0, 1])")]
    MalformedScore { row: usize, value: String },
    #[error("duplicate pair id {0:?}")]
    DuplicatePairId(String),
    #[error("row {0}: empty text")]
    EmptyText(usize),
    #[error("pair {0:?}: text cannot be written in this format")]
    Unencodable(String),
    #[error("pair {0:?} has no gold score")]
    MissingGoldScore(String),
    #[error("need at least 3 pairs, got {0}")]
    TooFewPairs(usize),
    #[error(transparent)]
    Correlation(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentencePair {
    pub pair_id: String,
    pub lang: String,
    pub text_a: String,
    pub text_b: String,
    pub gold_score: Option<f64>,
}

impl SentencePair {
    pub fn id_a(&self) -> String {
        format!("{}.a", self.pair_id)
    }

    pub fn id_b(&self) -> String {
        format!("{}.b", self.pair_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Tsv,
    SemrelCsv,
}

impl FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tsv" => Ok(Self::Tsv),
            "semrel_csv" | "semrel-csv" | "csv" => Ok(Self::SemrelCsv),
            other => Err(format!("unknown dataset format {other:?}")),
        }
    }
}

impl DatasetFormat {
    /// Guess from the file extension; anything but `.csv` is TSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Self::SemrelCsv,
            _ => Self::Tsv,
        }
    }
}

pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Vec<SentencePair>, CorpusError> {
    let file = BufReader::new(File::open(path)?);
    match format {
        DatasetFormat::Tsv => read_tsv(file),
        DatasetFormat::SemrelCsv => read_semrel_csv(file),
    }
}

pub fn write_dataset<W: Write>(
    pairs: &[SentencePair],
    writer: W,
    format: DatasetFormat,
) -> Result<(), CorpusError> {
    match format {
        DatasetFormat::Tsv => write_tsv(pairs, writer),
        DatasetFormat::SemrelCsv => write_semrel_csv(pairs, writer),
    }
}

fn parse_score(row: usize, raw: &str) -> Result<Option<f64>, CorpusError> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    match raw.parse::<f64>() {
        Ok(v) if (0.0..=1.0).contains(&v) => Ok(Some(v)),
        _ => Err(CorpusError::MalformedScore {
            row,
            value: raw.to_string(),
        }),
    }
}

struct PairValidator {
    seen: HashSet<String>,
}

impl PairValidator {
    fn new() -> Self {
        Self {
            seen: HashSet::new(),
        }
    }

    fn check(&mut self, row: usize, pair: &SentencePair) -> Result<(), CorpusError> {
        if pair.text_a.trim().is_empty() || pair.text_b.trim().is_empty() {
            return Err(CorpusError::EmptyText(row));
        }
        if !self.seen.insert(pair.pair_id.clone()) {
            return Err(CorpusError::DuplicatePairId(pair.pair_id.clone()));
        }
        Ok(())
    }
}

fn column(header: &[&str], name: &str) -> Result<usize, CorpusError> {
    header
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| CorpusError::MissingColumn(name.to_string()))
}

pub fn read_tsv<R: BufRead>(reader: R) -> Result<Vec<SentencePair>, CorpusError> {
    let mut lines = reader.lines();
    let header_line = match lines.next() {
        Some(line) => line?,
        None => return Err(CorpusError::MissingColumn("pair_id".into())),
    };
    let header_line = header_line.trim_end_matches('\r').trim_start_matches('\u{feff}');
    let header: Vec<&str> = header_line.split('\t').collect();
    let id_col = column(&header, "pair_id")?;
    let lang_col = column(&header, "lang")?;
    let a_col = column(&header, "text_a")?;
    let b_col = column(&header, "text_b")?;
    let score_col = column(&header, "score").ok();

    let mut validator = PairValidator::new();
    let mut pairs = Vec::new();
    let mut row = 0;
    for line in lines {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        row += 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != header.len() {
            return Err(CorpusError::RaggedRow {
                row,
                expected: header.len(),
                found: fields.len(),
            });
        }
        let pair = SentencePair {
            pair_id: fields[id_col].to_string(),
            lang: fields[lang_col].to_string(),
            text_a: fields[a_col].to_string(),
            text_b: fields[b_col].to_string(),
            gold_score: match score_col {
                Some(c) => parse_score(row, fields[c])?,
                None => None,
            },
        };
        validator.check(row, &pair)?;
        pairs.push(pair);
    }
    Ok(pairs)
}

fn write_tsv<W: Write>(pairs: &[SentencePair], mut w: W) -> Result<(), CorpusError> {
    writeln!(w, "pair_id\tlang\ttext_a\ttext_b\tscore")?;
    for p in pairs {
        let fields = [&p.pair_id, &p.lang, &p.text_a, &p.text_b];
        if fields.iter().any(|f| f.contains(['\t', '\n', '\r'])) {
            return Err(CorpusError::Unencodable(p.pair_id.clone()));
        }
        let score = p.gold_score.map(|s| s.to_string()).unwrap_or_default();
        writeln!(w, "{}\t{}\t{}\t{}\t{}", p.pair_id, p.lang, p.text_a, p.text_b, score)?;
    }
    Ok(())
}

/// Language tag implied by a shared-task pair id such as `eng_train_0001`.
pub fn lang_from_pair_id(pair_id: &str) -> String {
    match pair_id.split_once(['-', '_']) {
        Some((prefix, _)) if !prefix.is_empty() => prefix.to_lowercase(),
        _ => "und".to_string(),
    }
}

pub fn read_semrel_csv<R: Read>(reader: R) -> Result<Vec<SentencePair>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim_start_matches('\u{feff}').to_string())
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let id_col = column(&header_refs, "PairID")?;
    let text_col = column(&header_refs, "Text")?;
    let score_col = column(&header_refs, "Score").ok();
    let lang_col = column(&header_refs, "Lang").ok();

    let mut validator = PairValidator::new();
    let mut pairs = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let field = |c: usize| record.get(c).unwrap_or("");
        let text = field(text_col).replace("\r\n", "\n");
        let (text_a, text_b) = text.split_once('\n').unwrap_or((text.as_str(), ""));
        let pair_id = field(id_col).to_string();
        let lang = match lang_col {
            Some(c) if !field(c).is_empty() => field(c).to_string(),
            _ => lang_from_pair_id(&pair_id),
        };
        let pair = SentencePair {
            lang,
            text_a: text_a.to_string(),
            text_b: text_b.to_string(),
            gold_score: match score_col {
                Some(c) => parse_score(row, field(c))?,
                None => None,
            },
            pair_id,
        };
        validator.check(row, &pair)?;
        pairs.push(pair);
    }
    Ok(pairs)
}

fn write_semrel_csv<W: Write>(pairs: &[SentencePair], w: W) -> Result<(), CorpusError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["PairID", "Text", "Score", "Lang"])?;
    for p in pairs {
        if p.text_a.contains(['\n', '\r']) {
            return Err(CorpusError::Unencodable(p.pair_id.clone()));
        }
        let text = format!("{}\n{}", p.text_a, p.text_b);
        let score = p.gold_score.map(|s| s.to_string()).unwrap_or_default();
        wtr.write_record([p.pair_id.as_str(), &text, &score, &p.lang])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenizedSentence {
    pub tokens: Vec<String>,
    pub token_set: BTreeSet<String>,
}

impl TokenizedSentence {
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let token_set = tokens.iter().cloned().collect();
        Self { tokens, token_set }
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }
}

fn is_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

/// Lowercases, splits on whitespace, and strips punctuation from both ends of
/// every token. Tokens made only of punctuation are dropped. The same rules
/// apply to every language; `_lang` is accepted so callers can thread the tag
/// through without caring.
pub fn tokenize(text: &str, _lang: &str) -> TokenizedSentence {
    let tokens = text
        .split_whitespace()
        .map(|raw| raw.to_lowercase())
        .filter_map(|lower| {
            let stripped = lower.trim_matches(is_punctuation);
            (!stripped.is_empty()).then(|| stripped.to_string())
        })
        .collect();
    TokenizedSentence::from_tokens(tokens)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LengthUnit {
    #[default]
    Tokens,
    Chars,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetDiagnostics {
    pub n_pairs: usize,
    pub rho_len_a: f64,
    pub rho_len_b: f64,
    pub per_lang_counts: BTreeMap<String, usize>,
}

/// Spearman correlation between sentence token counts and gold scores.
pub fn length_bias_report(pairs: &[SentencePair]) -> Result<DatasetDiagnostics, CorpusError> {
    length_bias_report_with(pairs, LengthUnit::Tokens)
}

pub fn length_bias_report_with(
    pairs: &[SentencePair],
    unit: LengthUnit,
) -> Result<DatasetDiagnostics, CorpusError> {
    if pairs.len() < 3 {
        return Err(CorpusError::TooFewPairs(pairs.len()));
    }
    let length = |p: &SentencePair, text: &str| -> f64 {
        match unit {
            LengthUnit::Tokens => tokenize(text, &p.lang).len() as f64,
            LengthUnit::Chars => text.chars().count() as f64,
        }
    };
    let mut scores = Vec::with_capacity(pairs.len());
    let mut len_a = Vec::with_capacity(pairs.len());
    let mut len_b = Vec::with_capacity(pairs.len());
    let mut per_lang_counts = BTreeMap::new();
    for p in pairs {
        let score = p
            .gold_score
            .ok_or_else(|| CorpusError::MissingGoldScore(p.pair_id.clone()))?;
        scores.push(score);
        len_a.push(length(p, &p.text_a));
        len_b.push(length(p, &p.text_b));
        *per_lang_counts.entry(p.lang.clone()).or_insert(0) += 1;
    }
    Ok(DatasetDiagnostics {
        n_pairs: pairs.len(),
        rho_len_a: eval::spearman(&len_a, &scores)?,
        rho_len_b: eval::spearman(&len_b, &scores)?,
        per_lang_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair(id: &str, a: &str, b: &str, score: Option<f64>) -> SentencePair {
        SentencePair {
            pair_id: id.into(),
            lang: "eng".into(),
            text_a: a.into(),
            text_b: b.into(),
            gold_score: score,
        }
    }

    #[test]
    fn tsv_row_maps_fields() {
        let data = "pair_id\tlang\ttext_a\ttext_b\tscore\np1\teng\tA cat.\tA dog.\t0.5\n";
        let pairs = read_tsv(data.as_bytes()).unwrap();
        assert_eq!(pairs, vec![pair("p1", "A cat.", "A dog.", Some(0.5))]);
    }

    #[test]
    fn tsv_rejects_out_of_range_score() {
        let data = "pair_id\tlang\ttext_a\ttext_b\tscore\np1\teng\ta\tb\t0.5\np2\teng\ta\tb\t1.2\n";
        match read_tsv(data.as_bytes()) {
            Err(CorpusError::MalformedScore { row, value }) => {
                assert_eq!(row, 2);
                assert_eq!(value, "1.2");
            }
            other => panic!("unexpected {other:?}"),
        }
        let data = "pair_id\tlang\ttext_a\ttext_b\tscore\np1\teng\ta\tb\tnan\n";
        assert!(matches!(
            read_tsv(data.as_bytes()),
            Err(CorpusError::MalformedScore { row: 1, .. })
        ));
    }

    #[test]
    fn tsv_structural_errors() {
        let data = "pair_id\ttext_a\ttext_b\tscore\n";
        assert!(matches!(read_tsv(data.as_bytes()), Err(CorpusError::MissingColumn(c)) if c == "lang"));
        let data = "pair_id\tlang\ttext_a\ttext_b\np1\teng\ta\tb\np1\teng\tc\td\n";
        assert!(matches!(read_tsv(data.as_bytes()), Err(CorpusError::DuplicatePairId(id)) if id == "p1"));
        let data = "pair_id\tlang\ttext_a\ttext_b\np1\teng\t  \tb\n";
        assert!(matches!(read_tsv(data.as_bytes()), Err(CorpusError::EmptyText(1))));
    }

    #[test]
    fn tsv_without_score_column() {
        let data = "pair_id\tlang\ttext_a\ttext_b\np1\teng\ta\tb\n";
        assert_eq!(read_tsv(data.as_bytes()).unwrap()[0].gold_score, None);
    }

    #[test]
    fn semrel_csv_splits_text_field() {
        let original = vec![
            SentencePair {
                pair_id: "eng_train_0001".into(),
                lang: "eng".into(),
                text_a: "It was a \"dark\" night, cold.".into(),
                text_b: "The night was cold.".into(),
                gold_score: Some(0.75),
            },
            pair("x2", "one", "two", None),
        ];
        let mut buf = Vec::new();
        write_dataset(&original, &mut buf, DatasetFormat::SemrelCsv).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("\"It was a \"\"dark\"\" night, cold.\nThe night was cold.\""));
        assert_eq!(read_semrel_csv(buf.as_slice()).unwrap(), original);
    }

    #[test]
    fn semrel_csv_infers_language_from_id() {
        let data = "PairID,Text,Score\nENG-train-0000,\"a b\nc d\",0.25\n";
        let pairs = read_semrel_csv(data.as_bytes()).unwrap();
        assert_eq!(pairs[0].lang, "eng");
        assert_eq!(pairs[0].text_a, "a b");
        assert_eq!(pairs[0].text_b, "c d");
        assert_eq!(lang_from_pair_id("nosep"), "und");
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("The cat sat.", "eng").tokens, ["the", "cat", "sat"]);
        assert!(tokenize("", "eng").tokens.is_empty());
        let t = tokenize("ab, ab AB", "eng");
        assert_eq!(t.tokens, ["ab", "ab", "ab"]);
        assert_eq!(t.token_set.len(), 1);
        assert!(t.token_set.contains("ab"));
    }

    #[test]
    fn tokenize_keeps_combining_marks_and_strips_script_punctuation() {
        // Devanagari danda is punctuation; the vowel sign on "है" is a mark.
        assert_eq!(tokenize("यह घर है।", "hin").tokens, ["यह", "घर", "है"]);
        assert_eq!(tokenize("¿Qué tal?", "spa").tokens, ["qué", "tal"]);
        assert_eq!(tokenize("« — »", "fra").tokens, Vec::<String>::new());
        assert_eq!(tokenize("don't", "eng").tokens, ["don't"]);
    }

    #[test]
    fn length_bias_perfect_monotone() {
        let pairs = vec![
            pair("1", "a", "x", Some(0.1)),
            pair("2", "a b", "x", Some(0.2)),
            pair("3", "a b c", "x", Some(0.3)),
            pair("4", "a b c d", "x", Some(0.9)),
        ];
        let err = length_bias_report(&pairs).unwrap_err();
        // text_b has constant length
        assert!(matches!(err, CorpusError::Correlation(EvalError::ConstantInput)));
        let mut pairs = pairs;
        for (i, p) in pairs.iter_mut().enumerate() {
            p.text_b = "y ".repeat(4 - i);
        }
        let diag = length_bias_report(&pairs).unwrap();
        assert_eq!(diag.rho_len_a, 1.0);
        assert_eq!(diag.rho_len_b, -1.0);
        assert_eq!(diag.per_lang_counts["eng"], 4);
    }

    #[test]
    fn length_bias_preconditions() {
        let pairs = vec![pair("1", "a", "b", Some(0.1)), pair("2", "a", "b", Some(0.2))];
        assert!(matches!(length_bias_report(&pairs), Err(CorpusError::TooFewPairs(2))));
        let pairs = vec![
            pair("1", "a", "b", Some(0.1)),
            pair("2", "a", "b", None),
            pair("3", "a", "b", Some(0.3)),
        ];
        assert!(matches!(length_bias_report(&pairs), Err(CorpusError::MissingGoldScore(id)) if id == "2"));
    }

    fn arb_text() -> impl Strategy<Value = String> {
        proptest::collection::vec("[a-zA-Zéß.,!?'\"]{1,8}", 1..6).prop_map(|w| w.join(" "))
    }

    fn arb_pairs() -> impl Strategy<Value = Vec<SentencePair>> {
        proptest::collection::vec((arb_text(), arb_text(), proptest::option::of(0.0f64..=1.0)), 1..8)
            .prop_map(|rows| {
                rows.into_iter()
                    .enumerate()
                    .map(|(i, (a, b, s))| SentencePair {
                        pair_id: format!("eng_{i}"),
                        lang: "eng".into(),
                        text_a: a,
                        text_b: b,
                        gold_score: s,
                    })
                    .collect()
            })
    }

    proptest! {
        #[test]
        fn datasets_round_trip(pairs in arb_pairs()) {
            for format in [DatasetFormat::Tsv, DatasetFormat::SemrelCsv] {
                let mut buf = Vec::new();
                write_dataset(&pairs, &mut buf, format).unwrap();
                let reloaded = match format {
                    DatasetFormat::Tsv => read_tsv(buf.as_slice()).unwrap(),
                    DatasetFormat::SemrelCsv => read_semrel_csv(buf.as_slice()).unwrap(),
                };
                prop_assert_eq!(&reloaded, &pairs);
            }
        }

        #[test]
        fn tokenize_is_idempotent(text in "\\PC{0,40}") {
            let once = tokenize(&text, "und");
            let twice = tokenize(&once.tokens.join(" "), "und");
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn token_set_matches_tokens(text in "\\PC{0,40}") {
            let t = tokenize(&text, "und");
            let expected: BTreeSet<String> = t.tokens.iter().cloned().collect();
            prop_assert_eq!(t.token_set, expected);
        }
    }
}
