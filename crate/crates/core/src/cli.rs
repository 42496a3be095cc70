//! The `strel` command line.
//!
//! Every stage reads and writes files so runs can be scripted and resumed.
//! Global flags: `--seed`, `--config <file.toml>`, `--quiet`, `--threads`.
//! Keys in the config file become flags for the subcommand being run unless
//! the same flag is given on the command line; nested tables scope keys to a
//! subcommand, e.g. `[bigram.embed]`.
//!
//! Exit codes: 0 on success, 2 on usage errors, 1 on runtime errors. Runtime
//! errors print `error: <module>::<Variant>: <message>` to stderr.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{ArgAction, ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use crate::bigram::{self, CountMode, Document, EmbedConfig, WordEmbeddingTable};
use crate::checkpoint::{self, ModelMetadata};
use crate::contrastive::{self, CorruptionConfig, CorruptionMode, TripletBatch};
use crate::corpus::{self, DatasetFormat, LengthUnit, SentencePair};
use crate::embfile::load_embeddings;
use crate::eval;
use crate::features::{self, ColumnNormalizer, FeatureRow, MahalanobisCovariance};
use crate::lexical::{self, OverlapMetric};
use crate::ngd::{self, CorpusIndex, LexiconTagger, NgdError, Stopwords};
use crate::regressor::{MlpRegressor, TrainConfig, LAYER_SIZES};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "strel", version, about = "Semantic textual relatedness toolkit")]
pub struct Cli {
    /// Seed for every randomized stage.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// TOML file whose keys fill in flags not given on the command line.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Do not echo the effective configuration.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dataset checks and diagnostics.
    #[command(subcommand)]
    Data(DataCommand),
    /// Score sentence pairs with an unsupervised method.
    #[command(subcommand)]
    Score(ScoreCommand),
    /// Build or inspect the 42-column feature table.
    #[command(subcommand)]
    Features(FeaturesCommand),
    /// Train the feed-forward regressor on a feature table.
    Train(TrainArgs),
    /// Predict scores for a feature table with a trained model.
    Predict(PredictArgs),
    /// Spearman evaluation of predictions against gold scores.
    Eval(EvalArgs),
    /// Build the document-frequency index used by NGD scoring.
    #[command(name = "ngd-index", subcommand)]
    NgdIndex(NgdIndexCommand),
    /// Co-occurrence counting, word embeddings and clustering.
    #[command(subcommand)]
    Bigram(BigramCommand),
    /// Evaluate training objectives.
    #[command(subcommand)]
    Loss(LossCommand),
    /// Corrupt sentences by deleting or masking tokens.
    Corrupt(CorruptArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Tsv,
    SemrelCsv,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Dataset file (TSV or SemRel CSV).
    pub dataset: PathBuf,
    /// Input format; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

impl DatasetArgs {
    fn load(&self) -> Result<Vec<SentencePair>> {
        load_pairs(&self.dataset, self.format)
    }
}

fn load_pairs(path: &Path, format: Option<FormatArg>) -> Result<Vec<SentencePair>> {
    let format = match format {
        Some(FormatArg::Tsv) => DatasetFormat::Tsv,
        Some(FormatArg::SemrelCsv) => DatasetFormat::SemrelCsv,
        None => DatasetFormat::from_path(path),
    };
    Ok(corpus::load_dataset(path, format)?)
}

#[derive(Debug, Subcommand)]
pub enum DataCommand {
    /// Parse a dataset and report pair and language counts; with
    /// --embeddings also check the embedding file covers every pair.
    Validate {
        #[command(flatten)]
        data: DatasetArgs,
        /// SEMB or JSON-lines embedding file to validate against the dataset.
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Length-bias diagnostics: Spearman between sentence length and score.
    Stats {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long, value_enum, default_value = "tokens")]
        unit: UnitArg,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum UnitArg {
    Tokens,
    Chars,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MetricArg {
    Jaccard,
    Dice,
}

#[derive(Debug, Subcommand)]
pub enum ScoreCommand {
    /// Token-set overlap.
    Lexical {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long, value_enum, default_value = "jaccard")]
        metric: MetricArg,
        /// Output TSV (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One minus the mean NGD of cross-sentence word pairs.
    Ngd {
        #[command(flatten)]
        data: DatasetArgs,
        /// Index prefix written by `ngd-index build`.
        #[arg(long)]
        index: PathBuf,
        /// `word\ttag` lexicon; only equally tagged words are compared.
        #[arg(long)]
        tagger: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Blend of embedding cosine and token overlap.
    Bigram {
        #[command(flatten)]
        data: DatasetArgs,
        /// Word embedding table written by `bigram embed`.
        #[arg(long)]
        table: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum FeaturesCommand {
    /// Compute the feature table for a dataset.
    Build {
        #[command(flatten)]
        data: DatasetArgs,
        /// Sentence embeddings with ids `<pair_id>.a` / `<pair_id>.b`.
        #[arg(long)]
        embeddings: PathBuf,
        /// Output feature TSV.
        #[arg(long)]
        out: PathBuf,
        /// Dataset whose embeddings fit the Mahalanobis covariance
        /// (default: the input dataset).
        #[arg(long)]
        cov_from: Option<PathBuf>,
        /// Fit one covariance per power instead of a shared one.
        #[arg(long)]
        per_power_cov: bool,
        /// Ridge added to the covariance diagonal (default: 1e-3 · trace / dim).
        #[arg(long)]
        ridge: Option<f64>,
    },
    /// Covariance matrix of the feature columns.
    Cov {
        /// Feature TSV.
        features: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training feature TSV (with gold scores).
    pub features: PathBuf,
    /// Checkpoint path; metadata goes to `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Validation feature TSV.
    #[arg(long)]
    pub validation: Option<PathBuf>,
    /// Per-epoch report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.1)]
    pub dropout: f64,
    #[arg(long, default_value_t = 0.01)]
    pub weight_decay: f64,
    /// Skip z-scoring of the distance columns.
    #[arg(long)]
    pub no_normalize: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    pub features: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predictions TSV (`pair_id`, `score`).
    pub predictions: PathBuf,
    /// Dataset with gold scores.
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Reference score per language, `lang=score`; repeatable.
    #[arg(long, value_name = "LANG=SCORE")]
    pub baseline: Vec<String>,
    #[arg(long, default_value_t = 4)]
    pub precision: usize,
    /// Emit JSON instead of the text table.
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum NgdIndexCommand {
    /// Index text files, one document per file (or per line).
    Build {
        #[arg(required = true)]
        docs: Vec<PathBuf>,
        /// Output prefix: `<out>.tsv` and `<out>.json`.
        #[arg(long)]
        out: PathBuf,
        /// Treat every non-empty line as its own document.
        #[arg(long)]
        per_line: bool,
        /// Stopword file, one word per line.
        #[arg(long, conflicts_with = "lang")]
        stopwords: Option<PathBuf>,
        /// Use the built-in stopword list for a language.
        #[arg(long)]
        lang: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CountModeArg {
    Binary,
    Multiplicity,
}

#[derive(Debug, Subcommand)]
pub enum BigramCommand {
    /// Count sentence, paragraph and document co-occurrences.
    Build {
        /// Text files, one document each; blank lines separate paragraphs.
        #[arg(required = true)]
        docs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "binary")]
        mode: CountModeArg,
        /// Characters that end a sentence.
        #[arg(long, default_value = bigram::DEFAULT_SENTENCE_TERMINATORS)]
        terminators: String,
    },
    /// Train word embeddings from a bigram table.
    Embed {
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        #[arg(long, default_value_t = 0.05)]
        learning_rate: f64,
        #[arg(long, default_value_t = 64)]
        dim: usize,
        /// Sentence, paragraph and document weights.
        #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [1.0, 0.5, 0.25])]
        weights: Vec<f64>,
    },
    /// Average-linkage clustering of a word embedding table.
    Cluster {
        table: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum LossCommand {
    /// Contrastive loss from similarities or from three embeddings.
    Simcse {
        /// Similarity of the anchor and its positive.
        #[arg(long, required_unless_present = "embeddings", allow_negative_numbers = true)]
        sim_pos: Option<f64>,
        /// Similarity of the anchor and its negative.
        #[arg(long, required_unless_present = "embeddings", allow_negative_numbers = true)]
        sim_neg: Option<f64>,
        /// Embedding file holding the anchor, positive and negative ids.
        #[arg(long, requires_all = ["anchor", "positive", "negative"])]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        anchor: Option<String>,
        #[arg(long)]
        positive: Option<String>,
        #[arg(long)]
        negative: Option<String>,
        #[arg(long, default_value_t = contrastive::DEFAULT_TAU)]
        tau: f64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CorruptModeArg {
    Delete,
    Mask,
}

#[derive(Debug, Args)]
pub struct CorruptArgs {
    /// Sentence to corrupt; reads one sentence per line from --input otherwise.
    #[arg(required_unless_present = "input")]
    pub text: Option<String>,
    #[arg(long, conflicts_with = "text")]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "delete")]
    pub mode: CorruptModeArg,
    #[arg(long, default_value_t = 0.6)]
    pub ratio: f64,
    #[arg(long, default_value = "[MASK]")]
    pub mask_token: String,
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let (cli, matches) = match parse(&argv) {
        Ok(parsed) => parsed,
        Err(ParseFailure::Clap(e)) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
        Err(ParseFailure::Config(msg)) => {
            eprintln!("error: {msg}");
            return 2;
        }
    };
    if !cli.quiet {
        eprintln!("{}", effective_config(&cli, &matches));
    }
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli)),
            Err(e) => Err(Error::Cli(format!("thread pool: {e}"))),
        },
        None => execute(&cli),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}: {e}", e.code());
            1
        }
    }
}

enum ParseFailure {
    Clap(clap::Error),
    Config(String),
}

fn parse(argv: &[OsString]) -> std::result::Result<(Cli, ArgMatches), ParseFailure> {
    // first pass tolerates missing required flags so the config file can supply them
    let argv = match Cli::command().ignore_errors(true).try_get_matches_from(argv) {
        Ok(first) => match first.get_one::<PathBuf>("config") {
            Some(path) => inject_config(argv, &first, path)?,
            None => argv.to_vec(),
        },
        Err(_) => argv.to_vec(),
    };
    let matches = Cli::command()
        .try_get_matches_from(&argv)
        .map_err(ParseFailure::Clap)?;
    let cli = Cli::from_arg_matches(&matches).map_err(ParseFailure::Clap)?;
    Ok((cli, matches))
}

/// Subcommand names from the root to the leaf, with the leaf's matches.
fn leaf(matches: &ArgMatches) -> (Vec<String>, &ArgMatches) {
    let mut path = Vec::new();
    let mut m = matches;
    while let Some((name, sub)) = m.subcommand() {
        path.push(name.to_string());
        m = sub;
    }
    (path, m)
}

fn leaf_command(path: &[String]) -> clap::Command {
    let mut cmd = Cli::command();
    for name in path {
        cmd = cmd
            .find_subcommand(name)
            .expect("path comes from parsed matches")
            .clone();
    }
    cmd
}

fn toml_scalar(v: &toml::Value) -> Option<String> {
    match v {
        toml::Value::String(s) => Some(s.clone()),
        toml::Value::Integer(i) => Some(i.to_string()),
        toml::Value::Float(f) => Some(f.to_string()),
        toml::Value::Boolean(b) => Some(b.to_string()),
        _ => None,
    }
}

fn inject_config(
    argv: &[OsString],
    matches: &ArgMatches,
    path: &Path,
) -> std::result::Result<Vec<OsString>, ParseFailure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ParseFailure::Config(format!("config {}: {e}", path.display())))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| ParseFailure::Config(format!("config {}: {e}", path.display())))?;
    let (cmd_path, leaf_matches) = leaf(matches);

    // top-level keys first, then tables along the subcommand path override
    let mut keys: BTreeMap<String, toml::Value> = BTreeMap::new();
    let mut scope = Some(&table);
    let mut depth = 0;
    while let Some(t) = scope {
        for (k, v) in t {
            if !v.is_table() {
                keys.insert(k.clone(), v.clone());
            }
        }
        scope = cmd_path
            .get(depth)
            .and_then(|name| t.get(name))
            .and_then(toml::Value::as_table);
        depth += 1;
    }

    let leaf_cmd = leaf_command(&cmd_path);
    let root = Cli::command();
    let mut extra: Vec<OsString> = Vec::new();
    for (key, value) in keys {
        let long = key.replace('_', "-");
        let (arg, source) = if let Some(a) = leaf_cmd.get_arguments().find(|a| a.get_long() == Some(&long)) {
            (a.clone(), leaf_matches.value_source(a.get_id().as_str()))
        } else if let Some(a) = root.get_arguments().find(|a| a.get_long() == Some(&long)) {
            (a.clone(), matches.value_source(a.get_id().as_str()))
        } else {
            // keys meant for other subcommands
            continue;
        };
        if long == "config" || source == Some(ValueSource::CommandLine) {
            continue;
        }
        let flag_only = matches!(arg.get_action(), ArgAction::SetTrue);
        let values: Vec<String> = match &value {
            toml::Value::Array(items) => items.iter().filter_map(toml_scalar).collect(),
            v => toml_scalar(v).into_iter().collect(),
        };
        if flag_only {
            if values.first().map(String::as_str) == Some("true") {
                extra.push(format!("--{long}").into());
            }
            continue;
        }
        for v in values {
            extra.push(format!("--{long}={v}").into());
        }
    }
    let mut out = argv.to_vec();
    // flags must precede a `--` separator if the user gave one
    let split = out.iter().position(|a| a == "--").unwrap_or(out.len());
    out.splice(split..split, extra);
    Ok(out)
}

fn effective_config(cli: &Cli, matches: &ArgMatches) -> String {
    let (path, leaf_matches) = leaf(matches);
    let cmd = leaf_command(&path);
    let mut args = serde_json::Map::new();
    for arg in cmd.get_arguments() {
        let id = arg.get_id().as_str();
        if matches!(id, "help" | "version") {
            continue;
        }
        let Ok(Some(raw)) = leaf_matches.try_get_raw(id) else {
            continue;
        };
        let vals: Vec<serde_json::Value> = raw
            .map(|v| serde_json::Value::String(v.to_string_lossy().into_owned()))
            .collect();
        let value = if vals.len() == 1 && !matches!(arg.get_num_args(), Some(r) if r.max_values() > 1) {
            vals.into_iter().next().expect("one value")
        } else {
            serde_json::Value::Array(vals)
        };
        args.insert(id.to_string(), value);
    }
    let config = serde_json::json!({
        "command": path.join(" "),
        "seed": cli.seed,
        "threads": cli.threads,
        "config": cli.config.as_ref().map(|p| p.display().to_string()),
        "args": args,
    });
    config.to_string()
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn read_features(path: &Path) -> Result<Vec<FeatureRow>> {
    Ok(features::read_feature_tsv(BufReader::new(File::open(path)?))?)
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Data(cmd) => run_data(cmd),
        Command::Score(cmd) => run_score(cmd),
        Command::Features(cmd) => run_features(cmd),
        Command::Train(args) => run_train(args, cli.seed),
        Command::Predict(args) => run_predict(args),
        Command::Eval(args) => run_eval(args),
        Command::NgdIndex(cmd) => run_ngd_index(cmd),
        Command::Bigram(cmd) => run_bigram(cmd, cli.seed),
        Command::Loss(cmd) => run_loss(cmd),
        Command::Corrupt(args) => run_corrupt(args, cli.seed),
    }
}

fn run_data(cmd: &DataCommand) -> Result<()> {
    match cmd {
        DataCommand::Validate { data, embeddings } => {
            let pairs = data.load()?;
            let embedding_summary = match embeddings {
                Some(path) => {
                    let set = load_embeddings(path)?;
                    set.check_coverage(&pairs)?;
                    serde_json::json!({ "dim": set.dim(), "count": set.len() })
                }
                None => serde_json::Value::Null,
            };
            let mut langs: BTreeMap<&str, usize> = BTreeMap::new();
            for p in &pairs {
                *langs.entry(p.lang.as_str()).or_insert(0) += 1;
            }
            let scored = pairs.iter().filter(|p| p.gold_score.is_some()).count();
            let report = serde_json::json!({
                "n_pairs": pairs.len(),
                "n_scored": scored,
                "per_lang_counts": langs,
                "embeddings": embedding_summary,
            });
            println!("{report}");
        }
        DataCommand::Stats { data, unit } => {
            let pairs = data.load()?;
            let unit = match unit {
                UnitArg::Tokens => LengthUnit::Tokens,
                UnitArg::Chars => LengthUnit::Chars,
            };
            let diag = corpus::length_bias_report_with(&pairs, unit)?;
            println!("{}", serde_json::to_string(&diag).expect("diagnostics serialize"));
        }
    }
    Ok(())
}

fn write_scores(rows: &[(String, f64)], out: Option<&Path>) -> Result<()> {
    eval::write_predictions(rows, output(out)?)?;
    Ok(())
}

fn run_score(cmd: &ScoreCommand) -> Result<()> {
    match cmd {
        ScoreCommand::Lexical { data, metric, out } => {
            let metric = match metric {
                MetricArg::Jaccard => OverlapMetric::Jaccard,
                MetricArg::Dice => OverlapMetric::Dice,
            };
            let rows: Vec<(String, f64)> = data
                .load()?
                .iter()
                .map(|p| {
                    let a = corpus::tokenize(&p.text_a, &p.lang);
                    let b = corpus::tokenize(&p.text_b, &p.lang);
                    (p.pair_id.clone(), lexical::overlap(metric, &a, &b).value)
                })
                .collect();
            write_scores(&rows, out.as_deref())
        }
        ScoreCommand::Ngd {
            data,
            index,
            tagger,
            out,
        } => {
            let idx = CorpusIndex::load(index)?;
            let tagger = match tagger {
                Some(p) => Some(LexiconTagger::from_reader(BufReader::new(File::open(p)?))?),
                None => None,
            };
            let mut w = output(out.as_deref())?;
            writeln!(w, "pair_id\tscore\tngd\tword_pairs")?;
            let mut skipped = 0;
            for p in data.load()? {
                let a = corpus::tokenize(&p.text_a, &p.lang);
                let b = corpus::tokenize(&p.text_b, &p.lang);
                let tagger = tagger.as_ref().map(|t| t as &dyn ngd::PosTagger);
                match ngd::ngd_sentences(&a, &b, &idx, tagger) {
                    Ok(s) => writeln!(
                        w,
                        "{}\t{}\t{}\t{}",
                        p.pair_id,
                        1.0 - s.value,
                        s.value,
                        s.word_pairs_used.len()
                    )?,
                    // nothing comparable: treat as maximally distant
                    Err(NgdError::NoComparablePairs) => {
                        skipped += 1;
                        writeln!(w, "{}\t0\t1\t0", p.pair_id)?
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            w.flush()?;
            if skipped > 0 {
                eprintln!("warning: {skipped} pairs had no comparable word pairs and scored 0");
            }
            Ok(())
        }
        ScoreCommand::Bigram {
            data,
            table,
            alpha,
            out,
        } => {
            if !(0.0..=1.0).contains(alpha) {
                return Err(bigram::BigramError::InvalidAlpha(*alpha).into());
            }
            let table = WordEmbeddingTable::load(table)?;
            let rows: Vec<(String, f64)> = data
                .load()?
                .iter()
                .map(|p| {
                    let a = corpus::tokenize(&p.text_a, &p.lang);
                    let b = corpus::tokenize(&p.text_b, &p.lang);
                    (
                        p.pair_id.clone(),
                        bigram::score_pair_unsupervised(&a, &b, &table, *alpha),
                    )
                })
                .collect();
            write_scores(&rows, out.as_deref())
        }
    }
}

fn run_features(cmd: &FeaturesCommand) -> Result<()> {
    match cmd {
        FeaturesCommand::Build {
            data,
            embeddings,
            out,
            cov_from,
            per_power_cov,
            ridge,
        } => {
            let pairs = data.load()?;
            let embs = load_embeddings(embeddings)?;
            let cov_pairs = match cov_from {
                Some(p) => load_pairs(p, None)?,
                None => pairs.clone(),
            };
            let fit_on = features::pair_embeddings(&cov_pairs, &embs)?;
            let cov = MahalanobisCovariance::fit(&fit_on, *per_power_cov, *ridge)?;
            let rows = features::build_feature_rows(&pairs, &embs, &cov)?;
            features::write_feature_tsv(&rows, BufWriter::new(File::create(out)?))?;
            Ok(())
        }
        FeaturesCommand::Cov { features: path, out } => {
            let rows = read_features(path)?;
            let vectors: Vec<_> = rows.into_iter().map(|r| r.features).collect();
            let cov = features::metric_covariance(&vectors)?;
            cov.write_tsv(output(out.as_deref())?)?;
            Ok(())
        }
    }
}

fn training_set(
    rows: &[FeatureRow],
    normalizer: &ColumnNormalizer,
) -> Result<Vec<(Vec<f64>, f64)>> {
    rows.iter()
        .map(|r| {
            let gold = r
                .gold_score
                .ok_or_else(|| Error::Cli(format!("row {:?} has no gold score", r.features.pair_id)))?;
            Ok((normalizer.apply(&r.features).values.to_vec(), gold))
        })
        .collect()
}

fn run_train(args: &TrainArgs, seed: u64) -> Result<()> {
    let rows = read_features(&args.features)?;
    let vectors: Vec<_> = rows.iter().map(|r| r.features.clone()).collect();
    let normalizer = if args.no_normalize {
        ColumnNormalizer::identity()
    } else {
        ColumnNormalizer::fit(&vectors)?
    };
    let data = training_set(&rows, &normalizer)?;
    let validation = match &args.validation {
        Some(p) => Some(training_set(&read_features(p)?, &normalizer)?),
        None => None,
    };
    let cfg = TrainConfig {
        learning_rate: args.learning_rate,
        weight_decay: args.weight_decay,
        epochs: args.epochs,
        batch_size: args.batch_size,
        dropout: args.dropout,
        seed,
    };
    let init = MlpRegressor::init(seed);
    let (model, report) = init.train(&data, validation.as_deref(), &cfg)?;
    let meta = ModelMetadata {
        format: "SMLP".into(),
        version: checkpoint::VERSION,
        layer_sizes: LAYER_SIZES.to_vec(),
        activation: "gelu".into(),
        output: "sigmoid".into(),
        seed,
        config: cfg,
        columns: features::column_names().to_vec(),
        normalization: normalizer,
    };
    checkpoint::save(&model, &meta, &args.out)?;
    if let Some(path) = &args.report {
        let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
        json.push('\n');
        std::fs::write(path, json)?;
    }
    Ok(())
}

fn run_predict(args: &PredictArgs) -> Result<()> {
    let (model, meta) = checkpoint::load(&args.model)?;
    let rows = read_features(&args.features)?;
    let preds = rows
        .iter()
        .map(|r| {
            let x = meta.normalization.apply(&r.features);
            Ok((r.features.pair_id.clone(), model.predict(&x.values)?))
        })
        .collect::<Result<Vec<_>>>()?;
    write_scores(&preds, args.out.as_deref())
}

fn parse_baselines(specs: &[String]) -> Result<BTreeMap<String, f64>> {
    specs
        .iter()
        .map(|s| {
            let (lang, score) = s
                .split_once('=')
                .ok_or_else(|| Error::Cli(format!("baseline {s:?} is not LANG=SCORE")))?;
            let score: f64 = score
                .parse()
                .map_err(|_| Error::Cli(format!("baseline {s:?} has a bad score")))?;
            Ok((lang.to_string(), score))
        })
        .collect()
}

fn run_eval(args: &EvalArgs) -> Result<()> {
    let preds = eval::read_predictions(BufReader::new(File::open(&args.predictions)?))?;
    let golds = load_pairs(&args.gold, args.format)?;
    let baselines = parse_baselines(&args.baseline)?;
    let baselines = (!baselines.is_empty()).then_some(&baselines);
    let report = eval::evaluate(&preds, &golds, baselines)?;
    let text = if args.json {
        let mut j = report.to_json();
        j.push('\n');
        j
    } else {
        report.render_table(args.precision)
    };
    let mut w = output(args.out.as_deref())?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    Ok(BufReader::new(File::open(path)?).lines().collect::<std::io::Result<_>>()?)
}

fn run_ngd_index(cmd: &NgdIndexCommand) -> Result<()> {
    let NgdIndexCommand::Build {
        docs,
        out,
        per_line,
        stopwords,
        lang,
    } = cmd;
    let stopwords = match (stopwords, lang) {
        (Some(p), _) => Stopwords::from_reader(BufReader::new(File::open(p)?))?,
        (None, Some(l)) => Stopwords::builtin(l),
        (None, None) => Stopwords::none(),
    };
    let mut token_docs = Vec::new();
    for path in docs {
        if *per_line {
            for line in read_lines(path)? {
                if !line.trim().is_empty() {
                    token_docs.push(corpus::tokenize(&line, "").tokens);
                }
            }
        } else {
            token_docs.push(corpus::tokenize(&std::fs::read_to_string(path)?, "").tokens);
        }
    }
    let idx = ngd::build_index(&token_docs, &stopwords)?;
    idx.save(out)?;
    Ok(())
}

fn run_bigram(cmd: &BigramCommand, seed: u64) -> Result<()> {
    match cmd {
        BigramCommand::Build {
            docs,
            out,
            mode,
            terminators,
        } => {
            let parsed = docs
                .iter()
                .map(|p| Ok(Document::parse(&std::fs::read_to_string(p)?, terminators)))
                .collect::<Result<Vec<_>>>()?;
            let mode = match mode {
                CountModeArg::Binary => CountMode::Binary,
                CountModeArg::Multiplicity => CountMode::Multiplicity,
            };
            let records = bigram::build_bigram_corpus(&parsed, mode)?;
            bigram::write_bigram_tsv(&records, BufWriter::new(File::create(out)?))?;
            Ok(())
        }
        BigramCommand::Embed {
            records,
            out,
            epochs,
            learning_rate,
            dim,
            weights,
        } => {
            let records = bigram::read_bigram_tsv(BufReader::new(File::open(records)?))?;
            let cfg = EmbedConfig {
                epochs: *epochs,
                learning_rate: *learning_rate,
                dim: *dim,
                seed,
            };
            let (table, stats) =
                bigram::train_embeddings(&records, (weights[0], weights[1], weights[2]), &cfg)?;
            table.save(out)?;
            println!("{}", serde_json::to_string(&stats).expect("stats serialize"));
            Ok(())
        }
        BigramCommand::Cluster { table, k, out } => {
            let table = WordEmbeddingTable::load(table)?;
            let clusters = bigram::cluster_words(&table, *k)?;
            let mut w = output(out.as_deref())?;
            writeln!(w, "term\tcluster")?;
            for (term, id) in clusters {
                writeln!(w, "{term}\t{id}")?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn run_loss(cmd: &LossCommand) -> Result<()> {
    let LossCommand::Simcse {
        sim_pos,
        sim_neg,
        embeddings,
        anchor,
        positive,
        negative,
        tau,
    } = cmd;
    let loss = match (embeddings, sim_pos, sim_neg) {
        (Some(path), _, _) => {
            let set = load_embeddings(path)?;
            let get = |id: &Option<String>| -> Result<Vec<f64>> {
                let id = id.as_deref().unwrap_or_default();
                Ok(set.require(id)?.values.clone())
            };
            contrastive::simcse_loss(&TripletBatch {
                h: get(anchor)?,
                h_plus: get(positive)?,
                h_minus: get(negative)?,
                tau: *tau,
            })?
        }
        (None, Some(p), Some(n)) => contrastive::simcse_loss_from_sims(*p, *n, *tau)?,
        _ => return Err(Error::Cli("give --sim-pos and --sim-neg, or --embeddings".into())),
    };
    println!("{loss}");
    Ok(())
}

fn run_corrupt(args: &CorruptArgs, seed: u64) -> Result<()> {
    let mode = match args.mode {
        CorruptModeArg::Delete => CorruptionMode::Delete,
        CorruptModeArg::Mask => CorruptionMode::Mask,
    };
    let lines = match (&args.text, &args.input) {
        (Some(t), _) => vec![t.clone()],
        (None, Some(p)) => read_lines(p)?,
        (None, None) => return Err(Error::Cli("no input".into())),
    };
    let mut w = output(None)?;
    for (i, line) in lines.iter().enumerate() {
        // one derived seed per line keeps lines independent of each other
        let cfg = CorruptionConfig {
            mode,
            ratio: args.ratio,
            mask_token: args.mask_token.clone(),
            seed: seed.wrapping_add(i as u64),
        };
        let tokens = corpus::tokenize(line, "");
        let corrupted = contrastive::corrupt(&tokens, &cfg)?;
        writeln!(w, "{}", corrupted.tokens.join(" "))?;
    }
    w.flush()?;
    Ok(())
}
