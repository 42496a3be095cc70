//! Helpers shared by the integration tests and the acceptance runner:
//! brute-force oracles written independently of the library code, synthetic
//! data generators and the CLI pipeline driver.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_strel")
}

pub fn strel(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

pub fn fixture_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Rank of each value: 1 + number strictly smaller + half the other ties.
pub fn oracle_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let below = v.iter().filter(|&&y| y < x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            1.0 + below + (equal - 1.0) / 2.0
        })
        .collect()
}

pub fn oracle_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn oracle_spearman(x: &[f64], y: &[f64]) -> f64 {
    oracle_pearson(&oracle_ranks(x), &oracle_ranks(y))
}

/// `1 - 6 Σd² / (n(n² - 1))` for tie-free data.
pub fn oracle_classical_spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (oracle_ranks(x), oracle_ranks(y));
    let n = x.len() as i64;
    let d2: i64 = rx
        .iter()
        .zip(&ry)
        .map(|(a, b)| {
            let d = *a as i64 - *b as i64;
            d * d
        })
        .sum();
    1.0 - (6 * d2) as f64 / (n * (n * n - 1)) as f64
}

/// Random documents as nested paragraph/sentence token lists.
pub fn random_corpus(rng: &mut ChaCha8Rng, max_tokens: usize) -> Vec<Vec<Vec<Vec<String>>>> {
    let vocab: Vec<String> = (0..rng.gen_range(3..15)).map(|i| format!("w{i}")).collect();
    let budget = rng.gen_range(2..=max_tokens);
    let mut used = 0;
    let mut docs = Vec::new();
    while used < budget {
        let mut doc = Vec::new();
        for _ in 0..rng.gen_range(1..4) {
            let mut para = Vec::new();
            for _ in 0..rng.gen_range(1..4) {
                let len = rng.gen_range(1..8).min(budget - used).max(1);
                used += len;
                para.push((0..len).map(|_| vocab[rng.gen_range(0..vocab.len())].clone()).collect());
                if used >= budget {
                    break;
                }
            }
            doc.push(para);
            if used >= budget {
                break;
            }
        }
        docs.push(doc);
    }
    docs
}

/// Visits every pair of token positions in each document and records, per
/// document, whether the two words ever share a sentence, a paragraph or just
/// the document. Returns `(w1, w2) -> [sent, para, doc]` summed over documents.
pub fn oracle_bigram_counts(docs: &[Vec<Vec<Vec<String>>>]) -> BTreeMap<(String, String), [u64; 3]> {
    let mut out: BTreeMap<(String, String), [u64; 3]> = BTreeMap::new();
    for doc in docs {
        let mut positions = Vec::new();
        for (p, para) in doc.iter().enumerate() {
            for (s, sent) in para.iter().enumerate() {
                for w in sent {
                    positions.push((p, s, w.clone()));
                }
            }
        }
        let mut flags: BTreeMap<(String, String), [bool; 3]> = BTreeMap::new();
        for i in 0..positions.len() {
            for j in 0..positions.len() {
                let (pi, si, wi) = &positions[i];
                let (pj, sj, wj) = &positions[j];
                if wi >= wj {
                    continue;
                }
                let f = flags.entry((wi.clone(), wj.clone())).or_insert([false; 3]);
                f[2] = true;
                if pi == pj {
                    f[1] = true;
                    if si == sj {
                        f[0] = true;
                    }
                }
            }
        }
        for (k, f) in flags {
            let e = out.entry(k).or_insert([0; 3]);
            for i in 0..3 {
                e[i] += f[i] as u64;
            }
        }
    }
    out
}

/// A permutation of `0..n` whose squared rank displacement sums to `target`.
pub fn permutation_with_d2(n: usize, target: i64, seed: u64) -> Vec<usize> {
    let d2 = |p: &[usize]| -> i64 {
        p.iter()
            .enumerate()
            .map(|(i, &v)| {
                let d = i as i64 - v as i64;
                d * d
            })
            .sum()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut p: Vec<usize> = (0..n).collect();
        for _ in 0..10_000 {
            let cur = d2(&p);
            if cur == target {
                return p;
            }
            let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
            p.swap(i, j);
            let next = d2(&p);
            if next > target || next < cur {
                p.swap(i, j);
            }
        }
    }
}

pub struct PipelineRun {
    pub report: String,
    pub elapsed: Duration,
    pub failures: Vec<String>,
}

/// features build, train, predict and eval over the pipeline fixture.
pub fn run_pipeline(work: &Path) -> PipelineRun {
    let dir = fixture_dir("pipeline");
    let s = |p: PathBuf| p.to_string_lossy().into_owned();
    let (pairs, embs) = (s(dir.join("pairs.tsv")), s(dir.join("embeddings.jsonl")));
    let (feats, model, preds, report) = (
        s(work.join("features.tsv")),
        s(work.join("model.smlp")),
        s(work.join("predictions.tsv")),
        s(work.join("report.txt")),
    );
    let steps: Vec<Vec<&str>> = vec![
        vec!["-q", "features", "build", &pairs, "--embeddings", &embs, "--out", &feats],
        vec![
            "-q", "--seed", "7", "train", &feats, "--out", &model, "--epochs", "300",
            "--batch-size", "4", "--learning-rate", "0.01", "--dropout", "0",
        ],
        vec!["-q", "predict", &feats, "--model", &model, "--out", &preds],
        vec![
            "-q", "eval", &preds, "--gold", &pairs, "--baseline", "eng=0.83", "--baseline",
            "esp=0.7", "--out", &report,
        ],
    ];
    let start = Instant::now();
    let mut failures = Vec::new();
    for step in &steps {
        let out = strel(step);
        if !out.status.success() {
            failures.push(format!(
                "{}: {}",
                step[1],
                String::from_utf8_lossy(&out.stderr).trim()
            ));
            break;
        }
    }
    let elapsed = start.elapsed();
    let report = std::fs::read_to_string(&report).unwrap_or_default();
    PipelineRun {
        report,
        elapsed,
        failures,
    }
}

/// Committed report; set `STREL_REGEN_GOLDEN=1` to rewrite it from `report`.
pub fn golden_report(report: &str) -> String {
    let path = fixture_dir("pipeline").join("golden_report.txt");
    if std::env::var_os("STREL_REGEN_GOLDEN").is_some() {
        std::fs::write(&path, report).expect("write golden report");
    }
    std::fs::read_to_string(path).expect("golden report is committed")
}
