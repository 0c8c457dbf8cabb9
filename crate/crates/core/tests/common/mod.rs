#![allow(dead_code)]

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use mathemb_core::corpus::{ingest_pages, load_queries, Collection, FormulaStore, Query, TextAnalyzer};
use mathemb_core::evaluation::Qrels;
use mathemb_core::pipeline::training_corpus;
use mathemb_core::{FilterRule, TextIndex, Tokenizer, TrainingConfig};

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub struct Fixture {
    pub collection: Collection,
    pub queries: Vec<Query>,
    pub qrels: Qrels,
    pub corpus: FormulaStore,
    pub index: TextIndex,
}

pub fn load_fixture() -> Fixture {
    let dir = fixture_dir();
    let tokenizer = Tokenizer::default();
    let analyzer = TextAnalyzer::default();
    let (collection, _) = ingest_pages(&dir.join("pages.jsonl"), &tokenizer, &analyzer).unwrap();
    let queries = load_queries(&dir.join("queries.jsonl"), &tokenizer, &analyzer).unwrap();
    let qrels = Qrels::load(&dir.join("qrels.txt")).unwrap();
    let (corpus, _) = training_corpus(&collection, &FilterRule::default());
    let index = TextIndex::build(&collection, 2000.0).unwrap();
    Fixture {
        collection,
        queries,
        qrels,
        corpus,
        index,
    }
}

/// Formula model settings used on the fixture: 300 dimensions, 50 epochs.
pub fn fixture_formula_config(seed: u64) -> TrainingConfig {
    TrainingConfig {
        epochs: 50,
        seed,
        ..TrainingConfig::formula2vec()
    }
}

pub fn oracle_cosine(u: &[f64], v: &[f64]) -> f64 {
    let mut uv = 0.0;
    let mut uu = 0.0;
    let mut vv = 0.0;
    for i in 0..u.len() {
        uv += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    uv / (uu.sqrt() * vv.sqrt())
}

fn table_file(name: &str) -> HashSet<String> {
    std::fs::read_to_string(data_dir().join(format!("{name}.txt")))
        .unwrap()
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect()
}

/// Character-level scanner written directly from the tokenizing rules, with
/// its own copy of the class tables.
pub struct ReferenceScanner {
    variables: HashSet<String>,
    operators: HashSet<String>,
}

impl ReferenceScanner {
    pub fn new() -> Self {
        let mut operators = table_file("operators");
        operators.extend(table_file("relations"));
        Self {
            variables: table_file("variables"),
            operators,
        }
    }

    /// `None` for a trailing lone backslash.
    pub fn scan(&self, s: &str) -> Option<Vec<String>> {
        let c: Vec<char> = s.chars().collect();
        // comments
        let mut t = Vec::new();
        let mut i = 0;
        while i < c.len() {
            if c[i] == '\\' {
                t.push(c[i]);
                t.push(*c.get(i + 1)?);
                i += 2;
            } else if c[i] == '%' {
                while i < c.len() && c[i] != '\n' {
                    i += 1;
                }
            } else {
                t.push(c[i]);
                i += 1;
            }
        }
        let mut out = Vec::new();
        let mut i = 0;
        while i < t.len() {
            let ch = t[i];
            if ch.is_whitespace() {
                i += 1;
            } else if ch == '\\' && t[i + 1].is_ascii_alphabetic() {
                let mut j = i + 1;
                while j < t.len() && t[j].is_ascii_alphabetic() {
                    j += 1;
                }
                let cmd: String = t[i..j].iter().collect();
                i = j;
                let env = cmd == "\\begin" || cmd == "\\end";
                out.push(cmd);
                if env {
                    let mut k = i;
                    while k < t.len() && t[k].is_whitespace() {
                        k += 1;
                    }
                    if k < t.len() && t[k] == '{' {
                        let mut m = k + 1;
                        while m < t.len() && !t[m].is_whitespace() && !"{}\\".contains(t[m]) {
                            m += 1;
                        }
                        if m > k + 1 && m < t.len() && t[m] == '}' {
                            out.push(t[k..=m].iter().collect());
                            i = m + 1;
                        }
                    }
                }
            } else if ch == '\\' && t[i + 1].is_whitespace() {
                i += 2;
            } else if ch == '\\' {
                out.push(t[i..i + 2].iter().collect());
                i += 2;
            } else {
                out.push(ch.to_string());
                i += 1;
            }
        }
        Some(out)
    }

    pub fn passes(&self, tokens: &[String]) -> bool {
        let vars: HashSet<&String> = tokens.iter().filter(|t| self.variables.contains(*t)).collect();
        let ops = tokens.iter().filter(|t| self.operators.contains(*t)).count();
        vars.len() >= 2 && ops >= 3
    }
}

/// Brute-force metrics from a list of grades in rank order.
pub mod metric_oracle {
    pub fn ndcg(ranked: &[u32], judged: &[u32], k: usize) -> f64 {
        let gain = |g: u32| (1u64 << g) as f64 - 1.0;
        let mut dcg = 0.0;
        for (i, g) in ranked.iter().enumerate() {
            if i < k {
                dcg += gain(*g) * std::f64::consts::LN_2 / ((i + 2) as f64).ln();
            }
        }
        let mut best: Vec<u32> = judged.to_vec();
        best.sort();
        best.reverse();
        let mut idcg = 0.0;
        for (i, g) in best.iter().enumerate() {
            if i < k {
                idcg += gain(*g) * std::f64::consts::LN_2 / ((i + 2) as f64).ln();
            }
        }
        if idcg > 0.0 {
            dcg / idcg
        } else {
            0.0
        }
    }

    pub fn precision(ranked: &[u32], k: usize) -> f64 {
        let mut hits = 0;
        for i in 0..k {
            if ranked.get(i).is_some_and(|g| *g > 0) {
                hits += 1;
            }
        }
        hits as f64 / k as f64
    }

    pub fn average_precision(ranked: &[u32], relevant: usize) -> f64 {
        if relevant == 0 {
            return 0.0;
        }
        let mut total = 0.0;
        for i in 0..ranked.len() {
            if ranked[i] > 0 {
                total += precision(&ranked[..=i], i + 1);
            }
        }
        total / relevant as f64
    }

    pub fn reciprocal_rank(ranked: &[u32]) -> f64 {
        for (i, g) in ranked.iter().enumerate() {
            if *g > 0 {
                return 1.0 / (i + 1) as f64;
            }
        }
        0.0
    }
}
