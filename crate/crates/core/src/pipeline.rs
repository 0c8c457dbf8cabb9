//! Glue between the stages: training from a collection, ranking a query set,
//! provenance lines for output headers, and parameter sweeps.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{filter_corpus, Collection, FilterReport, FormulaStore, Query};
use crate::embeddings::{train_formula2vec, train_symbol2vec, EmbeddingTable, Mode, TrainingConfig, TrainingReport};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, format_values, metric_columns, EvalSettings, MetricReport, Qrels, Run};
use crate::retrieval::{Method, RankedList, Searcher, TextIndex};
use crate::tokenizer::FilterRule;
use crate::vocab::build_vocabulary;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Filters the collection's formulae into a training corpus.
pub fn training_corpus(collection: &Collection, rule: &FilterRule) -> (FormulaStore, FilterReport) {
    filter_corpus(&collection.formulas, rule)
}

/// Builds the vocabulary and trains in the mode named by `config`.
pub fn train_model(
    corpus: &FormulaStore,
    config: &TrainingConfig,
    min_count: usize,
    sampling_power: f64,
) -> Result<(EmbeddingTable, TrainingReport)> {
    let vocab = build_vocabulary(corpus, min_count, sampling_power)?;
    match config.mode {
        Mode::Symbol2vec => train_symbol2vec(corpus, &vocab, config),
        Mode::Formula2vec => train_formula2vec(corpus, &vocab, config),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedRun {
    pub lists: Vec<RankedList>,
    /// Queries left out because none of their formulae could be encoded.
    pub skipped: Vec<String>,
}

/// Ranks every query. Under a formula method, queries without a usable
/// formula are skipped with a warning.
pub fn rank_queries(searcher: &Searcher<'_>, queries: &[Query], method: Method, alpha: f64) -> Result<RankedRun> {
    let mut lists = Vec::with_capacity(queries.len());
    let mut skipped = Vec::new();
    for q in queries {
        match searcher.rank(q, method, alpha) {
            Ok(list) => lists.push(list),
            Err(Error::NoQueryFormulae) => {
                log::warn!("query `{}` has no usable formula for {method}; skipped", q.query_id);
                skipped.push(q.query_id.clone());
            }
            Err(e) => return Err(e),
        }
    }
    Ok(RankedRun { lists, skipped })
}

/// Header lines recording the tool version, seed and settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub command: String,
    pub seed: u64,
    pub settings: Vec<(String, String)>,
}

impl Provenance {
    pub fn new(command: impl Into<String>, seed: u64) -> Self {
        Self {
            command: command.into(),
            seed,
            settings: Vec::new(),
        }
    }

    pub fn with(mut self, key: impl Into<String>, value: impl fmt::Display) -> Self {
        self.settings.push((key.into(), value.to_string()));
        self
    }

    pub fn lines(&self) -> Vec<String> {
        let mut out = vec![
            format!("mathemb {VERSION} {}", self.command),
            format!("seed {}", self.seed),
        ];
        out.extend(self.settings.iter().map(|(k, v)| format!("{k} {v}")));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Dimension,
    Alpha,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::Dimension => "dim",
            SweepAxis::Alpha => "alpha",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dim" | "dimension" => Ok(SweepAxis::Dimension),
            "alpha" => Ok(SweepAxis::Alpha),
            other => Err(Error::InvalidConfig(format!("unknown sweep axis `{other}`"))),
        }
    }
}

/// Everything a sweep point needs besides the swept value.
pub struct SweepInputs<'a> {
    pub collection: &'a Collection,
    pub queries: &'a [Query],
    pub qrels: &'a Qrels,
    pub index: &'a TextIndex,
    pub corpus: &'a FormulaStore,
    pub formula_config: TrainingConfig,
    pub min_count: usize,
    pub sampling_power: f64,
    /// Ranking used by the dimension sweep; the alpha sweep always combines.
    pub method: Method,
    pub alpha: f64,
    pub top: usize,
    pub eval: EvalSettings,
    /// Model reused by the alpha sweep; trained from `formula_config` when absent.
    pub model: Option<&'a EmbeddingTable>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub report: MetricReport,
}

pub fn sweep(axis: SweepAxis, values: &[f64], inputs: &SweepInputs<'_>) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one value".into()));
    }
    let evaluate_with = |table: &EmbeddingTable, method: Method, alphas: &[f64]| -> Result<Vec<MetricReport>> {
        let searcher = Searcher::new(inputs.collection)
            .with_text_index(inputs.index)?
            .with_formula_model(table, inputs.formula_config.workers)?;
        let mut scored = Vec::new();
        for q in inputs.queries {
            match searcher.score(q, method) {
                Ok(s) => scored.push(s),
                Err(Error::NoQueryFormulae) => log::warn!("query `{}` skipped", q.query_id),
                Err(e) => return Err(e),
            }
        }
        alphas
            .iter()
            .map(|&a| {
                let lists = scored.iter().map(|s| s.rank(method, a)).collect::<Result<Vec<_>>>()?;
                Ok(evaluate(
                    &Run::from_lists(&lists, inputs.top),
                    inputs.qrels,
                    &inputs.eval,
                ))
            })
            .collect()
    };

    match axis {
        SweepAxis::Alpha => {
            let trained;
            let table = match inputs.model {
                Some(t) => t,
                None => {
                    trained = train_model(
                        inputs.corpus,
                        &inputs.formula_config,
                        inputs.min_count,
                        inputs.sampling_power,
                    )?
                    .0;
                    &trained
                }
            };
            let reports = evaluate_with(table, Method::Combined, values)?;
            Ok(values
                .iter()
                .zip(reports)
                .map(|(&value, report)| SweepRow { value, report })
                .collect())
        }
        SweepAxis::Dimension => {
            let mut rows = Vec::with_capacity(values.len());
            for &value in values {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "dimension must be a positive integer, got {value}"
                    )));
                }
                let config = TrainingConfig {
                    dim: value as usize,
                    ..inputs.formula_config.clone()
                };
                let table = train_model(inputs.corpus, &config, inputs.min_count, inputs.sampling_power)?.0;
                let report = evaluate_with(&table, inputs.method, &[inputs.alpha])?.remove(0);
                rows.push(SweepRow { value, report });
            }
            Ok(rows)
        }
    }
}

/// One row of mean metrics per swept value.
pub fn write_sweep_tsv<W: Write>(
    mut w: W,
    axis: SweepAxis,
    rows: &[SweepRow],
    comments: &[String],
) -> std::io::Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    let ks = rows.first().map(|r| r.report.ks.clone()).unwrap_or_default();
    writeln!(w, "{}\t{}", axis.as_str(), metric_columns(&ks).join("\t"))?;
    for r in rows {
        writeln!(w, "{}\t{}", r.value, format_values(&r.report.mean))?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn provenance_lines() {
        let p = Provenance::new("search", 7).with("alpha", 4).with("method", Method::Lm);
        let lines = p.lines();
        assert_eq!(lines[0], format!("mathemb {VERSION} search"));
        assert_eq!(&lines[1..], ["seed 7", "alpha 4", "method lm"]);
    }

    #[test]
    fn axis_names() {
        assert_eq!("dim".parse::<SweepAxis>().unwrap(), SweepAxis::Dimension);
        assert_eq!("alpha".parse::<SweepAxis>().unwrap(), SweepAxis::Alpha);
        assert!("beta".parse::<SweepAxis>().is_err());
    }
}
