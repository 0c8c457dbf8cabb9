//! Page ranking by formula-embedding similarity, Dirichlet-smoothed query
//! likelihood, or a linear mix of the two.

mod formula;
mod text;

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{Collection, Query};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};

pub use formula::{formula_page_score, FormulaEncoder, PageVectors, NO_FORMULA_FLOOR};
pub use text::{TextIndex, DEFAULT_MU, INDEX_HEADER};

pub const DEFAULT_ALPHA: f64 = 4.0;
pub const DEFAULT_TOP: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Formula2vec,
    Lm,
    Combined,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Formula2vec, Method::Lm, Method::Combined];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Formula2vec => "formula2vec",
            Method::Lm => "lm",
            Method::Combined => "combined",
        }
    }

    fn needs_formulae(self) -> bool {
        self != Method::Lm
    }

    fn needs_text(self) -> bool {
        self != Method::Formula2vec
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "formula2vec" => Ok(Method::Formula2vec),
            "lm" => Ok(Method::Lm),
            "combined" => Ok(Method::Combined),
            other => Err(Error::InvalidConfig(format!("unknown ranking method `{other}`"))),
        }
    }
}

/// `(f + alpha * t) / (1 + alpha)`; an infinite `alpha` returns `t`.
pub fn combined_score(f: f64, t: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if alpha.is_infinite() {
        return Ok(t);
    }
    Ok((f + alpha * t) / (1.0 + alpha))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::NegativeAlpha(alpha));
    }
    Ok(())
}

/// Rescales to [0, 1]. A constant input maps to all zeros.
pub fn min_max_normalize(scores: &[f64]) -> Vec<f64> {
    let (lo, hi) = scores.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
        (lo.min(s), hi.max(s))
    });
    if hi.partial_cmp(&lo) != Some(Ordering::Greater) {
        return vec![0.0; scores.len()];
    }
    let span = hi - lo;
    scores.iter().map(|s| ((s - lo) / span).clamp(0.0, 1.0)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageScore {
    pub page_id: String,
    /// Raw formula match score.
    pub formula: Option<f64>,
    /// Raw log-likelihood.
    pub text: Option<f64>,
    pub formula_norm: Option<f64>,
    pub text_norm: Option<f64>,
    /// The score the list is sorted by.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub query_id: String,
    pub entries: Vec<PageScore>,
}

fn by_score_then_id(a: &PageScore, b: &PageScore) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.page_id.cmp(&b.page_id))
}

/// Raw per-page signals for one query, in collection order.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryScores {
    pub query_id: String,
    pub page_ids: Vec<String>,
    pub formula: Option<Vec<f64>>,
    pub text: Option<Vec<f64>>,
}

impl QueryScores {
    pub fn rank(&self, method: Method, alpha: f64) -> Result<RankedList> {
        check_alpha(alpha)?;
        let missing = |needs| Error::MethodUnavailable {
            method: method.as_str(),
            needs,
        };
        let n = self.page_ids.len();
        let f = match (method.needs_formulae(), &self.formula) {
            (true, None) => return Err(missing("formula scores")),
            (_, f) => f.as_deref(),
        };
        let t = match (method.needs_text(), &self.text) {
            (true, None) => return Err(missing("text scores")),
            (_, t) => t.as_deref(),
        };
        let (f_norm, t_norm) = match method {
            Method::Combined => (f.map(min_max_normalize), t.map(min_max_normalize)),
            _ => (None, None),
        };
        let mut entries = Vec::with_capacity(n);
        for i in 0..n {
            let fi = f.map(|v| v[i]);
            let ti = t.map(|v| v[i]);
            let fni = f_norm.as_ref().map(|v| v[i]);
            let tni = t_norm.as_ref().map(|v| v[i]);
            let score = match method {
                Method::Formula2vec => fi.unwrap_or_default(),
                Method::Lm => ti.unwrap_or_default(),
                Method::Combined => combined_score(fni.unwrap_or_default(), tni.unwrap_or_default(), alpha)?,
            };
            entries.push(PageScore {
                page_id: self.page_ids[i].clone(),
                formula: if method.needs_formulae() { fi } else { None },
                text: if method.needs_text() { ti } else { None },
                formula_norm: fni,
                text_norm: tni,
                score,
            });
        }
        entries.sort_by(by_score_then_id);
        Ok(RankedList {
            query_id: self.query_id.clone(),
            entries,
        })
    }
}

/// Scores every page of a collection; holds whichever of the text index and
/// formula model were supplied.
pub struct Searcher<'a> {
    collection: &'a Collection,
    text: Option<(&'a TextIndex, Vec<usize>)>,
    formulae: Option<(FormulaEncoder<'a>, PageVectors)>,
}

impl<'a> Searcher<'a> {
    pub fn new(collection: &'a Collection) -> Self {
        Self {
            collection,
            text: None,
            formulae: None,
        }
    }

    pub fn with_text_index(mut self, index: &'a TextIndex) -> Result<Self> {
        let positions = self
            .collection
            .pages
            .iter()
            .map(|p| {
                index
                    .position(&p.page_id)
                    .ok_or_else(|| Error::UnknownPage(p.page_id.clone()))
            })
            .collect::<Result<_>>()?;
        self.text = Some((index, positions));
        Ok(self)
    }

    /// Encodes every page formula up front.
    pub fn with_formula_model(self, table: &'a EmbeddingTable, workers: usize) -> Result<Self> {
        let encoder = FormulaEncoder::new(table)?;
        let vectors = PageVectors::build(self.collection, &encoder, workers)?;
        Ok(self.with_page_vectors(encoder, vectors))
    }

    pub fn with_page_vectors(mut self, encoder: FormulaEncoder<'a>, vectors: PageVectors) -> Self {
        self.formulae = Some((encoder, vectors));
        self
    }

    pub fn page_vectors(&self) -> Option<&PageVectors> {
        self.formulae.as_ref().map(|(_, v)| v)
    }

    pub fn formula_scores(&self, query: &Query) -> Result<Vec<f64>> {
        let (encoder, vectors) = self.formulae.as_ref().ok_or(Error::MethodUnavailable {
            method: Method::Formula2vec.as_str(),
            needs: "a formula model",
        })?;
        let q = encoder.encode_query(&query.formulae)?;
        if q.is_empty() {
            return Err(Error::NoQueryFormulae);
        }
        vectors.pages.iter().map(|p| formula_page_score(&q, p)).collect()
    }

    pub fn text_scores(&self, query: &Query) -> Result<Vec<f64>> {
        let (index, positions) = self.text.as_ref().ok_or(Error::MethodUnavailable {
            method: Method::Lm.as_str(),
            needs: "a text index",
        })?;
        Ok(positions.iter().map(|&p| index.score_at(&query.keywords, p)).collect())
    }

    /// Computes the signals `method` needs.
    pub fn score(&self, query: &Query, method: Method) -> Result<QueryScores> {
        Ok(QueryScores {
            query_id: query.query_id.clone(),
            page_ids: self.collection.pages.iter().map(|p| p.page_id.clone()).collect(),
            formula: if method.needs_formulae() {
                Some(self.formula_scores(query)?)
            } else {
                None
            },
            text: if method.needs_text() {
                Some(self.text_scores(query)?)
            } else {
                None
            },
        })
    }

    pub fn rank(&self, query: &Query, method: Method, alpha: f64) -> Result<RankedList> {
        self.score(query, method)?.rank(method, alpha)
    }
}

/// TREC run lines: `query_id Q0 page_id rank score tag`, at most `top` per query.
pub fn write_run<W: Write>(mut w: W, lists: &[RankedList], tag: &str, top: usize) -> std::io::Result<()> {
    for list in lists {
        for (i, e) in list.entries.iter().take(top).enumerate() {
            writeln!(w, "{} Q0 {} {} {} {}", list.query_id, e.page_id, i + 1, e.score, tag)?;
        }
    }
    w.flush()
}
