//! Pages, queries and formula stores: JSON-lines ingestion and the
//! plain-text `MATHEMB-CORPUS v1` store.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenizer::{FilterRule, SymbolToken, TokenizedFormula, Tokenizer};

pub const CORPUS_HEADER: &str = "MATHEMB-CORPUS v1";

/// Lowercases and splits on non-alphanumeric characters, optionally dropping stopwords.
#[derive(Debug, Clone, Default)]
pub struct TextAnalyzer {
    stopwords: HashSet<String>,
}

impl TextAnalyzer {
    pub fn with_stopwords<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let stopwords = words
            .into_iter()
            .flat_map(|w| Self::default().analyze(w.as_ref()))
            .collect();
        Self { stopwords }
    }

    /// One stopword per line (further words on a line are also accepted).
    pub fn from_stopword_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::with_stopwords(text.split_whitespace()))
    }

    pub fn analyze(&self, text: &str) -> Vec<String> {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .map(str::to_lowercase)
            .filter(|w| !self.stopwords.contains(w))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Page {
    pub page_id: String,
    pub title: String,
    /// Analyzed title followed by analyzed body text.
    pub text_terms: Vec<String>,
    pub formula_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub query_id: String,
    pub keywords: Vec<String>,
    pub formulae: Vec<TokenizedFormula>,
}

/// Ordered formula storage with id lookup.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FormulaStore {
    formulas: Vec<TokenizedFormula>,
    index: HashMap<String, usize>,
}

impl FormulaStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false (and stores nothing) when the id is already present.
    pub fn insert(&mut self, formula: TokenizedFormula) -> bool {
        if self.index.contains_key(&formula.id) {
            return false;
        }
        self.index.insert(formula.id.clone(), self.formulas.len());
        self.formulas.push(formula);
        true
    }

    pub fn get(&self, id: &str) -> Option<&TokenizedFormula> {
        self.index.get(id).map(|&i| &self.formulas[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.formulas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.formulas.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TokenizedFormula> {
        self.formulas.iter()
    }

    pub fn as_slice(&self) -> &[TokenizedFormula] {
        &self.formulas
    }
}

impl FromIterator<TokenizedFormula> for FormulaStore {
    fn from_iter<T: IntoIterator<Item = TokenizedFormula>>(iter: T) -> Self {
        let mut store = FormulaStore::new();
        for f in iter {
            store.insert(f);
        }
        store
    }
}

impl<'a> IntoIterator for &'a FormulaStore {
    type Item = &'a TokenizedFormula;
    type IntoIter = std::slice::Iter<'a, TokenizedFormula>;

    fn into_iter(self) -> Self::IntoIter {
        self.formulas.iter()
    }
}

/// Pages plus every formula they reference.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Collection {
    pub pages: Vec<Page>,
    pub formulas: FormulaStore,
}

impl Collection {
    pub fn page(&self, page_id: &str) -> Option<&Page> {
        self.pages.iter().find(|p| p.page_id == page_id)
    }

    pub fn page_formulas<'a>(&'a self, page: &'a Page) -> impl Iterator<Item = &'a TokenizedFormula> + 'a {
        page.formula_ids.iter().filter_map(|id| self.formulas.get(id))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub pages: usize,
    pub formulae: usize,
    /// Formula strings that contained no tokens and were not stored.
    pub empty_formulae: usize,
}

#[derive(Deserialize)]
struct PageRecord {
    page_id: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    text: String,
    #[serde(default)]
    formulas: Vec<String>,
}

#[derive(Deserialize)]
struct QueryRecord {
    query_id: String,
    #[serde(default)]
    keywords: Vec<String>,
    #[serde(default)]
    formulas: Vec<String>,
}

fn check_id(id: &str, line: usize, what: &str) -> Result<()> {
    if id.is_empty() || id.chars().any(char::is_whitespace) {
        return Err(Error::MalformedRecord {
            line,
            reason: format!("{what} `{id}` must be non-empty and free of whitespace"),
        });
    }
    Ok(())
}

fn tokenize_at(tokenizer: &Tokenizer, latex: &str, line: usize) -> Result<Vec<SymbolToken>> {
    tokenizer.tokenize(latex).map_err(|e| Error::MalformedRecord {
        line,
        reason: format!("formula `{latex}`: {e}"),
    })
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?))
}

/// Reads a JSON-lines collection: `{page_id, title, text, formulas: [latex]}` per line.
pub fn ingest_pages(path: &Path, tokenizer: &Tokenizer, analyzer: &TextAnalyzer) -> Result<(Collection, IngestStats)> {
    parse_pages(open(path)?, tokenizer, analyzer).map_err(|e| with_path(e, path))
}

pub fn parse_pages<R: BufRead>(
    reader: R,
    tokenizer: &Tokenizer,
    analyzer: &TextAnalyzer,
) -> Result<(Collection, IngestStats)> {
    let mut collection = Collection::default();
    let mut stats = IngestStats::default();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::MalformedRecord {
            line: lineno,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PageRecord = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            line: lineno,
            reason: e.to_string(),
        })?;
        check_id(&rec.page_id, lineno, "page_id")?;
        if !seen.insert(rec.page_id.clone()) {
            return Err(Error::DuplicatePageId(rec.page_id));
        }
        let mut formula_ids = Vec::with_capacity(rec.formulas.len());
        for (k, latex) in rec.formulas.iter().enumerate() {
            let tokens = tokenize_at(tokenizer, latex, lineno)?;
            if tokens.is_empty() {
                stats.empty_formulae += 1;
                continue;
            }
            let id = format!("{}#{k}", rec.page_id);
            formula_ids.push(id.clone());
            collection.formulas.insert(TokenizedFormula::new(id, tokens));
            stats.formulae += 1;
        }
        let mut text_terms = analyzer.analyze(&rec.title);
        text_terms.extend(analyzer.analyze(&rec.text));
        collection.pages.push(Page {
            page_id: rec.page_id,
            title: rec.title,
            text_terms,
            formula_ids,
        });
        stats.pages += 1;
    }
    Ok((collection, stats))
}

/// Reads JSON-lines queries: `{query_id, keywords: [..], formulas: [latex]}` per line.
pub fn load_queries(path: &Path, tokenizer: &Tokenizer, analyzer: &TextAnalyzer) -> Result<Vec<Query>> {
    parse_queries(open(path)?, tokenizer, analyzer).map_err(|e| with_path(e, path))
}

pub fn parse_queries<R: BufRead>(reader: R, tokenizer: &Tokenizer, analyzer: &TextAnalyzer) -> Result<Vec<Query>> {
    let mut queries = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::MalformedRecord {
            line: lineno,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: QueryRecord = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            line: lineno,
            reason: e.to_string(),
        })?;
        check_id(&rec.query_id, lineno, "query_id")?;
        if !seen.insert(rec.query_id.clone()) {
            return Err(Error::DuplicateQueryId(rec.query_id));
        }
        let keywords: Vec<String> = rec.keywords.iter().flat_map(|k| analyzer.analyze(k)).collect();
        let mut formulae = Vec::new();
        for (k, latex) in rec.formulas.iter().enumerate() {
            let tokens = tokenize_at(tokenizer, latex, lineno)?;
            if !tokens.is_empty() {
                formulae.push(TokenizedFormula::new(format!("{}#{k}", rec.query_id), tokens));
            }
        }
        if keywords.is_empty() && formulae.is_empty() {
            return Err(Error::MalformedRecord {
                line: lineno,
                reason: format!("query `{}` has neither keywords nor formulae", rec.query_id),
            });
        }
        queries.push(Query {
            query_id: rec.query_id,
            keywords,
            formulae,
        });
    }
    Ok(queries)
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::MalformedRecord { line, reason } => Error::MalformedRecord {
            line,
            reason: format!("{}: {reason}", path.display()),
        },
        other => other,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FilterReport {
    pub kept: usize,
    pub dropped: usize,
}

/// Keeps the formulae admitted by `rule`, preserving order.
pub fn filter_corpus(store: &FormulaStore, rule: &FilterRule) -> (FormulaStore, FilterReport) {
    let mut report = FilterReport::default();
    let kept = store
        .iter()
        .filter(|f| {
            let keep = rule.passes(&f.tokens);
            if keep {
                report.kept += 1;
            } else {
                report.dropped += 1;
            }
            keep
        })
        .cloned()
        .collect();
    (kept, report)
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum StoreRecord {
    Formula {
        id: String,
        tokens: Vec<String>,
    },
    Page {
        page_id: String,
        title: String,
        text_terms: Vec<String>,
        formula_ids: Vec<String>,
    },
}

impl Collection {
    /// Writes the store: header line, `# ` comment lines, formula records, then page records.
    pub fn write_to<W: Write>(&self, mut w: W, comments: &[String]) -> std::io::Result<()> {
        writeln!(w, "{CORPUS_HEADER}")?;
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        for f in &self.formulas {
            let rec = StoreRecord::Formula {
                id: f.id.clone(),
                tokens: f.surfaces().map(str::to_string).collect(),
            };
            writeln!(w, "{}", serde_json::to_string(&rec)?)?;
        }
        for p in &self.pages {
            let rec = StoreRecord::Page {
                page_id: p.page_id.clone(),
                title: p.title.clone(),
                text_terms: p.text_terms.clone(),
                formula_ids: p.formula_ids.clone(),
            };
            writeln!(w, "{}", serde_json::to_string(&rec)?)?;
        }
        w.flush()
    }

    pub fn save(&self, path: &Path, comments: &[String]) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(file), comments)
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_from<R: BufRead>(reader: R, tokenizer: &Tokenizer) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        match lines.next() {
            Some((_, Ok(h))) if h == CORPUS_HEADER => {}
            _ => {
                return Err(Error::BadHeader {
                    expected: CORPUS_HEADER,
                })
            }
        }
        let mut c = Collection::default();
        let mut pages_seen = HashSet::new();
        for (i, line) in lines {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::MalformedRecord {
                line: lineno,
                reason: e.to_string(),
            })?;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let rec: StoreRecord = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                line: lineno,
                reason: e.to_string(),
            })?;
            match rec {
                StoreRecord::Formula { id, tokens } => {
                    let tokens: Vec<SymbolToken> = tokens.into_iter().map(|s| tokenizer.token(s)).collect();
                    if tokens.is_empty() {
                        return Err(Error::MalformedRecord {
                            line: lineno,
                            reason: format!("formula `{id}` has no tokens"),
                        });
                    }
                    if !c.formulas.insert(TokenizedFormula::new(id.clone(), tokens)) {
                        return Err(Error::MalformedRecord {
                            line: lineno,
                            reason: format!("duplicate formula id `{id}`"),
                        });
                    }
                }
                StoreRecord::Page {
                    page_id,
                    title,
                    text_terms,
                    formula_ids,
                } => {
                    if let Some(missing) = formula_ids.iter().find(|id| c.formulas.get(id).is_none()) {
                        return Err(Error::MalformedRecord {
                            line: lineno,
                            reason: format!("page `{page_id}` references unknown formula `{missing}`"),
                        });
                    }
                    if !pages_seen.insert(page_id.clone()) {
                        return Err(Error::DuplicatePageId(page_id));
                    }
                    c.pages.push(Page {
                        page_id,
                        title,
                        text_terms,
                        formula_ids,
                    });
                }
            }
        }
        Ok(c)
    }

    pub fn load(path: &Path, tokenizer: &Tokenizer) -> Result<Self> {
        Self::read_from(open(path)?, tokenizer).map_err(|e| with_path(e, path))
    }
}
