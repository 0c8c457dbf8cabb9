use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::retrieval::RankedList;

/// Largest grade accepted from a qrels file.
pub const MAX_GRADE: u32 = 30;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Judgment {
    pub query_id: String,
    pub page_id: String,
    pub grade: u32,
}

/// Graded judgments keyed by query, then page.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    queries: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn from_judgments<I: IntoIterator<Item = Judgment>>(judgments: I) -> Result<Self> {
        let mut q = Qrels::default();
        for (i, j) in judgments.into_iter().enumerate() {
            q.insert(j, i + 1)?;
        }
        Ok(q)
    }

    fn insert(&mut self, j: Judgment, line: usize) -> Result<()> {
        match self.queries.entry(j.query_id).or_default().entry(j.page_id) {
            Entry::Occupied(e) => Err(Error::MalformedQrelLine {
                line,
                reason: format!("duplicate judgment for page `{}`", e.key()),
            }),
            Entry::Vacant(e) => {
                e.insert(j.grade);
                Ok(())
            }
        }
    }

    /// `query_id iteration page_id grade` per line. Negative grades count as 0.
    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut q = Qrels::default();
        for (i, line) in reader.lines().enumerate() {
            let n = i + 1;
            let line = line.map_err(|e| Error::io("<qrels>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |reason: String| Error::MalformedQrelLine { line: n, reason };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(bad(format!("expected 4 fields, found {}", fields.len())));
            }
            let grade: i64 = fields[3]
                .parse()
                .map_err(|_| bad(format!("grade `{}` is not an integer", fields[3])))?;
            if grade > MAX_GRADE as i64 {
                return Err(bad(format!("grade {grade} exceeds {MAX_GRADE}")));
            }
            let j = Judgment {
                query_id: fields[0].to_string(),
                page_id: fields[2].to_string(),
                grade: grade.max(0) as u32,
            };
            q.insert(j, n)?;
        }
        Ok(q)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(BufReader::new(f)).map_err(|e| relocate(e, path))
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.queries.keys().map(String::as_str)
    }

    pub fn judgments(&self, query_id: &str) -> Option<&BTreeMap<String, u32>> {
        self.queries.get(query_id)
    }

    /// Unjudged pairs are grade 0.
    pub fn grade(&self, query_id: &str, page_id: &str) -> u32 {
        self.queries
            .get(query_id)
            .and_then(|m| m.get(page_id))
            .copied()
            .unwrap_or(0)
    }
}

fn relocate(e: Error, path: &Path) -> Error {
    match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub page_id: String,
    pub rank: u64,
    pub score: f64,
}

/// Retrieved pages per query, ordered by descending score, then ascending
/// rank, then page id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Run {
    queries: BTreeMap<String, Vec<RunEntry>>,
}

impl Run {
    pub fn from_lists(lists: &[RankedList], top: usize) -> Self {
        let mut queries = BTreeMap::new();
        for list in lists {
            let entries = list
                .entries
                .iter()
                .take(top)
                .enumerate()
                .map(|(i, e)| RunEntry {
                    page_id: e.page_id.clone(),
                    rank: i as u64 + 1,
                    score: e.score,
                })
                .collect();
            queries.insert(list.query_id.clone(), entries);
        }
        let mut run = Run { queries };
        run.sort();
        run
    }

    fn sort(&mut self) {
        for entries in self.queries.values_mut() {
            entries.sort_by(|a, b| {
                b.score
                    .total_cmp(&a.score)
                    .then(a.rank.cmp(&b.rank))
                    .then_with(|| a.page_id.cmp(&b.page_id))
            });
        }
    }

    /// `query_id Q0 page_id rank score tag` per line; blank and `#` lines are skipped.
    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut queries: BTreeMap<String, Vec<RunEntry>> = BTreeMap::new();
        let mut seen: HashSet<(String, String)> = HashSet::new();
        for (i, line) in reader.lines().enumerate() {
            let n = i + 1;
            let line = line.map_err(|e| Error::io("<run>", e))?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let bad = |reason: String| Error::MalformedRunLine { line: n, reason };
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if fields.len() != 6 {
                return Err(bad(format!("expected 6 fields, found {}", fields.len())));
            }
            let rank: u64 = fields[3]
                .parse()
                .map_err(|_| bad(format!("rank `{}` is not a non-negative integer", fields[3])))?;
            let score: f64 = fields[4]
                .parse()
                .map_err(|_| bad(format!("score `{}` is not a number", fields[4])))?;
            if score.is_nan() {
                return Err(bad("score is NaN".into()));
            }
            if !seen.insert((fields[0].to_string(), fields[2].to_string())) {
                return Err(bad(format!(
                    "page `{}` listed twice for query `{}`",
                    fields[2], fields[0]
                )));
            }
            queries.entry(fields[0].to_string()).or_default().push(RunEntry {
                page_id: fields[2].to_string(),
                rank,
                score,
            });
        }
        let mut run = Run { queries };
        run.sort();
        Ok(run)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(BufReader::new(f)).map_err(|e| relocate(e, path))
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.queries.keys().map(String::as_str)
    }

    pub fn entries(&self, query_id: &str) -> Option<&[RunEntry]> {
        self.queries.get(query_id).map(Vec::as_slice)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qrels_parse() {
        let q = Qrels::parse(&b"q1 0 a 2\nq1 0 b 0\n\nq2 0 a -1\n"[..]).unwrap();
        assert_eq!(q.grade("q1", "a"), 2);
        assert_eq!(q.grade("q2", "a"), 0);
        assert_eq!(q.grade("q9", "a"), 0);
        assert_eq!(q.query_ids().collect::<Vec<_>>(), ["q1", "q2"]);
    }

    #[test]
    fn qrels_errors() {
        for (text, line) in [
            (&b"q1 0 a\n"[..], 1),
            (b"q1 0 a 1\nq1 0 a x\n", 2),
            (b"q1 0 a 1\nq1 0 a 2\n", 2),
            (b"q1 0 a 99\n", 1),
        ] {
            match Qrels::parse(text) {
                Err(Error::MalformedQrelLine { line: l, .. }) => assert_eq!(l, line),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn run_sorted_by_score() {
        let r = Run::parse(&b"q Q0 a 1 0.5 t\nq Q0 b 2 0.9 t\n# note\nq Q0 c 3 0.5 t\n"[..]).unwrap();
        let ids: Vec<_> = r.entries("q").unwrap().iter().map(|e| e.page_id.as_str()).collect();
        assert_eq!(ids, ["b", "a", "c"]);
    }

    #[test]
    fn run_errors() {
        for (text, line) in [
            (&b"q Q0 a 1 0.5\n"[..], 1),
            (b"q Q0 a x 0.5 t\n", 1),
            (b"q Q0 a 1 0.5 t\nq Q0 b 2 nope t\n", 2),
            (b"q Q0 a 1 0.5 t\nq Q0 a 2 0.4 t\n", 2),
        ] {
            match Run::parse(text) {
                Err(Error::MalformedRunLine { line: l, .. }) => assert_eq!(l, line),
                other => panic!("{other:?}"),
            }
        }
    }
}
