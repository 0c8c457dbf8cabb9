use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Collection;
use crate::error::{Error, Result};

pub const INDEX_HEADER: &str = "MATHEMB-INDEX v1";
pub const DEFAULT_MU: f64 = 2000.0;

/// Term statistics for Dirichlet-smoothed query likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct TextIndex {
    mu: f64,
    page_ids: Vec<String>,
    positions: HashMap<String, usize>,
    term_freqs: Vec<BTreeMap<String, u32>>,
    lengths: Vec<u64>,
    collection_freqs: HashMap<String, u64>,
    collection_len: u64,
}

#[derive(Serialize, Deserialize)]
struct PageRecord {
    page_id: String,
    tf: BTreeMap<String, u32>,
}

fn check_mu(mu: f64) -> Result<()> {
    if mu.is_finite() && mu > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "mu must be a finite number > 0, got {mu}"
        )))
    }
}

impl TextIndex {
    pub fn build(collection: &Collection, mu: f64) -> Result<Self> {
        Self::from_documents(
            collection
                .pages
                .iter()
                .map(|p| (p.page_id.clone(), p.text_terms.clone())),
            mu,
        )
    }

    pub fn from_documents<I>(docs: I, mu: f64) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<String>)>,
    {
        let mut tfs = Vec::new();
        for (id, terms) in docs {
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in terms {
                *tf.entry(t).or_default() += 1;
            }
            tfs.push((id, tf));
        }
        Self::from_term_freqs(tfs, mu)
    }

    fn from_term_freqs(docs: Vec<(String, BTreeMap<String, u32>)>, mu: f64) -> Result<Self> {
        check_mu(mu)?;
        let mut index = TextIndex {
            mu,
            page_ids: Vec::with_capacity(docs.len()),
            positions: HashMap::with_capacity(docs.len()),
            term_freqs: Vec::with_capacity(docs.len()),
            lengths: Vec::with_capacity(docs.len()),
            collection_freqs: HashMap::new(),
            collection_len: 0,
        };
        for (id, tf) in docs {
            if index.positions.insert(id.clone(), index.page_ids.len()).is_some() {
                return Err(Error::DuplicatePageId(id));
            }
            let mut len = 0u64;
            for (t, &c) in &tf {
                len += c as u64;
                *index.collection_freqs.entry(t.clone()).or_default() += c as u64;
            }
            index.collection_len += len;
            index.page_ids.push(id);
            index.lengths.push(len);
            index.term_freqs.push(tf);
        }
        Ok(index)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn with_mu(mut self, mu: f64) -> Result<Self> {
        check_mu(mu)?;
        self.mu = mu;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.page_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.page_ids.is_empty()
    }

    pub fn page_ids(&self) -> &[String] {
        &self.page_ids
    }

    pub fn position(&self, page_id: &str) -> Option<usize> {
        self.positions.get(page_id).copied()
    }

    pub fn page_length(&self, position: usize) -> u64 {
        self.lengths[position]
    }

    pub fn term_frequency(&self, position: usize, term: &str) -> u32 {
        self.term_freqs[position].get(term).copied().unwrap_or(0)
    }

    pub fn collection_frequency(&self, term: &str) -> u64 {
        self.collection_freqs.get(term).copied().unwrap_or(0)
    }

    pub fn collection_length(&self) -> u64 {
        self.collection_len
    }

    /// Sum of log p(w|d) over the query terms; terms unseen in the whole
    /// collection contribute nothing.
    pub fn lm_score(&self, keywords: &[String], page_id: &str) -> Result<f64> {
        let pos = self
            .position(page_id)
            .ok_or_else(|| Error::UnknownPage(page_id.to_string()))?;
        Ok(self.score_at(keywords, pos))
    }

    pub fn score_at(&self, keywords: &[String], position: usize) -> f64 {
        let dl = self.lengths[position] as f64;
        let mut score = 0.0;
        for w in keywords {
            let cf = self.collection_frequency(w);
            if cf == 0 {
                continue;
            }
            let p_coll = cf as f64 / self.collection_len as f64;
            let tf = self.term_frequency(position, w) as f64;
            score += ((tf + self.mu * p_coll) / (dl + self.mu)).ln();
        }
        score
    }

    pub fn write_to<W: Write>(&self, mut w: W, comments: &[String]) -> std::io::Result<()> {
        writeln!(w, "{INDEX_HEADER}")?;
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "mu {}", self.mu)?;
        for (id, tf) in self.page_ids.iter().zip(&self.term_freqs) {
            let rec = PageRecord {
                page_id: id.clone(),
                tf: tf.clone(),
            };
            serde_json::to_writer(&mut w, &rec)?;
            writeln!(w)?;
        }
        w.flush()
    }

    pub fn save(&self, path: &Path, comments: &[String]) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(f), comments)
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_from<R: BufRead>(reader: R) -> Result<Self> {
        let bad = |line: usize, reason: String| Error::MalformedRecord { line, reason };
        let mut lines = reader.lines().enumerate();
        match lines.next() {
            Some((_, Ok(h))) if h.trim_end() == INDEX_HEADER => {}
            Some((_, Err(e))) => return Err(Error::io("<index>", e)),
            _ => return Err(Error::BadHeader { expected: INDEX_HEADER }),
        }
        let mut mu = None;
        let mut docs = Vec::new();
        for (i, line) in lines {
            let line = line.map_err(|e| Error::io("<index>", e))?;
            let n = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(v) = line.strip_prefix("mu ") {
                mu = Some(v.trim().parse::<f64>().map_err(|e| bad(n, format!("mu: {e}")))?);
                continue;
            }
            let rec: PageRecord = serde_json::from_str(&line).map_err(|e| bad(n, e.to_string()))?;
            docs.push((rec.page_id, rec.tf));
        }
        let mu = mu.ok_or_else(|| bad(0, "missing `mu` line".into()))?;
        Self::from_term_freqs(docs, mu)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(f)).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn terms(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn hand_computed_single_page() {
        let idx = TextIndex::from_documents([("d".to_string(), terms("a b a"))], 1.0).unwrap();
        let s = idx.lm_score(&terms("a"), "d").unwrap();
        let expected = ((2.0 + 2.0 / 3.0) / 4.0f64).ln();
        assert!((s - expected).abs() < 1e-15);
    }

    #[test]
    fn statistics_are_consistent() {
        let idx = TextIndex::from_documents(
            [("x".to_string(), terms("a b a")), ("y".to_string(), terms("b c"))],
            DEFAULT_MU,
        )
        .unwrap();
        assert_eq!(idx.collection_length(), 5);
        assert_eq!(idx.collection_frequency("b"), 2);
        assert_eq!(idx.page_length(0), 3);
        assert_eq!(idx.term_frequency(1, "c"), 1);
    }

    #[test]
    fn empty_query_and_unknown_terms_score_zero() {
        let idx = TextIndex::from_documents([("d".to_string(), terms("a b"))], 10.0).unwrap();
        assert_eq!(idx.lm_score(&[], "d").unwrap(), 0.0);
        assert_eq!(idx.lm_score(&terms("zzz"), "d").unwrap(), 0.0);
        assert!(matches!(idx.lm_score(&[], "nope"), Err(Error::UnknownPage(_))));
    }

    #[test]
    fn huge_mu_flattens_scores() {
        let idx = TextIndex::from_documents(
            [("x".to_string(), terms("a a a b")), ("y".to_string(), terms("b c"))],
            1e12,
        )
        .unwrap();
        let q = terms("a c");
        let sx = idx.lm_score(&q, "x").unwrap();
        let sy = idx.lm_score(&q, "y").unwrap();
        assert!((sx - sy).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_mu_and_duplicates() {
        assert!(TextIndex::from_documents(Vec::new(), 0.0).is_err());
        assert!(TextIndex::from_documents(Vec::new(), f64::NAN).is_err());
        assert!(matches!(
            TextIndex::from_documents([("a".to_string(), vec![]), ("a".to_string(), vec![])], 1.0),
            Err(Error::DuplicatePageId(_))
        ));
    }

    #[test]
    fn round_trip() {
        let idx =
            TextIndex::from_documents([("x".to_string(), terms("a b a")), ("y".to_string(), vec![])], 123.5).unwrap();
        let mut buf = Vec::new();
        idx.write_to(&mut buf, &["seed 1".into()]).unwrap();
        let back = TextIndex::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, idx);
        let mut again = Vec::new();
        back.write_to(&mut again, &["seed 1".into()]).unwrap();
        assert_eq!(buf, again);
        assert!(matches!(
            TextIndex::read_from(&b"nope\n"[..]),
            Err(Error::BadHeader { .. })
        ));
    }
}
