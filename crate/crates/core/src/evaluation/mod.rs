//! Ranked-retrieval metrics over TREC run and qrels files.

mod trec;

use std::io::Write;
use std::path::Path;

use crate::error::Result;

pub use trec::{Judgment, Qrels, Run, RunEntry, MAX_GRADE};

/// Graded DCG with gain `2^g - 1` and discount `log2(i + 1)`, normalized by the
/// ideal ordering of `judged`. Zero when no judged grade is positive.
pub fn ndcg_at_k(ranked: &[u32], judged: &[u32], k: usize) -> f64 {
    let mut ideal = judged.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg(&ideal, k);
    if idcg == 0.0 {
        return 0.0;
    }
    dcg(ranked, k) / idcg
}

fn dcg(grades: &[u32], k: usize) -> f64 {
    grades
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| (2f64.powi(g as i32) - 1.0) / ((i + 2) as f64).log2())
        .sum()
}

/// Relevant pages in the first `k`, over `k`.
pub fn precision_at_k(ranked: &[u32], k: usize, threshold: u32) -> f64 {
    if k == 0 {
        return 0.0;
    }
    ranked.iter().take(k).filter(|&&g| g >= threshold).count() as f64 / k as f64
}

/// Sum of precision at each relevant position, over `total_relevant`.
pub fn average_precision(ranked: &[u32], total_relevant: usize, threshold: u32) -> f64 {
    if total_relevant == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &g) in ranked.iter().enumerate() {
        if g >= threshold {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / total_relevant as f64
}

pub fn reciprocal_rank(ranked: &[u32], threshold: u32) -> f64 {
    ranked
        .iter()
        .position(|&g| g >= threshold)
        .map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    /// Cutoffs for NDCG and precision.
    pub ks: Vec<usize>,
    /// Minimum grade counted as relevant by P@k, MAP and MRR.
    pub threshold: u32,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            ks: vec![30, 50],
            threshold: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryMetrics {
    pub query_id: String,
    /// One value per cutoff.
    pub ndcg: Vec<f64>,
    pub precision: Vec<f64>,
    pub ap: f64,
    pub rr: f64,
}

impl QueryMetrics {
    fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.ndcg
            .iter()
            .chain(&self.precision)
            .copied()
            .chain([self.ap, self.rr])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub ks: Vec<usize>,
    pub per_query: Vec<QueryMetrics>,
    /// Arithmetic mean over `per_query`, labelled `mean`.
    pub mean: QueryMetrics,
    /// Judged queries without a single relevant page; left out of the means.
    pub no_relevant: Vec<String>,
    /// Run queries absent from the qrels; left out of the means.
    pub unjudged: Vec<String>,
    /// Queries with relevant pages but no run lines; scored as empty rankings.
    pub not_retrieved: Vec<String>,
}

/// Scores every judged query that has at least one relevant page.
pub fn evaluate(run: &Run, qrels: &Qrels, settings: &EvalSettings) -> MetricReport {
    let mut per_query = Vec::new();
    let mut no_relevant = Vec::new();
    let mut not_retrieved = Vec::new();
    for qid in qrels.query_ids() {
        let judged: Vec<u32> = qrels
            .judgments(qid)
            .map(|m| m.values().copied().collect())
            .unwrap_or_default();
        let relevant = judged.iter().filter(|&&g| g >= settings.threshold).count();
        if relevant == 0 {
            no_relevant.push(qid.to_string());
            continue;
        }
        let ranked: Vec<u32> = match run.entries(qid) {
            Some(entries) => entries.iter().map(|e| qrels.grade(qid, &e.page_id)).collect(),
            None => {
                not_retrieved.push(qid.to_string());
                Vec::new()
            }
        };
        per_query.push(QueryMetrics {
            query_id: qid.to_string(),
            ndcg: settings.ks.iter().map(|&k| ndcg_at_k(&ranked, &judged, k)).collect(),
            precision: settings
                .ks
                .iter()
                .map(|&k| precision_at_k(&ranked, k, settings.threshold))
                .collect(),
            ap: average_precision(&ranked, relevant, settings.threshold),
            rr: reciprocal_rank(&ranked, settings.threshold),
        });
    }
    let unjudged = run
        .query_ids()
        .filter(|q| qrels.judgments(q).is_none())
        .map(String::from)
        .collect::<Vec<_>>();
    for q in &unjudged {
        log::warn!("query `{q}` has no judgments; skipped");
    }
    let mean = mean_of(&per_query, settings.ks.len());
    MetricReport {
        ks: settings.ks.clone(),
        per_query,
        mean,
        no_relevant,
        unjudged,
        not_retrieved,
    }
}

fn mean_of(rows: &[QueryMetrics], nk: usize) -> QueryMetrics {
    let n = rows.len().max(1) as f64;
    let col = |f: &dyn Fn(&QueryMetrics) -> f64| rows.iter().map(f).sum::<f64>() / n;
    QueryMetrics {
        query_id: "mean".into(),
        ndcg: (0..nk).map(|i| col(&|r| r.ndcg[i])).collect(),
        precision: (0..nk).map(|i| col(&|r| r.precision[i])).collect(),
        ap: col(&|r| r.ap),
        rr: col(&|r| r.rr),
    }
}

pub fn evaluate_run(run: &Path, qrels: &Path, settings: &EvalSettings) -> Result<MetricReport> {
    let run = Run::load(run)?;
    let qrels = Qrels::load(qrels)?;
    Ok(evaluate(&run, &qrels, settings))
}

/// `NDCG@k...`, `P@k...`, `MAP`, `MRR`.
pub fn metric_columns(ks: &[usize]) -> Vec<String> {
    ks.iter()
        .map(|k| format!("NDCG@{k}"))
        .chain(ks.iter().map(|k| format!("P@{k}")))
        .chain(["MAP".to_string(), "MRR".to_string()])
        .collect()
}

pub(crate) fn format_values(m: &QueryMetrics) -> String {
    m.values().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join("\t")
}

impl MetricReport {
    pub fn write_tsv<W: Write>(&self, mut w: W, comments: &[String]) -> std::io::Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(
            w,
            "# queries {} excluded_no_relevant {} unjudged {} not_retrieved {}",
            self.per_query.len(),
            self.no_relevant.len(),
            self.unjudged.len(),
            self.not_retrieved.len()
        )?;
        writeln!(w, "query\t{}", metric_columns(&self.ks).join("\t"))?;
        for m in self.per_query.iter().chain([&self.mean]) {
            writeln!(w, "{}\t{}", m.query_id, format_values(m))?;
        }
        w.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ndcg_hand_case() {
        let v = ndcg_at_k(&[2, 0, 1], &[2, 0, 1], 3);
        let idcg = 3.0 + 1.0 / 3f64.log2();
        assert!((v - 3.5 / idcg).abs() < 1e-12);
        assert!((v - 0.9639).abs() < 1e-4);
        assert_eq!(ndcg_at_k(&[1, 2], &[2, 1], 0), 0.0);
        assert_eq!(ndcg_at_k(&[0, 0], &[0], 5), 0.0);
        assert_eq!(ndcg_at_k(&[3, 1, 0], &[1, 3], 10), 1.0);
    }

    #[test]
    fn ap_rr_precision() {
        assert!((average_precision(&[1, 0, 1, 0], 2, 1) - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(reciprocal_rank(&[0, 0, 1], 1), 1.0 / 3.0);
        assert_eq!(reciprocal_rank(&[0, 0], 1), 0.0);
        assert_eq!(precision_at_k(&[1; 5], 5, 1), 1.0);
        assert_eq!(precision_at_k(&[1], 30, 1), 1.0 / 30.0);
        // threshold binarizes
        assert_eq!(precision_at_k(&[1, 2], 2, 2), 0.5);
    }

    #[test]
    fn single_relevant_at_top() {
        let run = Run::parse(&b"q Q0 a 1 1.0 t\n"[..]).unwrap();
        let qrels = Qrels::parse(&b"q 0 a 1\n"[..]).unwrap();
        let r = evaluate(&run, &qrels, &EvalSettings::default());
        let m = &r.per_query[0];
        assert_eq!(m.ndcg, vec![1.0, 1.0]);
        assert_eq!(m.precision, vec![1.0 / 30.0, 1.0 / 50.0]);
        assert_eq!((m.ap, m.rr), (1.0, 1.0));
        assert_eq!(
            r.mean,
            QueryMetrics {
                query_id: "mean".into(),
                ..m.clone()
            }
        );
    }

    #[test]
    fn query_bookkeeping() {
        let run = Run::parse(&b"q1 Q0 a 1 1.0 t\nq2 Q0 a 1 1.0 t\nzz Q0 a 1 1.0 t\n"[..]).unwrap();
        let qrels = Qrels::parse(&b"q1 0 a 1\nq2 0 a 0\nq3 0 b 2\n"[..]).unwrap();
        let r = evaluate(&run, &qrels, &EvalSettings::default());
        assert_eq!(r.no_relevant, ["q2"]);
        assert_eq!(r.unjudged, ["zz"]);
        assert_eq!(r.not_retrieved, ["q3"]);
        assert_eq!(r.per_query.len(), 2);
        assert_eq!(r.mean.ap, 0.5);
    }

    #[test]
    fn report_layout() {
        let run = Run::parse(&b"q Q0 a 1 1.0 t\n"[..]).unwrap();
        let qrels = Qrels::parse(&b"q 0 a 1\n"[..]).unwrap();
        let r = evaluate(&run, &qrels, &EvalSettings::default());
        let mut buf = Vec::new();
        r.write_tsv(&mut buf, &["seed 1".into()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "# seed 1");
        assert_eq!(lines[2], "query\tNDCG@30\tNDCG@50\tP@30\tP@50\tMAP\tMRR");
        assert_eq!(lines[3], "q\t1.0000\t1.0000\t0.0333\t0.0200\t1.0000\t1.0000");
        assert!(lines[4].starts_with("mean\t"));
    }
}
