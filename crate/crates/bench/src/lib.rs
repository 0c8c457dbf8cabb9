//! Inputs shared by the benchmarks.

use std::path::{Path, PathBuf};

use mathemb_core::corpus::{ingest_pages, load_queries};
use mathemb_core::pipeline::training_corpus;
use mathemb_core::{Collection, FilterRule, FormulaStore, Qrels, Query, TextAnalyzer, Tokenizer};

pub struct Inputs {
    pub collection: Collection,
    pub queries: Vec<Query>,
    pub qrels: Qrels,
    pub corpus: FormulaStore,
    /// Raw LaTeX of every fixture formula.
    pub latex: Vec<String>,
}

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

pub fn load() -> Inputs {
    let dir = fixture_dir();
    let tokenizer = Tokenizer::default();
    let analyzer = TextAnalyzer::default();
    let (collection, _) = ingest_pages(&dir.join("pages.jsonl"), &tokenizer, &analyzer).expect("fixture pages");
    let queries = load_queries(&dir.join("queries.jsonl"), &tokenizer, &analyzer).expect("fixture queries");
    let qrels = Qrels::load(&dir.join("qrels.txt")).expect("fixture qrels");
    let (corpus, _) = training_corpus(&collection, &FilterRule::default());
    let latex = collection
        .formulas
        .iter()
        .map(|f| mathemb_core::tokenizer::join_surfaces(&f.tokens))
        .collect();
    Inputs {
        collection,
        queries,
        qrels,
        corpus,
        latex,
    }
}
