//! Formula-aware retrieval toolkit: LaTeX tokenization, symbol and formula
//! embeddings, a Dirichlet-smoothed text ranker, and trec-style evaluation.

pub mod analysis;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod evaluation;
pub mod pipeline;
pub mod retrieval;
pub mod tokenizer;
pub mod vocab;

pub use analysis::{cosine, nearest_neighbors, pca_project, NeighborList, Projection};
pub use corpus::{Collection, FormulaStore, Page, Query, TextAnalyzer};
pub use embeddings::{infer_vector, EmbeddingTable, InferenceSettings, Mode, TrainingConfig};
pub use error::{Error, Result};
pub use evaluation::{evaluate, EvalSettings, MetricReport, Qrels, Run};
pub use retrieval::{combined_score, formula_page_score, Method, PageScore, RankedList, Searcher, TextIndex};
pub use tokenizer::{passes_filter, tokenize, FilterRule, SymbolToken, TokenClass, TokenizedFormula, Tokenizer};
pub use vocab::{build_vocabulary, Vocabulary};
