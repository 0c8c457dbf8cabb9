use rayon::prelude::*;

use crate::analysis::cosine;
use crate::corpus::Collection;
use crate::embeddings::{formula_seed, infer_vector, EmbeddingTable, InferenceSettings, Mode};
use crate::error::{Error, Result};
use crate::tokenizer::{SymbolToken, TokenizedFormula};

/// Score given to a page that has no usable formula.
pub const NO_FORMULA_FLOOR: f64 = -1.0;

/// Mean over query formulae of the mean cosine to every page formula.
pub fn formula_page_score<Q, P>(query: &[Q], page: &[P]) -> Result<f64>
where
    Q: AsRef<[f64]>,
    P: AsRef<[f64]>,
{
    if query.is_empty() {
        return Err(Error::NoQueryFormulae);
    }
    if page.is_empty() {
        return Ok(NO_FORMULA_FLOOR);
    }
    let mut ps = 0.0;
    for q in query {
        let mut sum = 0.0;
        for p in page {
            sum += cosine(q.as_ref(), p.as_ref())?;
        }
        ps += sum / page.len() as f64;
    }
    Ok(ps / query.len() as f64)
}

/// Maps formulae to vectors with a formula model: trained rows where the id is
/// known, otherwise inference seeded by the formula's content.
#[derive(Debug, Clone, Copy)]
pub struct FormulaEncoder<'a> {
    table: &'a EmbeddingTable,
    steps: usize,
}

impl<'a> FormulaEncoder<'a> {
    pub fn new(table: &'a EmbeddingTable) -> Result<Self> {
        if table.mode() != Mode::Formula2vec {
            return Err(Error::WrongMode {
                expected: Mode::Formula2vec.as_str(),
                actual: table.mode().as_str(),
            });
        }
        Ok(Self {
            table,
            steps: InferenceSettings::for_table(table).steps,
        })
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn table(&self) -> &'a EmbeddingTable {
        self.table
    }

    /// `None` when every token is out of vocabulary.
    pub fn infer(&self, tokens: &[SymbolToken]) -> Result<Option<Vec<f64>>> {
        let settings = InferenceSettings {
            steps: self.steps,
            lr: self.table.config.lr_start,
            seed: formula_seed(self.table.config.seed, tokens),
        };
        match infer_vector(tokens, self.table, &settings) {
            Ok(v) => Ok(Some(v)),
            Err(Error::UnknownTokensOnly) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn encode(&self, formula: &TokenizedFormula) -> Result<Option<Vec<f64>>> {
        match self.table.formula_vector_by_id(&formula.id) {
            Some(v) => Ok(Some(v.to_vec())),
            None => self.infer(&formula.tokens),
        }
    }

    /// Query formulae are always inferred.
    pub fn encode_query(&self, formulae: &[TokenizedFormula]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(formulae.len());
        for f in formulae {
            if let Some(v) = self.infer(&f.tokens)? {
                out.push(v);
            }
        }
        Ok(out)
    }
}

/// Usable formula vectors of every page, in collection order.
#[derive(Debug, Clone, PartialEq)]
pub struct PageVectors {
    pub pages: Vec<Vec<Vec<f64>>>,
    /// Page formulae dropped because none of their tokens is known to the model.
    pub unrepresentable: usize,
}

impl PageVectors {
    /// Each formula is encoded independently, so the result does not depend
    /// on `workers`.
    pub fn build(collection: &Collection, encoder: &FormulaEncoder<'_>, workers: usize) -> Result<Self> {
        let formulas = collection.formulas.as_slice();
        let encode_all =
            || -> Result<Vec<Option<Vec<f64>>>> { formulas.par_iter().map(|f| encoder.encode(f)).collect() };
        let encoded = if workers <= 1 {
            formulas.iter().map(|f| encoder.encode(f)).collect::<Result<Vec<_>>>()?
        } else {
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
                .install(encode_all)?
        };
        let mut pages = Vec::with_capacity(collection.pages.len());
        for page in &collection.pages {
            let rows = page
                .formula_ids
                .iter()
                .filter_map(|id| collection.formulas.position(id))
                .filter_map(|i| encoded[i].clone())
                .collect();
            pages.push(rows);
        }
        let unrepresentable = encoded.iter().filter(|v| v.is_none()).count();
        Ok(Self { pages, unrepresentable })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inner_mean() {
        // unit vectors at known cosines to e1
        let q = [vec![1.0, 0.0]];
        let p = [vec![0.4, 0.84f64.sqrt()], vec![0.8, 0.6]];
        assert!((formula_page_score(&q, &p).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn outer_mean() {
        // page vector at angle phi; query vectors at cosines 0.2 and 0.6 to it
        let phi = 1.0f64;
        let p = [vec![phi.cos(), phi.sin()]];
        let at = |c: f64| vec![(phi - c.acos()).cos(), (phi - c.acos()).sin()];
        let q = [at(0.2), at(0.6)];
        assert!((formula_page_score(&q, &p).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn empty_sides() {
        let none: [Vec<f64>; 0] = [];
        assert!(matches!(
            formula_page_score(&none, &[vec![1.0]]),
            Err(Error::NoQueryFormulae)
        ));
        assert_eq!(formula_page_score(&[vec![1.0]], &none).unwrap(), NO_FORMULA_FLOOR);
    }
}
