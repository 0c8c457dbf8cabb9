//! Training vocabulary and the negative-sampling distribution.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::corpus::FormulaStore;
use crate::error::{Error, Result};

/// Exponent applied to unigram counts for the negative-sampling distribution.
pub const DEFAULT_SAMPLING_POWER: f64 = 0.75;

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    surfaces: Vec<String>,
    index: HashMap<String, usize>,
    counts: Vec<u64>,
    total: u64,
    power: f64,
    probabilities: Vec<f64>,
    cumulative: Vec<f64>,
}

/// Counts every surface in `corpus` and keeps those seen at least `min_count` times.
pub fn build_vocabulary(corpus: &FormulaStore, min_count: usize, power: f64) -> Result<Vocabulary> {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for f in corpus {
        for s in f.surfaces() {
            *counts.entry(s).or_default() += 1;
        }
    }
    Vocabulary::from_counts(counts.into_iter().map(|(s, c)| (s.to_string(), c)), min_count, power)
}

impl Vocabulary {
    /// Indices follow descending count, ties broken by surface.
    pub fn from_counts<I>(counts: I, min_count: usize, power: f64) -> Result<Self>
    where
        I: IntoIterator<Item = (String, u64)>,
    {
        if min_count == 0 {
            return Err(Error::InvalidConfig("min_count must be at least 1".into()));
        }
        if !(power.is_finite() && power >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sampling power must be finite and >= 0, got {power}"
            )));
        }
        let mut merged: BTreeMap<String, u64> = BTreeMap::new();
        for (s, c) in counts {
            *merged.entry(s).or_default() += c;
        }
        let mut kept: Vec<(String, u64)> = merged.into_iter().filter(|(_, c)| *c >= min_count as u64).collect();
        if kept.is_empty() {
            return Err(Error::EmptyVocabulary { min_count });
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        let weights: Vec<f64> = kept.iter().map(|(_, c)| (*c as f64).powf(power)).collect();
        let norm: f64 = weights.iter().sum();
        let probabilities: Vec<f64> = weights.iter().map(|w| w / norm).collect();
        let mut acc = 0.0;
        let cumulative = probabilities
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();

        let total = kept.iter().map(|(_, c)| c).sum();
        let index = kept.iter().enumerate().map(|(i, (s, _))| (s.clone(), i)).collect();
        let (surfaces, counts) = kept.into_iter().unzip();
        Ok(Self {
            surfaces,
            index,
            counts,
            total,
            power,
            probabilities,
            cumulative,
        })
    }

    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }

    pub fn index_of(&self, surface: &str) -> Option<usize> {
        self.index.get(surface).copied()
    }

    pub fn surface(&self, index: usize) -> &str {
        &self.surfaces[index]
    }

    pub fn surfaces(&self) -> &[String] {
        &self.surfaces
    }

    pub fn count(&self, index: usize) -> u64 {
        self.counts[index]
    }

    /// Token occurrences over retained surfaces.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Draws an index from the count^power distribution.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.len() - 1)
    }

    /// Short stable digest of the (surface, count) list.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (s, c) in self.surfaces.iter().zip(&self.counts) {
            h.update(s.as_bytes());
            h.update(b"\t");
            h.update(c.to_string().as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::Tokenizer;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn abc() -> Vec<(String, u64)> {
        vec![("a".into(), 5), ("b".into(), 2), ("c".into(), 1)]
    }

    #[test]
    fn min_count_prunes_and_normalizes() {
        let v = Vocabulary::from_counts(abc(), 2, 0.75).unwrap();
        assert_eq!(v.surfaces(), ["a", "b"]);
        // 5^.75 = 3.343702, 2^.75 = 1.681793
        let p = v.probabilities();
        assert!((p[0] - 0.665_348).abs() < 1e-6, "{p:?}");
        assert!((p[1] - 0.334_652).abs() < 1e-6, "{p:?}");
    }

    #[test]
    fn min_count_one_keeps_everything() {
        let v = Vocabulary::from_counts(abc(), 1, 0.75).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(v.total(), 8);
        assert!((v.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn nothing_survives() {
        assert!(matches!(
            Vocabulary::from_counts(abc(), 10, 0.75),
            Err(Error::EmptyVocabulary { min_count: 10 })
        ));
        assert!(matches!(
            Vocabulary::from_counts(abc(), 0, 0.75),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn ties_broken_lexicographically() {
        let v = Vocabulary::from_counts(vec![("z".into(), 3), ("b".into(), 3), ("m".into(), 4)], 1, 0.75).unwrap();
        assert_eq!(v.surfaces(), ["m", "b", "z"]);
        for (i, s) in v.surfaces().iter().enumerate() {
            assert_eq!(v.index_of(s), Some(i));
        }
    }

    #[test]
    fn built_from_corpus() {
        let t = Tokenizer::default();
        let store: FormulaStore = ["x + x + y", "x = 1"]
            .iter()
            .enumerate()
            .map(|(i, s)| t.tokenize_formula(i.to_string(), s).unwrap())
            .collect();
        let v = build_vocabulary(&store, 1, DEFAULT_SAMPLING_POWER).unwrap();
        assert_eq!(v.surfaces(), ["x", "+", "1", "=", "y"]);
        assert_eq!(v.count(0), 3);
    }

    #[test]
    fn sampling_frequencies_follow_table() {
        let v = Vocabulary::from_counts(abc(), 1, 0.75).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut hist = [0usize; 3];
        let n = 200_000;
        for _ in 0..n {
            hist[v.sample(&mut rng)] += 1;
        }
        for (h, p) in hist.iter().zip(v.probabilities()) {
            assert!((*h as f64 / n as f64 - p).abs() < 0.01);
        }
    }
}
