//! Optional TOML configuration and resolution against flags and defaults.
//!
//! Every tunable resolves as flag, then config file, then built-in default.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use mathemb_core::evaluation::EvalSettings;
use mathemb_core::retrieval::{DEFAULT_ALPHA, DEFAULT_MU, DEFAULT_TOP};
use mathemb_core::vocab::DEFAULT_SAMPLING_POWER;
use mathemb_core::{FilterRule, Method, Mode, TrainingConfig};

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub tables: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub training: TrainingFile,
    pub filter: FilterFile,
    pub search: SearchFile,
    pub evaluate: EvalFile,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingFile {
    pub dim: Option<usize>,
    pub window: Option<usize>,
    pub negatives: Option<usize>,
    pub epochs: Option<usize>,
    pub lr_start: Option<f64>,
    pub lr_end: Option<f64>,
    pub subsample: Option<f64>,
    pub min_count: Option<usize>,
    pub sampling_power: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterFile {
    pub min_variables: Option<usize>,
    pub min_operators: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchFile {
    pub method: Option<String>,
    pub alpha: Option<f64>,
    pub mu: Option<f64>,
    pub top: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalFile {
    pub ks: Option<Vec<usize>>,
    pub threshold: Option<u32>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("{}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("{}", path.display()))
    }
}

/// Fully resolved settings, printed by `--dump-config`.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub command: String,
    pub seed: u64,
    pub workers: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tables: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stopwords: Option<PathBuf>,
    pub training: TrainingResolved,
    pub filter: FilterResolved,
    pub search: SearchResolved,
    pub evaluate: EvalResolved,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainingResolved {
    pub mode: String,
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub subsample: f64,
    pub min_count: usize,
    pub sampling_power: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FilterResolved {
    pub min_variables: usize,
    pub min_operators: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchResolved {
    pub method: String,
    pub alpha: f64,
    /// Unset means "take it from the index file".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    pub top: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalResolved {
    pub ks: Vec<usize>,
    pub threshold: u32,
}

/// Flag values for every tunable; `None` means not given on the command line.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub tables: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub dim: Option<usize>,
    pub window: Option<usize>,
    pub negatives: Option<usize>,
    pub epochs: Option<usize>,
    pub lr_start: Option<f64>,
    pub lr_end: Option<f64>,
    pub subsample: Option<f64>,
    pub min_count: Option<usize>,
    pub sampling_power: Option<f64>,
    pub min_variables: Option<usize>,
    pub min_operators: Option<usize>,
    pub method: Option<Method>,
    pub alpha: Option<f64>,
    pub mu: Option<f64>,
    pub top: Option<usize>,
    pub ks: Option<Vec<usize>>,
    pub threshold: Option<u32>,
}

pub fn resolve(command: &str, mode: Mode, file: &FileConfig, flags: &Overrides) -> anyhow::Result<Resolved> {
    let base = match mode {
        Mode::Symbol2vec => TrainingConfig::symbol2vec(),
        Mode::Formula2vec => TrainingConfig::formula2vec(),
    };
    let t = &file.training;
    let rule = FilterRule::default();
    let eval = EvalSettings::default();
    let method = match (flags.method, &file.search.method) {
        (Some(m), _) => m,
        (None, Some(s)) => s.parse().with_context(|| "search.method in config file")?,
        (None, None) => Method::Combined,
    };
    Ok(Resolved {
        command: command.to_string(),
        seed: flags.seed.or(file.seed).unwrap_or(base.seed),
        workers: flags.workers.or(file.workers).unwrap_or(1),
        tables: flags.tables.clone().or_else(|| file.tables.clone()),
        stopwords: flags.stopwords.clone().or_else(|| file.stopwords.clone()),
        training: TrainingResolved {
            mode: mode.as_str().to_string(),
            dim: flags.dim.or(t.dim).unwrap_or(base.dim),
            window: flags.window.or(t.window).unwrap_or(base.window),
            negatives: flags.negatives.or(t.negatives).unwrap_or(base.negatives),
            epochs: flags.epochs.or(t.epochs).unwrap_or(base.epochs),
            lr_start: flags.lr_start.or(t.lr_start).unwrap_or(base.lr_start),
            lr_end: flags.lr_end.or(t.lr_end).unwrap_or(base.lr_end),
            subsample: flags.subsample.or(t.subsample).unwrap_or(base.subsample),
            min_count: flags.min_count.or(t.min_count).unwrap_or(1),
            sampling_power: flags
                .sampling_power
                .or(t.sampling_power)
                .unwrap_or(DEFAULT_SAMPLING_POWER),
        },
        filter: FilterResolved {
            min_variables: flags
                .min_variables
                .or(file.filter.min_variables)
                .unwrap_or(rule.min_distinct_variables),
            min_operators: flags
                .min_operators
                .or(file.filter.min_operators)
                .unwrap_or(rule.min_operators),
        },
        search: SearchResolved {
            method: method.as_str().to_string(),
            alpha: flags.alpha.or(file.search.alpha).unwrap_or(DEFAULT_ALPHA),
            mu: flags.mu.or(file.search.mu),
            top: flags.top.or(file.search.top).unwrap_or(DEFAULT_TOP),
        },
        evaluate: EvalResolved {
            ks: flags.ks.clone().or_else(|| file.evaluate.ks.clone()).unwrap_or(eval.ks),
            threshold: flags.threshold.or(file.evaluate.threshold).unwrap_or(eval.threshold),
        },
    })
}

impl Resolved {
    pub fn training_config(&self) -> TrainingConfig {
        let t = &self.training;
        TrainingConfig {
            dim: t.dim,
            window: t.window,
            negatives: t.negatives,
            epochs: t.epochs,
            lr_start: t.lr_start,
            lr_end: t.lr_end,
            seed: self.seed,
            mode: t.mode.parse().expect("mode names round-trip"),
            subsample: t.subsample,
            workers: self.workers,
        }
    }

    pub fn filter_rule(&self) -> FilterRule {
        FilterRule {
            min_distinct_variables: self.filter.min_variables,
            min_operators: self.filter.min_operators,
        }
    }

    pub fn method(&self) -> Method {
        self.search.method.parse().expect("method names round-trip")
    }

    pub fn eval_settings(&self) -> EvalSettings {
        EvalSettings {
            ks: self.evaluate.ks.clone(),
            threshold: self.evaluate.threshold,
        }
    }

    pub fn mu_or(&self, fallback: f64) -> f64 {
        self.search.mu.unwrap_or(fallback)
    }

    pub fn default_mu(&self) -> f64 {
        self.mu_or(DEFAULT_MU)
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file: FileConfig =
            toml::from_str("seed = 9\n[training]\ndim = 64\nepochs = 7\n[search]\nalpha = 2.0\n").unwrap();
        let flags = Overrides {
            epochs: Some(3),
            ..Overrides::default()
        };
        let r = resolve("train-formula2vec", Mode::Formula2vec, &file, &flags).unwrap();
        assert_eq!(r.seed, 9);
        assert_eq!(r.training.dim, 64);
        assert_eq!(r.training.epochs, 3);
        assert_eq!(r.training.window, 5);
        assert_eq!(r.search.alpha, 2.0);
        assert_eq!(r.search.mu, None);
        assert_eq!(r.default_mu(), 2000.0);
    }

    #[test]
    fn mode_sets_the_default_dimension() {
        let file = FileConfig::default();
        let none = Overrides::default();
        assert_eq!(resolve("x", Mode::Symbol2vec, &file, &none).unwrap().training.dim, 100);
        assert_eq!(resolve("x", Mode::Formula2vec, &file, &none).unwrap().training.dim, 300);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("[training]\ndimension = 3\n").is_err());
    }

    #[test]
    fn dump_is_valid_toml() {
        let r = resolve(
            "search",
            Mode::Formula2vec,
            &FileConfig::default(),
            &Overrides::default(),
        )
        .unwrap();
        let text = r.to_toml().unwrap();
        let back: toml::Value = toml::from_str(&text).unwrap();
        assert_eq!(back["search"]["alpha"].as_float(), Some(4.0));
        assert_eq!(back["training"]["dim"].as_integer(), Some(300));
    }
}
