//! Model directory layout:
//!
//! - `model.meta`: `MATHEMB-MODEL v1`, provenance comments, configuration and vocabulary counts
//! - `symbols.vec`: input rows in word2vec text format (`V dim`, then `surface v1 .. vdim`)
//! - `context.vec`: output rows, same format
//! - `formulas.docvec`: `MATHEMB-DOCVEC v1`, then `D dim`, then `id v1 .. vdim` (PV-DM only)
//!
//! Values are written in 6-decimal fixed notation.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{EmbeddingTable, Mode, TrainingConfig};
use crate::error::{Error, Result};
use crate::vocab::Vocabulary;

pub const MODEL_HEADER: &str = "MATHEMB-MODEL v1";
pub const DOCVEC_HEADER: &str = "MATHEMB-DOCVEC v1";

const META_FILE: &str = "model.meta";
const SYMBOLS_FILE: &str = "symbols.vec";
const CONTEXT_FILE: &str = "context.vec";
const DOCVEC_FILE: &str = "formulas.docvec";

fn write_rows<'a, W: Write>(w: &mut W, rows: impl Iterator<Item = (&'a str, &'a [f64])>) -> std::io::Result<()> {
    for (key, row) in rows {
        w.write_all(key.as_bytes())?;
        for x in row {
            write!(w, " {x:.6}")?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Word2vec text format: `count dim` header and one row per key.
pub fn write_word2vec<'a, W: Write>(w: &mut W, dim: usize, rows: &[(&'a str, &'a [f64])]) -> std::io::Result<()> {
    writeln!(w, "{} {dim}", rows.len())?;
    write_rows(w, rows.iter().copied())
}

pub fn write_docvec<'a, W: Write>(w: &mut W, dim: usize, rows: &[(&'a str, &'a [f64])]) -> std::io::Result<()> {
    writeln!(w, "{DOCVEC_HEADER}")?;
    write_word2vec(w, dim, rows)
}

fn malformed(line: usize, reason: impl Into<String>) -> Error {
    Error::MalformedRecord {
        line,
        reason: reason.into(),
    }
}

/// A label and its vector.
pub type KeyedRow = (String, Vec<f64>);

fn read_rows<R: BufRead>(lines: &mut std::iter::Enumerate<std::io::Lines<R>>) -> Result<(usize, Vec<KeyedRow>)> {
    let (i, header) = lines.next().ok_or_else(|| malformed(1, "missing `count dim` line"))?;
    let header = header.map_err(|e| malformed(i + 1, e.to_string()))?;
    let mut parts = header.split_whitespace();
    let parse = |s: Option<&str>| s.and_then(|s| s.parse::<usize>().ok());
    let (Some(count), Some(dim), None) = (parse(parts.next()), parse(parts.next()), parts.next()) else {
        return Err(malformed(i + 1, format!("expected `count dim`, got `{header}`")));
    };
    let mut rows = Vec::with_capacity(count);
    for (i, line) in lines {
        let line = line.map_err(|e| malformed(i + 1, e.to_string()))?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(' ');
        let key = fields.next().unwrap_or_default().to_string();
        let values = fields
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| malformed(i + 1, e.to_string()))?;
        if values.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: values.len(),
            });
        }
        rows.push((key, values));
    }
    if rows.len() != count {
        return Err(malformed(
            0,
            format!("header announces {count} rows, found {}", rows.len()),
        ));
    }
    Ok((dim, rows))
}

pub fn read_word2vec<R: BufRead>(reader: R) -> Result<(usize, Vec<KeyedRow>)> {
    read_rows(&mut reader.lines().enumerate())
}

pub fn read_docvec<R: BufRead>(reader: R) -> Result<(usize, Vec<KeyedRow>)> {
    let mut lines = reader.lines().enumerate();
    match lines.next() {
        Some((_, Ok(h))) if h == DOCVEC_HEADER => {}
        _ => {
            return Err(Error::BadHeader {
                expected: DOCVEC_HEADER,
            })
        }
    }
    read_rows(&mut lines)
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?))
}

impl EmbeddingTable {
    pub fn save(&self, dir: &Path, comments: &[String]) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

        let meta = dir.join(META_FILE);
        let mut w = create(&meta)?;
        self.write_meta(&mut w, comments).map_err(io(&meta))?;

        let dim = self.dim();
        let surfaces = self.vocab().surfaces();
        for (file, rows) in [
            (SYMBOLS_FILE, self.input_rows().collect::<Vec<_>>()),
            (CONTEXT_FILE, self.context_rows().collect::<Vec<_>>()),
        ] {
            let path = dir.join(file);
            let keyed: Vec<(&str, &[f64])> = surfaces.iter().map(String::as_str).zip(rows).collect();
            let mut w = create(&path)?;
            write_word2vec(&mut w, dim, &keyed)
                .and_then(|_| w.flush())
                .map_err(io(&path))?;
        }
        let docvec = dir.join(DOCVEC_FILE);
        if self.mode() == Mode::Formula2vec {
            let keyed: Vec<(&str, &[f64])> = self
                .formula_ids()
                .iter()
                .map(String::as_str)
                .zip(self.formula_rows())
                .collect();
            let mut w = create(&docvec)?;
            write_docvec(&mut w, dim, &keyed)
                .and_then(|_| w.flush())
                .map_err(io(&docvec))?;
        } else if docvec.exists() {
            std::fs::remove_file(&docvec).map_err(io(&docvec))?;
        }
        Ok(())
    }

    fn write_meta<W: Write>(&self, w: &mut W, comments: &[String]) -> std::io::Result<()> {
        let c = &self.config;
        writeln!(w, "{MODEL_HEADER}")?;
        for line in comments {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "mode {}", c.mode)?;
        writeln!(w, "dim {}", c.dim)?;
        writeln!(w, "window {}", c.window)?;
        writeln!(w, "negatives {}", c.negatives)?;
        writeln!(w, "epochs {}", c.epochs)?;
        writeln!(w, "lr_start {}", c.lr_start)?;
        writeln!(w, "lr_end {}", c.lr_end)?;
        writeln!(w, "seed {}", c.seed)?;
        writeln!(w, "subsample {}", c.subsample)?;
        writeln!(w, "workers {}", c.workers)?;
        writeln!(w, "sampling_power {}", self.vocab().power())?;
        writeln!(w, "vocab_fingerprint {}", self.vocab().fingerprint())?;
        writeln!(w, "vocab {}", self.vocab().len())?;
        for (i, s) in self.vocab().surfaces().iter().enumerate() {
            writeln!(w, "{s} {}", self.vocab().count(i))?;
        }
        w.flush()
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta_path = dir.join(META_FILE);
        let (config, vocab) = read_meta(open(&meta_path)?).map_err(|e| locate(e, &meta_path))?;

        let by_surface = |file: &str| -> Result<Vec<f64>> {
            let path = dir.join(file);
            let (dim, rows) = read_word2vec(open(&path)?).map_err(|e| locate(e, &path))?;
            if dim != config.dim {
                return Err(Error::DimensionMismatch {
                    expected: config.dim,
                    actual: dim,
                });
            }
            let mut data = vec![f64::NAN; vocab.len() * dim];
            let mut seen = vec![false; vocab.len()];
            for (surface, values) in rows {
                let i = vocab
                    .index_of(&surface)
                    .ok_or_else(|| Error::UnknownSurface(surface.clone()))?;
                data[i * dim..(i + 1) * dim].copy_from_slice(&values);
                seen[i] = true;
            }
            if let Some(i) = seen.iter().position(|s| !s) {
                return Err(Error::UnknownSurface(vocab.surface(i).to_string()));
            }
            Ok(data)
        };
        let input = by_surface(SYMBOLS_FILE)?;
        let context = by_surface(CONTEXT_FILE)?;

        let (ids, formula) = if config.mode == Mode::Formula2vec {
            let path = dir.join(DOCVEC_FILE);
            let (dim, rows) = read_docvec(open(&path)?).map_err(|e| locate(e, &path))?;
            if dim != config.dim {
                return Err(Error::DimensionMismatch {
                    expected: config.dim,
                    actual: dim,
                });
            }
            rows.into_iter()
                .fold((Vec::new(), Vec::new()), |(mut ids, mut data), (id, v)| {
                    ids.push(id);
                    data.extend(v);
                    (ids, data)
                })
        } else {
            (Vec::new(), Vec::new())
        };
        EmbeddingTable::from_parts(config, vocab, input, context, ids, formula)
    }
}

fn locate(e: Error, path: &Path) -> Error {
    match e {
        Error::MalformedRecord { line, reason } => Error::MalformedRecord {
            line,
            reason: format!("{}: {reason}", path.display()),
        },
        other => other,
    }
}

fn read_meta<R: BufRead>(reader: R) -> Result<(TrainingConfig, Vocabulary)> {
    let mut lines = reader.lines().enumerate();
    match lines.next() {
        Some((_, Ok(h))) if h == MODEL_HEADER => {}
        _ => return Err(Error::BadHeader { expected: MODEL_HEADER }),
    }
    let mut config = TrainingConfig::symbol2vec();
    let mut power = crate::vocab::DEFAULT_SAMPLING_POWER;
    let mut fingerprint = None;
    let mut counts = Vec::new();
    let mut in_vocab = false;
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.map_err(|e| malformed(lineno, e.to_string()))?;
        if !in_vocab && (line.is_empty() || line.starts_with('#')) {
            continue;
        }
        let (key, value) = line
            .rsplit_once(' ')
            .ok_or_else(|| malformed(lineno, format!("expected `key value`, got `{line}`")))?;
        if in_vocab {
            let count = value
                .parse()
                .map_err(|_| malformed(lineno, format!("bad count `{value}`")))?;
            counts.push((key.to_string(), count));
            continue;
        }
        let bad = |what: &str| malformed(lineno, format!("bad {what} `{value}`"));
        match key {
            "mode" => config.mode = value.parse()?,
            "dim" => config.dim = value.parse().map_err(|_| bad(key))?,
            "window" => config.window = value.parse().map_err(|_| bad(key))?,
            "negatives" => config.negatives = value.parse().map_err(|_| bad(key))?,
            "epochs" => config.epochs = value.parse().map_err(|_| bad(key))?,
            "lr_start" => config.lr_start = value.parse().map_err(|_| bad(key))?,
            "lr_end" => config.lr_end = value.parse().map_err(|_| bad(key))?,
            "seed" => config.seed = value.parse().map_err(|_| bad(key))?,
            "subsample" => config.subsample = value.parse().map_err(|_| bad(key))?,
            "workers" => config.workers = value.parse().map_err(|_| bad(key))?,
            "sampling_power" => power = value.parse().map_err(|_| bad(key))?,
            "vocab_fingerprint" => fingerprint = Some(value.to_string()),
            "vocab" => in_vocab = true,
            other => return Err(malformed(lineno, format!("unknown key `{other}`"))),
        }
    }
    config.validate()?;
    let vocab = Vocabulary::from_counts(counts, 1, power)?;
    if let Some(fp) = fingerprint {
        if fp != vocab.fingerprint() {
            return Err(malformed(0, "vocabulary fingerprint does not match the listed counts"));
        }
    }
    Ok((config, vocab))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::FormulaStore;
    use crate::embeddings::{train_formula2vec, train_symbol2vec};
    use crate::tokenizer::Tokenizer;
    use crate::vocab::build_vocabulary;

    fn corpus() -> FormulaStore {
        let t = Tokenizer::default();
        [
            "x + y = z",
            "\\sin x + \\cos y = 1",
            "\\begin{matrix} a & b \\end{matrix}",
        ]
        .iter()
        .enumerate()
        .map(|(i, s)| t.tokenize_formula(format!("f{i}"), s).unwrap())
        .collect()
    }

    fn close(a: &EmbeddingTable, b: &EmbeddingTable) {
        assert_eq!(a.config, b.config);
        assert_eq!(a.vocab(), b.vocab());
        assert_eq!(a.formula_ids(), b.formula_ids());
        let pairs = a
            .input_rows()
            .zip(b.input_rows())
            .chain(a.context_rows().zip(b.context_rows()))
            .chain(a.formula_rows().zip(b.formula_rows()));
        for (x, y) in pairs {
            for (p, q) in x.iter().zip(y) {
                assert!((p - q).abs() <= 5e-7);
            }
        }
    }

    #[test]
    fn model_directory_round_trip() {
        let c = corpus();
        let vocab = build_vocabulary(&c, 1, 0.75).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for mode in [Mode::Formula2vec, Mode::Symbol2vec] {
            let cfg = TrainingConfig {
                dim: 6,
                epochs: 2,
                mode,
                ..TrainingConfig::symbol2vec()
            };
            let table = match mode {
                Mode::Formula2vec => train_formula2vec(&c, &vocab, &cfg).unwrap().0,
                Mode::Symbol2vec => train_symbol2vec(&c, &vocab, &cfg).unwrap().0,
            };
            table.save(dir.path(), &["test".into()]).unwrap();
            let loaded = EmbeddingTable::load(dir.path()).unwrap();
            close(&table, &loaded);
            assert_eq!(dir.path().join(DOCVEC_FILE).exists(), mode == Mode::Formula2vec);
        }
    }

    #[test]
    fn word2vec_text_layout() {
        let mut out = Vec::new();
        write_word2vec(&mut out, 2, &[("\\sin", &[0.5, -0.25][..]), ("x", &[1.0, 0.0][..])]).unwrap();
        assert_eq!(
            String::from_utf8(out.clone()).unwrap(),
            "2 2\n\\sin 0.500000 -0.250000\nx 1.000000 0.000000\n"
        );
        let (dim, rows) = read_word2vec(out.as_slice()).unwrap();
        assert_eq!(dim, 2);
        assert_eq!(rows[0].0, "\\sin");
        assert_eq!(rows[1].1, [1.0, 0.0]);
    }

    #[test]
    fn docvec_requires_header() {
        assert!(matches!(
            read_docvec("1 1\nf 0.0\n".as_bytes()),
            Err(Error::BadHeader { .. })
        ));
        let mut out = Vec::new();
        write_docvec(&mut out, 1, &[("p#0", &[0.125][..])]).unwrap();
        assert!(String::from_utf8_lossy(&out).starts_with("MATHEMB-DOCVEC v1\n1 1\n"));
        assert_eq!(read_docvec(out.as_slice()).unwrap().1[0].1, [0.125]);
    }

    #[test]
    fn row_count_mismatch_is_reported() {
        assert!(read_word2vec("3 1\na 0.0\n".as_bytes()).is_err());
        assert!(matches!(
            read_word2vec("1 2\na 0.0\n".as_bytes()),
            Err(Error::DimensionMismatch { expected: 2, actual: 1 })
        ));
    }
}
