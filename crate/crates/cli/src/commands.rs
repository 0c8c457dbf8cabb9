use std::fs::File;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::{info, warn};

use mathemb_core::analysis::{nearest_neighbors, pca_project};
use mathemb_core::corpus::{filter_corpus, ingest_pages, load_queries};
use mathemb_core::embeddings::EmbeddingTable;
use mathemb_core::evaluation::{evaluate_run, Qrels};
use mathemb_core::pipeline::{rank_queries, sweep, train_model, write_sweep_tsv, Provenance, SweepAxis, SweepInputs};
use mathemb_core::retrieval::write_run;
use mathemb_core::tokenizer::{join_surfaces, ClassTables};
use mathemb_core::{Collection, FormulaStore, Method, Mode, TextAnalyzer, TextIndex, Tokenizer};

use crate::config::{resolve, FileConfig, Overrides, Resolved};
use crate::{Cli, Command, EvalArgs, FilterArgs, HyperArgs, RankingArgs, UsageError};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Input paths must exist before any work starts.
fn input(path: &Path) -> Result<&Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(usage(format!("input not found: {}", path.display())))
    }
}

fn output_file(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
    }
    let f = File::create(path).with_context(|| path.display().to_string())?;
    Ok(BufWriter::new(f))
}

/// Writes to `path`, or to stdout when it is `None`.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(output_file(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

struct Ctx {
    cfg: Resolved,
    tokenizer: Tokenizer,
    analyzer: TextAnalyzer,
}

impl Ctx {
    fn provenance(&self) -> Provenance {
        Provenance::new(self.cfg.command.as_str(), self.cfg.seed)
    }

    fn load_collection(&self, path: &Path) -> Result<Collection> {
        let f = io::BufReader::new(File::open(input(path)?).with_context(|| path.display().to_string())?);
        Collection::read_from(f, &self.tokenizer).with_context(|| path.display().to_string())
    }

    fn load_model(&self, dir: &Path) -> Result<EmbeddingTable> {
        Ok(EmbeddingTable::load(input(dir)?)?)
    }

    /// The index file wins unless μ was set by flag or config.
    fn load_index(&self, path: Option<&PathBuf>, collection: &Collection) -> Result<TextIndex> {
        Ok(match path {
            Some(p) => {
                let index = TextIndex::load(input(p)?)?;
                let mu = self.cfg.mu_or(index.mu());
                index.with_mu(mu)?
            }
            None => TextIndex::build(collection, self.cfg.default_mu())?,
        })
    }
}

fn hyper_overrides(o: &mut Overrides, h: &HyperArgs) {
    o.dim = h.dim;
    o.window = h.window;
    o.negatives = h.negatives;
    o.epochs = h.epochs;
    o.lr_start = h.lr_start;
    o.lr_end = h.lr_end;
    o.subsample = h.subsample;
    o.min_count = h.min_count;
    o.sampling_power = h.sampling_power;
}

fn filter_overrides(o: &mut Overrides, f: &FilterArgs) {
    o.min_variables = f.min_variables;
    o.min_operators = f.min_operators;
}

fn ranking_overrides(o: &mut Overrides, r: &RankingArgs) {
    o.method = r.method;
    o.alpha = r.alpha;
    o.mu = r.mu;
    o.top = r.top;
}

fn eval_overrides(o: &mut Overrides, e: &EvalArgs) {
    o.ks = e.ks.clone();
    o.threshold = e.threshold;
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Tokenize => "tokenize",
        Command::Ingest { .. } => "ingest",
        Command::Filter { .. } => "filter",
        Command::TrainSymbol2vec(_) => "train-symbol2vec",
        Command::TrainFormula2vec(_) => "train-formula2vec",
        Command::Neighbors { .. } => "neighbors",
        Command::Pca { .. } => "pca",
        Command::IndexText { .. } => "index-text",
        Command::Search { .. } => "search",
        Command::Evaluate { .. } => "evaluate",
        Command::Sweep { .. } => "sweep",
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(input(p)?).map_err(|e| usage(format!("{e:#}")))?,
        None => FileConfig::default(),
    };
    let mut o = Overrides {
        seed: cli.seed,
        workers: cli.workers,
        tables: cli.tables.clone(),
        stopwords: cli.stopwords.clone(),
        ..Overrides::default()
    };
    let mut mode = Mode::Formula2vec;
    match &cli.command {
        Command::TrainSymbol2vec(t) => {
            mode = Mode::Symbol2vec;
            hyper_overrides(&mut o, &t.hyper);
        }
        Command::TrainFormula2vec(t) => hyper_overrides(&mut o, &t.hyper),
        Command::Filter { rule, .. } => filter_overrides(&mut o, rule),
        Command::IndexText { mu, .. } => o.mu = *mu,
        Command::Search { ranking, .. } => ranking_overrides(&mut o, ranking),
        Command::Evaluate { eval, .. } => eval_overrides(&mut o, eval),
        Command::Sweep {
            hyper,
            rule,
            ranking,
            eval,
            ..
        } => {
            hyper_overrides(&mut o, hyper);
            filter_overrides(&mut o, rule);
            ranking_overrides(&mut o, ranking);
            eval_overrides(&mut o, eval);
        }
        _ => {}
    }
    let cfg = resolve(command_name(&cli.command), mode, &file, &o).map_err(|e| usage(format!("{e:#}")))?;
    if cli.dump_config {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    let tokenizer = match &cfg.tables {
        Some(dir) => Tokenizer::new(ClassTables::from_dir(input(dir)?)?),
        None => Tokenizer::default(),
    };
    let analyzer = match &cfg.stopwords {
        Some(p) => TextAnalyzer::from_stopword_file(input(p)?)?,
        None => TextAnalyzer::default(),
    };
    let ctx = Ctx {
        cfg,
        tokenizer,
        analyzer,
    };

    match cli.command {
        Command::Tokenize => tokenize(&ctx),
        Command::Ingest { pages, output } => ingest(&ctx, &pages, &output),
        Command::Filter { collection, output, .. } => filter(&ctx, &collection, &output),
        Command::TrainSymbol2vec(t) | Command::TrainFormula2vec(t) => train(&ctx, &t.corpus, &t.output),
        Command::Neighbors {
            model,
            symbols,
            k,
            output,
        } => neighbors(&ctx, &model, &symbols, k, output.as_deref()),
        Command::Pca {
            model,
            l2_normalize,
            output,
        } => pca(&ctx, &model, l2_normalize, output.as_deref()),
        Command::IndexText { collection, output, .. } => index_text(&ctx, &collection, &output),
        Command::Search {
            collection,
            queries,
            index,
            model,
            tag,
            output,
            ..
        } => search(
            &ctx,
            &collection,
            &queries,
            index.as_ref(),
            model.as_deref(),
            tag,
            &output,
        ),
        Command::Evaluate { run, qrels, output, .. } => evaluate(&ctx, &run, &qrels, output.as_deref()),
        Command::Sweep {
            axis,
            values,
            collection,
            queries,
            qrels,
            corpus,
            index,
            model,
            output,
            ..
        } => run_sweep(
            &ctx,
            axis,
            &values,
            SweepPaths {
                collection: &collection,
                queries: &queries,
                qrels: &qrels,
                corpus: corpus.as_deref(),
                index: index.as_ref(),
                model: model.as_deref(),
            },
            &output,
        ),
    }
}

fn tokenize(ctx: &Ctx) -> Result<()> {
    let stdin = io::stdin().lock();
    let mut out = BufWriter::new(io::stdout().lock());
    for (i, line) in stdin.split(b'\n').enumerate() {
        let mut line = line?;
        if line.last() == Some(&b'\r') {
            line.pop();
        }
        let tokens = ctx
            .tokenizer
            .tokenize_bytes(&line)
            .with_context(|| format!("stdin line {}", i + 1))?;
        writeln!(out, "{}", join_surfaces(&tokens))?;
    }
    out.flush()?;
    Ok(())
}

fn ingest(ctx: &Ctx, pages: &Path, output: &Path) -> Result<()> {
    let (collection, stats) = ingest_pages(input(pages)?, &ctx.tokenizer, &ctx.analyzer)?;
    info!(
        "{} pages, {} formulae, {} empty formulae dropped",
        stats.pages, stats.formulae, stats.empty_formulae
    );
    let prov = ctx
        .provenance()
        .with("pages", pages.display())
        .with("page_count", stats.pages)
        .with("formula_count", stats.formulae)
        .with("empty_formulae", stats.empty_formulae);
    collection.write_to(output_file(output)?, &prov.lines())?;
    Ok(())
}

fn filter(ctx: &Ctx, collection: &Path, output: &Path) -> Result<()> {
    let c = ctx.load_collection(collection)?;
    let rule = ctx.cfg.filter_rule();
    let (kept, report) = filter_corpus(&c.formulas, &rule);
    info!("kept {} formulae, dropped {}", report.kept, report.dropped);
    let prov = ctx
        .provenance()
        .with("collection", collection.display())
        .with("min_variables", rule.min_distinct_variables)
        .with("min_operators", rule.min_operators)
        .with("kept", report.kept)
        .with("dropped", report.dropped);
    let store = Collection {
        pages: Vec::new(),
        formulas: kept,
    };
    store.write_to(output_file(output)?, &prov.lines())?;
    Ok(())
}

fn training_provenance(ctx: &Ctx, corpus: &Path) -> Provenance {
    let t = &ctx.cfg.training;
    ctx.provenance()
        .with("corpus", corpus.display())
        .with("min_count", t.min_count)
        .with("sampling_power", t.sampling_power)
}

fn train(ctx: &Ctx, corpus: &Path, output: &Path) -> Result<()> {
    let store: FormulaStore = ctx.load_collection(corpus)?.formulas;
    let config = ctx.cfg.training_config();
    let t = &ctx.cfg.training;
    let (table, report) = train_model(&store, &config, t.min_count, t.sampling_power)?;
    if report.skipped_formulae > 0 {
        warn!(
            "{} formulae had fewer than two known symbols and were not trained on",
            report.skipped_formulae
        );
    }
    for (i, l) in report.epoch_losses.iter().enumerate() {
        info!("epoch {} mean loss {l:.6}", i + 1);
    }
    let prov = training_provenance(ctx, corpus)
        .with("formulae", store.len())
        .with("vocabulary", table.vocab().len());
    table.save(output, &prov.lines())?;
    Ok(())
}

fn write_comments(w: &mut dyn Write, prov: &Provenance) -> io::Result<()> {
    for l in prov.lines() {
        writeln!(w, "# {l}")?;
    }
    Ok(())
}

fn neighbors(ctx: &Ctx, model: &Path, symbols: &[String], k: usize, output: Option<&Path>) -> Result<()> {
    let table = ctx.load_model(model)?;
    let probes: Vec<String> = if symbols.is_empty() {
        table.vocab().surfaces().to_vec()
    } else {
        symbols.to_vec()
    };
    let mut lists = Vec::with_capacity(probes.len());
    for s in &probes {
        lists.push(nearest_neighbors(&table, s, k)?);
    }
    let mut w = sink(output)?;
    write_comments(&mut w, &ctx.provenance().with("model", model.display()).with("k", k))?;
    writeln!(w, "surface\trank\tneighbor\tcosine")?;
    for list in lists {
        for (rank, (n, c)) in list.neighbors.iter().enumerate() {
            writeln!(w, "{}\t{}\t{n}\t{c:.6}", list.surface, rank + 1)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn pca(ctx: &Ctx, model: &Path, l2: bool, output: Option<&Path>) -> Result<()> {
    let table = ctx.load_model(model)?;
    let p = pca_project(&table, 2, l2)?;
    let mut w = sink(output)?;
    let prov = ctx
        .provenance()
        .with("model", model.display())
        .with("l2_normalize", l2)
        .with(
            "explained_variance",
            p.pca
                .variances
                .iter()
                .map(|v| format!("{v:.6}"))
                .collect::<Vec<_>>()
                .join(","),
        );
    write_comments(&mut w, &prov)?;
    writeln!(w, "surface\tx\ty")?;
    for (s, c) in p.surfaces.iter().zip(&p.coordinates) {
        let y = c.get(1).copied().unwrap_or(0.0);
        writeln!(w, "{s}\t{:.6}\t{y:.6}", c[0])?;
    }
    w.flush()?;
    Ok(())
}

fn index_text(ctx: &Ctx, collection: &Path, output: &Path) -> Result<()> {
    let c = ctx.load_collection(collection)?;
    let mu = ctx.cfg.default_mu();
    let index = TextIndex::build(&c, mu)?;
    let prov = ctx
        .provenance()
        .with("collection", collection.display())
        .with("pages", index.len());
    index.write_to(output_file(output)?, &prov.lines())?;
    Ok(())
}

fn search(
    ctx: &Ctx,
    collection: &Path,
    queries: &Path,
    index: Option<&PathBuf>,
    model: Option<&Path>,
    tag: Option<String>,
    output: &Path,
) -> Result<()> {
    let method = ctx.cfg.method();
    let alpha = ctx.cfg.search.alpha;
    let top = ctx.cfg.search.top;
    if method != Method::Lm && model.is_none() {
        return Err(usage(format!("--model is required for method {method}")));
    }
    let c = ctx.load_collection(collection)?;
    let qs = load_queries(input(queries)?, &ctx.tokenizer, &ctx.analyzer)?;
    let text_index = if method == Method::Formula2vec {
        None
    } else {
        Some(ctx.load_index(index, &c)?)
    };
    let table = model.map(|m| ctx.load_model(m)).transpose()?;

    let mut searcher = mathemb_core::Searcher::new(&c);
    if let Some(idx) = &text_index {
        searcher = searcher.with_text_index(idx)?;
    }
    if let Some(t) = &table {
        if method != Method::Lm {
            searcher = searcher.with_formula_model(t, ctx.cfg.workers)?;
        }
    }
    let ranked = rank_queries(&searcher, &qs, method, alpha)?;
    if let Some(v) = searcher.page_vectors() {
        if v.unrepresentable > 0 {
            warn!("{} page formulae could not be encoded", v.unrepresentable);
        }
    }
    let tag = tag.unwrap_or_else(|| method.as_str().to_string());
    let mut w = output_file(output)?;
    write_run(&mut w, &ranked.lists, &tag, top)?;
    w.flush()?;

    let mut prov = ctx
        .provenance()
        .with("collection", collection.display())
        .with("queries", queries.display())
        .with("method", method)
        .with("alpha", alpha)
        .with("top", top)
        .with("tag", &tag);
    if let Some(idx) = &text_index {
        prov = prov.with("mu", idx.mu());
        if let Some(p) = index {
            prov = prov.with("index", p.display());
        }
    }
    if let Some(m) = model {
        prov = prov.with("model", m.display());
    }
    prov = prov
        .with("ranked_queries", ranked.lists.len())
        .with("skipped_queries", ranked.skipped.join(","));
    let meta = PathBuf::from(format!("{}.meta", output.display()));
    let mut m = output_file(&meta)?;
    write_comments(&mut m, &prov)?;
    m.flush()?;
    Ok(())
}

fn evaluate(ctx: &Ctx, run: &Path, qrels: &Path, output: Option<&Path>) -> Result<()> {
    let settings = ctx.cfg.eval_settings();
    if settings.ks.is_empty() || settings.ks.contains(&0) {
        return Err(usage("--ks needs positive cutoffs"));
    }
    let report = evaluate_run(input(run)?, input(qrels)?, &settings)?;
    for q in &report.unjudged {
        warn!("query `{q}` is in the run but not in the qrels; skipped");
    }
    let prov = ctx
        .provenance()
        .with("run", run.display())
        .with("qrels", qrels.display())
        .with("threshold", settings.threshold);
    let mut w = sink(output)?;
    report.write_tsv(&mut w, &prov.lines())?;
    w.flush()?;
    Ok(())
}

struct SweepPaths<'a> {
    collection: &'a Path,
    queries: &'a Path,
    qrels: &'a Path,
    corpus: Option<&'a Path>,
    index: Option<&'a PathBuf>,
    model: Option<&'a Path>,
}

fn run_sweep(ctx: &Ctx, axis: SweepAxis, values: &[f64], paths: SweepPaths<'_>, output: &Path) -> Result<()> {
    if axis == SweepAxis::Dimension && values.iter().any(|v| *v < 1.0 || v.fract() != 0.0) {
        return Err(usage("dimension values must be positive integers"));
    }
    if axis == SweepAxis::Dimension && paths.model.is_some() {
        return Err(usage("--model only applies to an alpha sweep"));
    }
    let c = ctx.load_collection(paths.collection)?;
    let qs = load_queries(input(paths.queries)?, &ctx.tokenizer, &ctx.analyzer)?;
    let qrels = Qrels::load(input(paths.qrels)?)?;
    let corpus = match paths.corpus {
        Some(p) => ctx.load_collection(p)?.formulas,
        None => filter_corpus(&c.formulas, &ctx.cfg.filter_rule()).0,
    };
    let index = ctx.load_index(paths.index, &c)?;
    let model = paths.model.map(|m| ctx.load_model(m)).transpose()?;
    let t = &ctx.cfg.training;
    let inputs = SweepInputs {
        collection: &c,
        queries: &qs,
        qrels: &qrels,
        index: &index,
        corpus: &corpus,
        formula_config: ctx.cfg.training_config(),
        min_count: t.min_count,
        sampling_power: t.sampling_power,
        method: ctx.cfg.method(),
        alpha: ctx.cfg.search.alpha,
        top: ctx.cfg.search.top,
        eval: ctx.cfg.eval_settings(),
        model: model.as_ref(),
    };
    let rows = sweep(axis, values, &inputs)?;
    let mut prov = ctx
        .provenance()
        .with("axis", axis.as_str())
        .with("collection", paths.collection.display())
        .with("queries", paths.queries.display())
        .with("qrels", paths.qrels.display())
        .with("mu", index.mu())
        .with("top", inputs.top);
    prov = match axis {
        SweepAxis::Alpha => prov.with("method", Method::Combined),
        SweepAxis::Dimension => prov.with("method", inputs.method).with("alpha", inputs.alpha),
    };
    if let Some(m) = paths.model {
        prov = prov.with("model", m.display());
    } else {
        let f = &inputs.formula_config;
        prov = prov
            .with("dim", f.dim)
            .with("window", f.window)
            .with("negatives", f.negatives)
            .with("epochs", f.epochs)
            .with("lr_start", f.lr_start)
            .with("lr_end", f.lr_end)
            .with("min_count", t.min_count);
    }
    let mut w = output_file(output)?;
    write_sweep_tsv(&mut w, axis, &rows, &prov.lines())?;
    w.flush()?;
    Ok(())
}
