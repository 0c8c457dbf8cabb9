use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use mathemb_bench::load;
use mathemb_core::analysis::nearest_neighbors;
use mathemb_core::pipeline::{rank_queries, train_model};
use mathemb_core::retrieval::FormulaEncoder;
use mathemb_core::{
    evaluate, formula_page_score, tokenize, EvalSettings, Method, Run, Searcher, TextIndex, TrainingConfig,
};

fn small(mode: TrainingConfig) -> TrainingConfig {
    TrainingConfig {
        dim: 50,
        epochs: 5,
        ..mode
    }
}

fn tokenizer(c: &mut Criterion) {
    let inputs = load();
    c.bench_function("tokenize fixture formulae", |b| {
        b.iter(|| {
            for s in &inputs.latex {
                black_box(tokenize(s).unwrap());
            }
        })
    });
}

fn training(c: &mut Criterion) {
    let inputs = load();
    let mut g = c.benchmark_group("train 5 epochs dim 50");
    g.sample_size(10);
    for (name, cfg) in [
        ("symbol2vec", small(TrainingConfig::symbol2vec())),
        ("formula2vec", small(TrainingConfig::formula2vec())),
    ] {
        g.bench_function(name, |b| b.iter(|| train_model(&inputs.corpus, &cfg, 1, 0.75).unwrap()));
    }
    g.finish();
}

fn retrieval(c: &mut Criterion) {
    let inputs = load();
    let (table, _) = train_model(&inputs.corpus, &small(TrainingConfig::formula2vec()), 1, 0.75).unwrap();
    let index = TextIndex::build(&inputs.collection, 2000.0).unwrap();

    let encoder = FormulaEncoder::new(&table).unwrap();
    let f = &inputs.corpus.as_slice()[0];
    c.bench_function("infer one formula vector", |b| {
        b.iter(|| encoder.infer(black_box(&f.tokens)).unwrap())
    });

    let q: Vec<Vec<f64>> = (0..3).map(|i| table.formula_vector(i).to_vec()).collect();
    let p: Vec<Vec<f64>> = (3..9).map(|i| table.formula_vector(i).to_vec()).collect();
    c.bench_function("formula page score 3x6", |b| {
        b.iter(|| formula_page_score(black_box(&q), black_box(&p)).unwrap())
    });

    let searcher = Searcher::new(&inputs.collection)
        .with_text_index(&index)
        .unwrap()
        .with_formula_model(&table, 1)
        .unwrap();
    for m in Method::ALL {
        c.bench_function(&format!("rank all queries {m}"), |b| {
            b.iter(|| rank_queries(&searcher, &inputs.queries, m, 4.0).unwrap())
        });
    }

    let run = Run::from_lists(
        &rank_queries(&searcher, &inputs.queries, Method::Combined, 4.0)
            .unwrap()
            .lists,
        1000,
    );
    c.bench_function("evaluate run", |b| {
        b.iter(|| evaluate(&run, &inputs.qrels, &EvalSettings::default()))
    });

    c.bench_function("page vectors from model", |b| {
        b.iter_batched(
            || Searcher::new(&inputs.collection),
            |s| s.with_formula_model(&table, 1).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn analysis(c: &mut Criterion) {
    let inputs = load();
    let (table, _) = train_model(&inputs.corpus, &small(TrainingConfig::symbol2vec()), 1, 0.75).unwrap();
    c.bench_function("nearest neighbors k=10", |b| {
        b.iter(|| nearest_neighbors(&table, black_box("x"), 10).unwrap())
    });
    c.bench_function("pca 2 components", |b| {
        b.iter(|| mathemb_core::pca_project(&table, 2, false).unwrap())
    });
}

criterion_group!(benches, tokenizer, training, retrieval, analysis);
criterion_main!(benches);
