//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criterion 11 needs the published labeled corpus; point `MISINFO_DATASET`
//! at its JSONL file to run it. It never fails the run.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use misinfo_core::arabic_text::{self, NormalizationRules, PreprocessConfig};
use misinfo_core::classifiers::gbt::{train_gbt, GbtParams};
use misinfo_core::classifiers::svm::{Kernel, SvmParams};
use misinfo_core::classifiers::tree::{best_split, Entropy, Node, SecondOrder, Stats};
use misinfo_core::classifiers::{train, FeatureMatrix, ModelKind, ModelParams, ModelSpec};
use misinfo_core::corpus::{kfold_indices, load_dataset, CorpusFormat};
use misinfo_core::embeddings::{cosine, train as train_embeddings, tweet_vector, EmbedMode, EmbedTrainConfig};
use misinfo_core::eval::{auc_pair_oracle, compute_metrics, expand_grid, f1_score, grid_search, roc_auc, ParamGrid};
use misinfo_core::features::{fit_vocabulary, transform_corpus, SparseVector, TfidfConfig};
use misinfo_core::neural::{build_cnn, gradient_check, train_cnn, CnnConfig, CnnLoss, CnnVocab, EmbedInit};
use misinfo_core::{ClassWeights, TokenSequence};
use rand::seq::SliceRandom;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn split_80_20(labels: &[u8], seed: u64) -> (Vec<usize>, Vec<usize>) {
    kfold_indices(labels, 5, seed, true).unwrap().swap_remove(0)
}

fn pick<T: Clone>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i].clone()).collect()
}

// 1 -------------------------------------------------------------------------

fn metric_oracles() -> Outcome {
    let t = Instant::now();
    let mut r = common::rng(1);
    let (mut worst_auc, mut worst_prf) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let n = r.gen_range(2..=500);
        let mut labels: Vec<u8> = (0..n).map(|_| u8::from(r.gen_bool(0.3))).collect();
        labels[0] = 1;
        labels[1] = 0;
        let levels = r.gen_range(2..=20);
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                if r.gen_bool(0.5) {
                    r.gen_range(0..levels) as f64 / levels as f64
                } else {
                    r.gen_range(-3.0..3.0)
                }
            })
            .collect();
        let auc = roc_auc(&labels, &scores).unwrap().1;
        worst_auc = worst_auc.max((auc - auc_pair_oracle(&labels, &scores).unwrap()).abs());

        let thr = r.gen_range(-1.0..1.0);
        let m = compute_metrics(&labels, &scores, thr).unwrap();
        let (mut tp, mut fp, mut fneg) = (0.0, 0.0, 0.0);
        for (&y, &s) in labels.iter().zip(&scores) {
            match (y, s >= thr) {
                (1, true) => tp += 1.0,
                (0, true) => fp += 1.0,
                (1, false) => fneg += 1.0,
                _ => {}
            }
        }
        let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let rc = tp / (tp + fneg);
        let f = if p + rc > 0.0 { 2.0 * p * rc / (p + rc) } else { 0.0 };
        worst_prf = worst_prf.max((m.precision - p).abs()).max((m.recall - rc).abs()).max((m.f1 - f).abs());
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst_auc <= 1e-12 && worst_prf <= 1e-12 && secs < 10.0,
        format!("1000 instances; max |auc - pairs| {worst_auc:.1e}, max P/R/F1 gap {worst_prf:.1e}, {secs:.1}s"),
    )
}

// 2 -------------------------------------------------------------------------

fn reported_f1_rows() -> Outcome {
    // (row, precision, recall, reported F1, decimals printed for P and R)
    let rows: [(&str, f64, f64, f64, i32); 10] = [
        ("RF/word2vec", 0.47, 0.56, 0.51, 2),
        ("RF/FastText", 0.50, 0.53, 0.52, 2),
        ("XGB/word2vec", 0.67, 0.25, 0.37, 2),
        ("XGB/FastText", 0.72, 0.27, 0.39, 2),
        ("NB/word2vec", 0.35, 0.741, 0.47, 3),
        ("NB/FastText", 0.33, 0.69, 0.45, 2),
        ("SGD/word2vec", 0.34, 0.71, 0.46, 2),
        ("SGD/FastText", 0.34, 0.74, 0.47, 2),
        ("SVC/word2vec", 0.38, 0.81, 0.52, 2),
        ("SVC/FastText", 0.40, 0.80, 0.53, 2),
    ];
    let mut point_miss = Vec::new();
    let mut interval_miss = Vec::new();
    for (name, p, r, f1, dec) in rows {
        let computed = f1_score(p, r);
        if ((computed * 100.0).round() / 100.0 - f1).abs() > 1e-9 {
            point_miss.push(format!("{name} {computed:.4} vs {f1}"));
        }
        // the printed inputs are themselves rounded: search their cells
        let (hp, hr) = (0.5 * 10f64.powi(-2), 0.5 * 10f64.powi(-dec));
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..=50 {
            for j in 0..=50 {
                let pp = p - hp + 2.0 * hp * i as f64 / 50.0;
                let rr = r - hr + 2.0 * hr * j as f64 / 50.0;
                let v = f1_score(pp, rr);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if hi < f1 - 0.005 || lo > f1 + 0.005 {
            interval_miss.push(name);
        }
    }
    let detail = format!(
        "exact 2-decimal recomputation matches {}/10 rows{}; within the rounding of the printed P and R: {}",
        10 - point_miss.len(),
        if point_miss.is_empty() { String::new() } else { format!(" (misses: {})", point_miss.join(", ")) },
        if interval_miss.is_empty() { "all 10 consistent".to_string() } else { format!("inconsistent {interval_miss:?}") }
    );
    outcome(point_miss.is_empty(), detail)
}

// 3 -------------------------------------------------------------------------

fn tfidf_oracle() -> Outcome {
    let mut r = common::rng(3);
    let words = common::word_list(&mut r, 30);
    let docs: Vec<TokenSequence> = (0..20)
        .map(|_| {
            let mut t: Vec<String> = (0..r.gen_range(3..15)).map(|_| words[r.gen_range(1..words.len())].clone()).collect();
            t.push(words[0].clone());
            common::seq(t)
        })
        .collect();
    let cfg = TfidfConfig {
        max_features: 1000,
        ..Default::default()
    };
    let vocab = fit_vocabulary(&docs, &cfg).unwrap();
    let sparse = transform_corpus(&docs, &vocab);

    let terms: BTreeSet<&String> = docs.iter().flat_map(|d| d.tokens.iter()).collect();
    let terms: Vec<&String> = terms.into_iter().collect();
    let n = docs.len() as f64;
    let mut worst = 0.0f64;
    for (d, row) in docs.iter().zip(&sparse) {
        for (c, term) in terms.iter().enumerate() {
            let tf = d.tokens.iter().filter(|t| t == term).count() as f64;
            let df = docs.iter().filter(|x| x.tokens.contains(term)).count() as f64;
            worst = worst.max((tf * (n / df).ln() - row.get(c)).abs());
        }
    }
    let col = vocab.column(&words[0]).unwrap();
    let ubiquitous_zero = sparse.iter().all(|row| row.get(col) == 0.0);
    outcome(
        worst <= 1e-12 && ubiquitous_zero && vocab.len() == terms.len(),
        format!("20 docs, {} terms; max |sparse - dense| {worst:.1e}; term in every doc weighs 0: {ubiquitous_zero}", terms.len()),
    )
}

// 4 -------------------------------------------------------------------------

fn preprocessing_fixtures() -> Outcome {
    let rules = NormalizationRules::default();
    let cfg = PreprocessConfig::default();
    let mut fails = Vec::new();
    let norm = |s: &str| arabic_text::normalize(s, &rules);
    for (input, want) in [("عاااااجل", "عاجل"), ("مدرسة", "مدرسه"), ("مستشفى", "مستشفي"), ("أحمد", "احمد"), ("إسلام", "اسلام"), ("آمن", "امن")] {
        if norm(input) != want {
            fails.push(format!("{input} -> {}", norm(input)));
        }
    }

    let mut r = common::rng(4);
    let extras = ['#', '@', '%', '&', 'ً', 'ُ', 'ِ', 'ّ', 'ْ', 'ـ', 'ة', 'ى', 'أ', 'إ', 'آ', ' ', ' ', '!', '.', 'a', '7'];
    let forbidden = ['#', '@', '%', '&', 'ً', 'ٌ', 'ٍ', 'َ', 'ُ', 'ِ', 'ّ', 'ْ', 'ـ', 'ة', 'ى', 'أ', 'إ', 'آ'];
    let mut not_idempotent = 0;
    let mut leaked = 0;
    for _ in 0..10_000 {
        let len = r.gen_range(0..40);
        let s: String = (0..len)
            .map(|_| {
                if r.gen_bool(0.6) {
                    common::LETTERS[r.gen_range(0..common::LETTERS.len())]
                } else {
                    extras[r.gen_range(0..extras.len())]
                }
            })
            .collect();
        let once = norm(&s);
        if norm(&once) != once {
            not_idempotent += 1;
        }
        let out = arabic_text::preprocess(&s, &cfg);
        if out.join().chars().any(|c| forbidden.contains(&c)) {
            leaked += 1;
        }
        // a URL, even one spelled with Arabic words, adds no tokens
        let word: String = (0..5).map(|_| common::LETTERS[r.gen_range(0..common::LETTERS.len())]).collect();
        let url = if r.gen_bool(0.5) { format!("https://t.co/{word}?x=1") } else { format!("www.{word}.com/a") };
        if arabic_text::preprocess(&format!("{s} {url}"), &cfg) != out {
            leaked += 1;
        }
    }
    outcome(
        fails.is_empty() && not_idempotent == 0 && leaked == 0,
        format!(
            "worked examples failing: {fails:?}; 10000 random strings: {not_idempotent} non-idempotent, {leaked} outputs with specials/URLs/diacritics"
        ),
    )
}

// 5 -------------------------------------------------------------------------

fn embedding_sanity() -> Outcome {
    let t = Instant::now();
    let (docs, pairs, background) = common::planted_corpus(100_000, 20, 5);
    let mut r = common::rng(55);
    let mut lines = Vec::new();
    let mut pass = true;
    for mode in [EmbedMode::Cbow, EmbedMode::Fasttext] {
        let cfg = EmbedTrainConfig {
            mode,
            seed: 5,
            ..Default::default()
        };
        let trained = train_embeddings(&docs, &cfg).unwrap();
        let table = &trained.table;
        let v = |w: &str| table.word_vector(w).unwrap();
        let planted: f64 = pairs.iter().map(|(a, b)| cosine(&v(a), &v(b))).sum::<f64>() / pairs.len() as f64;
        let random: f64 = (0..500)
            .map(|_| {
                let ab = rand::seq::index::sample(&mut r, background.len(), 2);
                cosine(&v(&background[ab.index(0)]), &v(&background[ab.index(1)]))
            })
            .sum::<f64>()
            / 500.0;
        let l = &trained.epoch_losses;
        let ok = planted > random + 0.2 && l[4] < l[0];
        pass &= ok;
        lines.push(format!(
            "{mode:?}: planted cos {planted:.3} vs random {random:.3}, loss {:.4} -> {:.4}",
            l[0], l[4]
        ));
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(pass && secs < 120.0, format!("{}; {secs:.1}s", lines.join("; ")))
}

// 6 -------------------------------------------------------------------------

fn tfidf_matrix(docs: &[TokenSequence], labels: &[u8], tr: &[usize], te: &[usize]) -> (FeatureMatrix, FeatureMatrix) {
    let cfg = TfidfConfig {
        l2_normalize: true,
        ..Default::default()
    };
    let train_docs = pick(docs, tr);
    let vocab = fit_vocabulary(&train_docs, &cfg).unwrap();
    let d = vocab.len();
    let xtr = FeatureMatrix::sparse(transform_corpus(&train_docs, &vocab), pick(labels, tr), d).unwrap();
    let xte = FeatureMatrix::sparse(transform_corpus(&pick(docs, te), &vocab), pick(labels, te), d).unwrap();
    (xtr, xte)
}

fn separability_suite() -> Outcome {
    let t = Instant::now();
    let (docs, labels) = common::separable_corpus(1000, 0.15, 6);
    let mut shuffled = labels.clone();
    shuffled.shuffle(&mut common::rng(66));
    let mut parts = Vec::new();
    let mut pass = true;
    for (tag, labs) in [("true", &labels), ("shuffled", &shuffled)] {
        let (tr, te) = split_80_20(labs, 6);
        let (xtr, xte) = tfidf_matrix(&docs, labs, &tr, &te);
        let mut row = Vec::new();
        for kind in ModelKind::ALL {
            let m = train(&xtr, &ModelSpec::reference(kind).with_seed(6)).unwrap();
            let auc = roc_auc(xte.labels(), &m.predict_scores(&xte).unwrap()).unwrap().1;
            pass &= if tag == "true" { auc >= 0.95 } else { (0.40..=0.60).contains(&auc) };
            row.push(format!("{kind} {auc:.3}"));
        }
        parts.push(format!("{tag} labels [{}]", row.join(", ")));
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(pass && secs < 180.0, format!("held-out AUC, {}; {secs:.1}s", parts.join("; ")))
}

// 7 -------------------------------------------------------------------------

fn entropy_of(s: Stats) -> f64 {
    let w = s[0] + s[1];
    [s[0], s[1]]
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| -(c / w) * (c / w).log2())
        .sum()
}

/// Exhaustive search: every feature, every cut between consecutive distinct
/// values, statistics summed from scratch for each side.
fn oracle_split(x: &FeatureMatrix, stats: &[Stats], rows: &[usize], gain: impl Fn(Stats, Stats, Stats) -> Option<f64>) -> Option<(usize, f64, f64)> {
    let mut best: Option<(usize, f64, f64)> = None;
    let sum = |rs: &mut dyn Iterator<Item = &usize>| rs.fold([0.0, 0.0], |a, &r| [a[0] + stats[r][0], a[1] + stats[r][1]]);
    let total = sum(&mut rows.iter());
    for f in 0..x.dim() {
        let mut vals: Vec<f64> = rows.iter().map(|&r| x.row(r).get(f)).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let thr = w[0] + (w[1] - w[0]) / 2.0;
            let left = sum(&mut rows.iter().filter(|&&r| x.row(r).get(f) < thr));
            let right = sum(&mut rows.iter().filter(|&&r| x.row(r).get(f) >= thr));
            if let Some(g) = gain(total, left, right) {
                if best.map_or(true, |b| g > b.2 + 1e-12) {
                    best = Some((f, thr, g));
                }
            }
        }
    }
    best
}

fn random_node(r: &mut impl Rng, sparse: bool) -> FeatureMatrix {
    let n = r.gen_range(2..=10);
    let d = r.gen_range(1..=4);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..d)
                .map(|_| if r.gen_bool(0.3) { 0.0 } else { f64::from(r.gen_range(-3i32..=3)) * 0.5 })
                .collect()
        })
        .collect();
    let labels: Vec<u8> = (0..n).map(|_| u8::from(r.gen_bool(0.5))).collect();
    if sparse {
        let sv = rows
            .iter()
            .map(|row| SparseVector::from_pairs(d, row.iter().enumerate().map(|(j, &v)| (j, v)).collect()))
            .collect();
        FeatureMatrix::sparse(sv, labels, d).unwrap()
    } else {
        FeatureMatrix::dense(rows, labels).unwrap()
    }
}

fn tree_split_oracles() -> Outcome {
    let mut r = common::rng(7);
    let (mut rf_miss, mut gbt_miss, mut cases) = (0, 0, 0);
    for case in 0..500 {
        let x = random_node(&mut r, case % 2 == 1);
        let rows: Vec<usize> = (0..x.len()).collect();
        let features: Vec<usize> = (0..x.dim()).collect();

        let w = ClassWeights {
            w0: r.gen_range(0.5..2.0),
            w1: r.gen_range(0.5..4.0),
        };
        let rf_stats: Vec<Stats> = x
            .labels()
            .iter()
            .map(|&l| {
                let c = f64::from(r.gen_range(1u8..=3)) * w.of(l);
                if l == 1 {
                    [0.0, c]
                } else {
                    [c, 0.0]
                }
            })
            .collect();
        let got = best_split(&x, &rf_stats, &rows, &features, &Entropy).map(|s| (s.feature, s.threshold, s.gain));
        let want = oracle_split(&x, &rf_stats, &rows, |t, l, rt| {
            let (wt, wl, wr) = (t[0] + t[1], l[0] + l[1], rt[0] + rt[1]);
            Some(entropy_of(t) - wl / wt * entropy_of(l) - wr / wt * entropy_of(rt))
        });
        if !same_split(got, want) {
            rf_miss += 1;
        }

        let crit = SecondOrder {
            lambda: 1.0,
            gamma: r.gen_range(0.0..0.5),
            min_child_weight: r.gen_range(0.0..0.6),
            learning_rate: 0.3,
        };
        let g_stats: Vec<Stats> = (0..x.len()).map(|_| [r.gen_range(-1.0..1.0), r.gen_range(0.01..0.25)]).collect();
        let got = best_split(&x, &g_stats, &rows, &features, &crit).map(|s| (s.feature, s.threshold, s.gain));
        let want = oracle_split(&x, &g_stats, &rows, |t, l, rt| {
            if l[1] < crit.min_child_weight || rt[1] < crit.min_child_weight {
                return None;
            }
            let sc = |s: Stats| s[0] * s[0] / (s[1] + crit.lambda);
            let g = 0.5 * (sc(l) + sc(rt) - sc(t)) - crit.gamma;
            (g > 0.0).then_some(g)
        });
        if !same_split(got, want) {
            gbt_miss += 1;
        }
        cases += 1;
    }

    // hand fixture: 4 negatives left of 0, 4 positives right, one round, depth 1
    let x = FeatureMatrix::dense(
        [-2.0, -1.5, -1.0, -0.5, 0.5, 1.0, 1.5, 2.0].iter().map(|&v| vec![v]).collect(),
        vec![0, 0, 0, 0, 1, 1, 1, 1],
    )
    .unwrap();
    let p = GbtParams {
        n_rounds: 1,
        max_depth: 1,
        gamma: 1.0,
        colsample_bytree: 1.0,
        ..Default::default()
    };
    let b = train_gbt(&x, &p, 0).unwrap();
    // p = 0.5 everywhere: left G = 4 * 0.5 = 2, H = 4 * 0.25 = 1
    let hand_left = -2.0 / (1.0 + 1.0) * 0.3;
    let hand_right = 2.0 / (1.0 + 1.0) * 0.3;
    let stump_ok = match &b.trees[0].nodes[..] {
        [Node::Split { feature: 0, threshold, left, right }, ..] => {
            let leaf = |i: usize| match b.trees[0].nodes[i] {
                Node::Leaf { value } => value,
                _ => f64::NAN,
            };
            *threshold == 0.0 && (leaf(*left) - hand_left).abs() < 1e-15 && (leaf(*right) - hand_right).abs() < 1e-15
        }
        _ => false,
    };
    outcome(
        rf_miss == 0 && gbt_miss == 0 && stump_ok,
        format!("{cases} random nodes (2-10 rows): entropy mismatches {rf_miss}, second-order mismatches {gbt_miss}; stump at 0 with leaves -0.3/+0.3 by hand: {stump_ok}"),
    )
}

fn same_split(a: Option<(usize, f64, f64)>, b: Option<(usize, f64, f64)>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(a), Some(b)) => a.0 == b.0 && a.1 == b.1 && (a.2 - b.2).abs() < 1e-9,
        _ => false,
    }
}

// 8 -------------------------------------------------------------------------

fn cnn_gradient_check() -> Outcome {
    let t = Instant::now();
    let mut worst = Vec::new();
    for loss in [CnnLoss::CrossEntropy, CnnLoss::AucSurrogate] {
        let cfg = CnnConfig {
            embed_dim: 4,
            kernel_sizes: vec![2, 3],
            filters_per_kernel: 2,
            dropout: 0.0,
            max_sequence_length: 7,
            loss,
            seed: 8,
            ..Default::default()
        };
        let vocab = CnnVocab::new((0..18).map(|i| format!("w{i}")).collect());
        let mut r = common::rng(8);
        let model = build_cnn(&cfg, vocab, None).unwrap();
        let seqs: Vec<Vec<u32>> = (0..6)
            .map(|_| {
                let len = r.gen_range(3..=7);
                let mut s: Vec<u32> = (0..len).map(|_| r.gen_range(1..20)).collect();
                s.resize(7, 0);
                s
            })
            .collect();
        let labels = [1u8, 0, 1, 0, 0, 1];
        let batch: Vec<(&[u32], u8)> = seqs.iter().zip(labels).map(|(s, l)| (s.as_slice(), l)).collect();
        worst.push((loss, gradient_check(&model, &batch, ClassWeights::UNIFORM, 1e-5)));
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst.iter().all(|w| w.1 < 1e-4) && secs < 30.0,
        format!(
            "max relative error {}; {secs:.2}s",
            worst.iter().map(|(l, e)| format!("{l:?} {e:.2e}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

// 9 -------------------------------------------------------------------------

fn cnn_learning() -> Outcome {
    let t = Instant::now();
    let (docs, labels) = common::separable_corpus(1000, 0.15, 9);
    let (tr, va) = split_80_20(&labels, 9);
    let train_docs = pick(&docs, &tr);
    let ft = train_embeddings(
        &train_docs,
        &EmbedTrainConfig {
            seed: 9,
            ..EmbedTrainConfig::fasttext()
        },
    )
    .unwrap()
    .table;
    let cfg = CnnConfig {
        embed_init: EmbedInit::Fasttext,
        epochs: 50,
        seed: 9,
        target_auc: Some(0.95),
        ..Default::default()
    };
    let vocab = CnnVocab::build(&train_docs, None);
    let model = build_cnn(&cfg, vocab.clone(), Some(&ft)).unwrap();
    let encode = |idx: &[usize]| -> Vec<(Vec<u32>, u8)> { idx.iter().map(|&i| (model.encode(&docs[i]), labels[i])).collect() };
    let (train_set, val_set) = (encode(&tr), encode(&va));
    let run = train_cnn(model.clone(), &train_set, &val_set).unwrap();
    let reached = run.history.iter().find(|h| h.val_auc.is_some_and(|a| a >= 0.95)).map(|h| h.epoch);
    let best = run.history.iter().filter_map(|h| h.val_auc).fold(f64::NAN, f64::max);

    let frozen_cfg = CnnConfig {
        lr: 0.0,
        epochs: 2,
        target_auc: None,
        ..cfg
    };
    let still = build_cnn(&frozen_cfg, vocab, Some(&ft)).unwrap();
    let after = train_cnn(still.clone(), &train_set, &val_set).unwrap();
    let unchanged = still.params.iter().zip(&after.model.params).all(|(a, b)| a.to_bits() == b.to_bits());
    let secs = t.elapsed().as_secs_f64();
    outcome(
        reached.is_some() && unchanged,
        format!(
            "val AUC >= 0.95 at epoch {} (best {best:.3}); lr=0 leaves all {} parameters bitwise unchanged: {unchanged}; {secs:.1}s",
            reached.map_or("never".into(), |e| e.to_string()),
            still.parameter_count()
        ),
    )
}

// 10 ------------------------------------------------------------------------

fn grid_search_checks() -> Outcome {
    // labels from a noisy linear rule: the linear kernel is the planted winner
    let mut r = common::rng(10);
    let w: Vec<f64> = (0..8).map(|_| r.gen_range(-1.0..1.0)).collect();
    let rows: Vec<Vec<f64>> = (0..300).map(|_| (0..8).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
    let labels: Vec<u8> = rows
        .iter()
        .map(|x| {
            let s: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
            u8::from(s + r.gen_range(-0.2..0.2) > 0.3)
        })
        .collect();
    let x = FeatureMatrix::dense(rows, labels).unwrap();
    let base = ModelSpec {
        params: ModelParams::Svm(SvmParams {
            gamma: 50.0,
            probability: false,
            ..Default::default()
        }),
        seed: 10,
    };
    let mut grid = ParamGrid::new();
    grid.insert("kernel".into(), vec!["rbf".into(), "linear".into()]);
    grid.insert("C".into(), vec![1.0.into()]);
    let a = grid_search(&x, &base, &grid, 5, 10).unwrap();
    let b = grid_search(&x, &base, &grid, 5, 10).unwrap();
    let winner_linear = matches!(&a.best_spec.params, ModelParams::Svm(p) if p.kernel == Kernel::Linear);
    let deterministic = a.best_index == b.best_index && a.rows == b.rows;

    let mut tie = ParamGrid::new();
    tie.insert("alpha".into(), vec![0.5.into(), 0.5.into()]);
    let xs = FeatureMatrix::dense(x.rows().map(|r| (0..8).map(|j| r.get(j) + 1.0).collect()).collect(), x.labels().to_vec()).unwrap();
    let t = grid_search(&xs, &ModelSpec::reference(ModelKind::Nb), &tie, 5, 10).unwrap();
    let tie_first = t.best_index == 0 && t.rows[0].mean_auc == t.rows[1].mean_auc && expand_grid(&tie).unwrap().len() == 2;
    let table: BTreeMap<String, f64> = a
        .rows
        .iter()
        .map(|row| (row.params["kernel"].as_str().unwrap().to_owned(), row.mean_auc))
        .collect();
    outcome(
        winner_linear && deterministic && tie_first,
        format!("mean CV AUC {table:?}; planted linear kernel wins: {winner_linear}; rerun identical: {deterministic}; tie goes to first: {tie_first}"),
    )
}

// 11 ------------------------------------------------------------------------

fn full_pipeline_stretch() -> Option<Outcome> {
    let path = PathBuf::from(std::env::var_os("MISINFO_DATASET")?);
    let ds = load_dataset(&path, CorpusFormat::from_path(&path)).ok()?;
    let cfg = PreprocessConfig::default();
    let docs: Vec<TokenSequence> = ds.texts().map(|t| arabic_text::preprocess(t, &cfg)).collect();
    let labels = ds.labels();
    let (tr, te) = split_80_20(&labels, 11);
    let train_docs = pick(&docs, &tr);
    let table = train_embeddings(
        &train_docs,
        &EmbedTrainConfig {
            seed: 11,
            ..EmbedTrainConfig::fasttext()
        },
    )
    .ok()?
    .table;
    let vecs: Vec<Vec<f64>> = docs.iter().map(|d| tweet_vector(&table, d).values).collect();
    let xtr = FeatureMatrix::dense(pick(&vecs, &tr), pick(&labels, &tr)).ok()?;
    let xte = FeatureMatrix::dense(pick(&vecs, &te), pick(&labels, &te)).ok()?;
    let m = train(&xtr, &ModelSpec::reference(ModelKind::Gbt).with_seed(11)).ok()?;
    let rep = compute_metrics(xte.labels(), &m.predict_scores(&xte).ok()?, 0.5).ok()?;
    Some(outcome(
        rep.auc >= 0.80,
        format!(
            "{} tweets; test AUC {:.3} (reference 0.854), accuracy {:.3}, precision {:.2}, recall {:.2}, F1 {:.2}",
            ds.len(),
            rep.auc,
            rep.accuracy,
            rep.precision,
            rep.recall,
            rep.f1
        ),
    ))
}

/// Criteria whose outcome is fixed by published numbers rather than by this
/// code. Criterion 2 checks the reported table against itself: three of its
/// rows print F1 values that the printed (rounded) precision and recall do
/// not reproduce exactly, though all are consistent within that rounding.
const REFERENCE_DATA_LIMITED: &[u32] = &[2];

fn main() {
    let criteria: Vec<(u32, &str, fn() -> Outcome)> = vec![
        (1, "metric oracle equivalence", metric_oracles),
        (2, "F1 consistency with the reported table", reported_f1_rows),
        (3, "TF-IDF oracle", tfidf_oracle),
        (4, "preprocessing fixtures", preprocessing_fixtures),
        (5, "embedding sanity", embedding_sanity),
        (6, "classifier separability", separability_suite),
        (7, "tree split oracles", tree_split_oracles),
        (8, "CNN gradient check", cnn_gradient_check),
        (9, "CNN learning", cnn_learning),
        (10, "grid search", grid_search_checks),
    ];
    let mut failed = Vec::new();
    for (id, name, f) in criteria {
        let o = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        println!("criterion {id:>2} {} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(id);
        }
    }
    match catch_unwind(full_pipeline_stretch) {
        Ok(Some(o)) => println!(
            "criterion 11 {} full pipeline stretch (non-gating): {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        ),
        Ok(None) => println!("criterion 11 SKIP full pipeline stretch (non-gating): MISINFO_DATASET not set or unreadable"),
        Err(_) => println!("criterion 11 FAIL full pipeline stretch (non-gating): panicked"),
    }
    let (data_limited, gating): (Vec<u32>, Vec<u32>) = failed.into_iter().partition(|id| REFERENCE_DATA_LIMITED.contains(id));
    if !data_limited.is_empty() {
        println!("failures traced to the reference table itself, not gating: {data_limited:?}");
    }
    if !gating.is_empty() {
        eprintln!("failing criteria: {gating:?}");
        std::process::exit(1);
    }
}
