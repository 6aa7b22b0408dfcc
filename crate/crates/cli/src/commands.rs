use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use misinfo_core::classifiers::{train as train_model, TrainedModel};
use misinfo_core::corpus::{dataset_stats, kfold_indices, load_dataset, read_records, CorpusFormat};
use misinfo_core::embeddings::{save_table, train as train_embeddings, EmbedMode};
use misinfo_core::eval::{compute_metrics, grid_search, roc_auc, ParamGrid};
use misinfo_core::features::{write_libsvm, SparseVector};
use misinfo_core::neural::{build_cnn, history_csv, train_cnn, CnnLoss, CnnVocab, EmbedInit};
use misinfo_core::{
    CnnModel, EmbedTrainConfig, MetricsReport, ModelSpec, RunConfig, TokenSequence,
};
use serde::Serialize;
use serde_json::Value;

use crate::pipeline::{
    create_dir, meta_path, preprocess_record, read_tokens, write, write_json, Corpus, Featurizer, Meta, TokenRecord,
    METRICS_FILE, RUN_FILE,
};
use crate::{resolve_config, CliError, Command, EmbedInitArg, EmbedModeArg, InputArgs, LossArg, ModelArg};

const MODEL_FILE: &str = "model.json";
const CNN_FILE: &str = "model.bin";

pub fn run(cmd: Command, config: Option<&PathBuf>, seed: Option<u64>) -> Result<()> {
    match cmd {
        Command::Preprocess { input, out } => preprocess(&resolve_config(config, seed, &input)?, &out),
        Command::EmbedTrain {
            input,
            mode,
            dim,
            window,
            epochs,
            min_count,
            negatives,
            out,
        } => {
            let mut cfg = resolve_config(config, seed, &input)?;
            let e = &mut cfg.embed;
            e.mode = match mode {
                EmbedModeArg::Cbow => EmbedMode::Cbow,
                EmbedModeArg::Fasttext => EmbedMode::Fasttext,
            };
            e.dim = dim.unwrap_or(e.dim);
            e.window = window.unwrap_or(e.window);
            e.epochs = epochs.unwrap_or(e.epochs);
            e.min_count = min_count.unwrap_or(e.min_count);
            e.negatives = negatives.unwrap_or(e.negatives);
            e.seed = cfg.seed;
            embed_train(&cfg, &input, &out)
        }
        Command::Featurize {
            input,
            features,
            embeddings,
            out,
        } => {
            let mut cfg = resolve_config(config, seed, &input)?;
            if let Some(f) = features {
                cfg.model.features = f.into();
            }
            if embeddings.is_some() {
                cfg.paths.embeddings = embeddings;
            }
            featurize(&cfg, &input, &out)
        }
        Command::Train {
            input,
            model,
            features,
            params,
            embeddings,
            embed_init,
            loss,
            epochs,
            out_dir,
        } => {
            let mut cfg = resolve_config(config, seed, &input)?;
            apply_model_args(&mut cfg, model, features, embeddings, params.as_deref())?;
            if model == Some(ModelArg::Cnn) {
                let c = &mut cfg.cnn;
                if let Some(i) = embed_init {
                    c.embed_init = match i {
                        EmbedInitArg::Random => EmbedInit::Random,
                        EmbedInitArg::Cbow => EmbedInit::Cbow,
                        EmbedInitArg::Fasttext => EmbedInit::Fasttext,
                    };
                }
                if let Some(l) = loss {
                    c.loss = match l {
                        LossArg::Ce => CnnLoss::CrossEntropy,
                        LossArg::Auc => CnnLoss::AucSurrogate,
                    };
                }
                c.epochs = epochs.unwrap_or(c.epochs);
                c.seed = cfg.seed;
                train_cnn_run(&cfg, &input, &out_dir)
            } else {
                if embed_init.is_some() || loss.is_some() || epochs.is_some() {
                    return Err(CliError::Usage("--embed-init, --loss and --epochs apply to --model cnn only".into()).into());
                }
                train_classical(&cfg, &input, &out_dir)
            }
        }
        Command::GridSearch {
            input,
            model,
            features,
            grid,
            embeddings,
            folds,
            out_dir,
        } => {
            if model == Some(ModelArg::Cnn) {
                return Err(CliError::Usage("grid search covers the classical models only".into()).into());
            }
            let mut cfg = resolve_config(config, seed, &input)?;
            apply_model_args(&mut cfg, model, features, embeddings, None)?;
            grid_run(&cfg, &input, &grid, folds, &out_dir)
        }
        Command::Evaluate { run, input, out_dir } => evaluate(&run, config, seed, &input, &out_dir),
        Command::Stats { input } => stats(&resolve_config(config, seed, &input)?),
        Command::Report { runs, out } => report(&runs, out.as_deref()),
    }
}

fn apply_model_args(
    cfg: &mut RunConfig,
    model: Option<ModelArg>,
    features: Option<crate::FeatureArg>,
    embeddings: Option<PathBuf>,
    params: Option<&Path>,
) -> Result<()> {
    if let Some(k) = model.and_then(ModelArg::classical) {
        if k != cfg.model.kind {
            // overrides written for another model kind do not carry over
            cfg.model.params.clear();
        }
        cfg.model.kind = k;
    }
    if let Some(f) = features {
        cfg.model.features = f.into();
    }
    if embeddings.is_some() {
        cfg.paths.embeddings = embeddings;
    }
    if let Some(p) = params {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
        let Value::Object(map) = v else {
            return Err(CliError::Usage(format!("{} must hold a JSON object", p.display())).into());
        };
        cfg.model.params.extend(map);
    }
    Ok(())
}

fn preprocess(cfg: &RunConfig, out: &Path) -> Result<()> {
    cfg.validate()?;
    let path = crate::pipeline::corpus_path(cfg)?;
    let records = read_records(path, CorpusFormat::from_path(path))?;
    let pre = cfg.preprocess_config()?;
    let mut text = String::new();
    for r in &records {
        let rec = TokenRecord {
            id: r.id.clone(),
            tokens: preprocess_record(&r.text, &r.id, &pre).tokens,
        };
        text.push_str(&serde_json::to_string(&rec)?);
        text.push('\n');
    }
    write(out, text)?;
    write_json(
        &meta_path(out),
        &Meta {
            command: "preprocess",
            seed: cfg.seed,
            config: cfg,
            extra: serde_json::json!({ "records": records.len() }),
        },
    )?;
    eprintln!("wrote {} token records to {}", records.len(), out.display());
    Ok(())
}

/// Token sequences for embedding training: labels are not needed, so
/// unlabeled corpora are accepted too.
fn unlabeled_docs(cfg: &RunConfig, input: &InputArgs) -> Result<Vec<TokenSequence>> {
    if let Some(t) = &input.tokens {
        return Ok(read_tokens(t)?
            .into_iter()
            .map(|r| TokenSequence::new(r.tokens).with_id(r.id))
            .collect());
    }
    let path = crate::pipeline::corpus_path(cfg)?;
    let pre = cfg.preprocess_config()?;
    Ok(read_records(path, CorpusFormat::from_path(path))?
        .iter()
        .map(|r| preprocess_record(&r.text, &r.id, &pre))
        .collect())
}

fn embed_train(cfg: &RunConfig, input: &InputArgs, out: &Path) -> Result<()> {
    cfg.validate()?;
    let docs = unlabeled_docs(cfg, input)?;
    let trained = train_embeddings(&docs, &cfg.embed)?;
    save_table(&trained.table, out)?;
    write_json(
        &meta_path(out),
        &Meta {
            command: "embed-train",
            seed: cfg.seed,
            config: cfg,
            extra: serde_json::json!({
                "vocabulary": trained.table.len(),
                "epoch_losses": trained.epoch_losses,
            }),
        },
    )?;
    eprintln!("wrote {} vectors of dimension {} to {}", trained.table.len(), trained.table.dim(), out.display());
    Ok(())
}

fn featurize(cfg: &RunConfig, input: &InputArgs, out: &Path) -> Result<()> {
    cfg.validate()?;
    let corpus = Corpus::load(cfg, input.tokens.as_deref())?;
    let kind = cfg.model.features;
    let f = Featurizer::fit(kind, cfg, &corpus.docs)?;
    let x = f.matrix(&corpus.docs, corpus.labels())?;
    let rows: Vec<(String, Option<u8>, SparseVector)> = corpus
        .dataset
        .records()
        .iter()
        .zip(x.rows())
        .map(|(r, row)| {
            let mut pairs = Vec::new();
            row.for_each_nonzero(|c, v| pairs.push((c, v)));
            (r.id.clone(), r.label, SparseVector::from_pairs(x.dim(), pairs))
        })
        .collect();
    let mut buf = Vec::new();
    write_libsvm(&mut buf, &rows)?;
    write(out, buf)?;
    let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let state = f.save(dir)?;
    write_json(
        &meta_path(out),
        &Meta {
            command: "featurize",
            seed: cfg.seed,
            config: cfg,
            extra: serde_json::json!({ "features": kind, "dim": x.dim(), "rows": x.len(), "state": state }),
        },
    )?;
    eprintln!("wrote {} rows of dimension {} to {}", x.len(), x.dim(), out.display());
    Ok(())
}

/// Everything a metrics file records besides the resolved config.
#[derive(Serialize)]
struct RunSummary<'a> {
    model: &'a str,
    features: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    spec: Option<&'a ModelSpec>,
    n_train: usize,
    n_test: usize,
    metrics: &'a MetricsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    extra: Option<Value>,
}

fn train_test(parts: &[Vec<usize>]) -> Result<(&[usize], &[usize])> {
    match parts {
        [train, .., test] => Ok((train, test)),
        _ => Err(CliError::Usage("split.fractions needs at least a train and a test part".into()).into()),
    }
}

fn write_report(out_dir: &Path, command: &str, cfg: &RunConfig, summary: &RunSummary<'_>, labels: &[u8], scores: &[f64]) -> Result<()> {
    let (curve, _) = roc_auc(labels, scores)?;
    write(&out_dir.join("roc.csv"), curve.to_csv())?;
    write_json(
        &out_dir.join(METRICS_FILE),
        &Meta {
            command,
            seed: cfg.seed,
            config: cfg,
            extra: summary,
        },
    )?;
    cfg.save(&out_dir.join(RUN_FILE))?;
    println!("{}", serde_json::to_string_pretty(summary.metrics)?);
    Ok(())
}

fn train_classical(cfg: &RunConfig, input: &InputArgs, out_dir: &Path) -> Result<()> {
    cfg.validate()?;
    let corpus = Corpus::load(cfg, input.tokens.as_deref())?;
    let parts = corpus.split_indices(cfg)?;
    let (tr, te) = train_test(&parts)?;
    let kind = cfg.model.features;
    let f = Featurizer::fit(kind, cfg, &corpus.docs_at(tr))?;
    let xtr = f.matrix(&corpus.docs_at(tr), corpus.labels_at(tr))?;
    let xte = f.matrix(&corpus.docs_at(te), corpus.labels_at(te))?;
    let spec = cfg.model.spec(cfg.seed)?;
    let model = train_model(&xtr, &spec)?;
    let scores = model.predict_scores(&xte)?;
    let metrics = compute_metrics(xte.labels(), &scores, model.default_threshold())?;

    create_dir(out_dir)?;
    f.save(out_dir)?;
    model.save_json(&out_dir.join(MODEL_FILE))?;
    let summary = RunSummary {
        model: spec.kind().name(),
        features: kind.to_string(),
        spec: Some(&spec),
        n_train: xtr.len(),
        n_test: xte.len(),
        metrics: &metrics,
        extra: None,
    };
    write_report(out_dir, "train", cfg, &summary, xte.labels(), &scores)
}

fn grid_run(cfg: &RunConfig, input: &InputArgs, grid_path: &Path, folds: usize, out_dir: &Path) -> Result<()> {
    cfg.validate()?;
    let text = std::fs::read_to_string(grid_path).with_context(|| format!("reading {}", grid_path.display()))?;
    let grid: ParamGrid = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", grid_path.display())))?;
    let corpus = Corpus::load(cfg, input.tokens.as_deref())?;
    let parts = corpus.split_indices(cfg)?;
    let (tr, te) = train_test(&parts)?;
    let kind = cfg.model.features;
    let f = Featurizer::fit(kind, cfg, &corpus.docs_at(tr))?;
    let xtr = f.matrix(&corpus.docs_at(tr), corpus.labels_at(tr))?;
    let xte = f.matrix(&corpus.docs_at(te), corpus.labels_at(te))?;
    let base = cfg.model.spec(cfg.seed)?;
    let result = grid_search(&xtr, &base, &grid, folds, cfg.seed)?;
    let scores = result.model.predict_scores(&xte)?;
    let metrics = compute_metrics(xte.labels(), &scores, result.model.default_threshold())?;

    // the run directory describes the winning configuration
    let mut resolved = cfg.clone();
    resolved.model.params.extend(result.rows[result.best_index].params.clone());

    create_dir(out_dir)?;
    f.save(out_dir)?;
    result.model.save_json(&out_dir.join(MODEL_FILE))?;
    write(&out_dir.join("grid.csv"), result.to_csv())?;
    let best = &result.rows[result.best_index];
    write_json(
        &out_dir.join("best_spec.json"),
        &Meta {
            command: "grid-search",
            seed: cfg.seed,
            config: &resolved,
            extra: serde_json::json!({
                "best_index": result.best_index,
                "best_params": best.params,
                "mean_auc": best.mean_auc,
                "std_auc": best.std_auc,
                "spec": result.best_spec,
                "folds": folds,
            }),
        },
    )?;
    let summary = RunSummary {
        model: result.best_spec.kind().name(),
        features: kind.to_string(),
        spec: Some(&result.best_spec),
        n_train: xtr.len(),
        n_test: xte.len(),
        metrics: &metrics,
        extra: Some(serde_json::json!({ "grid_points": result.rows.len(), "cv_mean_auc": best.mean_auc })),
    };
    write_report(out_dir, "grid-search", &resolved, &summary, xte.labels(), &scores)
}

fn cnn_pretrained(cfg: &RunConfig, train_docs: &[TokenSequence]) -> Result<Option<misinfo_core::EmbeddingTable>> {
    let mode = match cfg.cnn.embed_init {
        EmbedInit::Random => return Ok(None),
        EmbedInit::Cbow => EmbedMode::Cbow,
        EmbedInit::Fasttext => EmbedMode::Fasttext,
    };
    if let Some(p) = &cfg.paths.embeddings {
        return Ok(Some(misinfo_core::embeddings::load_table(p)?));
    }
    let ecfg = EmbedTrainConfig {
        mode,
        dim: cfg.cnn.embed_dim,
        seed: cfg.seed,
        ..cfg.embed.clone()
    };
    Ok(Some(train_embeddings(train_docs, &ecfg)?.table))
}

fn train_cnn_run(cfg: &RunConfig, input: &InputArgs, out_dir: &Path) -> Result<()> {
    cfg.validate()?;
    let corpus = Corpus::load(cfg, input.tokens.as_deref())?;
    let parts = corpus.split_indices(cfg)?;
    let (tr, te) = train_test(&parts)?;
    // validation: the middle part of a three-way split, else a tenth of train
    let (fit_idx, val_idx): (Vec<usize>, Vec<usize>) = if parts.len() >= 3 {
        (tr.to_vec(), parts[1].clone())
    } else {
        let (a, b) = kfold_indices(&corpus.labels_at(tr), 10, cfg.seed, true)?.swap_remove(0);
        (a.iter().map(|&i| tr[i]).collect(), b.iter().map(|&i| tr[i]).collect())
    };
    let fit_docs = corpus.docs_at(&fit_idx);
    let vocab = CnnVocab::build(&fit_docs, cfg.cnn.max_vocab);
    let table = cnn_pretrained(cfg, &fit_docs)?;
    let model = build_cnn(&cfg.cnn, vocab, table.as_ref())?;
    let encode = |idx: &[usize]| -> Vec<(Vec<u32>, u8)> {
        let labels = corpus.labels_at(idx);
        corpus.docs_at(idx).iter().zip(labels).map(|(d, l)| (model.encode(d), l)).collect()
    };
    let (train_set, val_set) = (encode(&fit_idx), encode(&val_idx));
    let trained = train_cnn(model.clone(), &train_set, &val_set)?;
    let test_docs = corpus.docs_at(te);
    let test_labels = corpus.labels_at(te);
    let scores = trained.model.predict(&test_docs);
    let metrics = compute_metrics(&test_labels, &scores, 0.5)?;

    create_dir(out_dir)?;
    trained.model.save(&out_dir.join(CNN_FILE))?;
    write(&out_dir.join("history.csv"), history_csv(&trained.history))?;
    let summary = RunSummary {
        model: "cnn",
        features: format!("cnn-{}", serde_json::to_value(cfg.cnn.embed_init)?.as_str().unwrap_or_default()),
        spec: None,
        n_train: train_set.len(),
        n_test: test_labels.len(),
        metrics: &metrics,
        extra: Some(serde_json::json!({
            "n_val": val_set.len(),
            "best_epoch": trained.best_epoch,
            "epochs_run": trained.history.len(),
            "parameters": trained.model.parameter_count(),
        })),
    };
    write_report(out_dir, "train", cfg, &summary, &test_labels, &scores)
}

fn evaluate(run: &Path, config: Option<&PathBuf>, seed: Option<u64>, input: &InputArgs, out_dir: &Path) -> Result<()> {
    let run_cfg = RunConfig::load(&run.join(RUN_FILE))?;
    if config.is_some() || seed.is_some() {
        return Err(CliError::Usage("evaluate takes its configuration from the run directory".into()).into());
    }
    let mut cfg = run_cfg;
    if let Some(c) = &input.corpus {
        cfg.paths.corpus = Some(c.clone());
    }
    let path = crate::pipeline::corpus_path(&cfg)?;
    let ds = load_dataset(path, CorpusFormat::from_path(path))?;
    let labels = ds.labels();
    let docs: Vec<TokenSequence> = match &input.tokens {
        Some(_) => Corpus::load(&cfg, input.tokens.as_deref())?.docs,
        None => {
            let pre = cfg.preprocess_config()?;
            ds.records().iter().map(|r| preprocess_record(&r.text, &r.id, &pre)).collect()
        }
    };

    let (model_name, scores, threshold) = if run.join(CNN_FILE).exists() {
        let m = CnnModel::load(&run.join(CNN_FILE))?;
        ("cnn".to_string(), m.predict(&docs), 0.5)
    } else {
        let m = TrainedModel::load_json(&run.join(MODEL_FILE))?;
        let f = Featurizer::load(cfg.model.features, run)?;
        let x = f.matrix(&docs, labels.clone())?;
        (m.spec.kind().name().to_string(), m.predict_scores(&x)?, m.default_threshold())
    };
    let metrics = compute_metrics(&labels, &scores, threshold)?;
    create_dir(out_dir)?;
    let mut csv = String::from("id,label,score\n");
    for (r, s) in ds.records().iter().zip(&scores) {
        let _ = writeln!(csv, "{},{},{s}", r.id, r.label.unwrap_or_default());
    }
    write(&out_dir.join("scores.csv"), csv)?;
    let summary = RunSummary {
        model: &model_name,
        features: if model_name == "cnn" { "cnn".into() } else { cfg.model.features.to_string() },
        spec: None,
        n_train: 0,
        n_test: labels.len(),
        metrics: &metrics,
        extra: Some(serde_json::json!({ "run": run })),
    };
    write_report(out_dir, "evaluate", &cfg, &summary, &labels, &scores)
}

fn stats(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let path = crate::pipeline::corpus_path(cfg)?;
    let ds = load_dataset(path, CorpusFormat::from_path(path))?;
    let s = dataset_stats(&ds, &cfg.preprocess_config()?);
    println!("{}", serde_json::to_string_pretty(&s)?);
    Ok(())
}

fn report(runs: &[PathBuf], out: Option<&Path>) -> Result<()> {
    let mut csv = String::from("run,model,features,accuracy,auc,precision,recall,f1\n");
    for dir in runs {
        let path = if dir.is_dir() { dir.join(METRICS_FILE) } else { dir.clone() };
        let text = std::fs::read_to_string(&path).map_err(|e| misinfo_core::Error::Io {
            path: path.clone(),
            source: e,
        })?;
        let v: Value = serde_json::from_str(&text)?;
        let m = &v["metrics"];
        let num = |k: &str| -> Result<f64> {
            m[k].as_f64()
                .ok_or_else(|| CliError::Data(format!("{}: metrics.{k} missing", path.display())).into())
        };
        let _ = writeln!(
            csv,
            "{},{},{},{:.4},{:.4},{:.4},{:.4},{:.4}",
            dir.display(),
            v["model"].as_str().unwrap_or("?"),
            v["features"].as_str().unwrap_or("?"),
            num("accuracy")?,
            num("auc")?,
            num("precision")?,
            num("recall")?,
            num("f1")?
        );
    }
    match out {
        Some(p) => write(p, csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}
