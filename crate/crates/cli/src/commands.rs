use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use toxmoral::baseline::{pending_texts, ClientConfig, PerspectiveClient, ProviderMode, PERSPECTIVE_KEY};
use toxmoral::corpus::{
    build_issue_testset, load_corpus, sample_review_testset, stratified_folds, undersample, write_jsonl, Corpus,
    CorpusFormat, LabelPolicy,
};
use toxmoral::ddr::EmbeddingTable;
use toxmoral::evaluation::{cross_validate_matrix, Aggregation, CvConfig, EvalReport, OutOfFold};
use toxmoral::features::{cached_feature_matrix, FeatureMatrix, Lexicons, Resources};
use toxmoral::models::{train, ModelConfig};
use toxmoral::par::ExecMode;
use toxmoral::report::{export_errors, group_means, write_error_buckets};

use crate::args::{
    Command, CvArgs, ErrorsArgs, EvaluateArgs, FeaturizeArgs, FetchArgs, FoldsArgs, ModelArgs, ResourceArgs,
    SampleArgs, StatsArgs, TrainArgs,
};
use crate::manifest::{display, hash_file, sidecar, Manifest, RunConfig};
use crate::Failure;

pub fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Sample(a) => sample(a),
        Command::Folds(a) => folds(a),
        Command::Featurize(a) => featurize(a),
        Command::Train(a) => train_cmd(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Stats(a) => stats(a),
        Command::Errors(a) => errors(a),
        Command::FetchScores(a) => fetch_scores(a),
    }
}

fn load(path: &Path, policy: LabelPolicy) -> Result<Corpus, Failure> {
    Ok(load_corpus(path, CorpusFormat::from_path(path), policy)?)
}

fn corpus_bytes(c: &Corpus) -> Vec<u8> {
    let mut buf = Vec::new();
    write_jsonl(c, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

fn corpus_inputs(path: &Path) -> Result<BTreeMap<String, String>, Failure> {
    Ok(BTreeMap::from([("corpus".to_string(), hash_file(path)?)]))
}

fn exec_mode() -> ExecMode {
    ExecMode::default()
}

/// Loaded corpus, resources and their input hashes for the feature-based commands.
struct Prepared {
    corpus: Corpus,
    res: Resources,
    inputs: BTreeMap<String, String>,
}

fn prepare(a: &ResourceArgs) -> Result<Prepared, Failure> {
    let set = a.features;
    let mut inputs = corpus_inputs(&a.corpus)?;
    let lexicons = Lexicons::from_dir(a.lexicon_dir.as_deref())?;
    inputs.insert("lexicon.psycholinguistic".into(), lexicons.psych.fingerprint());
    inputs.insert("lexicon.valence".into(), lexicons.valence.fingerprint());

    let embeddings = match (&a.embeddings, set.uses_moral()) {
        (Some(path), true) => {
            let loaded = EmbeddingTable::load(path)?;
            if !loaded.duplicates.is_empty() {
                log::warn!(
                    "{}: {} duplicate word(s), last vector kept",
                    path.display(),
                    loaded.duplicates.len()
                );
            }
            inputs.insert("lexicon.moral".into(), lexicons.moral.fingerprint());
            inputs.insert("embeddings".into(), loaded.table.fingerprint().to_string());
            Some(loaded.table)
        }
        (Some(path), false) => {
            log::info!("feature set {set} has no moral columns; not loading {}", path.display());
            None
        }
        (None, _) => None,
    };

    let perspective_cache = || -> Result<PathBuf, Failure> {
        a.cache_dir
            .as_ref()
            .map(|d| d.join("perspective"))
            .ok_or_else(|| Failure::usage(format!("--provider {} needs --cache-dir", a.provider)))
    };
    let client = match a.provider {
        ProviderMode::Cache => Some(PerspectiveClient::replay(perspective_cache()?)),
        ProviderMode::Fetch => Some(PerspectiveClient::online(ClientConfig::new(perspective_cache()?))?),
        ProviderMode::Precomputed | ProviderMode::Heuristic => None,
    };

    let res = Resources::new(lexicons, embeddings, a.provider, client)?;
    res.check(set)?;
    inputs.insert("resources".into(), res.fingerprint(set));
    let corpus = load(&a.corpus, LabelPolicy::Required)?;
    Ok(Prepared { corpus, res, inputs })
}

fn matrix(a: &ResourceArgs, p: &Prepared) -> Result<FeatureMatrix, Failure> {
    let cache = a.cache_dir.as_ref().map(|d| d.join("features"));
    Ok(cached_feature_matrix(
        &p.corpus,
        a.features,
        &p.res,
        cache.as_deref(),
        exec_mode(),
    )?)
}

fn resource_config(subcommand: &'static str, a: &ResourceArgs, out: &Path) -> RunConfig {
    RunConfig {
        subcommand,
        corpus: Some(display(&a.corpus)),
        lexicon_dir: a.lexicon_dir.as_deref().map(display),
        embeddings: a.embeddings.as_deref().map(display),
        cache_dir: a.cache_dir.as_deref().map(display),
        out: display(out),
        feature_set: Some(a.features),
        provider: Some(a.provider.to_string()),
        ..RunConfig::default()
    }
}

fn model_config(m: &ModelArgs, seed: u64) -> Result<ModelConfig, Failure> {
    let mut cfg = ModelConfig::new(m.model).with_seed(seed);
    for (name, value) in &m.params {
        cfg = cfg.set(name, *value)?;
    }
    if let Some(n) = m.n_estimators {
        cfg = cfg.set("n_estimators", n as f64)?;
    }
    if let Some(n) = m.max_iter {
        cfg = cfg.set("max_iter", n as f64)?;
    }
    Ok(cfg)
}

fn cv_config(c: &CvArgs) -> CvConfig {
    CvConfig {
        k: c.k,
        seed: c.seed,
        aggregation: if c.pooled {
            Aggregation::Pooled
        } else {
            Aggregation::MeanOfFolds
        },
    }
}

fn cross_validate(fm: &FeatureMatrix, mcfg: &ModelConfig, cv: &CvConfig) -> Result<(EvalReport, OutOfFold), Failure> {
    let (report, oof) = cross_validate_matrix(fm, mcfg, cv, exec_mode())?;
    for f in report.folds.iter().filter(|f| !f.converged) {
        log::warn!(
            "fold {}: {} stopped at the iteration limit ({})",
            f.fold,
            mcfg.kind,
            f.iterations
        );
    }
    Ok((report, oof))
}

fn sample(a: SampleArgs) -> Result<(), Failure> {
    let mut corpus = load(&a.corpus, LabelPolicy::Required)?;
    let config = RunConfig {
        subcommand: "sample",
        corpus: Some(display(&a.corpus)),
        out: display(&a.out),
        seed: Some(a.seed),
        ratio: Some(a.ratio),
        max_chars: a.max_chars,
        test_per_class: a.test_per_class,
        test_out: a.test_out.as_deref().map(display),
        ..RunConfig::default()
    };
    let mut manifest = Manifest::new(config, corpus_inputs(&a.corpus)?);
    if let Some(max) = a.max_chars {
        let before = corpus.len();
        corpus = build_issue_testset(&corpus, max)?;
        log::info!(
            "kept {} of {before} documents of at most {max} characters",
            corpus.len()
        );
    }
    if let (Some(n), Some(test_out)) = (a.test_per_class, &a.test_out) {
        let (test, rest) = sample_review_testset(&corpus, n, a.seed)?;
        manifest.write(test_out, &corpus_bytes(&test))?;
        corpus = rest;
    }
    let sampled = undersample(&corpus, a.ratio, a.seed)?;
    manifest.write(&a.out, &corpus_bytes(&sampled))?;
    manifest.save(&sidecar(&a.out))?;
    let c = sampled.counts();
    println!("toxic={} non_toxic={} total={}", c.toxic, c.non_toxic, c.total());
    Ok(())
}

fn folds(a: FoldsArgs) -> Result<(), Failure> {
    let corpus = load(&a.corpus, LabelPolicy::Required)?;
    let plan = stratified_folds(&corpus, a.k, a.seed)?;
    let config = RunConfig {
        subcommand: "folds",
        corpus: Some(display(&a.corpus)),
        out: display(&a.out),
        k: Some(a.k),
        seed: Some(a.seed),
        ..RunConfig::default()
    };
    let mut manifest = Manifest::new(config, corpus_inputs(&a.corpus)?);
    let mut json = serde_json::to_string_pretty(&plan).expect("fold plan serializes");
    json.push('\n');
    manifest.write(&a.out, json.as_bytes())?;
    manifest.save(&sidecar(&a.out))?;

    let mut sizes = vec![(0usize, 0usize); a.k];
    for d in corpus.iter() {
        let f = plan.assignment[&d.id];
        sizes[f].0 += 1;
        if d.label.is_some_and(|l| l.is_toxic()) {
            sizes[f].1 += 1;
        }
    }
    for (f, (n, toxic)) in sizes.iter().enumerate() {
        println!("fold {f}: {n} documents, {toxic} toxic");
    }
    Ok(())
}

fn featurize(a: FeaturizeArgs) -> Result<(), Failure> {
    let p = prepare(&a.resources)?;
    let fm = matrix(&a.resources, &p)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["id"];
    header.extend(fm.columns());
    header.push("label");
    w.write_record(&header).map_err(csv_failure)?;
    for (i, id) in fm.ids.iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(fm.x.row(i).iter().map(|v| v.to_string()));
        rec.push(fm.labels[i].as_str().to_string());
        w.write_record(&rec).map_err(csv_failure)?;
    }
    let bytes = w.into_inner().expect("in-memory CSV");
    let mut manifest = Manifest::new(resource_config("featurize", &a.resources, &a.out), p.inputs);
    manifest.write(&a.out, &bytes)?;
    manifest.save(&sidecar(&a.out))?;
    println!("{} rows x {} features", fm.len(), fm.set.width());
    Ok(())
}

fn csv_failure(e: csv::Error) -> Failure {
    Failure {
        code: crate::EXIT_DATA,
        message: e.to_string(),
    }
}

fn train_cmd(a: TrainArgs) -> Result<(), Failure> {
    let mcfg = model_config(&a.model, a.seed)?;
    let p = prepare(&a.resources)?;
    let fm = matrix(&a.resources, &p)?;
    let model = train(&fm.x, &fm.labels, &mcfg)?;
    if !model.meta.converged {
        log::warn!(
            "{} stopped at the iteration limit ({})",
            mcfg.kind,
            model.meta.iterations
        );
    }
    let mut config = resource_config("train", &a.resources, &a.out);
    config.model = Some(mcfg);
    config.seed = Some(a.seed);
    let mut manifest = Manifest::new(config, p.inputs);
    let mut json = model.to_json();
    json.push('\n');
    manifest.write(&a.out, json.as_bytes())?;
    manifest.save(&sidecar(&a.out))?;
    println!(
        "trained {} on {} documents ({} iterations, objective {:.6})",
        model.config.kind,
        fm.len(),
        model.meta.iterations,
        model.meta.final_objective
    );
    Ok(())
}

fn eval_config(subcommand: &'static str, r: &ResourceArgs, mcfg: &ModelConfig, cv: &CvConfig, out: &Path) -> RunConfig {
    let mut config = resource_config(subcommand, r, out);
    config.model = Some(mcfg.clone());
    config.k = Some(cv.k);
    config.seed = Some(cv.seed);
    config.aggregation = Some(cv.aggregation);
    config
}

fn evaluate(a: EvaluateArgs) -> Result<(), Failure> {
    let mcfg = model_config(&a.model, a.cv.seed)?;
    let cv = cv_config(&a.cv);
    let p = prepare(&a.resources)?;
    let fm = matrix(&a.resources, &p)?;
    let (report, oof) = cross_validate(&fm, &mcfg, &cv)?;

    let stem = format!("{}-{}", a.resources.features, mcfg.kind.short_name());
    let mut manifest = Manifest::new(eval_config("evaluate", &a.resources, &mcfg, &cv, &a.out), p.inputs);
    let mut json = report.to_json();
    json.push('\n');
    manifest.write(&a.out.join(format!("report-{stem}.json")), json.as_bytes())?;
    let row = format!("{}\n{}\n", EvalReport::csv_header(), report.csv_row());
    manifest.write(&a.out.join(format!("row-{stem}.csv")), row.as_bytes())?;
    manifest.write(&a.out.join(format!("oof-{stem}.csv")), &oof_csv(&oof)?)?;
    manifest.save(&a.out.join(format!("manifest-{stem}.json")))?;
    println!("{}", report.csv_row());
    Ok(())
}

fn oof_csv(oof: &OutOfFold) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "fold", "gold", "predicted", "score"])
        .map_err(csv_failure)?;
    for i in 0..oof.ids.len() {
        w.write_record([
            oof.ids[i].clone(),
            oof.fold[i].to_string(),
            oof.gold[i].as_str().to_string(),
            oof.predicted[i].as_str().to_string(),
            oof.scores[i].to_string(),
        ])
        .map_err(csv_failure)?;
    }
    Ok(w.into_inner().expect("in-memory CSV"))
}

fn stats(a: StatsArgs) -> Result<(), Failure> {
    let p = prepare(&a.resources)?;
    let fm = matrix(&a.resources, &p)?;
    let stats = group_means(&fm.x, &fm.labels, &fm.columns())?;
    let mut bytes = Vec::new();
    stats.write_csv(&mut bytes)?;
    let mut manifest = Manifest::new(resource_config("stats", &a.resources, &a.out), p.inputs);
    manifest.write(&a.out, &bytes)?;
    manifest.save(&sidecar(&a.out))?;
    print!("{}", String::from_utf8_lossy(&bytes));
    Ok(())
}

fn errors(a: ErrorsArgs) -> Result<(), Failure> {
    let mcfg = model_config(&a.model, a.cv.seed)?;
    let cv = cv_config(&a.cv);
    let p = prepare(&a.resources)?;
    let fm = matrix(&a.resources, &p)?;
    let (_, oof) = cross_validate(&fm, &mcfg, &cv)?;
    let buckets = export_errors(&oof, &p.corpus, &fm)?;
    let (fp, fn_) = write_error_buckets(&buckets, &a.out)?;
    let mut manifest = Manifest::new(eval_config("errors", &a.resources, &mcfg, &cv, &a.out), p.inputs);
    manifest.record_existing(&fp)?;
    manifest.record_existing(&fn_)?;
    manifest.save(&a.out.join("manifest.json"))?;
    println!(
        "{} false positives, {} false negatives",
        buckets.false_positives.len(),
        buckets.false_negatives.len()
    );
    Ok(())
}

fn fetch_scores(a: FetchArgs) -> Result<(), Failure> {
    let corpus = load(&a.corpus, LabelPolicy::Optional)?;
    let cache = a.cache_dir.join("perspective");
    fs::create_dir_all(&cache).map_err(|e| Failure::io(&cache, e))?;
    let client = if a.dry_run {
        PerspectiveClient::replay(&cache)
    } else {
        PerspectiveClient::online(ClientConfig::new(&cache))?
    };
    let pending = pending_texts(corpus.iter(), &client)?;
    println!("{} text(s) need a score", pending.len());
    if !a.dry_run {
        for (i, text) in pending.iter().enumerate() {
            client.fetch_toxicity(text)?;
            log::info!("scored {}/{}", i + 1, pending.len());
        }
    }
    if let Some(out) = &a.out {
        let mut docs = corpus.documents().to_vec();
        let mut missing = 0usize;
        for d in &mut docs {
            if d.precomputed.contains_key(PERSPECTIVE_KEY) {
                continue;
            }
            match client.cached(&d.text)? {
                Some(v) => {
                    d.precomputed.insert(PERSPECTIVE_KEY.to_string(), v);
                }
                None => missing += 1,
            }
        }
        if missing > 0 {
            log::warn!("{missing} document(s) still have no {PERSPECTIVE_KEY} score");
        }
        let filled = Corpus::new(docs)?;
        let config = RunConfig {
            subcommand: "fetch-scores",
            corpus: Some(display(&a.corpus)),
            cache_dir: Some(display(&a.cache_dir)),
            out: display(out),
            ..RunConfig::default()
        };
        let mut manifest = Manifest::new(config, corpus_inputs(&a.corpus)?);
        manifest.write(out, &corpus_bytes(&filled))?;
        manifest.save(&sidecar(out))?;
    }
    Ok(())
}
