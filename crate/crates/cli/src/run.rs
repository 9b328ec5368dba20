use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use ccvec_core::corpus::{
    build_vocabularies, import_paired_records, label_width, load_corpus, tokenize_message, write_jsonl_records,
    PatchChange, Vocabulary,
};
use ccvec_core::synth::{synthetic_patches, tiny_train_config};
use ccvec_core::tasks::{
    bleu4, build_index, build_queries, classification_metrics, corpus_bleu4, export_features, extract_embeddings,
    nngen_all, read_features_jsonl, retrieve_all, ExportFormat, IndexEntry, LinearProbe, ProbeConfig, Query,
    RetrievalIndex, RetrievalOptions, RetrievalResult,
};
use ccvec_core::train::{
    gradient_check, jitter_parameters, load_checkpoint, prepare_examples, save_checkpoint, train, Checkpoint,
    TrainConfig,
};
use ccvec_core::{ComparisonFn, ComparisonMask, Model};

use crate::args::*;

/// A failure inside the toolkit rather than in the user's input.
#[derive(Debug)]
pub struct Internal(pub String);

impl std::fmt::Display for Internal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Internal {}

pub fn dispatch(cli: Cli) -> Result<()> {
    let sidecar = cli.sidecar.clone();
    let (name, resolved) = match cli.command {
        Command::Ingest(a) => ("ingest", ingest(a)?),
        Command::Vocab(a) => ("vocab", vocab(a)?),
        Command::Train(a) => ("train", train_cmd(a)?),
        Command::Embed(a) => ("embed", embed(a)?),
        Command::Retrieve(a) => ("retrieve", retrieve(a)?),
        Command::EvalBleu(a) => ("eval-bleu", eval_bleu(a)?),
        Command::EvalCls(a) => ("eval-cls", eval_cls(a)?),
        Command::GradCheck(a) => ("grad-check", grad_check(a)?),
    };
    write_sidecar(sidecar, name, resolved)
}

/// What a command did, for the sidecar.
struct Resolved {
    out: Option<PathBuf>,
    settings: Value,
    /// Set when the command should fail after the sidecar is written.
    failure: Option<Internal>,
}

impl Resolved {
    fn ok(out: Option<&Path>, settings: Value) -> Self {
        Resolved {
            out: out.map(Path::to_path_buf),
            settings,
            failure: None,
        }
    }
}

fn write_sidecar(explicit: Option<PathBuf>, command: &str, r: Resolved) -> Result<()> {
    let path = explicit.unwrap_or_else(|| match &r.out {
        Some(out) => {
            let mut s = out.clone().into_os_string();
            s.push(".config.json");
            PathBuf::from(s)
        }
        None => PathBuf::from(format!("ccvec-{command}.config.json")),
    });
    let mut doc = json!({
        "command": command,
        "ccvec_version": env!("CARGO_PKG_VERSION"),
    });
    if let (Value::Object(d), Value::Object(s)) = (&mut doc, r.settings) {
        d.extend(s);
    }
    let text = serde_json::to_string_pretty(&doc)?;
    log::info!("resolved configuration:\n{text}");
    std::fs::write(&path, text + "\n").with_context(|| format!("writing sidecar {}", path.display()))?;
    match r.failure {
        Some(f) => Err(f.into()),
        None => Ok(()),
    }
}

fn read_corpus(path: &Path) -> Result<Vec<PatchChange>> {
    let patches = load_corpus(path).with_context(|| format!("reading corpus {}", path.display()))?;
    log::info!("{}: {} patches", path.display(), patches.len());
    Ok(patches)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

// ------------------------------------------------------------------ ingest

fn ingest(a: IngestArgs) -> Result<Resolved> {
    let records = import_paired_records(&a.diff, &a.msg, &a.newline_marker)
        .with_context(|| format!("importing {} and {}", a.diff.display(), a.msg.display()))?;
    write_jsonl_records(&a.out, &records)?;
    log::info!("wrote {} records to {}", records.len(), a.out.display());
    Ok(Resolved::ok(
        Some(&a.out),
        json!({ "diff": a.diff, "msg": a.msg, "newline_marker": a.newline_marker, "out": a.out }),
    ))
}

// ------------------------------------------------------------------- vocab

#[derive(Serialize, Deserialize)]
struct VocabFile {
    code: Vocabulary,
    message: Vocabulary,
}

fn build_vocab(patches: &[PatchChange], s: &VocabSettings) -> Result<(Vocabulary, Vocabulary)> {
    Ok(build_vocabularies(patches, s.code_min_count, s.msg_min_count, s.msg_max_size)?)
}

fn vocab(a: VocabArgs) -> Result<Resolved> {
    let patches = read_corpus(&a.corpus)?;
    let (code, message) = build_vocab(&patches, &a.settings)?;
    log::info!("code vocabulary {} entries, message vocabulary {}", code.len(), message.len());
    serde_json::to_writer(create(&a.out)?, &VocabFile { code, message })?;
    Ok(Resolved::ok(
        Some(&a.out),
        json!({ "corpus": a.corpus, "vocab_settings": a.settings, "out": a.out }),
    ))
}

// ------------------------------------------------------------------- train

/// Load `--config` (a bare configuration or an earlier sidecar) over `base`,
/// then apply flags.
pub fn resolve_config(base: TrainConfig, o: &ConfigOverrides) -> Result<TrainConfig> {
    let mut cfg = match &o.config {
        None => base,
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            let inner = match value.get("command").and(value.get("config")) {
                Some(c) => c.clone(),
                None => value,
            };
            serde_json::from_value(inner).with_context(|| format!("invalid configuration in {}", path.display()))?
        }
    };
    macro_rules! set {
        ($($flag:ident => $($field:ident).+),* $(,)?) => {
            $(if let Some(v) = o.$flag { cfg.$($field).+ = v; })*
        };
    }
    set!(
        learning_rate => learning_rate,
        adam_beta1 => adam_beta1,
        adam_beta2 => adam_beta2,
        adam_eps => adam_eps,
        lambda => lambda,
        dropout_rate => dropout_rate,
        batch_size => batch_size,
        epochs => epochs,
        seed => seed,
        files => model.shape.files,
        hunks => model.shape.hunks,
        lines => model.shape.lines,
        words => model.shape.words,
        embed_dim => model.dims.embed_dim,
        gru_hidden => model.dims.gru_hidden,
        ntn_slices => model.dims.ntn_slices,
        hidden_dim => model.dims.hidden_dim,
    );
    if o.clip_norm.is_some() {
        cfg.clip_norm = o.clip_norm;
    }
    if o.no_clip {
        cfg.clip_norm = None;
    }
    if o.unshare_sides {
        cfg.model.unshare_sides = true;
    }
    if o.mask_padding {
        cfg.model.mask_padding = true;
    }
    if o.ablation == Some(Ablation::All) {
        cfg.model.mask = ComparisonMask::concat_only();
    }
    for name in &o.disable {
        let f: ComparisonFn = name.parse()?;
        cfg.model.mask.set(f, false);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn train_cmd(a: TrainArgs) -> Result<Resolved> {
    let cfg = resolve_config(TrainConfig::default(), &a.overrides)?;
    let mut patches = read_corpus(&a.corpus)?;
    for extra in &a.extra_corpus {
        patches.extend(read_corpus(extra)?);
    }
    let (code_vocab, message_vocab) = match &a.vocab {
        Some(path) => {
            let f: VocabFile = serde_json::from_reader(
                File::open(path).with_context(|| format!("opening vocabulary {}", path.display()))?,
            )
            .with_context(|| format!("parsing vocabulary {}", path.display()))?;
            (f.code, f.message)
        }
        None => build_vocab(&patches, &a.vocab_settings)?,
    };
    log::info!(
        "code vocabulary {} entries, message vocabulary {}",
        code_vocab.len(),
        message_vocab.len()
    );
    let examples = prepare_examples(&patches, cfg.model.shape, &code_vocab, &message_vocab);
    let model = Model::init(cfg.model, code_vocab.len(), label_width(&message_vocab), cfg.seed)?;
    log::info!(
        "model: {} parameters, e_p width {}",
        ccvec_core::Parameters::num_params(&model.params),
        cfg.model.patch_dim()
    );
    let out = train(model, &examples, &cfg, |_, _| {})?;
    if let Some(last) = out.history.last() {
        log::info!("final loss {last:.6} ({} patches skipped)", out.skipped);
    }
    let checkpoint = Checkpoint {
        config: cfg,
        code_vocab,
        message_vocab,
        model: out.model,
        history: out.history,
    };
    save_checkpoint(&checkpoint, &a.out).with_context(|| format!("writing checkpoint {}", a.out.display()))?;
    Ok(Resolved::ok(
        Some(&a.out),
        json!({
            "corpus": a.corpus,
            "extra_corpus": a.extra_corpus,
            "vocab": a.vocab,
            "vocab_settings": a.vocab_settings,
            "out": a.out,
            "seed": cfg.seed,
            "config": cfg,
        }),
    ))
}

// ------------------------------------------------------------------- embed

fn open_checkpoint(path: &Path) -> Result<Checkpoint> {
    load_checkpoint(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn embed(a: EmbedArgs) -> Result<Resolved> {
    if a.per_file && a.format == Format::Csv {
        bail!("--per-file is only available with --format jsonl");
    }
    let ck = open_checkpoint(&a.model)?;
    let patches = read_corpus(&a.corpus)?;
    let records = extract_embeddings(&ck.model, &patches, &ck.code_vocab, a.per_file)?;
    if a.per_file {
        let mut w = create(&a.out)?;
        for r in &records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    } else {
        let format = match a.format {
            Format::Jsonl => ExportFormat::Jsonl,
            Format::Csv => ExportFormat::Csv,
        };
        export_features(&records, &a.out, format)?;
    }
    log::info!("wrote {} vectors of width {}", records.len(), ck.model.config.patch_dim());
    Ok(Resolved::ok(
        Some(&a.out),
        json!({ "model": a.model, "corpus": a.corpus, "format": a.format, "per_file": a.per_file, "out": a.out }),
    ))
}

// ---------------------------------------------------------------- retrieve

fn bag_index(patches: &[PatchChange]) -> Result<RetrievalIndex> {
    Ok(RetrievalIndex::new(
        patches
            .iter()
            .filter(|p| !p.message_tokens.is_empty())
            .map(|p| IndexEntry {
                id: p.id.clone(),
                vector: Vec::new(),
                message: p.message_tokens.clone(),
                code_tokens: p.code_tokens().cloned().collect(),
            })
            .collect(),
    )?)
}

fn retrieve(a: RetrieveArgs) -> Result<Resolved> {
    let index_patches = read_corpus(&a.index)?;
    let query_patches = read_corpus(&a.query)?;
    let opts = RetrievalOptions {
        k: a.k,
        bleu_stage: !a.no_bleu_stage,
    };
    let results = match a.method {
        Method::Loggen => {
            let Some(model_path) = &a.model else {
                bail!("--model is required for --method loggen");
            };
            let ck = open_checkpoint(model_path)?;
            let index = build_index(&ck.model, &index_patches, &ck.code_vocab)?;
            let queries = build_queries(&ck.model, &query_patches, &ck.code_vocab)?;
            retrieve_all(&queries, &index, opts)?
        }
        Method::Nngen => {
            let index = bag_index(&index_patches)?;
            let queries: Vec<Query> = query_patches
                .iter()
                .map(|p| Query {
                    id: p.id.clone(),
                    vector: Vec::new(),
                    code_tokens: p.code_tokens().cloned().collect(),
                })
                .collect();
            nngen_all(&queries, &index, opts)?
        }
    };
    let mut w: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    for r in &results {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    log::info!("answered {} queries", results.len());
    Ok(Resolved::ok(
        a.out.as_deref(),
        json!({
            "model": a.model,
            "index": a.index,
            "query": a.query,
            "k": a.k,
            "bleu_stage": opts.bleu_stage,
            "method": a.method,
            "out": a.out,
        }),
    ))
}

// --------------------------------------------------------------- eval-bleu

fn read_lines(path: &Path) -> Result<Vec<String>> {
    Ok(std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?
        .lines()
        .map(String::from)
        .collect())
}

fn report(out: Option<&Path>, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    println!("{text}");
    if let Some(p) = out {
        std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn eval_bleu(a: EvalBleuArgs) -> Result<Resolved> {
    let pairs: Vec<(Vec<String>, Vec<String>)> = match (&a.results, &a.reference, &a.hyp, &a.ref_file) {
        (Some(results), Some(reference), _, _) => {
            let truth: HashMap<String, Vec<String>> = read_corpus(reference)?
                .into_iter()
                .map(|p| (p.id, p.message_tokens))
                .collect();
            let mut pairs = Vec::new();
            for (i, line) in read_lines(results)?.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let r: RetrievalResult = serde_json::from_str(line)
                    .with_context(|| format!("{}:{}: invalid result", results.display(), i + 1))?;
                let Some(reference) = truth.get(&r.query_id) else {
                    bail!("query {} is not in {}", r.query_id, reference.display());
                };
                pairs.push((tokenize_message(&r.message), reference.clone()));
            }
            pairs
        }
        (_, _, Some(hyp), Some(refs)) => {
            let (h, r) = (read_lines(hyp)?, read_lines(refs)?);
            if h.len() != r.len() {
                bail!("line count mismatch: {} != {}", h.len(), r.len());
            }
            h.iter().zip(&r).map(|(h, r)| (tokenize_message(h), tokenize_message(r))).collect()
        }
        _ => bail!("give either --results with --reference, or --hyp with --ref"),
    };
    let total = pairs.len();
    let pairs: Vec<_> = pairs.into_iter().filter(|(_, r)| !r.is_empty()).collect();
    let skipped = total - pairs.len();
    if skipped > 0 {
        log::warn!("{skipped} pairs with an empty reference skipped");
    }
    if pairs.is_empty() {
        bail!("no pairs with a non-empty reference");
    }
    let corpus = corpus_bleu4::<String, _, _>(&pairs)?;
    let mean = pairs.iter().map(|(c, r)| bleu4(c, r)).sum::<ccvec_core::Result<f64>>()? / pairs.len() as f64;
    report(
        a.out.as_deref(),
        &json!({ "pairs": pairs.len(), "skipped": skipped, "corpus_bleu4": corpus, "mean_sentence_bleu4": mean }),
    )?;
    Ok(Resolved::ok(
        a.out.as_deref(),
        json!({ "results": a.results, "reference": a.reference, "hyp": a.hyp, "ref": a.ref_file, "out": a.out }),
    ))
}

// ---------------------------------------------------------------- eval-cls

fn parse_label(s: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        other => bail!("label {other:?} is not 0/1"),
    }
}

fn csv_columns(path: &Path, wanted: &[&str]) -> Result<Vec<Vec<String>>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let idx: Vec<usize> = wanted
        .iter()
        .map(|w| {
            headers
                .iter()
                .position(|h| h.trim() == *w)
                .with_context(|| format!("{} has no {w:?} column", path.display()))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        rows.push(idx.iter().map(|&i| rec.get(i).unwrap_or("").to_string()).collect());
    }
    Ok(rows)
}

fn eval_cls(a: EvalClsArgs) -> Result<Resolved> {
    let (labels, scores, mode) = if let Some(path) = &a.scores {
        let mut labels = Vec::new();
        let mut scores = Vec::new();
        for row in csv_columns(path, &["label", "score"])? {
            labels.push(parse_label(&row[0])?);
            scores.push(row[1].trim().parse::<f64>().with_context(|| format!("score {:?}", row[1]))?);
        }
        (labels, scores, "scores")
    } else if let (Some(features), Some(label_path)) = (&a.features, &a.labels) {
        let truth: HashMap<String, bool> = csv_columns(label_path, &["id", "label"])?
            .into_iter()
            .map(|r| Ok((r[0].clone(), parse_label(&r[1])?)))
            .collect::<Result<_>>()?;
        let (xs, ys): (Vec<Vec<f64>>, Vec<bool>) = read_features_jsonl(features)?
            .into_iter()
            .filter_map(|r| truth.get(&r.id).map(|&y| (r.vector, y)))
            .unzip();
        if !(0.0..1.0).contains(&a.train_fraction) || a.train_fraction == 0.0 {
            bail!("--train-fraction must be in (0, 1)");
        }
        let cut = (xs.len() as f64 * a.train_fraction).round() as usize;
        if cut == 0 || cut >= xs.len() {
            bail!("{} labelled rows cannot be split at fraction {}", xs.len(), a.train_fraction);
        }
        let probe = LinearProbe::fit(&xs[..cut], &ys[..cut], ProbeConfig::default())?;
        let scores = xs[cut..].iter().map(|x| probe.predict(x)).collect();
        (ys[cut..].to_vec(), scores, "probe")
    } else {
        bail!("give --scores, or --features with --labels");
    };
    let m = classification_metrics(&labels, &scores, a.threshold)?;
    if m.auc.is_none() {
        log::warn!("AUC undefined: evaluation labels contain a single class");
    }
    report(
        a.out.as_deref(),
        &json!({
            "mode": mode,
            "n": labels.len(),
            "threshold": a.threshold,
            "accuracy": m.accuracy,
            "precision": m.precision,
            "recall": m.recall,
            "f1": m.f1,
            "auc": m.auc,
            "confusion": m.confusion,
        }),
    )?;
    Ok(Resolved::ok(
        a.out.as_deref(),
        json!({
            "scores": a.scores,
            "features": a.features,
            "labels": a.labels,
            "train_fraction": a.train_fraction,
            "threshold": a.threshold,
            "out": a.out,
        }),
    ))
}

// -------------------------------------------------------------- grad-check

fn grad_check(a: GradCheckArgs) -> Result<Resolved> {
    let cfg = resolve_config(tiny_train_config(), &a.overrides)?;
    let patches = match &a.corpus {
        Some(p) => read_corpus(p)?,
        None => synthetic_patches(16, cfg.seed),
    };
    let (vc, vm) = build_vocabularies(&patches, 1, 1, 10_000)?;
    let batch: Vec<_> = prepare_examples(&patches, cfg.model.shape, &vc, &vm)
        .into_iter()
        .filter(|e| !e.labels.is_all_zero())
        .take(a.patches.max(1))
        .map(|e| (e.tensor, e.labels))
        .collect();
    let mut model = Model::init(cfg.model, vc.len(), label_width(&vm), cfg.seed)?;
    if a.jitter > 0.0 {
        jitter_parameters(&mut model.params, a.jitter, cfg.seed);
    }
    let params = ccvec_core::Parameters::num_params(&model.params);
    if params > 100_000 {
        log::warn!("checking {params} parameters by finite differences will be slow");
    }
    let rep = gradient_check(&model, &batch, cfg.lambda, a.tolerance);
    for g in &rep.groups {
        println!(
            "{} {:<40} entries {:>6}  max rel err {:.3e}  max abs err {:.3e}",
            if g.passed { "ok  " } else { "FAIL" },
            g.name,
            g.entries,
            g.max_rel_error,
            g.max_abs_error
        );
    }
    println!(
        "{} groups, {} failing, tolerance {:e}",
        rep.groups.len(),
        rep.failures().count(),
        rep.tolerance
    );
    if let Some(out) = &a.out {
        std::fs::write(out, serde_json::to_string_pretty(&rep)? + "\n")
            .with_context(|| format!("writing {}", out.display()))?;
    }
    let failure = (!rep.passed()).then(|| {
        Internal(format!(
            "gradient check failed for {:?}",
            rep.failures().map(|g| g.name.clone()).collect::<Vec<_>>()
        ))
    });
    Ok(Resolved {
        out: a.out.clone(),
        settings: json!({
            "corpus": a.corpus,
            "patches": batch.len(),
            "tolerance": a.tolerance,
            "jitter": a.jitter,
            "seed": cfg.seed,
            "config": cfg,
            "out": a.out,
        }),
        failure,
    })
}
