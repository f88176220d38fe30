//! The `pptgnn` command line. [`run`] is the whole program minus process exit,
//! so tests can drive it in-process.
//!
//! Exit codes: 0 success, 1 I/O or format failure, 2 usage or configuration,
//! 3 incompatible checkpoint/codec/data, 4 empty data.

mod config;

pub use config::{RunConfig, Source, SEED_ENV};

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::flow::{
    fit_codec, load_flow_csv, read_flow_cache, sort_flows, strip_labels, write_flow_cache, ColumnSchema, FeatureCodec,
    FlowRecord, LabelVocabulary,
};
use crate::kv::KvText;
use crate::model::{load_checkpoint, save_checkpoint, CheckpointMeta, HeteroGraph, ModelConfig, StGnn};
use crate::pretrain::{pretrain, transfer_weights, CorpusEntry, CorpusMode, PretrainCorpus};
use crate::synth::{synth_generator, SynthSpec};
use crate::tensor::Rng;
use crate::train::{
    ablation_csv, ablation_suite, chronological_split, confusion_csv, epoch_log_csv, evaluate, fewshot, fewshot_csv,
    metrics_csv, metrics_summary, per_class_csv, predict_flows, prepare_graphs, pretrain_log_csv, target_labels,
    timing_csv, train, undersample, AblationVariant, ChronoSplit, FewShotPlan, MetricsReport, TimingEntry,
};
use crate::window::{assemble_all, build_snapshots_on_grid, dump_graph, WindowGrid};

#[derive(Parser, Debug)]
#[command(
    name = "pptgnn",
    version,
    about = "Spatio-temporal GNN for flow-level intrusion detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a flow CSV into a binary flow cache.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// `field = column` mapping; identity mapping when omitted.
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic dataset as a flow cache.
    Synth {
        #[arg(long)]
        generator: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 400)]
        flows: usize,
        #[arg(long, default_value_t = 40.0)]
        duration: f64,
        #[arg(long, default_value_t = 1.0)]
        window_size: f64,
        #[arg(long, default_value_t = 0)]
        variant: u32,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build window graphs and dump them as text.
    Build {
        #[command(flatten)]
        run: RunArgs,
        /// Dump at most this many graphs.
        #[arg(long, default_value_t = 10)]
        limit: usize,
    },
    /// Self-supervised link-prediction pre-training.
    Pretrain {
        #[command(flatten)]
        run: RunArgs,
        /// Additional pre-training datasets.
        #[arg(long = "corpus")]
        corpus: Vec<PathBuf>,
        /// Dataset id (file stem) of the fine-tuning target, to record and
        /// check the corpus as in- or out-of-context.
        #[arg(long)]
        target: Option<String>,
    },
    /// Supervised training from scratch.
    Train {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Supervised training initialised from a pre-trained checkpoint.
    Finetune {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        from_checkpoint: Option<PathBuf>,
        /// Train on a class-balanced subset holding this fraction of the labels.
        #[arg(long)]
        fraction: Option<f64>,
    },
    /// Score a checkpoint on one split of a dataset.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Codec file; defaults to `codec.txt` next to the checkpoint.
        #[arg(long)]
        codec: Option<PathBuf>,
        /// train, val, test or all
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Spatial-only vs temporal vs pre-trained temporal on one split.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Label-budget sweep over fractions and pre-training modes.
    Fewshot {
        #[command(flatten)]
        run: RunArgs,
        /// Out-of-context pre-training datasets.
        #[arg(long = "external")]
        external: Vec<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Flow cache (or CSV with canonical column names).
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Flat `section.key = value` file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Epochs of this command's training stage.
    #[arg(long)]
    epochs: Option<usize>,
    /// Learning rate of this command's training stage.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    window_size: Option<f64>,
    /// Any setting, as `section.key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

/// Runs one command and returns the process exit code.
pub fn run<I, T>(args: I, env_seed: Option<String>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command, env_seed.as_deref()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::UnknownStrategy { .. } | Error::MissingColumn { .. } | Error::Schema(_) => 2,
        Error::Incompatible(_) => 3,
        Error::EmptyData(_) | Error::EmptySplit => 4,
        _ => 1,
    }
}

fn dispatch(command: Command, env_seed: Option<&str>) -> Result<()> {
    match command {
        Command::Ingest { input, schema, out } => cmd_ingest(&input, schema.as_deref(), &out),
        Command::Synth {
            generator,
            out,
            flows,
            duration,
            window_size,
            variant,
            seed,
        } => {
            let seed = match seed {
                Some(s) => s,
                None => env_seed.map_or(Ok(0), |s| {
                    s.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("{SEED_ENV} must be an integer, got `{s}`")))
                })?,
            };
            let spec = SynthSpec {
                flows,
                duration,
                window_size,
                variant,
            };
            let ds = synth_generator(&generator)?.generate(&spec, &mut Rng::new(seed));
            write_flow_cache(&out, &ds.records, &ds.vocabulary)?;
            println!(
                "wrote {} flows ({} classes) to {}",
                ds.records.len(),
                ds.vocabulary.len(),
                out.display()
            );
            Ok(())
        }
        Command::Build { run, limit } => {
            let ctx = Context::new(&run, env_seed, "build", None)?;
            cmd_build(&ctx, limit)
        }
        Command::Pretrain { run, corpus, target } => {
            let ctx = Context::new(&run, env_seed, "pretrain", Some("pretrain"))?;
            cmd_pretrain(&ctx, &corpus, target.as_deref())
        }
        Command::Train { run } => {
            let ctx = Context::new(&run, env_seed, "train", Some("train"))?;
            cmd_train(&ctx, None, None)
        }
        Command::Finetune {
            run,
            from_checkpoint,
            fraction,
        } => {
            let from = from_checkpoint.ok_or_else(|| Error::Config("finetune requires --from-checkpoint".into()))?;
            if let Some(f) = fraction {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(Error::Config(format!("--fraction must be in (0, 1], got {f}")));
                }
            }
            let ctx = Context::new(&run, env_seed, "finetune", Some("finetune"))?;
            cmd_train(&ctx, Some(&from), fraction)
        }
        Command::Evaluate {
            run,
            checkpoint,
            codec,
            split,
        } => {
            let ctx = Context::new(&run, env_seed, "evaluate", None)?;
            cmd_evaluate(&ctx, &checkpoint, codec.as_deref(), &split)
        }
        Command::Ablate { run } => {
            let ctx = Context::new(&run, env_seed, "ablate", Some("train"))?;
            cmd_ablate(&ctx)
        }
        Command::Fewshot { run, external } => {
            let ctx = Context::new(&run, env_seed, "fewshot", Some("finetune"))?;
            cmd_fewshot(&ctx, &external)
        }
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Sorted flows and their vocabulary from a flow cache or a canonical CSV.
pub fn load_dataset(path: &Path) -> Result<(Vec<FlowRecord>, LabelVocabulary)> {
    let (mut flows, vocab) = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let o = load_flow_csv(path, &ColumnSchema::default())?;
        (o.records, o.vocabulary)
    } else {
        read_flow_cache(path)?
    };
    sort_flows(&mut flows);
    Ok((flows, vocab))
}

fn dataset_id(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

/// Resolved configuration, loaded data and output directory of one command.
struct Context {
    config: RunConfig,
    /// `{command}-s{seed}`, prefixed to every report file name.
    run_id: String,
    data_path: PathBuf,
    flows: Vec<FlowRecord>,
    vocabulary: LabelVocabulary,
    out_dir: PathBuf,
}

impl Context {
    /// `stage` is the config section that `--epochs` / `--lr` address.
    fn new(run: &RunArgs, env_seed: Option<&str>, command: &str, stage: Option<&str>) -> Result<Self> {
        let file = match &run.config {
            Some(p) => Some(KvText::parse(&read_text(p)?).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?),
            None => None,
        };
        let mut flags = KvText::new();
        for s in &run.set {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{s}`")))?;
            flags.set(k.trim(), v.trim());
        }
        if let Some(seed) = run.seed {
            flags.set("seed", seed);
        }
        if let Some(w) = run.window_size {
            flags.set("graph.window_size", w);
        }
        for (value, key) in [
            (run.epochs.map(|e| e.to_string()), "epochs"),
            (run.lr.map(|l| l.to_string()), "lr"),
        ] {
            if let Some(v) = value {
                let stage = stage.ok_or_else(|| Error::Config(format!("--{key} does not apply to `{command}`")))?;
                flags.set(format!("{stage}.{key}"), v);
            }
        }
        let config = RunConfig::resolve(file.as_ref(), env_seed, &flags)?;
        fs::create_dir_all(&run.out_dir).map_err(|e| Error::io(&run.out_dir, e))?;
        let header = format!("# command: {command}\n# data: {}\n", run.data.display());
        write(&run.out_dir, "config.txt", &(header + &config.to_text()))?;
        let (flows, vocabulary) = load_dataset(&run.data)?;
        Ok(Context {
            run_id: format!("{command}-s{}", config.seed),
            config,
            data_path: run.data.clone(),
            flows,
            vocabulary,
            out_dir: run.out_dir.clone(),
        })
    }

    fn split(&self) -> Result<ChronoSplit> {
        if self.flows.is_empty() {
            return Err(Error::EmptyData(format!("{} holds no flows", self.data_path.display())));
        }
        let s = chronological_split(&self.flows, self.config.split, self.config.graph.window_size)?;
        for w in &s.warnings {
            eprintln!("warning: {w}");
        }
        Ok(s)
    }

    fn model_config(&self, codec: &FeatureCodec) -> ModelConfig {
        ModelConfig {
            num_classes: self.vocabulary.len().max(2),
            feature_dim: codec.feature_dim(),
            ..self.config.model.clone()
        }
    }

    fn meta(&self, model: &ModelConfig, codec: &FeatureCodec, stage: &str) -> CheckpointMeta {
        let mut extra = KvText::new();
        extra.set("run.stage", stage);
        extra.set("run.seed", self.config.seed);
        CheckpointMeta {
            model: model.clone(),
            graph: self.config.graph.clone(),
            codec_hash: codec.hash(),
            vocabulary: self.vocabulary.clone(),
            extra,
        }
    }

    fn names(&self) -> Vec<String> {
        self.vocabulary.names().to_vec()
    }

    fn write(&self, name: &str, contents: &str) -> Result<()> {
        write(&self.out_dir, name, contents)
    }

    fn write_named(&self, name: &str, contents: &str) -> Result<()> {
        write(&self.out_dir, &format!("{}_{name}", self.run_id), contents)
    }

    fn write_report(&self, prefix: &str, report: &MetricsReport) -> Result<()> {
        let names = self.names();
        self.write_named(&format!("{prefix}metrics.csv"), &metrics_csv(report))?;
        self.write_named(&format!("{prefix}per_class.csv"), &per_class_csv(report, &names))?;
        self.write_named(
            &format!("{prefix}confusion.csv"),
            &confusion_csv(&report.confusion, &names, false),
        )?;
        self.write_named(
            &format!("{prefix}confusion_normalized.csv"),
            &confusion_csv(&report.confusion, &names, true),
        )?;
        self.write_named(&format!("{prefix}summary.txt"), &metrics_summary(report, &names))
    }
}

fn cmd_ingest(input: &Path, schema: Option<&Path>, out: &Path) -> Result<()> {
    let schema = match schema {
        Some(p) => ColumnSchema::parse(&read_text(p)?)?,
        None => ColumnSchema::default(),
    };
    let o = load_flow_csv(input, &schema)?;
    for d in o.diagnostics.iter().take(20) {
        eprintln!("line {}: {}", d.line, d.message);
    }
    if o.diagnostics.len() > 20 {
        eprintln!("... {} more rejected rows", o.diagnostics.len() - 20);
    }
    write_flow_cache(out, &o.records, &o.vocabulary)?;
    println!("accepted {} rejected {}", o.accepted, o.rejected);
    let mut counts = vec![0usize; o.vocabulary.len()];
    let mut unlabelled = 0;
    for r in &o.records {
        match r.label {
            Some(l) => counts[l] += 1,
            None => unlabelled += 1,
        }
    }
    for (name, c) in o.vocabulary.names().iter().zip(counts) {
        println!("  {name}: {c}");
    }
    if unlabelled > 0 {
        println!("  (unlabelled): {unlabelled}");
    }
    Ok(())
}

fn cmd_build(ctx: &Context, limit: usize) -> Result<()> {
    let g = &ctx.config.graph;
    let origin = ctx.flows.first().map_or(0.0, |f| f.start_time);
    let snaps: Vec<_> = build_snapshots_on_grid(&ctx.flows, g, origin, |_| Vec::new())?
        .into_iter()
        .map(std::sync::Arc::new)
        .collect();
    let graphs = assemble_all(&snaps, g);
    let mut dump = String::new();
    for tg in graphs.iter().take(limit) {
        dump.push_str(&dump_graph(tg));
        dump.push('\n');
    }
    ctx.write_named("graphs.txt", &dump)?;
    println!(
        "{} windows, {} graphs ({} dumped)",
        snaps.len(),
        graphs.len(),
        graphs.len().min(limit)
    );
    Ok(())
}

fn cmd_pretrain(ctx: &Context, extra: &[PathBuf], target: Option<&str>) -> Result<()> {
    let mut datasets = vec![(ctx.data_path.clone(), ctx.flows.clone())];
    for p in extra {
        datasets.push((p.clone(), load_dataset(p)?.0));
    }
    let ids: Vec<String> = datasets.iter().map(|(p, _)| dataset_id(p)).collect();
    if let Some(t) = target {
        let mode = if ids.iter().any(|i| i == t) {
            CorpusMode::InContext
        } else {
            CorpusMode::OutOfContext
        };
        let entries = datasets
            .iter()
            .zip(&ids)
            .map(|((p, _), id)| CorpusEntry {
                id: id.clone(),
                path: p.display().to_string(),
            })
            .collect();
        let corpus = PretrainCorpus::new(mode, t, entries)?;
        ctx.write("corpus.txt", &corpus.manifest().to_text())?;
        println!("corpus is {mode} for target `{t}`");
    }
    // The target's own data contributes its training split only.
    let mut parts = Vec::new();
    for ((path, flows), id) in datasets.iter().zip(&ids) {
        let flows = if Some(id.as_str()) == target && !flows.is_empty() {
            chronological_split(flows, ctx.config.split, ctx.config.graph.window_size)?.train
        } else {
            flows.clone()
        };
        if flows.is_empty() {
            return Err(Error::EmptyData(format!("{} holds no flows", path.display())));
        }
        parts.push(strip_labels(&flows));
    }
    let all: Vec<FlowRecord> = parts.iter().flatten().cloned().collect();
    let codec = fit_codec(&all)?;
    let mut graphs = Vec::new();
    for flows in &parts {
        let origin = flows[0].start_time;
        graphs.extend(prepare_graphs(flows, &codec, &ctx.config.graph, origin)?);
    }
    let model_cfg = ctx.model_config(&codec);
    let model = StGnn::new(model_cfg.clone())?;
    let started = Instant::now();
    let outcome = pretrain(&model, &graphs, &ctx.config.pretrain)?;
    let secs = started.elapsed().as_secs_f64();
    save_checkpoint(
        &ctx.out_dir.join("checkpoint.bin"),
        &outcome.params,
        &ctx.meta(&model_cfg, &codec, "pretrain"),
    )?;
    ctx.write("codec.txt", &codec.canonical_text())?;
    ctx.write_named("pretrain_log.csv", &pretrain_log_csv(&outcome.log))?;
    ctx.write_named("timing.csv", &timing_csv(&[TimingEntry::new("pretrain", secs)]))?;
    if let Some(last) = outcome.log.last() {
        println!(
            "pre-trained on {} graphs: loss {:.4}, accuracy {:.4}",
            graphs.len(),
            last.loss,
            last.accuracy
        );
    }
    Ok(())
}

fn cmd_train(ctx: &Context, from: Option<&Path>, fraction: Option<f64>) -> Result<()> {
    let split = ctx.split()?;
    let codec = fit_codec(&split.train)?;
    let model_cfg = ctx.model_config(&codec);
    let model = StGnn::new(model_cfg.clone())?;
    let g = &ctx.config.graph;
    let mut train_g = prepare_graphs(&split.train, &codec, g, split.origin)?;
    let val_g = prepare_graphs(&split.val, &codec, g, split.origin)?;
    let test_g = prepare_graphs(&split.test, &codec, g, split.origin)?;
    if let Some(f) = fraction {
        let grid = WindowGrid {
            origin: split.origin,
            size: g.window_size,
        };
        let (windows, violation) = undersample(&split.train, grid, model_cfg.num_classes, ctx.config.seed).select(f);
        if violation {
            eprintln!("warning: class coverage needed windows beyond the proportional prefix");
        }
        train_g.retain(|g| windows.contains(&g.target_window));
    }

    let mut rng = Rng::new(ctx.config.seed);
    let (init, stage, train_cfg) = match from {
        None => (model.init_params(&mut rng), "train", &ctx.config.train),
        Some(path) => {
            let (params, meta) = load_checkpoint(path)?;
            if meta.graph != *g {
                eprintln!("warning: checkpoint was pre-trained with different graph settings");
            }
            (
                transfer_weights(&params, &model, &mut rng)?,
                "finetune",
                &ctx.config.finetune,
            )
        }
    };
    let outcome = train(&model, &train_g, &val_g, init, train_cfg)?;
    save_checkpoint(
        &ctx.out_dir.join("checkpoint.bin"),
        &outcome.params,
        &ctx.meta(&model_cfg, &codec, stage),
    )?;
    ctx.write("codec.txt", &codec.canonical_text())?;
    ctx.write_named("epoch_log.csv", &epoch_log_csv(&outcome.log))?;
    ctx.write_named("timing.csv", &timing_csv(&[TimingEntry::new(stage, outcome.seconds)]))?;
    let report = if target_labels(&test_g).is_empty() {
        eprintln!("warning: test split has no labelled target flows; no test report written");
        None
    } else {
        Some(evaluate(&model, &outcome.params, &test_g)?)
    };
    if let Some(r) = &report {
        ctx.write_report("test_", r)?;
        print!("{}", metrics_summary(r, &ctx.names()));
    }
    println!(
        "best epoch {} of {} ({} training graphs)",
        outcome.best_epoch,
        train_cfg.epochs,
        train_g.len()
    );
    Ok(())
}

fn cmd_evaluate(ctx: &Context, checkpoint: &Path, codec_path: Option<&Path>, which: &str) -> Result<()> {
    let (params, meta) = load_checkpoint(checkpoint)?;
    let codec_path = codec_path.map_or_else(
        || checkpoint.parent().unwrap_or(Path::new(".")).join("codec.txt"),
        Path::to_path_buf,
    );
    let codec = FeatureCodec::parse_canonical(&read_text(&codec_path)?)?;
    if codec.hash() != meta.codec_hash {
        return Err(Error::Incompatible(format!(
            "codec {} does not match the checkpoint (hash {} vs {})",
            codec_path.display(),
            codec.hash(),
            meta.codec_hash
        )));
    }
    if meta.vocabulary != ctx.vocabulary {
        return Err(Error::Incompatible(format!(
            "label vocabulary differs: checkpoint [{}], data [{}]",
            meta.vocabulary.canonical(),
            ctx.vocabulary.canonical()
        )));
    }
    let expected = ModelConfig {
        feature_dim: codec.feature_dim(),
        num_classes: ctx.vocabulary.len().max(2),
        flow_encoding_dim: meta.graph.flow_encoding_dim,
        window_encoding_dim: meta.graph.window_encoding_dim,
        ..meta.model.clone()
    };
    meta.check_compatible(&expected)?;
    let model = StGnn::new(meta.model.clone())?;
    model
        .check_params(&params)
        .map_err(|e| Error::Incompatible(e.to_string()))?;

    // The checkpoint's own graph settings define the inputs it understands.
    let split = if ctx.flows.is_empty() {
        None
    } else {
        Some(chronological_split(
            &ctx.flows,
            ctx.config.split,
            meta.graph.window_size,
        )?)
    };
    let (flows, origin): (&[FlowRecord], f64) = match (which, &split) {
        (_, None) => (&[], 0.0),
        ("all", Some(s)) => (&ctx.flows, s.origin),
        ("train", Some(s)) => (&s.train, s.origin),
        ("val", Some(s)) => (&s.val, s.origin),
        ("test", Some(s)) => (&s.test, s.origin),
        (other, _) => {
            return Err(Error::Config(format!(
                "--split must be train, val, test or all, got `{other}`"
            )))
        }
    };
    let graphs: Vec<HeteroGraph> = prepare_graphs(flows, &codec, &meta.graph, origin)?;
    if target_labels(&graphs).is_empty() {
        return Err(Error::EmptyData("no target flows".into()));
    }
    let preds = predict_flows(&model, &params, &graphs)?;
    let mut csv = String::from("flow_id,predicted,label\n");
    for (id, p, l) in &preds {
        csv.push_str(&format!("{id},{p},{}\n", l.map_or_else(String::new, |l| l.to_string())));
    }
    ctx.write_named("predictions.csv", &csv)?;
    let report = evaluate(&model, &params, &graphs)?;
    ctx.write_report("", &report)?;
    print!("{}", metrics_summary(&report, &ctx.names()));
    Ok(())
}

fn cmd_ablate(ctx: &Context) -> Result<()> {
    let split = ctx.split()?;
    let codec = fit_codec(&split.train)?;
    let model_cfg = ctx.model_config(&codec);
    let rows = ablation_suite(
        &model_cfg,
        &ctx.config.graph,
        &split,
        &codec,
        &ctx.config.train,
        &ctx.config.pretrain,
        &AblationVariant::ALL,
    )?;
    ctx.write_named("ablation.csv", &ablation_csv(&rows))?;
    let timings: Vec<TimingEntry> = rows
        .iter()
        .map(|r| TimingEntry::new(r.variant.name(), r.seconds))
        .collect();
    ctx.write_named("timing.csv", &timing_csv(&timings))?;
    for r in &rows {
        ctx.write_report(&format!("{}_", r.variant.name().replace('+', "_")), &r.metrics)?;
        println!(
            "{:<18} macro F1 {:.4}  weighted F1 {:.4}",
            r.variant.name(),
            r.metrics.multiclass.macro_avg,
            r.metrics.multiclass.weighted
        );
    }
    Ok(())
}

fn cmd_fewshot(ctx: &Context, external: &[PathBuf]) -> Result<()> {
    let split = ctx.split()?;
    let codec = fit_codec(&split.train)?;
    let model_cfg = ctx.model_config(&codec);
    // Out-of-context data is label-stripped and encoded with the target's codec.
    let mut ext: Vec<HeteroGraph> = Vec::new();
    for p in external {
        let flows = strip_labels(&load_dataset(p)?.0);
        if let Some(first) = flows.first() {
            ext.extend(prepare_graphs(&flows, &codec, &ctx.config.graph, first.start_time)?);
        }
    }
    let plan = FewShotPlan {
        fractions: ctx.config.fewshot_fractions.clone(),
        modes: ctx.config.fewshot_modes.clone(),
        reference: ctx.config.train.clone(),
        finetune: ctx.config.finetune.clone(),
        pretrain: ctx.config.pretrain.clone(),
        seed: ctx.config.seed,
    };
    let out = fewshot(&model_cfg, &ctx.config.graph, &split, &codec, &plan, &ext)?;
    ctx.write_named("fewshot.csv", &fewshot_csv(&out.reference, &out.rows))?;
    let timings: Vec<TimingEntry> = std::iter::once(&out.reference)
        .chain(&out.rows)
        .map(|r| TimingEntry::new(format!("{}@{}", r.mode, r.fraction), r.seconds))
        .collect();
    ctx.write_named("timing.csv", &timing_csv(&timings))?;
    println!("reference macro F1 {:.4}", out.reference.macro_f1);
    for r in &out.rows {
        println!(
            "{:<15} {:>5}  macro F1 {:.4}  loss {}",
            r.mode.name(),
            r.fraction,
            r.macro_f1,
            r.loss_pct.map_or_else(|| "n/a".to_string(), |l| format!("{l:.1}%"))
        );
    }
    Ok(())
}
