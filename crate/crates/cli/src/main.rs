use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use poshan_core::eval::{attention_trace, pattern_exports, predict};
use poshan_core::gradcheck::GradCheckConfig;
use poshan_core::text::io::{read_corpus, read_dataset, read_sidecar, write_dataset};
use poshan_core::text::{derive_dataset, split_stratified, TagProvider};
use poshan_core::toy::{gradient_suite, toy_config};
use poshan_core::train::{train_with, EpochLog};
use poshan_core::{Checkpoint, Error, ModelKind, TrainConfig};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_CHECK: u8 = 3;

#[derive(Parser)]
#[command(name = "poshan", version, about = "Headline incongruence detection with cardinal-guided attention")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tag a raw corpus and keep records whose headline has a cardinal.
    Derive(DeriveArgs),
    /// Stratified 70/10/20 train/val/test split.
    Split(SplitArgs),
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint and write a JSON report.
    Eval(EvalArgs),
    /// Export word and sentence attention weights for one record.
    DumpAttention(DumpAttentionArgs),
    /// Export learned pattern embeddings and their majority labels.
    DumpPatterns(DumpPatternsArgs),
    /// Finite-difference gradient check of a model on a toy document.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct DeriveArgs {
    #[arg(long)]
    input: PathBuf,
    /// JSONL sidecar with externally produced Penn tags.
    #[arg(long, conflicts_with = "fallback_tagger", required_unless_present = "fallback_tagger")]
    tags: Option<PathBuf>,
    /// Use the built-in rule tagger instead of a sidecar.
    #[arg(long)]
    fallback_tagger: bool,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// `key = value` config file; missing keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    val: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch TSV log; defaults to `<out>.log.tsv`.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Override a config key, e.g. `--set max-epochs=3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct DumpAttentionArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    record_id: String,
    /// Derived dataset holding the record.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DumpPatternsArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Majority-label TSV; defaults to `<out>` with a `.labels.tsv` suffix.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long)]
    model: ModelKind,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn derive(args: DeriveArgs) -> anyhow::Result<()> {
    let raw = read_corpus(&args.input)?;
    let provider = match &args.tags {
        Some(path) => TagProvider::Sidecar(read_sidecar(path)?),
        None => TagProvider::FallbackRule,
    };
    let (records, summary) = derive_dataset(&raw, &provider)?;
    write_dataset(&args.output, &records)?;
    print!("{}", summary.to_tsv());
    Ok(())
}

fn split(args: SplitArgs) -> anyhow::Result<()> {
    let records = read_dataset(&args.input)?;
    let split = split_stratified(&records, args.seed);
    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    for (name, part) in [("train", &split.train), ("val", &split.val), ("test", &split.test)] {
        write_dataset(&args.out_dir.join(format!("{name}.jsonl")), part)?;
        println!("{name}\t{}", part.len());
    }
    Ok(())
}

fn train(args: TrainArgs) -> anyhow::Result<()> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            TrainConfig::parse(&text)?
        }
        None => TrainConfig::default(),
    };
    if let Some(model) = args.model {
        config.model = model;
    }
    for kv in &args.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        config.set(k.trim(), v.trim())?;
    }
    config.validate()?;
    let train = read_dataset(&args.train)?;
    let val = read_dataset(&args.val)?;
    let log_path = args.log.unwrap_or_else(|| with_suffix(&args.out, ".log.tsv"));
    let mut log = String::from(EpochLog::HEADER);
    log.push('\n');
    let out = train_with(&config, &train, &val, |entry| {
        log.push_str(&entry.tsv_line());
        log.push('\n');
        fs::write(&log_path, &log).map_err(|e| Error::Io {
            path: log_path.clone(),
            source: e,
        })
    })?;
    out.checkpoint.save(&args.out)?;
    println!(
        "best epoch {} val loss {:.6}",
        out.checkpoint.epoch,
        out.checkpoint.val_history[out.checkpoint.epoch - 1]
    );
    Ok(())
}

fn eval(args: EvalArgs) -> anyhow::Result<()> {
    let checkpoint = Checkpoint::load(&args.ckpt)?;
    let records = read_dataset(&args.test)?;
    let report = predict(&checkpoint, &records)?;
    write(&args.report, serde_json::to_string_pretty(&report)?)?;
    let auc = report.auc.map_or("undefined".to_string(), |a| format!("{a:.4}"));
    println!("macro_f1\t{:.4}\nauc\t{auc}", report.macro_f1);
    Ok(())
}

fn dump_attention(args: DumpAttentionArgs) -> anyhow::Result<()> {
    let checkpoint = Checkpoint::load(&args.ckpt)?;
    let records = read_dataset(&args.data)?;
    let record = records
        .iter()
        .find(|r| r.id == args.record_id)
        .ok_or_else(|| Error::RecordNotFound(args.record_id.clone()))?;
    let (net, store) = checkpoint.network()?;
    let trace = attention_trace(&net, &store, checkpoint.train_config.limits(), record)?;
    write(&args.out, serde_json::to_string_pretty(&trace)?)
}

fn dump_patterns(args: DumpPatternsArgs) -> anyhow::Result<()> {
    let checkpoint = Checkpoint::load(&args.ckpt)?;
    let (embeddings, labels) = pattern_exports(&checkpoint)?;
    write(&args.out, embeddings)?;
    write(&args.labels.unwrap_or_else(|| with_suffix(&args.out, ".labels.tsv")), labels)
}

fn gradcheck(args: GradcheckArgs) -> anyhow::Result<bool> {
    let report = gradient_suite(&toy_config(args.model), args.seed, &GradCheckConfig::default())?;
    print!("{}", report.to_tsv());
    println!("max_rel_error\t{:.3e}", report.max_rel_error());
    Ok(report.pass())
}

/// The error chain joined by ": ", skipping causes a message already quotes.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let msg = cause.to_string();
        if out.ends_with(&msg) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&msg);
    }
    out
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_)) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Derive(a) => derive(a),
        Command::Split(a) => split(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::DumpAttention(a) => dump_attention(a),
        Command::DumpPatterns(a) => dump_patterns(a),
        Command::Gradcheck(a) => match gradcheck(a) {
            Ok(true) => Ok(()),
            Ok(false) => {
                eprintln!("error: gradient check failed");
                return ExitCode::from(EXIT_CHECK);
            }
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
