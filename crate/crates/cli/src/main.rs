//! Command-line surface: annotate transcripts, build event datasets, run
//! evaluations and sweeps, and collect reports.

mod config;
mod manifest;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use truelearn::content::{
    annotate_lectures, content_hash, fragment_transcript, slice_chars, AnnotateOptions, AnnotationCache,
    FragmentAnnotation, Vocabulary, WikifierClient, DEFAULT_FRAGMENT_LEN,
};
use truelearn::corpus::{
    build_events, read_events, read_lecture_durations, read_view_logs, select_cohort, summarize, write_events,
    write_summary, EngagementEvent,
};
use truelearn::eval::{
    comparison_table, evaluate_sequential, grid_search, split_learners, write_sweep_csv, EvalReport, Objective,
    SplitInfo,
};
use truelearn::models::{ModelConfig, ModelKind};
use truelearn::synth::{generate, SynthConfig};

use manifest::ManifestBuilder;

const DEFAULT_ENDPOINT: &str = "http://www.wikifier.org/annotate-article";

/// A failed command: the message and the process exit status.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub const USAGE: u8 = 1;
    pub const DATA: u8 = 2;
    pub const SERVICE: u8 = 3;

    pub fn usage(message: impl ToString) -> Self {
        Self { code: Self::USAGE, message: message.to_string() }
    }

    fn data(message: impl ToString) -> Self {
        Self { code: Self::DATA, message: message.to_string() }
    }

    fn service(message: impl ToString) -> Self {
        Self { code: Self::SERVICE, message: message.to_string() }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::data(format!("{}: {e}", path.display()))
    }
}

impl From<truelearn::Error> for Failure {
    fn from(e: truelearn::Error) -> Self {
        use truelearn::Error as E;
        let code = match &e {
            E::ServiceUnreachable(_) | E::ServiceRejected(_) | E::MalformedResponse(_) | E::MissingApiKey(_) => {
                Self::SERVICE
            }
            E::Config(_) => Self::USAGE,
            _ => Self::DATA,
        };
        Self { code, message: e.to_string() }
    }
}

type CmdResult = Result<(), Failure>;

#[derive(Parser)]
#[command(name = "truelearn", version, about = "Engagement modelling over Wikipedia knowledge components")]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fragment transcripts and annotate every fragment with knowledge components.
    Annotate(AnnotateArgs),
    /// Turn view logs and annotations into a labelled event stream.
    BuildEvents(BuildEventsArgs),
    /// Sequential predict-then-update evaluation of one model.
    Evaluate(EvaluateArgs),
    /// Hold-out hyperparameter search, then a test-set evaluation of the winner.
    Sweep(SweepArgs),
    /// Compare saved reports and emit per-learner plot data.
    Report(ReportArgs),
    /// Generate a synthetic event stream with known skills.
    Synth(SynthArgs),
}

#[derive(Args)]
struct AnnotateArgs {
    /// Directory of `<lecture_id>.txt` transcripts.
    #[arg(long)]
    transcripts: PathBuf,
    /// Annotation cache directory (created if missing); also holds vocabulary.tsv.
    #[arg(long)]
    cache: PathBuf,
    /// Environment variable holding the service key.
    #[arg(long, default_value = "WIKIFIER_API_KEY")]
    api_key_env: String,
    #[arg(long, default_value = DEFAULT_ENDPOINT)]
    endpoint: String,
    /// Requests per second across all workers (default: unlimited).
    #[arg(long)]
    rate_limit: Option<f64>,
    #[arg(long, default_value_t = 5)]
    top_k: usize,
    #[arg(long, default_value_t = DEFAULT_FRAGMENT_LEN)]
    fragment_len: usize,
    /// Output directory: annotations.jsonl, a copy of the vocabulary, manifest.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BuildEventsArgs {
    /// CSV with learner_id, lecture_id, timestamp, start_seconds, end_seconds.
    #[arg(long)]
    view_logs: PathBuf,
    /// CSV with lecture_id, duration_seconds.
    #[arg(long)]
    durations: PathBuf,
    /// annotations.jsonl written by `annotate`.
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long, default_value_t = 5)]
    top_k: usize,
    /// File with one allowed lecture id per line.
    #[arg(long)]
    lectures: Option<PathBuf>,
    /// Output directory: events.jsonl, summary.json, manifest.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ModelArgs {
    /// Model kind, e.g. truelearn-novelty. Overrides `kind` in --config.
    #[arg(long)]
    model: Option<String>,
    /// TOML file of model configuration overrides.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Learn from negative labels too.
    #[arg(long, conflicts_with = "positive_only")]
    use_negative: bool,
    /// Learn from positive labels only.
    #[arg(long)]
    positive_only: bool,
    /// Topics per event the model reads.
    #[arg(long)]
    top_k: Option<usize>,
}

impl ModelArgs {
    fn resolve(&self) -> Result<ModelConfig, Failure> {
        let kind = self.model.as_deref().map(str::parse::<ModelKind>).transpose().map_err(Failure::usage)?;
        let mut cfg = config::load_model_config(self.config.as_deref(), kind)?;
        if self.use_negative {
            cfg.use_negative = true;
        }
        if self.positive_only {
            cfg.use_negative = false;
        }
        if let Some(k) = self.top_k {
            cfg.top_k = k;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    events: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// Keep only the events of the N most active learners.
    #[arg(long)]
    learners: Option<usize>,
    /// Output directory: report.json, report.txt, manifest.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    events: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// TOML grid, e.g. `initial_variance = [0.5, 1.0]`.
    #[arg(long)]
    grid: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.7)]
    train_fraction: f64,
    /// accuracy, precision, recall or f1.
    #[arg(long, default_value = "f1")]
    objective: String,
    #[arg(long)]
    learners: Option<usize>,
    /// Output directory: sweep.csv, best_config.json, report.json, report.txt, manifest.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Report files written by `evaluate` or `sweep`.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Output directory: comparison.txt, learners.csv, manifest.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// TOML generator settings; flags override.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    learners: Option<usize>,
    #[arg(long)]
    total_events: Option<usize>,
    /// Output directory: events.jsonl, truth.json, manifest.json.
    #[arg(long)]
    out: PathBuf,
}

fn create_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text).map_err(|e| Failure::io(path, e))
}

fn finish(manifest: ManifestBuilder, out: &Path) -> CmdResult {
    manifest.write(out).map_err(|e| Failure::io(&out.join("manifest.json"), e))
}

fn load_events(path: &Path, learners: Option<usize>) -> Result<Vec<EngagementEvent>, Failure> {
    let events = read_events(path)?;
    Ok(match learners {
        Some(n) => select_cohort(&events, n),
        None => events,
    })
}

fn read_transcripts(dir: &Path) -> Result<Vec<(String, String)>, Failure> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Failure::io(dir, e))? {
        let path = entry.map_err(|e| Failure::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("txt") {
            continue;
        }
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let text = fs::read_to_string(&path).map_err(|e| Failure::io(&path, e))?;
        out.push((id, text));
    }
    out.sort();
    if out.is_empty() {
        return Err(Failure::data(format!("{}: no .txt transcripts", dir.display())));
    }
    Ok(out)
}

fn cmd_annotate(args: &AnnotateArgs, jobs: usize) -> CmdResult {
    let mut manifest = ManifestBuilder::start("annotate");
    let transcripts = read_transcripts(&args.transcripts)?;
    manifest.input(&args.transcripts).map_err(|e| Failure::io(&args.transcripts, e))?;
    create_dir(&args.out)?;
    let cache = AnnotationCache::open(&args.cache)?;

    let mut misses = 0;
    for (_, text) in &transcripts {
        for span in fragment_transcript(text, args.fragment_len)? {
            if !cache.contains(&content_hash(slice_chars(text, span))) {
                misses += 1;
            }
        }
    }
    let client = if misses > 0 {
        WikifierClient::from_env(&args.endpoint, &args.api_key_env)?
    } else {
        WikifierClient::new(&args.endpoint, "")
    };

    // The vocabulary lives with the cache: cached topics carry its ids.
    let vocab_path = args.cache.join("vocabulary.tsv");
    let mut vocab = Vocabulary::load(&vocab_path)?;
    let opts = AnnotateOptions {
        fragment_len: args.fragment_len,
        top_k: args.top_k,
        jobs,
        requests_per_second: args.rate_limit.unwrap_or(f64::INFINITY),
        ..Default::default()
    };
    let (annotations, stats) = annotate_lectures(&transcripts, &client, &cache, &mut vocab, &opts)?;
    vocab.save(&vocab_path)?;
    vocab.save(&args.out.join("vocabulary.tsv"))?;
    let path = args.out.join("annotations.jsonl");
    let file = fs::File::create(&path).map_err(|e| Failure::io(&path, e))?;
    let mut w = BufWriter::new(file);
    for a in &annotations {
        serde_json::to_writer(&mut w, a).map_err(|e| Failure::data(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| Failure::io(&path, e))?;
    }
    w.flush().map_err(|e| Failure::io(&path, e))?;

    eprintln!(
        "{} fragments: {} cached, {} requested, {} failed",
        stats.fragments,
        stats.cache_hits,
        stats.requests,
        stats.failures.len()
    );
    manifest.config(serde_json::json!({
        "endpoint": args.endpoint,
        "api_key_env": args.api_key_env,
        "top_k": args.top_k,
        "fragment_len": args.fragment_len,
        "rate_limit": args.rate_limit,
        "jobs": jobs,
    }));
    finish(manifest, &args.out)?;
    if let Some((lecture, index, err)) = stats.failures.first() {
        return Err(Failure::service(format!(
            "{} fragments left unannotated (first: {lecture} #{index}: {err}); rerun to resume",
            stats.failures.len()
        )));
    }
    Ok(())
}

fn read_annotations(path: &Path) -> Result<Vec<FragmentAnnotation>, Failure> {
    let file = fs::File::open(path).map_err(|e| Failure::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Failure::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Failure::data(format!("{}:{}: {e}", path.display(), i + 1)))?);
    }
    Ok(out)
}

fn cmd_build_events(args: &BuildEventsArgs) -> CmdResult {
    let mut manifest = ManifestBuilder::start("build-events");
    for p in [&args.view_logs, &args.durations, &args.annotations].into_iter().chain(args.lectures.as_ref()) {
        manifest.input(p).map_err(|e| Failure::io(p, e))?;
    }
    let logs = read_view_logs(&args.view_logs)?;
    let durations = read_lecture_durations(&args.durations)?;
    let annotations = read_annotations(&args.annotations)?;
    let allow: Option<HashSet<String>> = match &args.lectures {
        Some(p) => Some(
            fs::read_to_string(p)
                .map_err(|e| Failure::io(p, e))?
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(String::from)
                .collect(),
        ),
        None => None,
    };
    let (events, summary) = build_events(&logs, &durations, &annotations, args.top_k, allow.as_ref())?;
    create_dir(&args.out)?;
    write_events(&args.out.join("events.jsonl"), &events)?;
    write_summary(&args.out.join("summary.json"), &summary)?;
    eprintln!("{} events from {} learners", summary.events, summary.learners);
    manifest.config(serde_json::json!({ "top_k": args.top_k }));
    finish(manifest, &args.out)
}

fn write_report(report: &EvalReport, out: &Path) -> CmdResult {
    report.write_json(&out.join("report.json"))?;
    write_text(&out.join("report.txt"), &report.to_text())
}

fn cmd_evaluate(args: &EvaluateArgs) -> CmdResult {
    let mut manifest = ManifestBuilder::start("evaluate");
    let cfg = args.model.resolve()?;
    let events = load_events(&args.events, args.learners)?;
    manifest.input(&args.events).map_err(|e| Failure::io(&args.events, e))?;
    let report = evaluate_sequential(&cfg, &events)?;
    create_dir(&args.out)?;
    write_report(&report, &args.out)?;
    print!("{}", report.to_text());
    manifest.config(serde_json::json!({ "model": cfg, "learners": args.learners }));
    finish(manifest, &args.out)
}

fn cmd_sweep(args: &SweepArgs) -> CmdResult {
    let mut manifest = ManifestBuilder::start("sweep");
    let base = args.model.resolve()?;
    let grid = config::load_grid(&args.grid)?;
    let objective: Objective = args.objective.parse().map_err(Failure::usage)?;
    let events = load_events(&args.events, args.learners)?;
    manifest.input(&args.events).map_err(|e| Failure::io(&args.events, e))?;
    manifest.input(&args.grid).map_err(|e| Failure::io(&args.grid, e))?;
    manifest.seed(args.seed);

    let ids: Vec<String> =
        events.iter().map(|e| e.learner_id.clone()).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let (train, test) = split_learners(&ids, args.train_fraction, args.seed)?;
    let train_set: HashSet<&str> = train.iter().map(String::as_str).collect();
    let (train_events, test_events): (Vec<EngagementEvent>, Vec<EngagementEvent>) =
        events.into_iter().partition(|e| train_set.contains(e.learner_id.as_str()));

    let result = grid_search(&base, &grid, &train_events, objective)?;
    let mut report = evaluate_sequential(&result.best, &test_events)?;
    report.split = Some(SplitInfo {
        seed: args.seed,
        train_fraction: args.train_fraction,
        train_learners: train.len(),
        test_learners: test.len(),
    });

    create_dir(&args.out)?;
    let csv_path = args.out.join("sweep.csv");
    let file = fs::File::create(&csv_path).map_err(|e| Failure::io(&csv_path, e))?;
    write_sweep_csv(BufWriter::new(file), &result.rows)?;
    let best = serde_json::to_string_pretty(&result.best).map_err(|e| Failure::data(e.to_string()))?;
    write_text(&args.out.join("best_config.json"), &(best + "\n"))?;
    write_report(&report, &args.out)?;
    print!("{}", report.to_text());
    manifest.config(serde_json::json!({
        "model": base,
        "grid": grid,
        "objective": args.objective,
        "train_fraction": args.train_fraction,
        "learners": args.learners,
        "best": result.best,
    }));
    finish(manifest, &args.out)
}

fn cmd_report(args: &ReportArgs) -> CmdResult {
    let mut manifest = ManifestBuilder::start("report");
    let mut reports = Vec::new();
    for p in &args.reports {
        manifest.input(p).map_err(|e| Failure::io(p, e))?;
        reports.push(EvalReport::read_json(p).map_err(|e| Failure::data(format!("{}: {e}", p.display())))?);
    }
    create_dir(&args.out)?;
    let table = comparison_table(&reports);
    write_text(&args.out.join("comparison.txt"), &table)?;
    print!("{table}");

    let path = args.out.join("learners.csv");
    let file = fs::File::create(&path).map_err(|e| Failure::io(&path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Failure::io(&path, e);
    writeln!(w, "# topic_sparsity = unique_kcs / events").map_err(io)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["report", "model", "learner_id", "events", "unique_kcs", "topic_sparsity", "f1"])
        .map_err(|e| Failure::data(e.to_string()))?;
    for (path, r) in args.reports.iter().zip(&reports) {
        for l in &r.learners {
            let sparsity = if l.events == 0 { 0.0 } else { l.unique_kcs as f64 / l.events as f64 };
            csv.write_record([
                path.display().to_string(),
                r.model.kind.to_string(),
                l.learner_id.clone(),
                l.events.to_string(),
                l.unique_kcs.to_string(),
                sparsity.to_string(),
                l.metrics.as_ref().map(|m| m.f1.to_string()).unwrap_or_default(),
            ])
            .map_err(|e| Failure::data(e.to_string()))?;
        }
    }
    csv.flush().map_err(|e| Failure::io(&args.out.join("learners.csv"), e))?;
    manifest.config(serde_json::json!({ "topic_sparsity": "unique_kcs / events" }));
    finish(manifest, &args.out)
}

fn cmd_synth(args: &SynthArgs) -> CmdResult {
    let mut manifest = ManifestBuilder::start("synth");
    let mut cfg: SynthConfig = match &args.config {
        Some(p) => {
            manifest.input(p).map_err(|e| Failure::io(p, e))?;
            let table = config::read_toml(p)?;
            toml::Value::Table(table).try_into().map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?
        }
        None => SynthConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.learners {
        cfg.learners = n;
    }
    if args.total_events.is_some() {
        cfg.total_events = args.total_events;
    }
    let data = generate(&cfg)?;
    create_dir(&args.out)?;
    write_events(&args.out.join("events.jsonl"), &data.events)?;
    let truth: BTreeMap<_, _> = data.truth.iter().collect();
    let text = serde_json::to_string_pretty(&truth).map_err(|e| Failure::data(e.to_string()))?;
    write_text(&args.out.join("truth.json"), &(text + "\n"))?;
    write_summary(&args.out.join("summary.json"), &summarize(&data.events))?;
    manifest.seed(cfg.seed);
    manifest.config(&cfg);
    finish(manifest, &args.out)
}

fn run(cli: Cli) -> CmdResult {
    let jobs = cli.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if jobs == 0 {
        return Err(Failure::usage("--jobs must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().map_err(|e| Failure::usage(e.to_string()))?;
    match &cli.command {
        Command::Annotate(a) => cmd_annotate(a, jobs),
        Command::BuildEvents(a) => cmd_build_events(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Report(a) => cmd_report(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Failure::USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
