//! `perio`: synthetic corpus generation, extraction and evaluation of
//! periodontal diagnoses.
//!
//! Exit status: 0 on success, 1 on data or validation failures, 2 on usage
//! and configuration errors.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use perio_core::corpus::{
    cohort_filter, read_corpus, read_meta, split_corpus, write_atomic, write_corpus, AnnotatedNote,
    SplitRatios,
};
use perio_core::evaluation::{
    bar_chart_json, confusion_json, curve_json, evaluate, learning_curve, render, CurveParams,
    ReportFormat,
};
use perio_core::extraction::{load_external_predictions, ExtractionMode, GrammarExtractor};
use perio_core::model::Dimension;
use perio_core::normalization::{annotate_prediction, predict_note};
use perio_core::synthesis::{
    demo_seed_corpus, generate_offline, run_qa, select_seed_templates, LlmGenerator, SeedTemplate,
    SynthesisError,
};
use rayon::prelude::*;

use crate::config::SynthConfig;

// Stdout writes that tolerate a closed pipe (`perio evaluate ... | head`).
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout(), $($t)*);
    }};
}
macro_rules! outln {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

#[derive(Debug)]
enum Failure {
    /// Bad flags, configuration or credentials.
    Usage(String),
    /// Unreadable, invalid or failing data.
    Data(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 1,
        }
    }
}

type CmdResult = Result<(), Failure>;

fn data(e: impl std::fmt::Display) -> Failure {
    Failure::Data(e.to_string())
}

fn at(path: &Path) -> impl Fn(perio_core::corpus::CorpusError) -> Failure + '_ {
    move |e| match e {
        // I/O errors already carry the path
        e @ perio_core::corpus::CorpusError::Io { .. } => Failure::Data(e.to_string()),
        e => Failure::Data(format!("{}: {e}", path.display())),
    }
}

#[derive(Parser)]
#[command(
    name = "perio",
    version,
    about = "Periodontal diagnosis extraction pipeline"
)]
struct Cli {
    /// Worker threads for per-note work (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Keep notes whose patient metadata meets the inclusion criteria.
    Cohort {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        meta: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a labeled synthetic corpus from seed templates.
    Synth(SynthArgs),
    /// Split a corpus into train/validation/test and write a manifest.
    Split {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "8:1:1")]
        ratios: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict spans and diagnosis records for every note of a corpus.
    Extract {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Strict)]
        mode: Mode,
        /// `builtin` or `predictions=<path>`.
        #[arg(long, default_value = "builtin")]
        extractor: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against gold and write reports and chart data.
    Evaluate {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, default_value = "text")]
        report: String,
        /// Learning curve, e.g. `step=30` or `step=30,epsilon=0.01,window=2,focus=stage`.
        #[arg(long)]
        curve: Option<String>,
        /// Shuffle seed for the learning curve.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Write a small clean gold corpus usable as seed notes.
    DemoSeeds {
        #[arg(long, default_value_t = 20)]
        per_status: usize,
        #[arg(long, default_value = "site1")]
        site: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SynthArgs {
    /// Corpus whose notes all carry a record; each note becomes a template.
    #[arg(long, conflicts_with = "corpus", required_unless_present = "corpus")]
    templates: Option<PathBuf>,
    /// Corpus to draw seed templates from.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 15)]
    per_category: usize,
    #[arg(long, conflicts_with = "offline")]
    online: bool,
    #[arg(long)]
    offline: bool,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seeds template selection and the offline generator.
    #[arg(long)]
    seed: u64,
    /// Replace discrepant embedded labels with the extractor's reading.
    #[arg(long)]
    auto_fix: bool,
    /// Extraction mode used for label QA.
    #[arg(long, value_enum, default_value_t = Mode::Informal)]
    qa_mode: Mode,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Strict,
    Informal,
}

impl From<Mode> for ExtractionMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Strict => ExtractionMode::Strict,
            Mode::Informal => ExtractionMode::Informal,
        }
    }
}

fn cohort(corpus: &Path, meta: &Path, out: &Path) -> CmdResult {
    let notes = read_corpus(corpus).map_err(at(corpus))?;
    let meta = read_meta(meta).map_err(at(meta))?;
    let total = notes.len();
    let kept: Vec<AnnotatedNote> = notes
        .into_iter()
        .filter_map(|mut n| {
            let m = *meta.get(n.id())?;
            n.meta = Some(m);
            cohort_filter(&m).then_some(n)
        })
        .collect();
    write_corpus(&kept, out).map_err(at(out))?;
    outln!("{}/{total} eligible", kept.len());
    Ok(())
}

fn load_templates(path: &Path) -> Result<Vec<SeedTemplate>, Failure> {
    read_corpus(path)
        .map_err(at(path))?
        .iter()
        .map(|n| {
            SeedTemplate::from_gold(n).ok_or_else(|| {
                Failure::Data(format!(
                    "{}: template {} has no record",
                    path.display(),
                    n.id()
                ))
            })
        })
        .collect()
}

fn synth(args: &SynthArgs) -> CmdResult {
    let cfg = match &args.config {
        Some(p) => SynthConfig::load(p).map_err(Failure::Usage)?,
        None => SynthConfig::default(),
    };
    let prompt = cfg
        .prompt_config(args.config.as_deref().and_then(Path::parent))
        .map_err(Failure::Usage)?;
    cfg.generation
        .validate()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let mut perturb = cfg.perturbation;
    perturb.rng_seed = args.seed;
    perturb.validate().map_err(Failure::Usage)?;
    // Credentials are checked before any data is read or requested.
    let online = if args.online {
        Some(
            LlmGenerator::from_env(cfg.generation.clone(), prompt)
                .map_err(|e| Failure::Usage(e.to_string()))?,
        )
    } else {
        None
    };

    let templates = match (&args.templates, &args.corpus) {
        (Some(t), _) => load_templates(t)?,
        (None, Some(c)) => {
            let corpus = read_corpus(c).map_err(at(c))?;
            select_seed_templates(&corpus, args.per_category, args.seed).map_err(data)?
        }
        (None, None) => {
            return Err(Failure::Usage(
                "one of --templates or --corpus is required".into(),
            ))
        }
    };
    let mut notes = match online {
        Some(g) => g.generate(&templates).map_err(|e| match e {
            SynthesisError::Config(m) => Failure::Usage(m),
            e => Failure::Data(e.to_string()),
        })?,
        None => generate_offline(&templates, cfg.generation.variants_per_template, &perturb),
    };
    let extractor = GrammarExtractor::with_mode(args.qa_mode.into());
    let summary = run_qa(&mut notes, &extractor, args.auto_fix);
    write_corpus(&notes, &args.out).map_err(at(&args.out))?;
    outln!(
        "{} notes from {} templates: {} consistent, {} corrected, {} failed QA",
        notes.len(),
        templates.len(),
        summary.consistent,
        summary.corrected,
        summary.failed
    );
    if summary.failed > 0 {
        return Err(Failure::Data(format!(
            "{} notes failed label QA",
            summary.failed
        )));
    }
    Ok(())
}

fn split(corpus: &Path, ratios: &str, seed: u64, out: &Path) -> CmdResult {
    let ratios: SplitRatios = ratios
        .parse()
        .map_err(|e: perio_core::corpus::SplitError| Failure::Usage(e.to_string()))?;
    let notes = read_corpus(corpus).map_err(at(corpus))?;
    let manifest = split_corpus(&notes, ratios, seed).map_err(data)?;
    write_atomic(out, manifest.to_json().as_bytes()).map_err(at(out))?;
    outln!(
        "train {} / validation {} / test {}",
        manifest.count(perio_core::corpus::Partition::Train),
        manifest.count(perio_core::corpus::Partition::Validation),
        manifest.count(perio_core::corpus::Partition::Test)
    );
    Ok(())
}

fn extract(corpus: &Path, mode: Mode, extractor: &str, out: &Path) -> CmdResult {
    let notes = read_corpus(corpus).map_err(at(corpus))?;
    let predicted: Vec<AnnotatedNote> = if extractor == "builtin" {
        let ex = GrammarExtractor::with_mode(mode.into());
        notes.par_iter().map(|n| predict_note(n, &ex)).collect()
    } else if let Some(path) = extractor.strip_prefix("predictions=") {
        let path = Path::new(path);
        let mut preds = load_external_predictions(path, &notes)
            .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
        notes
            .iter()
            .map(|n| annotate_prediction(n, preds.remove(n.id()).unwrap_or_default(), false))
            .collect()
    } else {
        return Err(Failure::Usage(format!(
            "unknown extractor {extractor:?} (expected builtin or predictions=<path>)"
        )));
    };
    write_corpus(&predicted, out).map_err(at(out))?;
    let with_record = predicted.iter().filter(|n| n.record.is_some()).count();
    outln!("{} notes, {with_record} with a diagnosis", predicted.len());
    Ok(())
}

fn parse_curve(spec: &str, seed: u64) -> Result<CurveParams, Failure> {
    let mut p = CurveParams {
        seed,
        ..CurveParams::default()
    };
    let bad = |m: String| Failure::Usage(format!("--curve {spec:?}: {m}"));
    for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| bad(format!("expected key=value, got {part:?}")))?;
        match k.trim() {
            "step" => p.step = v.trim().parse().map_err(|e| bad(format!("step: {e}")))?,
            "epsilon" => p.epsilon = v.trim().parse().map_err(|e| bad(format!("epsilon: {e}")))?,
            "window" => p.window = v.trim().parse().map_err(|e| bad(format!("window: {e}")))?,
            "focus" => {
                p.focus = Dimension::parse(v.trim())
                    .ok_or_else(|| bad(format!("unknown dimension {v:?}")))?
            }
            other => return Err(bad(format!("unknown key {other:?}"))),
        }
    }
    Ok(p)
}

fn to_json(v: &serde_json::Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).unwrap();
    s.push('\n');
    s.into_bytes()
}

fn evaluate_cmd(
    gold: &Path,
    pred: &Path,
    report: &str,
    curve: Option<&str>,
    seed: Option<u64>,
    out_dir: &Path,
) -> CmdResult {
    let format: ReportFormat = report.parse().map_err(Failure::Usage)?;
    let curve_params = match curve {
        Some(spec) => {
            let seed = seed.ok_or_else(|| Failure::Usage("--curve requires --seed".into()))?;
            Some(parse_curve(spec, seed)?)
        }
        None => None,
    };
    let gold_notes = read_corpus(gold).map_err(at(gold))?;
    let pred_notes = read_corpus(pred).map_err(at(pred))?;
    let tables = evaluate(&gold_notes, &pred_notes).map_err(data)?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Failure::Data(format!("{}: {e}", out_dir.display())))?;
    let ext = match format {
        ReportFormat::Text => "txt",
        ReportFormat::Csv => "csv",
        ReportFormat::Json => "json",
    };
    let rendered = render(&tables, format);
    let write = |name: &str, bytes: &[u8]| {
        let p = out_dir.join(name);
        write_atomic(&p, bytes).map_err(at(&p))
    };
    write(&format!("report.{ext}"), rendered.as_bytes())?;
    write("confusion.json", &to_json(&confusion_json(&tables)))?;
    write("bar_chart.json", &to_json(&bar_chart_json(&tables)))?;
    out!("{rendered}");
    if let Some(params) = curve_params {
        let c = learning_curve(&gold_notes, &pred_notes, &params).map_err(data)?;
        write("curve.json", &to_json(&curve_json(&c)))?;
        match c.stabilization_size {
            Some(n) => outln!(
                "learning curve: {} points, stabilized at {n} notes",
                c.points.len()
            ),
            None => outln!("learning curve: {} points, not stabilized", c.points.len()),
        }
    }
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::Usage(format!("--jobs: {e}")))?;
    }
    match cli.command {
        Command::Cohort { corpus, meta, out } => cohort(&corpus, &meta, &out),
        Command::Synth(args) => synth(&args),
        Command::Split {
            corpus,
            ratios,
            seed,
            out,
        } => split(&corpus, &ratios, seed, &out),
        Command::Extract {
            corpus,
            mode,
            extractor,
            out,
        } => extract(&corpus, mode, &extractor, &out),
        Command::Evaluate {
            gold,
            pred,
            report,
            curve,
            seed,
            out_dir,
        } => evaluate_cmd(&gold, &pred, &report, curve.as_deref(), seed, &out_dir),
        Command::DemoSeeds {
            per_status,
            site,
            seed,
            out,
        } => {
            let notes = demo_seed_corpus(per_status, &site, seed);
            write_corpus(&notes, &out).map_err(at(&out))?;
            outln!("{} seed notes", notes.len());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Usage(m) | Failure::Data(m)) = &f;
            eprintln!("error: {m}");
            ExitCode::from(f.code())
        }
    }
}
