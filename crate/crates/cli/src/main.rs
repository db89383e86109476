use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lir_core::eval::{self, LabeledSet, LogisticConfig, Placement};
use lir_core::io;
use lir_core::lir::{self, FitOptions};
use lir_core::synth::{self, LabelRule, SynthConfig};
use lir_core::{EmbeddingSet, Error, RemovalMode, Result};

/// Fit, apply and evaluate language identity removal on embedding files.
///
/// Exit codes: 0 success, 2 input or configuration error, 3 numerical
/// failure (SVD did not converge).
#[derive(Parser)]
#[command(name = "lir", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit per-language identity components (top right singular vectors).
    Fit(FitArgs),
    /// Remove components from embeddings, each record with its language's basis.
    Apply(ApplyArgs),
    /// Cross-lingual retrieval MAP, optionally after removal.
    EvalRetrieval(EvalRetrievalArgs),
    /// Zero-shot transfer of a logistic classifier trained on one language.
    EvalTransfer(EvalTransferArgs),
    /// Joint PCA projection of all records, written as CSV.
    Project(ProjectArgs),
    /// Generate a seeded synthetic multilingual corpus.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// e - C·Cᵀ·e
    Orthogonal,
    /// e - C·Cᵀ·e / ‖e‖₂
    PaperEq1,
}

impl From<ModeArg> for RemovalMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Orthogonal => RemovalMode::Orthogonal,
            ModeArg::PaperEq1 => RemovalMode::PaperEq1,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PlacementArg {
    /// Remove from training and test features.
    Both,
    /// Remove from test features only.
    Eval,
}

impl From<PlacementArg> for Placement {
    fn from(p: PlacementArg) -> Self {
        match p {
            PlacementArg::Both => Placement::Both,
            PlacementArg::Eval => Placement::EvalOnly,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Embedding file (.lire or .jsonl) or a directory of them.
    #[arg(long)]
    input: PathBuf,
    /// Number of components per language. About 10,000 rows per language
    /// gives stable components on real encoders.
    #[arg(long)]
    rank: usize,
    /// Output directory; one <lang>.lirc file per language.
    #[arg(long)]
    output: PathBuf,
    /// Subtract column means before the SVD [default: off].
    #[arg(long)]
    center: bool,
    /// Scale rows to unit length before the SVD [default: off].
    #[arg(long)]
    normalize: bool,
}

#[derive(Args)]
struct ApplyArgs {
    /// Directory of .lirc component files.
    #[arg(long)]
    components: PathBuf,
    /// Embedding file (.lire or .jsonl).
    #[arg(long)]
    input: PathBuf,
    /// Output file; .jsonl writes JSONL, anything else a LIRE file.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "orthogonal")]
    mode: ModeArg,
    /// Fail when a record's language has no basis, instead of passing it
    /// through unchanged [default: off].
    #[arg(long)]
    strict: bool,
    /// Scale records to unit length before removal [default: off].
    #[arg(long)]
    normalize: bool,
}

#[derive(Args)]
struct EvalRetrievalArgs {
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    candidates: PathBuf,
    /// JSONL relevance judgments: {"query_id", "relevant": [...]}.
    #[arg(long)]
    qrels: PathBuf,
    /// Directory of .lirc files; every language must be covered.
    #[arg(long)]
    components: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "orthogonal")]
    mode: ModeArg,
    /// Output JSON report.
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct EvalTransferArgs {
    /// Training embeddings, one language.
    #[arg(long)]
    train: PathBuf,
    /// Test embeddings file or directory; grouped by language.
    #[arg(long)]
    tests: PathBuf,
    /// JSONL labels: {"id", "label": 0|1}, covering train and test ids.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    components: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    placement: PlacementArg,
    #[arg(long, value_enum, default_value = "orthogonal")]
    mode: ModeArg,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value_t = 0.0)]
    l2: f64,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct ProjectArgs {
    #[arg(long)]
    input: PathBuf,
    /// Number of principal components.
    #[arg(long)]
    dims: usize,
    /// Output CSV: id,lang,score_1,...,score_K.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Number of languages (codes en, zh, ar, de, ...).
    #[arg(long, default_value_t = 4)]
    languages: usize,
    #[arg(long, default_value_t = 50)]
    topics: usize,
    /// Records per topic and language.
    #[arg(long, default_value_t = 25)]
    per: usize,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    /// Length of each language offset.
    #[arg(long, default_value_t = 5.0)]
    bias: f64,
    /// Length of each topic vector.
    #[arg(long, default_value_t = 1.0)]
    semantic: f64,
    /// Per-coordinate noise standard deviation.
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    /// Mix a random direction into each offset (0 keeps offsets orthogonal).
    #[arg(long, default_value_t = 0.0)]
    skew: f64,
    /// Emit topic-parity labels; odd topics are shifted by this margin along
    /// a label axis.
    #[arg(long)]
    label_margin: Option<f64>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn fit(args: FitArgs) -> Result<()> {
    let records = io::load_embeddings(&args.input)?;
    let opts = FitOptions {
        center: args.center,
        normalize: args.normalize,
    };
    create_dir(&args.output)?;
    for (lang, m) in records.language_matrices()? {
        let (basis, sigma) = lir::fit_with_spectrum(&m, args.rank, opts)?;
        let top: Vec<String> = sigma.iter().take(5).map(|s| format!("{s:.6}")).collect();
        println!("{lang}\tn={}\td={}\tsigma[0..5]=[{}]", m.n(), m.d(), top.join(", "));
        io::write_components(args.output.join(format!("{lang}.{}", io::COMPONENT_EXT)), &basis, None)?;
    }
    Ok(())
}

fn apply(args: ApplyArgs) -> Result<()> {
    let bases = io::load_component_dir(&args.components)?;
    let mut records = io::load_embeddings(&args.input)?;
    if args.normalize {
        records = lir::normalize_records(&records)?;
    }
    let out = lir::remove_batch(&records, &bases, args.mode.into(), args.strict)?;
    for (lang, n) in &out.passed_through {
        log::warn!("{n} records in language {lang:?} passed through without a basis");
    }
    let skipped: usize = out.passed_through.values().sum();
    if skipped > 0 {
        eprintln!("warning: {skipped} records passed through unchanged");
    }
    io::save_embeddings(&args.output, &out.records)
}

fn load_bases(dir: Option<&Path>) -> Result<Option<BTreeMap<String, lir_core::ComponentBasis>>> {
    dir.map(io::load_component_dir).transpose()
}

fn eval_retrieval(args: EvalRetrievalArgs) -> Result<()> {
    let queries = io::load_embeddings(&args.queries)?;
    let candidates = io::load_embeddings(&args.candidates)?;
    let qrels = io::read_qrels(&args.qrels)?;
    let ds = lir_core::RetrievalDataset::new(queries, candidates, qrels)?;
    let bases = load_bases(args.components.as_deref())?;
    let report = eval::evaluate_retrieval(&ds, bases.as_ref(), args.mode.into())?;
    println!("MAP {:.4} over {} queries", report.overall_map, report.query_count);
    for (lang, map) in &report.per_language_map {
        println!("  {lang}\t{map:.4}");
    }
    io::write_json(&args.report, &report)
}

fn eval_transfer(args: EvalTransferArgs) -> Result<()> {
    let labels = io::read_labels(&args.labels)?;
    let train = LabeledSet::from_map(io::load_embeddings(&args.train)?, &labels)?;
    let test_records = io::load_embeddings(&args.tests)?;
    let tests = test_records
        .languages()
        .into_iter()
        .map(|lang| LabeledSet::from_map(test_records.filter_language(lang), &labels).map(|s| (lang.to_string(), s)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let bases = load_bases(args.components.as_deref())?;
    let cfg = LogisticConfig {
        learning_rate: args.learning_rate,
        epochs: args.epochs,
        l2: args.l2,
    };
    let report = eval::evaluate_transfer(
        &train,
        &tests,
        bases.as_ref(),
        args.mode.into(),
        args.placement.into(),
        &cfg,
    )?;
    for (lang, acc) in &report.per_language_accuracy {
        println!("{lang}\t{acc:.4}");
    }
    println!("average\t{:.4}", report.average);
    io::write_json(&args.report, &report)
}

fn project(args: ProjectArgs) -> Result<()> {
    let records: EmbeddingSet = io::load_embeddings(&args.input)?;
    let rows = eval::export_projection(&records, args.dims)?;
    write_text(&args.output, &eval::projection_csv(&rows)?)
}

fn synth(args: SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        languages: synth::language_codes(args.languages),
        topics: args.topics,
        per_topic_per_lang: args.per,
        dim: args.dim,
        bias_scale: args.bias,
        semantic_scale: args.semantic,
        noise_scale: args.noise,
        seed: args.seed,
        label_rule: args.label_margin.map(|margin| LabelRule { margin }),
        skew: args.skew,
    };
    let out = synth::generate(&cfg)?;
    for (sub, set) in [
        ("all", &out.records),
        ("queries", &out.queries),
        ("candidates", &out.candidates),
    ] {
        let dir = args.out.join(sub);
        create_dir(&dir)?;
        for lang in &cfg.languages {
            let subset = set.filter_language(lang);
            io::write_embeddings(dir.join(format!("{lang}.{}", io::EMBEDDING_EXT)), &subset)?;
        }
    }
    write_text(&args.out.join("qrels.jsonl"), &io::qrels_to_jsonl(&out.qrels))?;
    if let Some(labels) = &out.labels {
        write_text(&args.out.join("labels.jsonl"), &io::labels_to_jsonl(labels))?;
    }
    io::write_json(args.out.join("ground_truth.json"), &out.ground_truth)?;
    io::write_json(args.out.join("config.json"), &cfg)?;
    println!(
        "wrote {} records ({} queries) for {} languages to {}",
        out.records.len(),
        out.queries.len(),
        cfg.languages.len(),
        args.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => fit(a),
        Command::Apply(a) => apply(a),
        Command::EvalRetrieval(a) => eval_retrieval(a),
        Command::EvalTransfer(a) => eval_transfer(a),
        Command::Project(a) => project(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
