//! `triage`: classify Kubernetes cluster dumps into failure classes.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 internal error.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::Settings;
use triage_core::classifiers::{ForestParams, Hyperparameters};
use triage_core::corpus::{generate_corpus, read_manifest, CorpusSpec, LineRange, MANIFEST_FILE};
use triage_core::evaluation::{load_corpus, run_cv, CvOptions, Learner};
use triage_core::features::{build_vocabulary, vectorize};
use triage_core::ingest::{compute_reduction, scan_dump, SelectionRules, DEFAULT_MAX_FILE_BYTES, DEFAULT_PATTERNS};
use triage_core::preprocess::{preprocess_bundle, CleaningConfig};
use triage_core::report::{parse_json, render, render_csv, render_json, render_pairwise, render_tables, ReportStyle};
use triage_core::stats::{friedman_test, nemenyi_pairwise, ScoreMatrix};
use triage_core::store::{load_model, save_model};
use triage_core::{Algorithm, ClassifierSpec, Result, TriageError, Vocabulary};

#[derive(Parser)]
#[command(name = "triage", version, about = "Failure triage for Kubernetes cluster dumps")]
struct Cli {
    /// Seed for every random choice (corpus generation, folds, models).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON file of default settings; flags override it, it overrides TRIAGE_* variables.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, short, global = true, conflicts_with = "verbose")]
    quiet: bool,
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a labelled synthetic corpus of cluster dumps.
    Generate(GenerateArgs),
    /// Select the log files of one dump and report the size reduction.
    Ingest(IngestArgs),
    /// Print the cleaned token stream of one dump.
    Preprocess(PreprocessArgs),
    /// Train one classifier on a labelled corpus.
    Train(TrainArgs),
    /// Classify dumps with a trained model.
    Predict(PredictArgs),
    /// Cross-validate several classifiers and write a comparison report.
    Evaluate(EvaluateArgs),
    /// Friedman and Nemenyi tests on a CSV score matrix.
    Stats(StatsArgs),
    /// Re-render a saved report.json.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    bundles_per_class: Option<usize>,
    #[arg(long)]
    services: Option<usize>,
    #[arg(long)]
    signature_strength: Option<f64>,
    #[arg(long)]
    noise_min: Option<usize>,
    #[arg(long)]
    noise_max: Option<usize>,
}

#[derive(Args)]
struct SelectionArgs {
    /// Include pattern relative to the dump root; repeatable. Defaults to pod container and describe logs.
    #[arg(long = "pattern", value_name = "GLOB")]
    patterns: Vec<String>,
    #[arg(long)]
    max_file_bytes: Option<u64>,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    dump: PathBuf,
    #[command(flatten)]
    selection: SelectionArgs,
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long)]
    dump: PathBuf,
    /// Write tokens here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    selection: SelectionArgs,
}

#[derive(Args)]
struct CorpusArgs {
    /// Directory holding the dumps named in the manifest.
    #[arg(long)]
    root: PathBuf,
    /// Defaults to ROOT/manifest.jsonl.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    min_df: Option<usize>,
    /// Random forest size.
    #[arg(long)]
    trees: Option<usize>,
    #[command(flatten)]
    selection: SelectionArgs,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// One of svm, knn, rf, gb, mlp.
    #[arg(long)]
    algo: Option<String>,
    /// Model file; the vocabulary is written next to it with a `.vocab` suffix.
    #[arg(long)]
    model_out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Defaults to MODEL.vocab.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long = "dump", required = true)]
    dumps: Vec<PathBuf>,
    #[command(flatten)]
    selection: SelectionArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Comma-separated algorithms; defaults to all five.
    #[arg(long)]
    algos: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    report_out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    /// CSV with a header of treatment names and one row per block.
    #[arg(long)]
    scores: PathBuf,
    /// json or table.
    #[arg(long, default_value = "json")]
    format: String,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    report: PathBuf,
    /// json, csv or table.
    #[arg(long, default_value = "table")]
    style: String,
}

struct Log {
    quiet: bool,
    verbose: bool,
}

impl Log {
    fn info(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn debug(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => TriageError::NotFound(path.into()),
        _ => TriageError::Io { path: path.into(), source: e },
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| TriageError::Io { path: path.into(), source: e })
}

fn selection_rules(args: &SelectionArgs, settings: &mut Settings) -> Result<SelectionRules> {
    let flag = (!args.patterns.is_empty()).then(|| args.patterns.join(","));
    let patterns = settings.get("patterns", flag, DEFAULT_PATTERNS.join(","))?;
    let patterns: Vec<&str> = split_patterns(&patterns);
    let mut rules = SelectionRules::from_patterns(&patterns)?;
    rules.max_file_bytes = Some(settings.get("max_file_bytes", args.max_file_bytes, DEFAULT_MAX_FILE_BYTES)?);
    Ok(rules)
}

/// Splits on commas outside `{...}` groups.
fn split_patterns(joined: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, c) in joined.char_indices() {
        match c {
            '{' => depth += 1,
            '}' => depth -= 1,
            ',' if depth == 0 => {
                out.push(joined[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(joined[start..].trim());
    out.retain(|p| !p.is_empty());
    out
}

fn parse_algorithms(list: &str) -> Result<Vec<Algorithm>> {
    let algos = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect::<Result<Vec<Algorithm>>>()?;
    if algos.is_empty() {
        return Err(TriageError::InvalidSpec("no algorithms given".into()));
    }
    Ok(algos)
}

fn spec_for(algorithm: Algorithm, seed: u64, trees: usize) -> ClassifierSpec {
    let mut spec = ClassifierSpec::new(algorithm, seed);
    if algorithm == Algorithm::RandomForest {
        spec.hyperparameters = Hyperparameters::RandomForest(ForestParams { trees, ..Default::default() });
    }
    spec
}

fn vocab_path(model: &Path) -> PathBuf {
    let mut name = model.as_os_str().to_owned();
    name.push(".vocab");
    PathBuf::from(name)
}

struct Run {
    settings: Settings,
    seed: u64,
    log: Log,
}

impl Run {
    fn corpus(&mut self, args: &CorpusArgs) -> Result<(triage_core::evaluation::Corpus, usize, usize)> {
        let rules = selection_rules(&args.selection, &mut self.settings)?;
        let min_df = self.settings.get("min_df", args.min_df, 1)?;
        let trees = self.settings.get("trees", args.trees, ForestParams::default().trees)?;
        let manifest_path = args.manifest.clone().unwrap_or_else(|| args.root.join(MANIFEST_FILE));
        let manifest = read_manifest(&manifest_path)?;
        self.log.info(format!("loading {} dumps from {}", manifest.entries.len(), args.root.display()));
        let corpus = load_corpus(&args.root, &manifest, &rules, &CleaningConfig::default())?;
        Ok((corpus, min_df, trees))
    }

    fn generate(&mut self, a: GenerateArgs) -> Result<()> {
        let d = CorpusSpec::default();
        let s = &mut self.settings;
        let spec = CorpusSpec {
            bundles_per_class: s.get("bundles_per_class", a.bundles_per_class, d.bundles_per_class)?,
            services: s.get("services", a.services, d.services)?,
            noise_lines_per_file: LineRange {
                min: s.get("noise_min", a.noise_min, d.noise_lines_per_file.min)?,
                max: s.get("noise_max", a.noise_max, d.noise_lines_per_file.max)?,
            },
            signature_strength: s.get("signature_strength", a.signature_strength, d.signature_strength)?,
            seed: self.seed,
        };
        let manifest = generate_corpus(&spec, &a.out)?;
        self.log.info(format!("wrote {} dumps to {}", manifest.entries.len(), a.out.display()));
        Ok(())
    }

    fn ingest(&mut self, a: IngestArgs) -> Result<()> {
        let rules = selection_rules(&a.selection, &mut self.settings)?;
        let bundle = scan_dump(&a.dump, &rules)?;
        let stats = compute_reduction(&a.dump, &bundle)?;
        let files: Vec<_> = bundle
            .files
            .iter()
            .map(|f| json!({"path": f.path, "bytes": f.byte_len, "truncated": f.truncated}))
            .collect();
        let mut out = stats.to_json();
        out["files"] = json!(files);
        println!("{}", serde_json::to_string_pretty(&out)?);
        Ok(())
    }

    fn preprocess(&mut self, a: PreprocessArgs) -> Result<()> {
        let rules = selection_rules(&a.selection, &mut self.settings)?;
        let doc = preprocess_bundle(&scan_dump(&a.dump, &rules)?, &CleaningConfig::default())?;
        let line = doc.to_line() + "\n";
        match a.out {
            Some(path) => write_file(&path, &line),
            None => {
                print!("{line}");
                Ok(())
            }
        }
    }

    fn train(&mut self, a: TrainArgs) -> Result<()> {
        let algorithm: Algorithm = self.settings.get("algo", a.algo, "svm".to_string())?.parse()?;
        let (corpus, min_df, trees) = self.corpus(&a.corpus)?;
        let vocab = build_vocabulary(&corpus.documents, min_df)?;
        let vectors = corpus.documents.iter().map(|d| vectorize(&vocab, d)).collect();
        let data = triage_core::Dataset::new(vectors, corpus.labels.clone())?;
        self.log.info(format!("training {} on {} dumps, {} terms", algorithm, data.len(), vocab.len()));
        let model = spec_for(algorithm, self.seed, trees).fit(&data)?.with_vocabulary_checksum(vocab.checksum());
        let checksum = save_model(&model, &a.model_out)?;
        let vocab_checksum = vocab.save(&vocab_path(&a.model_out))?;
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({
                "model": a.model_out, "model_sha256": checksum,
                "vocabulary": vocab_path(&a.model_out), "vocabulary_sha256": vocab_checksum,
                "algorithm": algorithm.short_name(), "config": self.settings.resolved(),
            }))?
        );
        Ok(())
    }

    fn predict(&mut self, a: PredictArgs) -> Result<()> {
        let rules = selection_rules(&a.selection, &mut self.settings)?;
        let model = load_model(&a.model)?;
        let vocab_file = a.vocab.unwrap_or_else(|| vocab_path(&a.model));
        let vocab = Vocabulary::load(&vocab_file)?;
        if model.vocabulary_checksum.as_deref().is_some_and(|c| c != vocab.checksum()) {
            return Err(TriageError::InvalidSpec(format!(
                "{} was not the vocabulary used to train {}",
                vocab_file.display(),
                a.model.display()
            )));
        }
        for dump in &a.dumps {
            let doc = preprocess_bundle(&scan_dump(dump, &rules)?, &CleaningConfig::default())?;
            let class = model.predict(&[vectorize(&vocab, &doc)])?[0];
            println!("{}", json!({"dump": dump, "class": class}));
        }
        Ok(())
    }

    fn evaluate(&mut self, a: EvaluateArgs) -> Result<()> {
        let all = Algorithm::ALL.map(|a| a.short_name()).join(",");
        let algorithms = parse_algorithms(&self.settings.get("algos", a.algos, all)?)?;
        let k = self.settings.get("k", a.k, 10)?;
        let (corpus, min_df, trees) = self.corpus(&a.corpus)?;
        let specs: Vec<ClassifierSpec> = algorithms.iter().map(|&al| spec_for(al, self.seed, trees)).collect();
        let learners: Vec<&dyn Learner> = specs.iter().map(|s| s as &dyn Learner).collect();
        let options = CvOptions { k, seed: self.seed, min_df };
        let mut config = self.settings.resolved();
        config["seed"] = json!(self.seed);
        config["specs"] = serde_json::to_value(&specs)?;
        self.log.info(format!("{k}-fold cross-validation of {} algorithms on {} dumps", specs.len(), corpus.len()));
        let report = run_cv(&corpus, &learners, &options, config)?;
        fs::create_dir_all(&a.report_out).map_err(|e| TriageError::Io { path: a.report_out.clone(), source: e })?;
        write_file(&a.report_out.join("report.json"), &render_json(&report)?)?;
        write_file(&a.report_out.join("folds.csv"), &render_csv(&report))?;
        let tables = render_tables(&report);
        write_file(&a.report_out.join("tables.txt"), &tables)?;
        if !self.log.quiet {
            print!("{tables}");
        }
        self.log.debug(format!("report written to {}", a.report_out.display()));
        Ok(())
    }

    fn stats(&mut self, a: StatsArgs) -> Result<()> {
        let m = ScoreMatrix::from_csv(&read_file(&a.scores)?)?;
        let (friedman, nemenyi) = (friedman_test(&m), nemenyi_pairwise(&m));
        match a.format.as_str() {
            "json" => println!(
                "{}",
                serde_json::to_string_pretty(&json!({
                    "treatments": m.treatments(), "friedman": friedman, "nemenyi": nemenyi,
                }))?
            ),
            "table" => print!("{}", render_pairwise("Pairwise Nemenyi p-values", m.treatments(), &friedman, &nemenyi)),
            other => return Err(TriageError::InvalidSpec(format!("unknown stats format {other:?}"))),
        }
        Ok(())
    }

    fn report(&mut self, a: ReportArgs) -> Result<()> {
        let style: ReportStyle = a.style.parse()?;
        let report = parse_json(&read_file(&a.report)?)?;
        print!("{}", render(&report, style)?);
        Ok(())
    }
}

fn execute(cli: Cli) -> Result<()> {
    let mut settings = Settings::load(cli.config.as_deref())?;
    let seed = settings.get("seed", cli.seed, 0)?;
    let verbose = settings.get("verbose", cli.verbose.then_some(true), false)?;
    let quiet = settings.get("quiet", cli.quiet.then_some(true), false)? && !verbose;
    let mut run = Run { settings, seed, log: Log { quiet, verbose } };
    match cli.command {
        Command::Generate(a) => run.generate(a),
        Command::Ingest(a) => run.ingest(a),
        Command::Preprocess(a) => run.preprocess(a),
        Command::Train(a) => run.train(a),
        Command::Predict(a) => run.predict(a),
        Command::Evaluate(a) => run.evaluate(a),
        Command::Stats(a) => run.stats(a),
        Command::Report(a) => run.report(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(if e.is_data_error() { 2 } else { 3 })
        }
    }
}
