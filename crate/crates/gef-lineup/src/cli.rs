//! Command line front end. Configuration comes from an optional JSON file
//! plus flags; flags win. Exit codes: 0 success, 1 pipeline error, 2 bad
//! usage or configuration.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::corpus::{parse_m2, serialize_m2_file, ClcTypeMap, M2Format};
use crate::lineup::{build_lineup, essay_seed, Rate};
use crate::pipeline::{
    accuracy, discriminate_essay_type, discriminate_feedback_based, execute_run, generate_feedback,
    parse_format, resolve_record, run_gec, score_gec, FeedbackResponse, GecSource, PipelineError,
    RunSpec,
};
use crate::report::{emit_csv, write_run_artifacts, TableSpec};

#[derive(Parser)]
#[command(
    name = "gef-lineup",
    version,
    about = "Grammatical lineups: build essay versions, generate feedback, and measure whether a judge can tell them apart"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build lineup files (one JSON file per essay).
    BuildLineup(ConfigArgs),
    /// Reserialize an M2 file under a redaction format.
    RedactM2(RedactArgs),
    /// Score correction systems against the lineup references.
    ScoreGec(ScoreGecArgs),
    /// Run correction and feedback generation, saving the responses.
    GenerateFeedback(ConfigArgs),
    /// Probe a judge over saved feedback responses.
    Discriminate(DiscriminateArgs),
    /// Full pipeline: correction, feedback, discrimination, report.
    Run(ConfigArgs),
    /// Re-render tables and charts from a saved report.
    Report(ReportArgs),
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// JSON configuration file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Essay manifest (JSON lines).
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Correction rates in percent, e.g. 0,25,50,75,100.
    #[arg(long, value_delimiter = ',')]
    rates: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Chat-completions endpoint for non-mock models.
    #[arg(long)]
    endpoint: Option<String>,
    /// Correction source: manual, none, file:<dir>, or llm:<model>.
    #[arg(long)]
    gec: Option<String>,
    /// Feedback generator model id (mock:* or a served model).
    #[arg(long)]
    generator: Option<String>,
    /// Judge model id for discrimination probes.
    #[arg(long)]
    judge: Option<String>,
    /// Discrimination method: essay or feedback.
    #[arg(long)]
    method: Option<String>,
    /// Annotation redaction for probes: standard, replaced, or nolex.
    #[arg(long)]
    m2_format: Option<String>,
    /// Generate feedback from the essays alone (gec source none).
    #[arg(long)]
    no_gec: bool,
    /// JSONL response cache, shared across runs.
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Annotator id whose corrections define the lineup.
    #[arg(long)]
    annotator: Option<u32>,
}

#[derive(Args)]
struct RedactArgs {
    /// Input M2 file.
    input: PathBuf,
    /// standard, replaced, or nolex.
    #[arg(long, default_value = "standard")]
    format: String,
    /// Keep the source line.
    #[arg(long)]
    include_source: bool,
    /// Output path; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreGecArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// System to score, as name=source (repeatable), e.g. manual=manual
    /// or gector=file:hyps/gector.
    #[arg(long = "system")]
    systems: Vec<String>,
}

#[derive(Args)]
struct DiscriminateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Feedback responses saved by generate-feedback.
    #[arg(long)]
    feedbacks: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// A report.json produced by run or discriminate.
    input: PathBuf,
    #[arg(long, default_value = "reports/rendered")]
    out_dir: PathBuf,
}

/// The JSON configuration file counterpart of `ConfigArgs`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    corpus: Option<PathBuf>,
    rates: Option<Vec<f64>>,
    seed: Option<u64>,
    endpoint: Option<String>,
    gec: Option<String>,
    generator: Option<String>,
    judge: Option<String>,
    method: Option<String>,
    m2_format: Option<String>,
    cache: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    workers: Option<usize>,
    annotator: Option<u32>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Pipeline(PipelineError),
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Pipeline(e)
    }
}

impl From<crate::corpus::CorpusError> for CliError {
    fn from(e: crate::corpus::CorpusError) -> Self {
        CliError::Pipeline(e.into())
    }
}

impl From<crate::lineup::LineupError> for CliError {
    fn from(e: crate::lineup::LineupError) -> Self {
        CliError::Pipeline(e.into())
    }
}

impl From<crate::report::ReportError> for CliError {
    fn from(e: crate::report::ReportError) -> Self {
        CliError::Pipeline(e.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Pipeline(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Pipeline(e.into())
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Fully resolved configuration.
struct Resolved {
    corpus: PathBuf,
    rates: Vec<Rate>,
    seed: u64,
    endpoint: Option<String>,
    gec: GecSource,
    generator: String,
    judge: String,
    method: String,
    format: M2Format,
    cache: Option<PathBuf>,
    out_dir: PathBuf,
    workers: usize,
    annotator: u32,
    api_key: Option<String>,
}

fn resolve(args: &ConfigArgs) -> Result<Resolved, CliError> {
    let file: FileConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|_| usage(format!("config not found: {}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| usage(format!("bad config {}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };

    let corpus = args
        .corpus
        .clone()
        .or(file.corpus)
        .ok_or_else(|| usage("no corpus given (use --corpus or the config file)"))?;
    if !corpus.exists() {
        return Err(usage(format!("corpus not found: {}", corpus.display())));
    }

    let rate_values = args
        .rates
        .clone()
        .or(file.rates)
        .unwrap_or_else(|| vec![0.0, 25.0, 50.0, 75.0, 100.0]);
    let mut rates = Vec::new();
    for pct in &rate_values {
        rates.push(
            Rate::from_percent(*pct).ok_or_else(|| usage(format!("bad rate {pct} (percent in 0..=100)")))?,
        );
    }

    let gec_spec = if args.no_gec {
        "none".to_string()
    } else {
        args.gec
            .clone()
            .or(file.gec)
            .unwrap_or_else(|| "manual".to_string())
    };
    let gec = GecSource::parse(&gec_spec)
        .ok_or_else(|| usage(format!("bad gec source {gec_spec} (manual, none, file:<dir>, llm:<model>)")))?;

    let method = args
        .method
        .clone()
        .or(file.method)
        .unwrap_or_else(|| "feedback".to_string());
    if method != "essay" && method != "feedback" {
        return Err(usage(format!("bad method {method} (essay or feedback)")));
    }

    let format_name = args
        .m2_format
        .clone()
        .or(file.m2_format)
        .unwrap_or_else(|| "nolex".to_string());
    let format = parse_format(&format_name)
        .ok_or_else(|| usage(format!("bad m2 format {format_name} (standard, replaced, nolex)")))?;

    let workers = args
        .workers
        .or(file.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(4, |n| n.get()));
    if workers == 0 {
        return Err(usage("workers must be at least 1"));
    }

    let endpoint = args.endpoint.clone().or(file.endpoint);
    let generator = args
        .generator
        .clone()
        .or(file.generator)
        .unwrap_or_else(|| "mock:oracle".to_string());
    let judge = args
        .judge
        .clone()
        .or(file.judge)
        .unwrap_or_else(|| "mock:oracle".to_string());
    // Served models are rejected here, before anything touches the network.
    if endpoint.is_none() {
        let gec_model = match &gec {
            GecSource::LlmGec(m) => Some(m.as_str()),
            _ => None,
        };
        for model in [Some(generator.as_str()), Some(judge.as_str()), gec_model].into_iter().flatten() {
            if !model.starts_with("mock:") {
                return Err(usage(format!(
                    "model {model} needs an endpoint (--endpoint or \"endpoint\" in the config)"
                )));
            }
        }
    }

    Ok(Resolved {
        corpus,
        rates,
        seed: args.seed.or(file.seed).unwrap_or(0),
        endpoint,
        gec,
        generator,
        judge,
        method,
        format,
        cache: args.cache.clone().or(file.cache),
        out_dir: args.out_dir.clone().or(file.out_dir).unwrap_or_else(|| PathBuf::from(".")),
        workers,
        annotator: args.annotator.or(file.annotator).unwrap_or(0),
        api_key: std::env::var("GEF_API_KEY").ok(),
    })
}

impl Resolved {
    fn run_spec(&self) -> RunSpec {
        RunSpec {
            corpus: self.corpus.clone(),
            rates: self.rates.clone(),
            seed: self.seed,
            gec: self.gec.clone(),
            generator_model: self.generator.clone(),
            judge_model: self.judge.clone(),
            method_name: self.method.clone(),
            format: self.format,
            cache: self.cache.clone(),
            out_dir: self.out_dir.clone(),
            endpoint: self.endpoint.clone(),
            api_key: self.api_key.clone(),
            workers: self.workers,
            annotator: self.annotator,
        }
    }

    fn lineups(&self) -> Result<Vec<crate::lineup::Lineup>, CliError> {
        let entries = crate::corpus::load_manifest(&self.corpus)?;
        let type_map = ClcTypeMap::default();
        let mut lineups = Vec::new();
        for entry in &entries {
            let record = resolve_record(entry, &type_map, self.annotator)?;
            lineups.push(build_lineup(
                &record,
                &self.rates,
                essay_seed(self.seed, &entry.essay_id),
            )?);
        }
        Ok(lineups)
    }

    fn gateway(&self, model: &str) -> Result<crate::gateway::Gateway, CliError> {
        let cache = match &self.cache {
            Some(p) => std::sync::Arc::new(
                crate::gateway::Cache::open(p).map_err(PipelineError::from)?,
            ),
            None => std::sync::Arc::new(crate::gateway::Cache::in_memory()),
        };
        let backend = crate::gateway::Backend::from_spec(
            model,
            self.endpoint.as_deref(),
            self.api_key.clone(),
        )
        .map_err(PipelineError::from)?;
        Ok(crate::gateway::Gateway::new(backend, model, cache))
    }
}

fn cmd_build_lineup(args: &ConfigArgs) -> Result<(), CliError> {
    let cfg = resolve(args)?;
    let lineups = cfg.lineups()?;
    let dir = cfg.out_dir.join("lineups");
    std::fs::create_dir_all(&dir)?;
    let mut degenerate = 0usize;
    for lineup in &lineups {
        std::fs::write(dir.join(format!("{}.json", lineup.essay_id)), lineup.to_json())?;
        if lineup.is_degenerate() {
            degenerate += 1;
            eprintln!("degenerate lineup: {} (no edits)", lineup.essay_id);
        }
    }
    println!(
        "wrote {} lineups with {} versions each to {}",
        lineups.len(),
        cfg.rates.len(),
        dir.display()
    );
    if degenerate > 0 {
        println!("{degenerate} degenerate");
    }
    Ok(())
}

fn cmd_redact_m2(args: &RedactArgs) -> Result<(), CliError> {
    let mut format = parse_format(&args.format)
        .ok_or_else(|| usage(format!("bad m2 format {} (standard, replaced, nolex)", args.format)))?;
    if args.include_source {
        format = format.with_source();
    }
    let text = std::fs::read_to_string(&args.input)
        .map_err(|_| usage(format!("m2 file not found: {}", args.input.display())))?;
    let records = parse_m2(&text)?;
    let out = serialize_m2_file(&records, format);
    match &args.output {
        Some(path) => std::fs::write(path, out)?,
        None => print!("{out}"),
    }
    Ok(())
}

fn cmd_score_gec(args: &ScoreGecArgs) -> Result<(), CliError> {
    let cfg = resolve(&args.config)?;
    let mut systems = Vec::new();
    let specs = if args.systems.is_empty() {
        vec![format!("{}={}", "manual", "manual")]
    } else {
        args.systems.clone()
    };
    for spec in &specs {
        let (name, source_spec) = spec
            .split_once('=')
            .ok_or_else(|| usage(format!("bad --system {spec} (expected name=source)")))?;
        let source = GecSource::parse(source_spec)
            .ok_or_else(|| usage(format!("bad gec source {source_spec}")))?;
        if source == GecSource::None {
            return Err(usage("score-gec needs a correcting source, not none"));
        }
        if let GecSource::LlmGec(model) = &source {
            if cfg.endpoint.is_none() && !model.starts_with("mock:") {
                return Err(usage(format!(
                    "model {model} needs an endpoint (--endpoint or \"endpoint\" in the config)"
                )));
            }
        }
        systems.push((name.to_string(), source));
    }
    let scores = score_gec(
        &cfg.corpus,
        &cfg.rates,
        cfg.seed,
        &systems,
        cfg.annotator,
        cfg.endpoint.as_deref(),
        cfg.api_key.as_deref(),
        cfg.cache.as_deref(),
    )?;
    let dir = cfg.out_dir.join("gec-scores");
    std::fs::create_dir_all(&dir)?;
    std::fs::write(
        dir.join("scores.json"),
        serde_json::to_string_pretty(&scores)? + "\n",
    )?;
    let mut gleu_rows = vec![(
        "no correction".to_string(),
        scores.lower_bound.clone(),
    )];
    for system in &scores.systems {
        emit_csv(
            &TableSpec::GecF05Grid {
                system: system.system.clone(),
                rates: scores.rates.clone(),
                grid: system.grid.clone(),
            },
            &dir.join(format!("f05_{}.csv", system.system)),
        )?;
        gleu_rows.push((system.system.clone(), system.gleu.clone()));
    }
    emit_csv(
        &TableSpec::GleuTable {
            rates: scores.rates.clone(),
            rows: gleu_rows,
        },
        &dir.join("gleu.csv"),
    )?;
    println!("scored {} systems over {} rates into {}", scores.systems.len(), scores.rates.len(), dir.display());
    Ok(())
}

fn cmd_generate_feedback(args: &ConfigArgs) -> Result<(), CliError> {
    let cfg = resolve(args)?;
    let lineups = cfg.lineups()?;
    let generator = cfg.gateway(&cfg.generator)?;
    let gec_gateway = match &cfg.gec {
        GecSource::LlmGec(model) => Some(cfg.gateway(model)?),
        _ => None,
    };
    std::fs::create_dir_all(&cfg.out_dir)?;
    let path = cfg.out_dir.join("feedbacks.jsonl");
    let mut lines = String::new();
    for (index, lineup) in lineups.iter().enumerate() {
        let corrected = match &cfg.gec {
            GecSource::None => None,
            source => Some(run_gec(lineup, source, index, gec_gateway.as_ref())?),
        };
        for fb in generate_feedback(lineup, corrected.as_ref(), &cfg.gec, &generator)? {
            lines.push_str(&serde_json::to_string(&fb)?);
            lines.push('\n');
        }
    }
    std::fs::write(&path, lines)?;
    println!("wrote feedback for {} essays to {}", lineups.len(), path.display());
    Ok(())
}

fn cmd_discriminate(args: &DiscriminateArgs) -> Result<(), CliError> {
    let cfg = resolve(&args.config)?;
    let text = std::fs::read_to_string(&args.feedbacks)
        .map_err(|_| usage(format!("feedback file not found: {}", args.feedbacks.display())))?;
    let mut by_essay: BTreeMap<String, Vec<FeedbackResponse>> = BTreeMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let fb: FeedbackResponse = serde_json::from_str(line)?;
        by_essay.entry(fb.essay_id.clone()).or_default().push(fb);
    }
    let lineups = cfg.lineups()?;
    let judge = cfg.gateway(&cfg.judge)?;
    let mut matrices = Vec::new();
    for lineup in &lineups {
        let feedbacks = by_essay
            .get(&lineup.essay_id)
            .ok_or_else(|| usage(format!("no feedback for essay {}", lineup.essay_id)))?;
        let matrix = if cfg.method == "feedback" {
            discriminate_feedback_based(lineup, feedbacks, cfg.format, &judge)?
        } else {
            discriminate_essay_type(lineup, feedbacks, &judge)?
        };
        matrices.push(matrix);
    }
    let report = accuracy(&matrices)?;
    let dir = cfg.out_dir.join("discrimination");
    std::fs::create_dir_all(&dir)?;
    std::fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    write_run_artifacts(&dir, &report)?;
    println!(
        "accuracy {:.2} over {} essays ({} method), artifacts in {}",
        report.accuracy * 100.0,
        report.n_essays,
        cfg.method,
        dir.display()
    );
    Ok(())
}

fn cmd_run(args: &ConfigArgs) -> Result<(), CliError> {
    let cfg = resolve(args)?;
    let output = execute_run(&cfg.run_spec())?;
    println!(
        "run {} finished: accuracy {:.2} over {} essays, artifacts in {}",
        output.run_id,
        output.report.accuracy * 100.0,
        output.report.n_essays,
        output.dir.display()
    );
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.input)
        .map_err(|_| usage(format!("report not found: {}", args.input.display())))?;
    let report: crate::pipeline::EvalReport =
        serde_json::from_str(&text).map_err(|e| usage(format!("bad report: {e}")))?;
    std::fs::create_dir_all(&args.out_dir)?;
    write_run_artifacts(&args.out_dir, &report)?;
    println!("rendered tables and charts to {}", args.out_dir.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::BuildLineup(args) => cmd_build_lineup(args),
        Command::RedactM2(args) => cmd_redact_m2(args),
        Command::ScoreGec(args) => cmd_score_gec(args),
        Command::GenerateFeedback(args) => cmd_generate_feedback(args),
        Command::Discriminate(args) => cmd_discriminate(args),
        Command::Run(args) => cmd_run(args),
        Command::Report(args) => cmd_report(args),
    }
}

/// Entry point; returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes.
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Pipeline(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let config_path = dir.path().join("config.json");
        std::fs::write(
            &config_path,
            format!(
                "{{\"corpus\": {:?}, \"seed\": 3, \"judge\": \"mock:uniform\", \"method\": \"essay\"}}",
                concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/corpus/essays.jsonl")
            ),
        )
        .unwrap();
        let mut args = ConfigArgs {
            config: Some(config_path),
            corpus: None,
            rates: None,
            seed: Some(9),
            endpoint: None,
            gec: None,
            generator: None,
            judge: None,
            method: None,
            m2_format: None,
            no_gec: false,
            cache: None,
            out_dir: None,
            workers: None,
            annotator: None,
        };
        let cfg = resolve(&args).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.judge, "mock:uniform");
        assert_eq!(cfg.method, "essay");
        args.method = Some("feedback".into());
        assert_eq!(resolve(&args).unwrap().method, "feedback");
    }

    #[test]
    fn missing_corpus_is_a_usage_error() {
        let args = ConfigArgs {
            config: None,
            corpus: Some(PathBuf::from("/nonexistent/essays.jsonl")),
            rates: None,
            seed: None,
            endpoint: None,
            gec: None,
            generator: None,
            judge: None,
            method: None,
            m2_format: None,
            no_gec: false,
            cache: None,
            out_dir: None,
            workers: None,
            annotator: None,
        };
        match resolve(&args) {
            Err(CliError::Usage(msg)) => assert!(msg.contains("corpus not found")),
            _ => panic!("expected usage error"),
        }
    }

    #[test]
    fn no_gec_flag_wins() {
        let args = ConfigArgs {
            config: None,
            corpus: Some(PathBuf::from(concat!(
                env!("CARGO_MANIFEST_DIR"),
                "/fixtures/corpus/essays.jsonl"
            ))),
            rates: None,
            seed: None,
            endpoint: None,
            gec: Some("manual".into()),
            generator: None,
            judge: None,
            method: None,
            m2_format: None,
            no_gec: true,
            cache: None,
            out_dir: None,
            workers: None,
            annotator: None,
        };
        assert_eq!(resolve(&args).unwrap().gec, GecSource::None);
    }
}
