//! The three-stage pipeline: correct each lineup version, generate feedback
//! for it, and probe a judge to see whether the feedback can be matched back
//! to the version it came from.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{
    detokenize, parse_clc_xml, parse_m2, serialize_m2, tokenize, ClcTypeMap, CorpusError, Edit,
    EssayEntry, M2Format, M2Record, TokenSeq,
};
use crate::gateway::{
    render_prompt, Backend, Cache, Gateway, GatewayError, PromptKind, PromptSlots,
};
use crate::lineup::{build_lineup, essay_seed, Lineup, LineupError, Rate};
use crate::metrics::{edit_match_count, extract_edits, f_beta, gleu, GleuScore, MetricsError, Prf, DEFAULT_NMAX};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Lineup(#[from] LineupError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("missing hypothesis for {rate} in {path} (essay {index})")]
    MissingHypothesis {
        path: String,
        rate: String,
        index: usize,
    },
    #[error("feedback labels do not match the lineup rates")]
    LabelMismatch,
    #[error("essay {essay_id}: {reason}")]
    BadEssay { essay_id: String, reason: String },
    #[error("discrimination prompts must not include the source line")]
    SourceInProbe,
    #[error(transparent)]
    Report(#[from] crate::report::ReportError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type PipelineResult<T> = Result<T, PipelineError>;

/// Where corrected versions come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GecSource {
    /// Apply the residual annotations themselves.
    Manual,
    /// Read rate-labeled hypothesis files from a directory.
    ExternalHypFile(PathBuf),
    /// Ask a model with the correction prompt.
    LlmGec(String),
    /// Skip correction; feedback is generated from the essay alone.
    None,
}

impl GecSource {
    pub fn parse(spec: &str) -> Option<GecSource> {
        match spec {
            "manual" => Some(GecSource::Manual),
            "none" => Some(GecSource::None),
            _ => {
                if let Some(dir) = spec.strip_prefix("file:") {
                    Some(GecSource::ExternalHypFile(PathBuf::from(dir)))
                } else {
                    spec.strip_prefix("llm:")
                        .map(|m| GecSource::LlmGec(m.to_string()))
                }
            }
        }
    }

    pub fn as_spec(&self) -> String {
        match self {
            GecSource::Manual => "manual".into(),
            GecSource::None => "none".into(),
            GecSource::ExternalHypFile(dir) => format!("file:{}", dir.display()),
            GecSource::LlmGec(model) => format!("llm:{model}"),
        }
    }
}

impl Serialize for GecSource {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.as_spec())
    }
}

impl<'de> Deserialize<'de> for GecSource {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let spec = String::deserialize(d)?;
        GecSource::parse(&spec)
            .ok_or_else(|| serde::de::Error::custom(format!("bad gec source {spec}")))
    }
}

/// One generated feedback response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackResponse {
    pub essay_id: String,
    pub rate: Rate,
    pub generator_model: String,
    pub gec_source: GecSource,
    pub text: String,
}

/// Which discrimination protocol produced a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Method {
    EssayType,
    FeedbackBased(M2Format),
}

/// Yes-probabilities for one essay: rows are queries, columns are foils.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbMatrix {
    pub essay_id: String,
    pub method: Method,
    pub rows: Vec<Rate>,
    pub cols: Vec<Rate>,
    pub p: Vec<Vec<f64>>,
    /// Rows probed with an empty annotation block (fully corrected).
    pub degenerate_rows: Vec<bool>,
    /// True when the essay had no edits at all.
    pub lineup_degenerate: bool,
}

/// Accuracy over the degenerate (zero-edit) lineups, reported apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegenerateStats {
    pub n_essays: usize,
    pub accuracy: f64,
}

/// Aggregated discrimination results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_essays: usize,
    pub labels: Vec<Rate>,
    pub accuracy: f64,
    pub confusion: Vec<Vec<u32>>,
    /// Per row label, mean p_yes over essays per column; None when every
    /// contributing row was degenerate.
    pub mean_yes: Vec<Option<Vec<f64>>>,
    /// Rows whose argmax was shared by more than one column.
    pub tie_rows: u32,
    pub degenerate: Option<DegenerateStats>,
}

/// Builds the discrimination record for one corpus entry: explicit M2 wins,
/// then inline annotations, then alignment against a corrected text, then an
/// empty record.
pub fn resolve_record(
    entry: &EssayEntry,
    type_map: &ClcTypeMap,
    annotator: u32,
) -> PipelineResult<M2Record> {
    if let Some(m2) = &entry.m2 {
        let mut records = parse_m2(m2)?;
        if records.len() != 1 {
            return Err(PipelineError::BadEssay {
                essay_id: entry.essay_id.clone(),
                reason: format!("m2 field holds {} records, expected 1", records.len()),
            });
        }
        let record = records.remove(0);
        let mut record = record.for_annotator(annotator);
        record.essay_id = entry.essay_id.clone();
        return Ok(record);
    }
    if let Some(clc) = &entry.clc {
        return Ok(parse_clc_xml(&entry.essay_id, clc, type_map)?);
    }
    let source = tokenize(&entry.text);
    if let Some(corrected) = &entry.corrected_text {
        let edits = extract_edits(&source, &tokenize(corrected));
        return Ok(M2Record::new(entry.essay_id.clone(), source, edits)?);
    }
    Ok(M2Record::new(entry.essay_id.clone(), source, Vec::new())?)
}

fn residual_refs(version: &crate::lineup::EssayVersion) -> Vec<&Edit> {
    version.residual.edits.iter().collect()
}

/// Stage 1: a corrected text per rate.
pub fn run_gec(
    lineup: &Lineup,
    source: &GecSource,
    essay_index: usize,
    gec_gateway: Option<&Gateway>,
) -> PipelineResult<BTreeMap<Rate, TokenSeq>> {
    let mut out = BTreeMap::new();
    for version in &lineup.versions {
        let corrected = match source {
            GecSource::Manual => {
                crate::lineup::apply_edits(&version.text, &residual_refs(version))?
            }
            GecSource::ExternalHypFile(dir) => {
                let path = dir.join(format!("{}.txt", rate_stem(version.rate)));
                let text = std::fs::read_to_string(&path).map_err(|_| {
                    PipelineError::MissingHypothesis {
                        path: path.display().to_string(),
                        rate: version.rate.label(),
                        index: essay_index,
                    }
                })?;
                let line = text.lines().nth(essay_index).ok_or_else(|| {
                    PipelineError::MissingHypothesis {
                        path: path.display().to_string(),
                        rate: version.rate.label(),
                        index: essay_index,
                    }
                })?;
                tokenize(line)
            }
            GecSource::LlmGec(_) => {
                let gw = gec_gateway.ok_or_else(|| PipelineError::BadEssay {
                    essay_id: lineup.essay_id.clone(),
                    reason: "llm gec requested but no gateway configured".into(),
                })?;
                let prompt = render_prompt(
                    PromptKind::Gec,
                    &PromptSlots {
                        essay: Some(&detokenize(&version.text)),
                        ..Default::default()
                    },
                )?;
                tokenize(&gw.complete(&prompt)?)
            }
            GecSource::None => {
                return Err(PipelineError::BadEssay {
                    essay_id: lineup.essay_id.clone(),
                    reason: "run_gec called with gec source none".into(),
                })
            }
        };
        out.insert(version.rate, corrected);
    }
    Ok(out)
}

/// File stem used for rate-labeled hypothesis files, e.g. "0", "25", "12.5".
pub fn rate_stem(rate: Rate) -> String {
    let bp = rate.basis_points();
    if bp % 100 == 0 {
        format!("{}", bp / 100)
    } else {
        format!("{}", bp as f64 / 100.0)
    }
}

/// Stage 2: one feedback response per version. With a corrected map the
/// prompt pairs original and corrected (the rate-1 version gets the variant
/// that waives the revised essay); without one the essay stands alone.
pub fn generate_feedback(
    lineup: &Lineup,
    corrected: Option<&BTreeMap<Rate, TokenSeq>>,
    gec_source: &GecSource,
    generator: &Gateway,
) -> PipelineResult<Vec<FeedbackResponse>> {
    let mut out = Vec::with_capacity(lineup.versions.len());
    for version in &lineup.versions {
        let essay = detokenize(&version.text);
        let prompt = match corrected {
            Some(map) => {
                let fixed = map.get(&version.rate).ok_or(PipelineError::LabelMismatch)?;
                let kind = if version.rate == Rate::FULL {
                    PromptKind::GefWithGec100
                } else {
                    PromptKind::GefWithGec
                };
                render_prompt(
                    kind,
                    &PromptSlots {
                        essay: Some(&essay),
                        corrected_essay: Some(&detokenize(fixed)),
                        ..Default::default()
                    },
                )?
            }
            None => render_prompt(
                PromptKind::GefNoGec,
                &PromptSlots {
                    essay: Some(&essay),
                    ..Default::default()
                },
            )?,
        };
        out.push(FeedbackResponse {
            essay_id: lineup.essay_id.clone(),
            rate: version.rate,
            generator_model: generator.model_id().to_string(),
            gec_source: gec_source.clone(),
            text: generator.complete(&prompt)?,
        });
    }
    Ok(out)
}

/// Lets domain-aware mock judges know the lineup they are being probed on.
pub fn seed_mock_registry(gateway: &Gateway, lineup: &Lineup) {
    if let Some(registry) = gateway.backend().registry() {
        for version in &lineup.versions {
            let bodies: Vec<String> = [
                M2Format::standard(),
                M2Format::replaced_corrected(),
                M2Format::no_lexical(),
            ]
            .iter()
            .map(|fmt| serialize_m2(&version.residual, *fmt).trim_end().to_string())
            .collect();
            registry.register_version(
                &version.essay_id,
                version.rate,
                &detokenize(&version.text),
                &bodies,
            );
        }
    }
}

fn check_alignment(lineup: &Lineup, feedbacks: &[FeedbackResponse]) -> PipelineResult<()> {
    let rates: Vec<Rate> = feedbacks.iter().map(|f| f.rate).collect();
    if rates != lineup.rates() {
        return Err(PipelineError::LabelMismatch);
    }
    Ok(())
}

/// Stage 3a: entry (i, j) asks whether feedback i fits essay version j.
pub fn discriminate_essay_type(
    lineup: &Lineup,
    feedbacks: &[FeedbackResponse],
    judge: &Gateway,
) -> PipelineResult<ProbMatrix> {
    check_alignment(lineup, feedbacks)?;
    seed_mock_registry(judge, lineup);
    let rates = lineup.rates();
    let mut p = Vec::with_capacity(feedbacks.len());
    for feedback in feedbacks {
        let mut row = Vec::with_capacity(lineup.versions.len());
        for version in &lineup.versions {
            let prompt = render_prompt(
                PromptKind::EssayMatch,
                &PromptSlots {
                    essay: Some(&detokenize(&version.text)),
                    feedback: Some(&feedback.text),
                    ..Default::default()
                },
            )?;
            row.push(judge.probe_yes(&prompt)?.p_yes);
        }
        p.push(row);
    }
    Ok(ProbMatrix {
        essay_id: lineup.essay_id.clone(),
        method: Method::EssayType,
        rows: rates.clone(),
        cols: rates,
        p,
        degenerate_rows: vec![false; feedbacks.len()],
        lineup_degenerate: lineup.is_degenerate(),
    })
}

/// Stage 3b: entry (i, j) asks whether the residual annotation file of
/// version i is explained by feedback j.
pub fn discriminate_feedback_based(
    lineup: &Lineup,
    feedbacks: &[FeedbackResponse],
    fmt: M2Format,
    judge: &Gateway,
) -> PipelineResult<ProbMatrix> {
    if fmt.include_source {
        return Err(PipelineError::SourceInProbe);
    }
    check_alignment(lineup, feedbacks)?;
    seed_mock_registry(judge, lineup);
    let rates = lineup.rates();
    let mut p = Vec::with_capacity(lineup.versions.len());
    let mut degenerate_rows = Vec::with_capacity(lineup.versions.len());
    for version in &lineup.versions {
        let body = serialize_m2(&version.residual, fmt);
        let body = body.trim_end();
        degenerate_rows.push(body.is_empty());
        let mut row = Vec::with_capacity(feedbacks.len());
        for feedback in feedbacks {
            let prompt = render_prompt(
                PromptKind::FeedbackMatch,
                &PromptSlots {
                    feedback: Some(&feedback.text),
                    errant_file: Some(body),
                    ..Default::default()
                },
            )?;
            row.push(judge.probe_yes(&prompt)?.p_yes);
        }
        p.push(row);
    }
    Ok(ProbMatrix {
        essay_id: lineup.essay_id.clone(),
        method: Method::FeedbackBased(fmt),
        rows: rates.clone(),
        cols: rates,
        p,
        degenerate_rows,
        lineup_degenerate: lineup.is_degenerate(),
    })
}

fn argmax_lowest(row: &[f64]) -> (usize, bool) {
    let mut best = 0usize;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    let tied = row
        .iter()
        .enumerate()
        .any(|(j, &v)| j != best && v == row[best]);
    (best, tied)
}

/// Folds matrices into accuracy, a confusion matrix and mean-yes curves.
/// Argmax ties go to the lowest column index. Zero-edit lineups are scored
/// apart; degenerate rows stay in the accuracy but not in the curves.
pub fn accuracy(matrices: &[ProbMatrix]) -> PipelineResult<EvalReport> {
    let labels = match matrices.first() {
        Some(m) => m.rows.clone(),
        None => Vec::new(),
    };
    let k = labels.len();
    let mut confusion = vec![vec![0u32; k]; k];
    let mut sums = vec![vec![0.0f64; k]; k];
    let mut contributing = vec![0usize; k];
    let mut tie_rows = 0u32;
    let mut n_main = 0usize;
    let mut degenerate_essays = 0usize;
    let mut degenerate_hits = 0usize;
    let mut degenerate_rows_total = 0usize;
    for matrix in matrices {
        if matrix.rows != labels || matrix.cols != labels {
            return Err(PipelineError::LabelMismatch);
        }
        if matrix.lineup_degenerate {
            degenerate_essays += 1;
            for (i, row) in matrix.p.iter().enumerate() {
                let (pred, _) = argmax_lowest(row);
                degenerate_rows_total += 1;
                if pred == i {
                    degenerate_hits += 1;
                }
            }
            continue;
        }
        n_main += 1;
        for (i, row) in matrix.p.iter().enumerate() {
            let (pred, tied) = argmax_lowest(row);
            if tied {
                tie_rows += 1;
            }
            confusion[i][pred] += 1;
            if !matrix.degenerate_rows[i] {
                contributing[i] += 1;
                for (j, &v) in row.iter().enumerate() {
                    sums[i][j] += v;
                }
            }
        }
    }
    let total: u32 = confusion.iter().flatten().sum();
    let trace: u32 = (0..k).map(|i| confusion[i][i]).sum();
    let mean_yes = sums
        .into_iter()
        .zip(&contributing)
        .map(|(row, &n)| {
            if n == 0 {
                None
            } else {
                Some(row.into_iter().map(|s| s / n as f64).collect())
            }
        })
        .collect();
    Ok(EvalReport {
        n_essays: n_main,
        labels,
        accuracy: if total == 0 {
            0.0
        } else {
            trace as f64 / total as f64
        },
        confusion,
        mean_yes,
        tie_rows,
        degenerate: if degenerate_essays == 0 {
            None
        } else {
            Some(DegenerateStats {
                n_essays: degenerate_essays,
                accuracy: if degenerate_rows_total == 0 {
                    0.0
                } else {
                    degenerate_hits as f64 / degenerate_rows_total as f64
                },
            })
        },
    })
}

/// Everything a full run needs.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub corpus: PathBuf,
    pub rates: Vec<Rate>,
    pub seed: u64,
    pub gec: GecSource,
    pub generator_model: String,
    pub judge_model: String,
    pub method_name: String,
    pub format: M2Format,
    pub cache: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub endpoint: Option<String>,
    pub api_key: Option<String>,
    pub workers: usize,
    pub annotator: u32,
}

/// The recorded facts of a run; its digest is the run id.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub corpus: String,
    pub rates: Vec<Rate>,
    pub seed: u64,
    pub gec_source: GecSource,
    pub generator_model: String,
    pub judge_model: String,
    pub method: String,
    pub m2_format: String,
    pub cache: String,
}

pub fn format_name(fmt: M2Format) -> &'static str {
    use crate::corpus::Redaction;
    match fmt.redaction {
        Redaction::Standard => "standard",
        Redaction::ReplacedCorrected => "replaced",
        Redaction::NoLexical => "nolex",
    }
}

pub fn parse_format(name: &str) -> Option<M2Format> {
    match name {
        "standard" => Some(M2Format::standard()),
        "replaced" => Some(M2Format::replaced_corrected()),
        "nolex" => Some(M2Format::no_lexical()),
        _ => None,
    }
}

impl RunSpec {
    pub fn manifest(&self) -> RunManifest {
        RunManifest {
            corpus: self.corpus.display().to_string(),
            rates: self.rates.clone(),
            seed: self.seed,
            gec_source: self.gec.clone(),
            generator_model: self.generator_model.clone(),
            judge_model: self.judge_model.clone(),
            method: self.method_name.clone(),
            m2_format: format_name(self.format).to_string(),
            cache: self
                .cache
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        }
    }

    pub fn run_id(&self) -> String {
        let json = serde_json::to_string(&self.manifest()).expect("manifest serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest[..6].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A full run's in-memory results.
pub struct RunOutput {
    pub run_id: String,
    pub dir: PathBuf,
    pub report: EvalReport,
    pub matrices: Vec<ProbMatrix>,
    pub feedbacks: Vec<FeedbackResponse>,
    pub probe_backend_calls: u64,
}

fn open_cache(path: Option<&Path>) -> PipelineResult<Arc<Cache>> {
    Ok(match path {
        Some(p) => Arc::new(Cache::open(p)?),
        None => Arc::new(Cache::in_memory()),
    })
}

fn build_gateway(
    model: &str,
    endpoint: Option<&str>,
    api_key: Option<&str>,
    cache: Arc<Cache>,
) -> PipelineResult<Gateway> {
    let backend = Backend::from_spec(model, endpoint, api_key.map(str::to_string))?;
    Ok(Gateway::new(backend, model, cache))
}

/// Loads the corpus, builds a lineup per essay, runs the three stages over a
/// bounded worker pool, and writes every artifact under
/// `<out>/reports/<run-id>/`.
pub fn execute_run(spec: &RunSpec) -> PipelineResult<RunOutput> {
    let entries = crate::corpus::load_manifest(&spec.corpus)?;
    let type_map = ClcTypeMap::default();
    let cache = open_cache(spec.cache.as_deref())?;
    let generator = build_gateway(
        &spec.generator_model,
        spec.endpoint.as_deref(),
        spec.api_key.as_deref(),
        cache.clone(),
    )?;
    let judge = build_gateway(
        &spec.judge_model,
        spec.endpoint.as_deref(),
        spec.api_key.as_deref(),
        cache.clone(),
    )?;
    let gec_gateway = match &spec.gec {
        GecSource::LlmGec(model) => Some(build_gateway(
            model,
            spec.endpoint.as_deref(),
            spec.api_key.as_deref(),
            cache.clone(),
        )?),
        _ => None,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers.max(1))
        .build()
        .map_err(|e| PipelineError::BadEssay {
            essay_id: String::new(),
            reason: format!("worker pool: {e}"),
        })?;

    let jobs: Vec<(usize, &EssayEntry)> = entries.iter().enumerate().collect();
    let mut results: Vec<(usize, (Vec<FeedbackResponse>, ProbMatrix))> = pool.install(|| {
        use rayon::prelude::*;
        jobs.par_iter()
            .map(|&(index, entry)| {
                let record = resolve_record(entry, &type_map, spec.annotator)?;
                let lineup = build_lineup(&record, &spec.rates, essay_seed(spec.seed, &entry.essay_id))?;
                let corrected = match &spec.gec {
                    GecSource::None => None,
                    source => Some(run_gec(&lineup, source, index, gec_gateway.as_ref())?),
                };
                let feedbacks =
                    generate_feedback(&lineup, corrected.as_ref(), &spec.gec, &generator)?;
                let matrix = if spec.method_name == "feedback" {
                    discriminate_feedback_based(&lineup, &feedbacks, spec.format, &judge)?
                } else {
                    discriminate_essay_type(&lineup, &feedbacks, &judge)?
                };
                Ok((index, (feedbacks, matrix)))
            })
            .collect::<PipelineResult<Vec<_>>>()
    })?;
    results.sort_by_key(|(index, _)| *index);

    let mut feedbacks = Vec::new();
    let mut matrices = Vec::new();
    for (_, (fb, matrix)) in results {
        feedbacks.extend(fb);
        matrices.push(matrix);
    }
    let report = accuracy(&matrices)?;

    let run_id = spec.run_id();
    let dir = spec.out_dir.join("reports").join(&run_id);
    std::fs::create_dir_all(&dir)?;
    let manifest_json = serde_json::to_string_pretty(&spec.manifest())?;
    std::fs::write(dir.join("manifest.json"), manifest_json + "\n")?;
    let report_json = serde_json::to_string_pretty(&report)?;
    std::fs::write(dir.join("report.json"), report_json + "\n")?;
    let mut probes = String::new();
    for matrix in &matrices {
        probes.push_str(&serde_json::to_string(matrix)?);
        probes.push('\n');
    }
    std::fs::write(dir.join("probes.jsonl"), probes)?;
    let mut fb_lines = String::new();
    for fb in &feedbacks {
        fb_lines.push_str(&serde_json::to_string(fb)?);
        fb_lines.push('\n');
    }
    std::fs::write(dir.join("feedbacks.jsonl"), fb_lines)?;

    crate::report::write_run_artifacts(&dir, &report)?;

    Ok(RunOutput {
        run_id,
        dir,
        report,
        matrices,
        feedbacks,
        probe_backend_calls: judge.backend_calls(),
    })
}

/// Cross-version F0.5 grid and GLEU rows for one correction system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemScores {
    pub system: String,
    /// grid[i][j]: edits of hypothesis i scored against the reference edits
    /// of version j. Rates exclude the fully corrected version.
    pub grid: Vec<Vec<Prf>>,
    /// GLEU of the system's hypotheses per version, reference = fully
    /// corrected text.
    pub gleu: Vec<GleuScore>,
}

/// The score-gec artifact: one grid per system plus the uncorrected GLEU
/// lower bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GecScores {
    pub rates: Vec<Rate>,
    pub lower_bound: Vec<GleuScore>,
    pub systems: Vec<SystemScores>,
}

/// Scores correction systems against the lineup references. Reference edits
/// for version j are extracted between version j and the fully corrected
/// text, the same alignment applied to hypotheses, so a hypothesis equal to
/// the reference text scores exactly 1 against its own version.
pub fn score_gec(
    corpus: &Path,
    rates: &[Rate],
    seed: u64,
    systems: &[(String, GecSource)],
    annotator: u32,
    endpoint: Option<&str>,
    api_key: Option<&str>,
    cache: Option<&Path>,
) -> PipelineResult<GecScores> {
    let entries = crate::corpus::load_manifest(corpus)?;
    let type_map = ClcTypeMap::default();
    let cache = open_cache(cache)?;
    let mut lineups = Vec::new();
    for entry in &entries {
        let record = resolve_record(entry, &type_map, annotator)?;
        lineups.push(build_lineup(&record, rates, essay_seed(seed, &entry.essay_id))?);
    }
    let scored: Vec<Rate> = rates
        .iter()
        .copied()
        .filter(|r| *r != Rate::FULL)
        .collect();

    // Per essay and version: the source tokens, reference text and
    // reference edits.
    let full_texts: Vec<TokenSeq> = lineups
        .iter()
        .map(|l| l.versions.last().expect("rates include 1").text.clone())
        .collect();
    let mut ref_edits: Vec<Vec<Vec<Edit>>> = Vec::new();
    for (lineup, full) in lineups.iter().zip(&full_texts) {
        let mut per_version = Vec::new();
        for rate in &scored {
            let version = lineup
                .versions
                .iter()
                .find(|v| v.rate == *rate)
                .expect("rate present");
            per_version.push(extract_edits(&version.text, full));
        }
        ref_edits.push(per_version);
    }

    let sources_at = |rate_idx: usize| -> Vec<TokenSeq> {
        lineups
            .iter()
            .map(|l| {
                l.versions
                    .iter()
                    .find(|v| v.rate == scored[rate_idx])
                    .expect("rate present")
                    .text
                    .clone()
            })
            .collect()
    };

    let mut lower_bound = Vec::new();
    for i in 0..scored.len() {
        let sources = sources_at(i);
        lower_bound.push(gleu(&sources, &full_texts, &sources, DEFAULT_NMAX)?);
    }

    let mut out_systems = Vec::new();
    for (name, source) in systems {
        let gec_gateway = match source {
            GecSource::LlmGec(model) => Some(build_gateway(
                model,
                endpoint,
                api_key.map(str::to_string).as_deref(),
                cache.clone(),
            )?),
            _ => None,
        };
        // hyp_edits[essay][rate index], plus hypotheses for GLEU.
        let mut hyp_edits: Vec<Vec<Vec<Edit>>> = Vec::new();
        let mut hyp_texts: Vec<Vec<TokenSeq>> = vec![Vec::new(); scored.len()];
        for (index, lineup) in lineups.iter().enumerate() {
            let corrected = run_gec(lineup, source, index, gec_gateway.as_ref())?;
            let mut per_version = Vec::new();
            for (i, rate) in scored.iter().enumerate() {
                let version = lineup
                    .versions
                    .iter()
                    .find(|v| v.rate == *rate)
                    .expect("rate present");
                let hyp = corrected.get(rate).ok_or(PipelineError::LabelMismatch)?;
                per_version.push(extract_edits(&version.text, hyp));
                hyp_texts[i].push(hyp.clone());
            }
            hyp_edits.push(per_version);
        }
        let mut grid = Vec::new();
        for i in 0..scored.len() {
            let mut row = Vec::new();
            for j in 0..scored.len() {
                let mut tp = 0usize;
                let mut n_hyp = 0usize;
                let mut n_ref = 0usize;
                for essay in 0..lineups.len() {
                    tp += edit_match_count(&hyp_edits[essay][i], &ref_edits[essay][j]);
                    n_hyp += hyp_edits[essay][i].len();
                    n_ref += ref_edits[essay][j].len();
                }
                let precision = if n_hyp == 0 { 1.0 } else { tp as f64 / n_hyp as f64 };
                let recall = if n_ref == 0 { 1.0 } else { tp as f64 / n_ref as f64 };
                row.push(Prf {
                    precision,
                    recall,
                    f: f_beta(precision, recall, 0.5),
                    beta: 0.5,
                });
            }
            grid.push(row);
        }
        let mut gleu_rows = Vec::new();
        for i in 0..scored.len() {
            let sources = sources_at(i);
            gleu_rows.push(gleu(&sources, &full_texts, &hyp_texts[i], DEFAULT_NMAX)?);
        }
        out_systems.push(SystemScores {
            system: name.clone(),
            grid,
            gleu: gleu_rows,
        });
    }
    Ok(GecScores {
        rates: scored,
        lower_bound,
        systems: out_systems,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lineup::default_rates;

    fn mock_spec(dir: &Path, method: &str, judge: &str) -> RunSpec {
        RunSpec {
            corpus: PathBuf::from("fixtures/corpus/essays.jsonl"),
            rates: default_rates(),
            seed: 7,
            gec: GecSource::Manual,
            generator_model: "mock:oracle".into(),
            judge_model: judge.into(),
            method_name: method.into(),
            format: M2Format::no_lexical(),
            cache: None,
            out_dir: dir.to_path_buf(),
            endpoint: None,
            api_key: None,
            workers: 2,
            annotator: 0,
        }
    }

    fn matrix(essay_id: &str, p: Vec<Vec<f64>>) -> ProbMatrix {
        let rates = default_rates();
        let k = rates.len();
        assert_eq!(p.len(), k);
        ProbMatrix {
            essay_id: essay_id.into(),
            method: Method::EssayType,
            rows: rates.clone(),
            cols: rates,
            p,
            degenerate_rows: vec![false; k],
            lineup_degenerate: false,
        }
    }

    fn diagonal_p(hi: f64, lo: f64) -> Vec<Vec<f64>> {
        (0..5)
            .map(|i| (0..5).map(|j| if i == j { hi } else { lo }).collect())
            .collect()
    }

    #[test]
    fn diagonal_matrices_score_perfectly() {
        let ms: Vec<ProbMatrix> = (0..3)
            .map(|i| matrix(&format!("e{i}"), diagonal_p(0.9, 0.1)))
            .collect();
        let report = accuracy(&ms).unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.n_essays, 3);
        for (i, row) in report.confusion.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                assert_eq!(c, if i == j { 3 } else { 0 });
            }
        }
        assert_eq!(report.tie_rows, 0);
        assert!(report.degenerate.is_none());
    }

    #[test]
    fn two_correct_rows_give_point_four() {
        let mut p = diagonal_p(0.9, 0.1);
        // Rows 2, 3, 4 now peak off-diagonal.
        p[2][0] = 0.95;
        p[3][0] = 0.95;
        p[4][0] = 0.95;
        let report = accuracy(&[matrix("e", p)]).unwrap();
        assert!((report.accuracy - 0.4).abs() < 1e-12);
    }

    #[test]
    fn uniform_entries_fall_to_first_column() {
        let ms: Vec<ProbMatrix> = (0..4)
            .map(|i| matrix(&format!("e{i}"), vec![vec![0.5; 5]; 5]))
            .collect();
        let report = accuracy(&ms).unwrap();
        assert_eq!(report.accuracy, 0.2);
        assert_eq!(report.tie_rows, 20);
        for row in &report.confusion {
            assert_eq!(row[0], 4);
        }
    }

    #[test]
    fn accuracy_is_permutation_invariant() {
        let a = matrix("a", diagonal_p(0.8, 0.2));
        let mut flawed = diagonal_p(0.8, 0.2);
        flawed[1][3] = 0.99;
        let b = matrix("b", flawed);
        let c = matrix("c", vec![vec![0.5; 5]; 5]);
        let fwd = accuracy(&[a.clone(), b.clone(), c.clone()]).unwrap();
        let rev = accuracy(&[c, b, a]).unwrap();
        assert_eq!(fwd.accuracy, rev.accuracy);
        assert_eq!(fwd.confusion, rev.confusion);
        assert_eq!(fwd.tie_rows, rev.tie_rows);
    }

    #[test]
    fn degenerate_lineups_are_scored_apart() {
        let good = matrix("good", diagonal_p(0.9, 0.1));
        let mut degenerate = matrix("empty", vec![vec![0.5; 5]; 5]);
        degenerate.lineup_degenerate = true;
        let report = accuracy(&[good, degenerate]).unwrap();
        assert_eq!(report.n_essays, 1);
        assert_eq!(report.accuracy, 1.0);
        let stats = report.degenerate.unwrap();
        assert_eq!(stats.n_essays, 1);
        assert!((stats.accuracy - 0.2).abs() < 1e-12);
    }

    #[test]
    fn degenerate_rows_leave_curves_but_not_accuracy() {
        let mut m = matrix("e", diagonal_p(0.9, 0.1));
        m.degenerate_rows[4] = true;
        let report = accuracy(&[m]).unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert!(report.mean_yes[4].is_none());
        assert!(report.mean_yes[0].is_some());
    }

    #[test]
    fn gec_source_specs_round_trip() {
        for spec in ["manual", "none", "file:hyps/run1", "llm:gpt-4o"] {
            let parsed = GecSource::parse(spec).unwrap();
            assert_eq!(parsed.as_spec(), spec);
        }
        assert_eq!(GecSource::parse("carrier-pigeon"), None);
    }

    #[test]
    fn run_ids_differ_when_config_differs() {
        let dir = std::env::temp_dir();
        let a = mock_spec(&dir, "essay", "mock:oracle");
        let mut b = mock_spec(&dir, "essay", "mock:oracle");
        assert_eq!(a.run_id(), b.run_id());
        b.seed = 8;
        assert_ne!(a.run_id(), b.run_id());
        let c = mock_spec(&dir, "feedback", "mock:oracle");
        assert_ne!(a.run_id(), c.run_id());
    }

    #[test]
    fn rate_stems_are_file_safe() {
        assert_eq!(rate_stem(Rate::ZERO), "0");
        assert_eq!(rate_stem(Rate::from_percent(25.0).unwrap()), "25");
        assert_eq!(rate_stem(Rate::from_percent(12.5).unwrap()), "12.5");
        assert_eq!(rate_stem(Rate::FULL), "100");
    }
}
