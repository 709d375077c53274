use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::predictions::{read_predictions, PredictionFile, PredictionLine};
use super::report::{aggregate, read_records, Record, Report, RunConfig};
use super::{write_file, HarnessError, ReportFormat};
use crate::dialogue::{normalize_answer_text, read_corpus_file, CorpusHeader, Subset, Thread};
use crate::geometry::BBox;
use crate::metric::{match_boxes, thread_score, EvalConfig, EvalError};
use crate::similarity::{SimilarityProvider, TextPair};

/// Grounding prompt variants, in report order.
pub const PROMPT_VARIANTS: [&str; 3] = [
    "Where is the [name]?",
    "Can you find the [name]?",
    "Can you tell the position of the [name]?",
];

const PROMPT_PREFIXES: [&str; 3] = ["where is the ", "can you find the ", "can you tell the position of the "];

/// Map a prompt label or a concrete question onto its variant.
fn canonical_prompt(text: &str) -> Option<&'static str> {
    if let Some(v) = PROMPT_VARIANTS.iter().find(|v| **v == text) {
        return Some(v);
    }
    let lower = text.trim().to_lowercase();
    PROMPT_PREFIXES
        .iter()
        .zip(PROMPT_VARIANTS)
        .find(|(p, _)| lower.starts_with(*p))
        .map(|(_, v)| v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateOptions {
    pub corpus: PathBuf,
    pub predictions: PathBuf,
    pub out_dir: PathBuf,
    pub config: EvalConfig,
    pub seed: u64,
    pub format: ReportFormat,
}

fn record_error(path: &Path, line: usize, message: impl Into<String>) -> HarnessError {
    HarnessError::Record {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn score_one(
    thread: &Thread,
    pred: &PredictionLine,
    header: &CorpusHeader,
    cfg: &EvalConfig,
    provider: &dyn SimilarityProvider,
    path: &Path,
) -> Result<Record, HarnessError> {
    let decoded = pred
        .decode(header, thread.image_dims)
        .map_err(|m| record_error(path, pred.line, format!("thread '{}': {m}", pred.thread_id)))?;
    if decoded.rounds.len() != thread.rounds.len() {
        let err = EvalError::RoundMismatch {
            thread_id: thread.thread_id.clone(),
            expected: thread.rounds.len(),
            predicted: decoded.rounds.len(),
        };
        return Err(record_error(path, pred.line, err.to_string()));
    }

    match thread.subset {
        Subset::Mrg | Subset::Lc => {
            let report = thread_score(&decoded, thread, cfg, provider)?;
            Ok(Record::MultiRound {
                subset: thread.subset,
                report,
            })
        }
        Subset::Ref => {
            let pairs: Vec<TextPair> = decoded
                .rounds
                .iter()
                .zip(&thread.rounds)
                .map(|(p, g)| TextPair::new(normalize_answer_text(&p.answer), normalize_answer_text(&g.answer)))
                .collect();
            let scores = provider.score_batch(&pairs).map_err(|source| EvalError::Provider {
                thread_id: thread.thread_id.clone(),
                source,
            })?;
            Ok(Record::Referring {
                thread_id: thread.thread_id.clone(),
                similarity: scores.iter().sum::<f64>() / scores.len() as f64,
            })
        }
        Subset::Gnd => {
            let mut ious = Vec::new();
            for (p, g) in decoded.rounds.iter().zip(&thread.rounds) {
                let targets: Vec<BBox> = g.answer_annotations.iter().map(|a| a.bbox).collect();
                ious.extend(match_boxes(&p.boxes, &targets).ious);
            }
            if ious.is_empty() {
                return Err(HarnessError::Invalid(format!(
                    "grounding thread '{}' has no target box",
                    thread.thread_id
                )));
            }
            let prompt = pred
                .prompt
                .as_deref()
                .map(|p| canonical_prompt(p).map_or_else(|| p.to_string(), str::to_string))
                .or_else(|| canonical_prompt(&thread.rounds[0].question).map(str::to_string))
                .unwrap_or_else(|| "other".to_string());
            Ok(Record::Grounding {
                thread_id: thread.thread_id.clone(),
                prompt,
                iou: ious.iter().sum::<f64>() / ious.len() as f64,
            })
        }
    }
}

/// Score every prediction against the corpus.
///
/// Records come out in corpus order (and file order within a thread)
/// whatever the number of workers. Every corpus thread needs at least one
/// prediction; grounding threads may have one per prompt variant.
pub fn score_records(
    threads: &[Thread],
    header: &CorpusHeader,
    predictions: &PredictionFile,
    cfg: &EvalConfig,
    provider: &dyn SimilarityProvider,
    path: &Path,
) -> Result<Vec<Record>, HarnessError> {
    cfg.validate()?;
    let header = predictions.header.as_ref().unwrap_or(header);

    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, t) in threads.iter().enumerate() {
        if index.insert(t.thread_id.as_str(), i).is_some() {
            return Err(HarnessError::Invalid(format!("duplicate thread id '{}' in corpus", t.thread_id)));
        }
    }

    let mut per_thread: Vec<Vec<&PredictionLine>> = vec![Vec::new(); threads.len()];
    let mut seen = BTreeSet::new();
    for p in &predictions.records {
        let &i = index
            .get(p.thread_id.as_str())
            .ok_or_else(|| record_error(path, p.line, format!("unknown thread id '{}'", p.thread_id)))?;
        let label = match threads[i].subset {
            Subset::Gnd => p.prompt.clone(),
            _ => None,
        };
        if !seen.insert((p.thread_id.as_str(), label)) {
            return Err(record_error(path, p.line, format!("duplicate prediction for thread '{}'", p.thread_id)));
        }
        per_thread[i].push(p);
    }
    if let Some(i) = per_thread.iter().position(Vec::is_empty) {
        return Err(HarnessError::MissingPrediction(threads[i].thread_id.clone()));
    }

    let work: Vec<(&Thread, &PredictionLine)> = threads
        .iter()
        .zip(&per_thread)
        .flat_map(|(t, ps)| ps.iter().map(move |p| (t, *p)))
        .collect();
    work.par_iter()
        .map(|(t, p)| score_one(t, p, header, cfg, provider, path))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

fn rendered(report: &Report, format: ReportFormat) -> Result<Vec<(String, String)>, HarnessError> {
    Ok(match format {
        ReportFormat::Markdown => vec![("report.md".into(), report.to_markdown())],
        ReportFormat::Json => vec![("report.json".into(), report.to_json())],
        ReportFormat::Csv => report
            .to_csv()
            .map_err(|e| HarnessError::Invalid(format!("rendering CSV: {e}")))?
            .into_iter()
            .map(|(name, body)| (format!("report_{name}.csv"), body))
            .collect(),
    })
}

fn write_report(report: &Report, format: ReportFormat, out_dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    for (name, body) in rendered(report, format)? {
        write_file(&out_dir.join(name), body.as_bytes())?;
    }
    Ok(())
}

/// Score a predictions file and write `records.jsonl` plus the report.
pub fn cmd_evaluate(opts: &EvaluateOptions) -> Result<Report, HarnessError> {
    let corpus = read_corpus_file(&opts.corpus).map_err(|e| HarnessError::corpus(&opts.corpus, e))?;
    let file = File::open(&opts.predictions).map_err(|e| HarnessError::io(&opts.predictions, e))?;
    let predictions = read_predictions(BufReader::new(file))
        .map_err(|(line, message)| record_error(&opts.predictions, line, message))?;

    let provider = opts.config.provider.build()?;
    let records = score_records(
        &corpus.threads,
        &corpus.header,
        &predictions,
        &opts.config,
        provider.as_ref(),
        &opts.predictions,
    )?;
    let run = RunConfig {
        seed: opts.seed,
        lambda: opts.config.lambda,
        tau: opts.config.tau.clone(),
        iou_success_threshold: opts.config.iou_success_threshold,
        provider: provider.name(),
    };

    let mut lines = serde_json::to_string(&Record::Run(run.clone())).expect("record serializes");
    lines.push('\n');
    for r in &records {
        lines.push_str(&serde_json::to_string(r).expect("record serializes"));
        lines.push('\n');
    }
    std::fs::create_dir_all(&opts.out_dir).map_err(|e| HarnessError::io(&opts.out_dir, e))?;
    write_file(&opts.out_dir.join("records.jsonl"), lines.as_bytes())?;

    let report = aggregate(&run, &records)?;
    write_report(&report, opts.format, &opts.out_dir)?;
    Ok(report)
}

/// Rebuild the report from a records file. Writes into `out_dir` when
/// given and returns the rendered text.
pub fn cmd_report(records: &Path, format: ReportFormat, out_dir: Option<&Path>) -> Result<String, HarnessError> {
    let file = File::open(records).map_err(|e| HarnessError::io(records, e))?;
    let (run, recs) =
        read_records(BufReader::new(file)).map_err(|(line, message)| record_error(records, line, message))?;
    let report = aggregate(&run, &recs)?;
    if let Some(dir) = out_dir {
        write_report(&report, format, dir)?;
    }
    Ok(rendered(&report, format)?
        .into_iter()
        .map(|(_, body)| body)
        .collect::<Vec<_>>()
        .join("\n"))
}
