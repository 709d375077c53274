use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{write_file, HarnessError};
use crate::dataset::{
    clean_scene_graph, compute_statistics, generate_gnd_threads, generate_ref_threads, read_scene_graphs_file,
    split_dataset, validate_logic_chain, Holdout, Statistics, TemplateSet, Violation, DEFAULT_CLEAN_IOU,
};
use crate::dialogue::{read_corpus_file, substitute_pronouns, write_corpus, CorpusHeader, Subset, Thread};
use crate::metric::curate_test_thread;

#[derive(Debug, Clone, PartialEq)]
pub struct BuildOptions {
    pub scene_graphs: PathBuf,
    /// Externally produced multi-round or logic-chain corpora.
    pub imports: Vec<PathBuf>,
    pub ref_templates: Option<PathBuf>,
    pub gnd_templates: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub holdout: Holdout,
    pub clean_iou: f64,
}

impl BuildOptions {
    pub fn new(scene_graphs: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            scene_graphs: scene_graphs.into(),
            imports: Vec::new(),
            ref_templates: None,
            gnd_templates: None,
            out_dir: out_dir.into(),
            seed: 0,
            holdout: Holdout::default(),
            clean_iou: DEFAULT_CLEAN_IOU,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuildSummary {
    pub seed: u64,
    pub all: Statistics,
    pub train: Statistics,
    pub test: Statistics,
    pub quarantine: Statistics,
    pub curated_lc: usize,
    pub dropped: Vec<Violation>,
}

/// Parse `MRG=800,LC=200`.
pub fn parse_holdout(s: &str) -> Result<Holdout, String> {
    let mut entries = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (subset, n) = part
            .split_once('=')
            .ok_or_else(|| format!("expected SUBSET=COUNT, got '{part}'"))?;
        let n = n.trim().parse::<usize>().map_err(|e| format!("bad count in '{part}': {e}"))?;
        entries.push((subset.trim().parse::<Subset>()?, n));
    }
    Ok(Holdout::new(entries))
}

fn templates(path: &Option<PathBuf>, default: fn() -> TemplateSet) -> Result<TemplateSet, HarnessError> {
    match path {
        Some(p) => Ok(TemplateSet::from_file(p)?),
        None => Ok(default()),
    }
}

/// Check imported threads. Logic-chain threads that break a rule are
/// dropped and their violations returned.
fn screen_imports(path: &Path, threads: Vec<Thread>) -> Result<(Vec<Thread>, Vec<Violation>), HarnessError> {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for t in threads {
        t.check().map_err(|e| HarnessError::Invalid(format!("{}: {e}", path.display())))?;
        if t.subset == Subset::Lc {
            let chain = t.chain.as_ref().ok_or_else(|| {
                HarnessError::Invalid(format!(
                    "{}: logic-chain thread '{}' has no relationship chain",
                    path.display(),
                    t.thread_id
                ))
            })?;
            let violations = validate_logic_chain(&t, chain);
            if !violations.is_empty() {
                let codes: BTreeSet<String> = violations.iter().map(|v| v.rule.to_string()).collect();
                log::warn!(
                    "dropping thread {}: {}",
                    t.thread_id,
                    codes.into_iter().collect::<Vec<_>>().join(", ")
                );
                dropped.extend(violations);
                continue;
            }
        }
        kept.push(match t.subset {
            Subset::Mrg | Subset::Lc => substitute_pronouns(&t),
            Subset::Ref | Subset::Gnd => t,
        });
    }
    Ok((kept, dropped))
}

fn corpus_bytes(threads: &[Thread]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_corpus(&mut buf, &CorpusHeader::default(), threads).expect("writing to memory");
    buf
}

/// Build the benchmark corpus: clean scene graphs, generate referring and
/// grounding threads, screen imported dialogues, split, and write
/// `train/test/quarantine.jsonl`, `test_lc3.jsonl`, `violations.jsonl` and
/// `stats.{md,json}` under `out_dir`.
pub fn cmd_build(opts: &BuildOptions) -> Result<BuildSummary, HarnessError> {
    let graphs = read_scene_graphs_file(&opts.scene_graphs).map_err(|source| HarnessError::SceneGraph {
        path: opts.scene_graphs.clone(),
        source,
    })?;
    let ref_templates = templates(&opts.ref_templates, TemplateSet::default_ref)?;
    let gnd_templates = templates(&opts.gnd_templates, TemplateSet::default_gnd)?;

    let mut threads = Vec::new();
    for sg in &graphs {
        let cleaned = clean_scene_graph(sg, opts.clean_iou);
        threads.extend(generate_ref_threads(&cleaned, &ref_templates, opts.seed)?);
        threads.extend(generate_gnd_threads(&cleaned, &gnd_templates, opts.seed)?);
    }
    log::info!("generated {} threads from {} scene graphs", threads.len(), graphs.len());

    let mut dropped = Vec::new();
    for path in &opts.imports {
        let corpus = read_corpus_file(path).map_err(|e| HarnessError::corpus(path, e))?;
        let (kept, violations) = screen_imports(path, corpus.threads)?;
        log::info!("imported {} threads from {}", kept.len(), path.display());
        threads.extend(kept);
        dropped.extend(violations);
    }

    let mut seen = BTreeSet::new();
    for t in &threads {
        if !seen.insert(t.thread_id.as_str()) {
            return Err(HarnessError::Invalid(format!("duplicate thread id '{}'", t.thread_id)));
        }
    }

    let split = split_dataset(&threads, &opts.holdout, opts.seed)?;
    let curated: Vec<Thread> = split
        .test
        .iter()
        .filter(|t| t.subset == Subset::Lc)
        .filter_map(curate_test_thread)
        .collect();

    let summary = BuildSummary {
        seed: opts.seed,
        all: compute_statistics(&threads),
        train: compute_statistics(&split.train),
        test: compute_statistics(&split.test),
        quarantine: compute_statistics(&split.quarantine),
        curated_lc: curated.len(),
        dropped,
    };

    let out = &opts.out_dir;
    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    write_file(&out.join("train.jsonl"), &corpus_bytes(&split.train))?;
    write_file(&out.join("test.jsonl"), &corpus_bytes(&split.test))?;
    write_file(&out.join("quarantine.jsonl"), &corpus_bytes(&split.quarantine))?;
    write_file(&out.join("test_lc3.jsonl"), &corpus_bytes(&curated))?;

    let mut violations = String::new();
    for v in &summary.dropped {
        violations.push_str(&serde_json::to_string(v).expect("violation serializes"));
        violations.push('\n');
    }
    write_file(&out.join("violations.jsonl"), violations.as_bytes())?;

    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');
    write_file(&out.join("stats.json"), json.as_bytes())?;

    let md = format!(
        "# Corpus statistics\n\nSeed {}.\n\n{}\n## Split\n\n| Part | # threads | # Q&A pairs |\n|---|--:|--:|\n| Train | {} | {} |\n| Test | {} | {} |\n| Quarantine | {} | {} |\n\n{} logic-chain test threads curated to three rounds; {} imported threads dropped.\n",
        opts.seed,
        summary.all.to_markdown(),
        summary.train.total.threads,
        summary.train.total.pairs,
        summary.test.total.threads,
        summary.test.total.pairs,
        summary.quarantine.total.threads,
        summary.quarantine.total.pairs,
        summary.curated_lc,
        summary
            .dropped
            .iter()
            .map(|v| v.thread_id.as_str())
            .collect::<BTreeSet<_>>()
            .len(),
    );
    write_file(&out.join("stats.md"), md.as_bytes())?;
    Ok(summary)
}
