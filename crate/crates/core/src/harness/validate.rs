use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::Serialize;

use super::{HarnessError, EXIT_OK, EXIT_VALIDATION};
use crate::dataset::{validate_logic_chain, Violation};
use crate::dialogue::{read_corpus_lenient, Subset};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StructuralIssue {
    pub thread_id: String,
    pub message: String,
}

/// Machine-readable outcome of `validate`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Default)]
pub struct ValidationReport {
    pub threads: usize,
    pub structural: Vec<StructuralIssue>,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.structural.is_empty() && self.violations.is_empty()
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_clean() {
            EXIT_OK
        } else {
            EXIT_VALIDATION
        }
    }
}

/// Check a corpus: per-thread structure, unique ids, and the logic-chain
/// rules for every logic-chain thread. Unparseable records are logged and
/// the first one is returned as an error.
pub fn cmd_validate(path: &Path) -> Result<ValidationReport, HarnessError> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let (_, records) = read_corpus_lenient(BufReader::new(file)).map_err(|e| HarnessError::corpus(path, e))?;

    let mut threads = Vec::with_capacity(records.len());
    let mut first_error = None;
    for rec in records {
        match rec {
            Ok(t) => threads.push(t),
            Err(e) => {
                log::error!("{}: {e}", path.display());
                first_error.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_error {
        return Err(HarnessError::corpus(path, e));
    }

    let mut report = ValidationReport {
        threads: threads.len(),
        ..Default::default()
    };
    let mut seen = BTreeSet::new();
    for t in &threads {
        if !seen.insert(t.thread_id.as_str()) {
            report.structural.push(StructuralIssue {
                thread_id: t.thread_id.clone(),
                message: "duplicate thread id".into(),
            });
        }
        if let Err(e) = t.check() {
            report.structural.push(StructuralIssue {
                thread_id: t.thread_id.clone(),
                message: e.to_string(),
            });
            continue;
        }
        if t.subset == Subset::Lc {
            match &t.chain {
                Some(chain) => report.violations.extend(validate_logic_chain(t, chain)),
                None => report.structural.push(StructuralIssue {
                    thread_id: t.thread_id.clone(),
                    message: "logic-chain thread has no relationship chain".into(),
                }),
            }
        }
    }
    Ok(report)
}
