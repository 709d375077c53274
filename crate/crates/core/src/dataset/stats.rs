use std::collections::BTreeMap;

use serde::Serialize;

use crate::dialogue::{Subset, Thread};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub struct StatsRow {
    pub threads: usize,
    pub pairs: usize,
}

/// Thread and Q&A-pair counts per subset and in total.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Default)]
pub struct Statistics {
    pub per_subset: BTreeMap<Subset, StatsRow>,
    pub total: StatsRow,
}

pub fn compute_statistics(threads: &[Thread]) -> Statistics {
    let mut stats = Statistics::default();
    for t in threads {
        let row = stats.per_subset.entry(t.subset).or_default();
        row.threads += 1;
        row.pairs += t.rounds.len();
        stats.total.threads += 1;
        stats.total.pairs += t.rounds.len();
    }
    stats
}

impl Statistics {
    /// Markdown table with one row per subset followed by the total.
    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Set | # threads | # Q&A pairs |\n|---|--:|--:|\n");
        for subset in Subset::ALL {
            let row = self.per_subset.get(&subset).copied().unwrap_or_default();
            out.push_str(&format!("| CB-{} | {} | {} |\n", subset, row.threads, row.pairs));
        }
        out.push_str(&format!("| Total | {} | {} |\n", self.total.threads, self.total.pairs));
        out
    }
}
