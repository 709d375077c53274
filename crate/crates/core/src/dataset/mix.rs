//! Weighted, seeded sampling of training threads into Group A/B/C views.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use thiserror::Error;

use crate::dialogue::{display_name, Thread};

/// Training-data view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    /// Question answering: no locations on either side.
    A,
    /// Referring: locations in questions only.
    B,
    /// Grounding: locations in answers.
    C,
}

impl Group {
    /// Published source ratios, in source order.
    ///
    /// Group B lists six external datasets but eight ratio terms; the last
    /// external set (Visual Genome) has no ratio of its own and is left out.
    pub fn default_ratios(&self) -> Vec<(&'static str, u32)> {
        match self {
            Group::A => vec![("cb-mrg", 3), ("cb-lc", 2), ("llava-instruct-150k", 5)],
            Group::B => vec![
                ("cb-mrg", 2),
                ("cb-lc", 3),
                ("cb-ref", 5),
                ("coco", 1),
                ("refcoco", 1),
                ("refcoco+", 1),
                ("refcocog", 1),
                ("flickr30k", 1),
            ],
            Group::C => vec![
                ("cb-mrg", 3),
                ("cb-lc", 1),
                ("cb-gnd", 2),
                ("coco", 2),
                ("refcoco", 1),
                ("refcoco+", 1),
                ("refcocog", 1),
            ],
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Group {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "A" => Ok(Group::A),
            "B" => Ok(Group::B),
            "C" => Ok(Group::C),
            other => Err(format!("unknown group '{other}'")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MixError {
    #[error("ratio given for unknown source '{0}'")]
    UnknownSource(String),
    #[error("source '{0}' has no ratio")]
    MissingRatio(String),
    #[error("source '{0}' has a zero ratio")]
    ZeroRatio(String),
    #[error("source '{0}' is empty after the group {1} transform")]
    EmptySource(String, Group),
    #[error("no sources given")]
    NoSources,
}

const REFERENTIAL: [&str; 3] = ["it", "this region", "the region"];

fn strip_all(mut t: Thread) -> Option<Thread> {
    for r in &mut t.rounds {
        r.question_annotations.clear();
        r.answer_annotations.clear();
    }
    Some(t)
}

fn referring_view(mut t: Thread, rng: &mut ChaCha8Rng) -> Option<Thread> {
    t.rounds.retain(|r| !r.question_annotations.is_empty());
    if t.rounds.is_empty() {
        return None;
    }
    for r in &mut t.rounds {
        r.answer_annotations.clear();
        for ann in &r.question_annotations {
            let shown = display_name(&ann.name);
            if shown.is_empty() || REFERENTIAL.contains(&shown.to_lowercase().as_str()) {
                continue;
            }
            let pattern = format!(
                r"(?i)\b(?:(?:the|a|an|this|that)\s+)?{}\b",
                regex::escape(&shown).replace(' ', r"\s+")
            );
            let re = Regex::new(&pattern).expect("escaped name pattern");
            let word = REFERENTIAL[rng.gen_range(0..REFERENTIAL.len())];
            if let Some(m) = re.find(&r.question) {
                let (start, end) = (m.start(), m.end());
                let word = if start == 0 {
                    let mut c = word.chars();
                    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
                } else {
                    word.to_string()
                };
                r.question.replace_range(start..end, &word);
            }
        }
    }
    t.reindex();
    Some(t)
}

fn grounding_view(mut t: Thread) -> Option<Thread> {
    t.rounds.retain(|r| !r.answer_annotations.is_empty());
    if t.rounds.is_empty() {
        return None;
    }
    t.reindex();
    Some(t)
}

/// One sampled thread and the source it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedItem {
    pub source: String,
    pub thread: Thread,
}

struct Pool {
    name: String,
    threads: Vec<Thread>,
    order: Vec<usize>,
    cursor: usize,
}

/// Endless deterministic stream; bound it with [`Iterator::take`].
///
/// Each draw picks a source with probability proportional to its ratio,
/// then the next thread of that source's current shuffled epoch.
pub struct MixStream {
    pools: Vec<Pool>,
    weights: WeightedIndex<u32>,
    rng: ChaCha8Rng,
}

impl Iterator for MixStream {
    type Item = MixedItem;

    fn next(&mut self) -> Option<MixedItem> {
        let pool = &mut self.pools[self.weights.sample(&mut self.rng)];
        if pool.cursor == pool.order.len() {
            pool.order.shuffle(&mut self.rng);
            pool.cursor = 0;
        }
        let idx = pool.order[pool.cursor];
        pool.cursor += 1;
        Some(MixedItem {
            source: pool.name.clone(),
            thread: pool.threads[idx].clone(),
        })
    }
}

/// Build the Group `group` view of each named source and sample from them
/// at the given integer ratios.
pub fn mix_groups(
    sources: &BTreeMap<String, Vec<Thread>>,
    group: Group,
    ratios: &[(String, u32)],
    seed: u64,
) -> Result<MixStream, MixError> {
    if ratios.is_empty() {
        return Err(MixError::NoSources);
    }
    for (name, ratio) in ratios {
        if !sources.contains_key(name) {
            return Err(MixError::UnknownSource(name.clone()));
        }
        if *ratio == 0 {
            return Err(MixError::ZeroRatio(name.clone()));
        }
    }
    if let Some(missing) = sources.keys().find(|k| !ratios.iter().any(|(n, _)| n == *k)) {
        return Err(MixError::MissingRatio(missing.clone()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pools = Vec::with_capacity(ratios.len());
    for (name, _) in ratios {
        let threads: Vec<Thread> = sources[name]
            .iter()
            .cloned()
            .filter_map(|t| match group {
                Group::A => strip_all(t),
                Group::B => referring_view(t, &mut rng),
                Group::C => grounding_view(t),
            })
            .collect();
        if threads.is_empty() {
            return Err(MixError::EmptySource(name.clone(), group));
        }
        let mut order: Vec<usize> = (0..threads.len()).collect();
        order.shuffle(&mut rng);
        pools.push(Pool {
            name: name.clone(),
            threads,
            order,
            cursor: 0,
        });
    }
    let weights = WeightedIndex::new(ratios.iter().map(|(_, r)| *r)).expect("positive ratios");
    Ok(MixStream { pools, weights, rng })
}
