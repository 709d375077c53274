use std::sync::LazyLock;

use regex::Regex;

use super::Thread;

static INDEX_SUFFIX: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"_\d+$").unwrap());
static SPACE_RUN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s+").unwrap());
static SPACE_BEFORE_PUNCT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s+([.,!?;:])").unwrap());
static DEFAULT_CLEANER: LazyLock<AnswerCleaner> = LazyLock::new(AnswerCleaner::default);

/// Strip a trailing `_number` identifier: `man_2` -> `man`.
pub fn base_name(name: &str) -> &str {
    match INDEX_SUFFIX.find(name) {
        Some(m) => &name[..m.start()],
        None => name,
    }
}

/// Human-readable form of an object name, e.g. `traffic_light_2` ->
/// `traffic light`.
pub fn display_name(name: &str) -> String {
    base_name(name.trim()).replace('_', " ")
}

/// Removes filler phrases from model and ground-truth answers before scoring.
#[derive(Debug, Clone)]
pub struct AnswerCleaner {
    patterns: Vec<Regex>,
}

impl Default for AnswerCleaner {
    fn default() -> Self {
        Self::from_patterns(&[r"it is", r"there is", r"region\d+"]).expect("default fillers compile")
    }
}

impl AnswerCleaner {
    /// Each pattern is a regex fragment matched case-insensitively on word
    /// boundaries.
    pub fn from_patterns<S: AsRef<str>>(patterns: &[S]) -> Result<Self, regex::Error> {
        let patterns = patterns
            .iter()
            .map(|p| Regex::new(&format!(r"(?i)\b(?:{})\b", p.as_ref())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { patterns })
    }

    pub fn clean(&self, raw: &str) -> String {
        let mut current = raw.to_string();
        // Removing one filler can expose another, so iterate to a fixpoint.
        loop {
            let mut next = current.clone();
            for p in &self.patterns {
                next = p.replace_all(&next, " ").into_owned();
            }
            let next = tidy(&next);
            if next == current {
                return next;
            }
            current = next;
        }
    }
}

fn tidy(s: &str) -> String {
    let s = SPACE_RUN.replace_all(s, " ");
    let s = SPACE_BEFORE_PUNCT.replace_all(&s, "$1");
    s.trim()
        .trim_start_matches(|c: char| matches!(c, ',' | ';' | ':') || c.is_whitespace())
        .to_string()
}

/// Clean an answer with the default filler list.
pub fn normalize_answer_text(raw: &str) -> String {
    DEFAULT_CLEANER.clean(raw)
}

struct Replacement {
    start: usize,
    end: usize,
    collides: bool,
}

/// Replace repeated mentions of the previous answer's objects with pronouns.
///
/// In every round after the first, the first whole-phrase mention in the
/// question of each object annotated in the previous answer becomes "it".
/// A second replaced mention in the same question, or a mention whose base
/// name is shared by another object of the previous answer, becomes
/// "the object". Annotations are never touched.
pub fn substitute_pronouns(thread: &Thread) -> Thread {
    let mut out = thread.clone();
    for n in 1..out.rounds.len() {
        let prev = &thread.rounds[n - 1].answer_annotations;
        if prev.is_empty() {
            continue;
        }
        let question = &out.rounds[n].question;

        let mut seen_bases: Vec<String> = Vec::new();
        let mut found: Vec<Replacement> = Vec::new();
        for ann in prev {
            let base = display_name(&ann.name).to_lowercase();
            if base.is_empty() || seen_bases.contains(&base) {
                continue;
            }
            seen_bases.push(base.clone());
            let collides = prev
                .iter()
                .filter(|a| display_name(&a.name).to_lowercase() == base)
                .map(|a| a.name.as_str())
                .collect::<std::collections::BTreeSet<_>>()
                .len()
                > 1;
            let pattern = format!(
                r"(?i)\b(?:(?:the|a|an|this|that)\s+)?{}\b",
                regex::escape(&base).replace(' ', r"\s+")
            );
            let re = Regex::new(&pattern).expect("escaped name pattern");
            if let Some(m) = re.find(question) {
                found.push(Replacement {
                    start: m.start(),
                    end: m.end(),
                    collides,
                });
            }
        }
        if found.is_empty() {
            continue;
        }

        found.sort_by_key(|r| (r.start, std::cmp::Reverse(r.end)));
        let mut accepted: Vec<Replacement> = Vec::new();
        for r in found {
            if accepted.last().is_none_or(|prev| r.start >= prev.end) {
                accepted.push(r);
            }
        }

        let mut text = question.clone();
        for (rank, r) in accepted.iter().enumerate().rev() {
            let word = if rank == 0 && !r.collides { "it" } else { "the object" };
            let word = if r.start == 0 { capitalize(word) } else { word.to_string() };
            text.replace_range(r.start..r.end, &word);
        }
        out.rounds[n].question = text;
    }
    out
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}
