//! Relationship chains and the rule-based logic-chain validator.

use std::collections::BTreeSet;
use std::fmt;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::SceneGraph;
use crate::dialogue::{base_name, display_name, Annotation, Thread};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainLink {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl ChainLink {
    pub fn new(subject: &str, predicate: &str, object: &str) -> Self {
        Self {
            subject: subject.to_string(),
            predicate: predicate.to_string(),
            object: object.to_string(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("relationship chain is empty")]
    Empty,
    #[error("chain broken at link {index}: '{object}' does not continue as '{next_subject}'")]
    Broken {
        index: usize,
        object: String,
        next_subject: String,
    },
    #[error("relationship references unknown object {0}")]
    UnknownObject(u64),
}

/// An ordered list of relationships in which each link's object is the
/// next link's subject.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationshipChain {
    links: Vec<ChainLink>,
}

impl RelationshipChain {
    pub fn new(links: Vec<ChainLink>) -> Result<Self, ChainError> {
        if links.is_empty() {
            return Err(ChainError::Empty);
        }
        for (i, pair) in links.windows(2).enumerate() {
            if !names_match(&pair[0].object, &pair[1].subject) {
                return Err(ChainError::Broken {
                    index: i + 1,
                    object: pair[0].object.clone(),
                    next_subject: pair[1].subject.clone(),
                });
            }
        }
        Ok(Self { links })
    }

    /// Build a chain from scene-graph relationships, naming each endpoint by
    /// its primary name.
    pub fn from_scene_graph(
        sg: &SceneGraph,
        relationships: &[super::SceneRelationship],
    ) -> Result<Self, ChainError> {
        let name = |id: u64| {
            sg.object(id)
                .and_then(|o| o.primary_name())
                .map(str::to_string)
                .ok_or(ChainError::UnknownObject(id))
        };
        let links = relationships
            .iter()
            .map(|r| {
                Ok(ChainLink {
                    subject: name(r.subject_id)?,
                    predicate: r.predicate.clone(),
                    object: name(r.object_id)?,
                })
            })
            .collect::<Result<Vec<_>, ChainError>>()?;
        Self::new(links)
    }

    pub fn links(&self) -> &[ChainLink] {
        &self.links
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// Every object name appearing anywhere in the chain.
    fn entities(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for l in &self.links {
            for n in [l.subject.as_str(), l.object.as_str()] {
                if !out.iter().any(|e| names_match(e, n)) {
                    out.push(n);
                }
            }
        }
        out
    }
}

/// Logic-chain rule codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RuleCode {
    /// A chain object shows up in a question before any answer introduced
    /// it, or a round's subject is annotated in its own answer.
    LC1,
    /// A question annotates an object missing from the previous answer.
    LC2,
    /// An answer lacks coordinates for the objects it is about.
    LC3,
    /// Rounds do not follow the chain order.
    LC4,
    /// A question does not include the subject carried over from the
    /// previous answer.
    LC5,
}

impl fmt::Display for RuleCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub thread_id: String,
    pub round: usize,
    pub rule: RuleCode,
    pub message: String,
}

fn key(name: &str) -> String {
    let lower = name.trim().to_lowercase();
    for article in ["the ", "an ", "a "] {
        if let Some(rest) = lower.strip_prefix(article) {
            return rest.trim().to_string();
        }
    }
    lower
}

/// Name equality that tolerates articles and a one-sided `_number` index.
pub(crate) fn names_match(a: &str, b: &str) -> bool {
    let (ka, kb) = (key(a), key(b));
    ka == kb || base_name(&ka) == kb || ka == base_name(&kb)
}

fn annotated(anns: &[Annotation], name: &str) -> bool {
    anns.iter().any(|a| names_match(&a.name, name))
}

fn mentioned(text: &str, name: &str) -> bool {
    let shown = display_name(&key(name));
    if shown.is_empty() {
        return false;
    }
    let pattern = format!(r"(?i)\b{}\b", regex::escape(&shown).replace(' ', r"\s+"));
    Regex::new(&pattern).map(|re| re.is_match(text)).unwrap_or(false)
}

/// Check a dialogue against the relationship chain it was generated from.
///
/// Subjects and objects of each round are taken from the annotation names;
/// body text is consulted only for mentions of chain objects. An empty
/// result means every rule passed.
pub fn validate_logic_chain(thread: &Thread, chain: &RelationshipChain) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |round: usize, rule: RuleCode, message: String| {
        out.push(Violation {
            thread_id: thread.thread_id.clone(),
            round,
            rule,
            message,
        });
    };

    let links = chain.links();
    let entities = chain.entities();
    let first_subject = &links[0].subject;
    let mut introduced: Vec<String> = Vec::new();

    for (pos, round) in thread.rounds.iter().enumerate() {
        let n = pos + 1;
        let qa = &round.question_annotations;
        let aa = &round.answer_annotations;
        let prev_answer = pos.checked_sub(1).map(|p| &thread.rounds[p].answer_annotations);

        // LC1
        let mut early: BTreeSet<String> = BTreeSet::new();
        for link in links {
            let o = &link.object;
            if names_match(o, first_subject) || introduced.iter().any(|i| names_match(i, o)) {
                continue;
            }
            if mentioned(&round.question, o) || annotated(qa, o) {
                early.insert(o.clone());
            }
        }
        for o in early {
            push(n, RuleCode::LC1, format!("question mentions '{o}' before an answer introduced it"));
        }
        for q in qa {
            if annotated(aa, &q.name) {
                push(n, RuleCode::LC1, format!("subject '{}' is annotated in its own answer", q.name));
            }
        }

        // LC2 and LC5
        if let Some(prev) = prev_answer {
            for q in qa {
                if !annotated(prev, &q.name) {
                    push(
                        n,
                        RuleCode::LC2,
                        format!("question object '{}' does not appear in the previous answer", q.name),
                    );
                }
            }
            if !qa.is_empty() && !qa.iter().any(|q| annotated(prev, &q.name)) {
                push(n, RuleCode::LC5, "question does not include the object from the previous answer".into());
            }
        }
        if qa.is_empty() {
            push(n, RuleCode::LC5, "question carries no subject annotation".into());
        }

        // LC3
        let link = links.get(pos);
        if aa.is_empty() {
            push(n, RuleCode::LC3, "answer has no object coordinates".into());
        } else if let Some(link) = link {
            if mentioned(&round.answer, &link.object) && !annotated(aa, &link.object) {
                push(
                    n,
                    RuleCode::LC3,
                    format!("answer names '{}' without its coordinates", link.object),
                );
            }
        }

        // LC4
        match link {
            None => push(
                n,
                RuleCode::LC4,
                format!("round {n} has no link in a chain of length {}", links.len()),
            ),
            Some(link) => {
                for q in qa {
                    let on_chain = entities.iter().any(|e| names_match(e, &q.name));
                    if on_chain && !names_match(&q.name, &link.subject) {
                        push(
                            n,
                            RuleCode::LC4,
                            format!("question addresses '{}' but link {n} starts at '{}'", q.name, link.subject),
                        );
                    }
                }
                for a in aa {
                    let on_chain = entities.iter().any(|e| names_match(e, &a.name));
                    if on_chain && !names_match(&a.name, &link.object) {
                        push(
                            n,
                            RuleCode::LC4,
                            format!("answer grounds '{}' but link {n} ends at '{}'", a.name, link.object),
                        );
                    }
                }
            }
        }

        introduced.extend(aa.iter().map(|a| a.name.clone()));
    }
    out
}
