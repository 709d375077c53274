//! Thread and round data model, the annotated-text grammar, and the text
//! post-processing rules applied to questions and answers.

pub(crate) mod corpus;
mod grammar;
mod text;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::RelationshipChain;
use crate::geometry::{BBox, ImageDims};

pub use corpus::{
    read_corpus, read_corpus_file, read_corpus_lenient, write_corpus, write_corpus_file, Corpus, CorpusError,
    CorpusHeader, CoordinateScale,
};
pub use grammar::{parse_annotated_text, render_annotated_text, GrammarError, RENDER_PRECISION};
pub use text::{
    base_name, display_name, normalize_answer_text, substitute_pronouns, AnswerCleaner,
};

/// A named object reference attached to a question or an answer.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub name: String,
    pub bbox: BBox,
}

impl Annotation {
    pub fn new(name: impl Into<String>, bbox: BBox) -> Self {
        Self {
            name: name.into(),
            bbox,
        }
    }
}

/// One question/answer pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    /// 1-based position within the thread.
    pub index: usize,
    pub question: String,
    pub answer: String,
    pub question_annotations: Vec<Annotation>,
    pub answer_annotations: Vec<Annotation>,
}

impl Round {
    /// True when the answer has ground-truth boxes, i.e. `M >= 1`.
    pub fn grounding_required(&self) -> bool {
        !self.answer_annotations.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Subset {
    #[serde(rename = "MRG")]
    Mrg,
    #[serde(rename = "LC")]
    Lc,
    #[serde(rename = "REF")]
    Ref,
    #[serde(rename = "GND")]
    Gnd,
}

impl Subset {
    pub const ALL: [Subset; 4] = [Subset::Mrg, Subset::Lc, Subset::Ref, Subset::Gnd];

    pub fn as_str(&self) -> &'static str {
        match self {
            Subset::Mrg => "MRG",
            Subset::Lc => "LC",
            Subset::Ref => "REF",
            Subset::Gnd => "GND",
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Subset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "MRG" => Ok(Subset::Mrg),
            "LC" => Ok(Subset::Lc),
            "REF" => Ok(Subset::Ref),
            "GND" => Ok(Subset::Gnd),
            other => Err(format!("unknown subset '{other}'")),
        }
    }
}

/// A full dialogue over one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Thread {
    pub thread_id: String,
    pub image_id: String,
    pub image_dims: ImageDims,
    pub subset: Subset,
    pub rounds: Vec<Round>,
    /// Relationship chain the dialogue was built from (logic-chain threads).
    pub chain: Option<RelationshipChain>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThreadError {
    #[error("thread '{0}' has no rounds")]
    Empty(String),
    #[error("thread '{thread_id}': round at position {position} has index {index}")]
    BadIndex {
        thread_id: String,
        position: usize,
        index: usize,
    },
    #[error("thread '{thread_id}' round {round}: annotation with empty name")]
    EmptyName { thread_id: String, round: usize },
}

impl Thread {
    pub fn num_rounds(&self) -> usize {
        self.rounds.len()
    }

    /// Check the structural invariants: non-empty, consecutive indices from
    /// 1, and named annotations.
    pub fn check(&self) -> Result<(), ThreadError> {
        if self.rounds.is_empty() {
            return Err(ThreadError::Empty(self.thread_id.clone()));
        }
        for (pos, round) in self.rounds.iter().enumerate() {
            if round.index != pos + 1 {
                return Err(ThreadError::BadIndex {
                    thread_id: self.thread_id.clone(),
                    position: pos + 1,
                    index: round.index,
                });
            }
            let unnamed = round
                .question_annotations
                .iter()
                .chain(&round.answer_annotations)
                .any(|a| a.name.trim().is_empty());
            if unnamed {
                return Err(ThreadError::EmptyName {
                    thread_id: self.thread_id.clone(),
                    round: round.index,
                });
            }
        }
        Ok(())
    }

    /// Renumber rounds consecutively from 1.
    pub fn reindex(&mut self) {
        for (i, r) in self.rounds.iter_mut().enumerate() {
            r.index = i + 1;
        }
    }
}
