//! Rule-template generation of single-round referring (REF) and grounding
//! (GND) threads from cleaned scene graphs.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{fnv1a, SceneGraph, SceneObject};
use crate::dialogue::{display_name, parse_annotated_text, GrammarError, Round, Subset, Thread};
use crate::geometry::BoxFormat;

const DEFAULT_REF: &str = include_str!("../../templates/ref.txt");
const DEFAULT_GND: &str = include_str!("../../templates/gnd.txt");
const SEPARATOR: &str = "|||";

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("I/O error reading templates: {0}")]
    Io(#[from] std::io::Error),
    #[error("template line {line}: expected 'question ||| answer'")]
    MissingSeparator { line: usize },
    #[error("template line {line}: unknown placeholder '{{{name}}}'")]
    UnknownPlaceholder { line: usize, name: String },
    #[error("template set is empty")]
    Empty,
    #[error("template '{template}' expands to invalid annotated text: {source}")]
    Grammar {
        template: String,
        #[source]
        source: GrammarError,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Template {
    question: String,
    answer: String,
}

/// Question/answer template pairs with `{name}`, `{attributes}`,
/// `{description}` and `{box}` slots.
///
/// One pair per line, question and answer separated by `|||`. Blank lines
/// and lines starting with `#` are ignored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    templates: Vec<Template>,
}

const PLACEHOLDERS: [&str; 4] = ["name", "attributes", "description", "box"];

impl TemplateSet {
    pub fn parse(src: &str) -> Result<Self, TemplateError> {
        let mut templates = Vec::new();
        for (i, line) in src.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (q, a) = line
                .split_once(SEPARATOR)
                .ok_or(TemplateError::MissingSeparator { line: i + 1 })?;
            for part in [q, a] {
                check_placeholders(part, i + 1)?;
            }
            templates.push(Template {
                question: q.trim().to_string(),
                answer: a.trim().to_string(),
            });
        }
        if templates.is_empty() {
            return Err(TemplateError::Empty);
        }
        Ok(Self { templates })
    }

    pub fn from_file(path: &Path) -> Result<Self, TemplateError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn default_ref() -> Self {
        Self::parse(DEFAULT_REF).expect("bundled REF templates parse")
    }

    pub fn default_gnd() -> Self {
        Self::parse(DEFAULT_GND).expect("bundled GND templates parse")
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }
}

fn check_placeholders(text: &str, line: usize) -> Result<(), TemplateError> {
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        let Some(close) = after.find('}') else { break };
        let name = &after[..close];
        if !PLACEHOLDERS.contains(&name) {
            return Err(TemplateError::UnknownPlaceholder {
                line,
                name: name.to_string(),
            });
        }
        rest = &after[close + 1..];
    }
    Ok(())
}

fn article_for(phrase: &str) -> &'static str {
    match phrase.chars().next().map(|c| c.to_ascii_lowercase()) {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn expand(template: &str, obj: &SceneObject, name: &str) -> String {
    let attributes = collapse(&obj.attributes.join(" "));
    let phrase = collapse(&format!("{attributes} {name}"));
    let description = format!("{} {phrase}", article_for(&phrase));
    // Boxes are attached exactly after parsing; the slot only has to parse.
    let filled = template
        .replace("{name}", name)
        .replace("{attributes}", &attributes)
        .replace("{description}", &description)
        .replace("{box}", "[0, 0, 1, 1]");
    collapse(&filled)
}

fn expand_round(tpl: &Template, obj: &SceneObject, name: &str) -> Result<Round, TemplateError> {
    let side = |text: &str| {
        let expanded = expand(text, obj, name);
        let (clean, mut anns) = parse_annotated_text(&expanded, BoxFormat::Corners, None).map_err(|source| {
            TemplateError::Grammar {
                template: text.to_string(),
                source,
            }
        })?;
        for a in &mut anns {
            a.bbox = obj.bbox;
        }
        Ok::<_, TemplateError>((clean, anns))
    };
    let (question, question_annotations) = side(&tpl.question)?;
    let (answer, answer_annotations) = side(&tpl.answer)?;
    Ok(Round {
        index: 1,
        question,
        answer,
        question_annotations,
        answer_annotations,
    })
}

fn image_rng(sg: &SceneGraph, seed: u64, salt: &str) -> ChaCha8Rng {
    let mix = fnv1a(format!("{salt}:{}", sg.image_id).as_bytes());
    ChaCha8Rng::seed_from_u64(seed ^ mix)
}

fn single_round_thread(sg: &SceneGraph, obj: &SceneObject, subset: Subset, round: Round) -> Thread {
    let tag = subset.as_str().to_lowercase();
    Thread {
        thread_id: format!("{}:{tag}:{}", sg.image_id, obj.object_id),
        image_id: sg.image_id.clone(),
        image_dims: sg.image_dims,
        subset,
        rounds: vec![round],
        chain: None,
    }
}

/// One referring thread per named object: the question carries the
/// object's box, the answer describes it.
///
/// Templates must not put annotations on the answer side, otherwise the
/// output would carry grounding targets.
pub fn generate_ref_threads(
    sg: &SceneGraph,
    templates: &TemplateSet,
    seed: u64,
) -> Result<Vec<Thread>, TemplateError> {
    let mut rng = image_rng(sg, seed, "ref");
    let mut out = Vec::new();
    for obj in &sg.objects {
        let Some(name) = obj.primary_name() else {
            log::info!("image {}: object {} has no name, skipped", sg.image_id, obj.object_id);
            continue;
        };
        let tpl = &templates.templates[rng.gen_range(0..templates.len())];
        let mut round = expand_round(tpl, obj, &display_name(name))?;
        round.answer_annotations.clear();
        out.push(single_round_thread(sg, obj, Subset::Ref, round));
    }
    Ok(out)
}

/// One grounding thread per named object whose base name is unique in the
/// image: the question names the object, the answer carries its box.
pub fn generate_gnd_threads(
    sg: &SceneGraph,
    templates: &TemplateSet,
    seed: u64,
) -> Result<Vec<Thread>, TemplateError> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for obj in &sg.objects {
        if let Some(name) = obj.primary_name() {
            *counts.entry(display_name(name).to_lowercase()).or_default() += 1;
        }
    }

    let mut rng = image_rng(sg, seed, "gnd");
    let mut out = Vec::new();
    for obj in &sg.objects {
        let Some(name) = obj.primary_name() else {
            log::info!("image {}: object {} has no name, skipped", sg.image_id, obj.object_id);
            continue;
        };
        let shown = display_name(name);
        if counts[&shown.to_lowercase()] > 1 {
            log::debug!("image {}: '{shown}' is ambiguous, skipped", sg.image_id);
            continue;
        }
        let tpl = &templates.templates[rng.gen_range(0..templates.len())];
        let mut round = expand_round(tpl, obj, &shown)?;
        if round.answer_annotations.is_empty() {
            round.answer_annotations.push(crate::dialogue::Annotation::new(shown.clone(), obj.bbox));
        }
        out.push(single_round_thread(sg, obj, Subset::Gnd, round));
    }
    Ok(out)
}
