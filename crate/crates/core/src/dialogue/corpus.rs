//! JSON-lines corpus storage.
//!
//! The first line is a header declaring how boxes are written:
//!
//! ```text
//! {"kind":"header","box_format":"corners","coordinate_scale":"normalized"}
//! ```
//!
//! Every following non-blank line is one thread. Questions and answers are
//! stored as clean text with explicit annotation arrays.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Annotation, Round, Subset, Thread};
use crate::dataset::{ChainLink, RelationshipChain};
use crate::geometry::{convert, BoxFormat, GeometryError, ImageDims};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CoordinateScale {
    #[default]
    Normalized,
    Pixel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct CorpusHeader {
    pub box_format: BoxFormat,
    pub coordinate_scale: CoordinateScale,
}

impl CorpusHeader {
    pub fn new(box_format: BoxFormat, coordinate_scale: CoordinateScale) -> Self {
        Self {
            box_format,
            coordinate_scale,
        }
    }

    pub fn dims_for(&self, dims: ImageDims) -> Option<ImageDims> {
        match self.coordinate_scale {
            CoordinateScale::Normalized => None,
            CoordinateScale::Pixel => Some(dims),
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing header record")]
    MissingHeader,
}

impl CorpusError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        CorpusError::Parse {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub header: CorpusHeader,
    pub threads: Vec<Thread>,
}

#[derive(Serialize, Deserialize)]
struct HeaderRecord {
    kind: String,
    #[serde(flatten)]
    header: CorpusHeader,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct AnnotationRecord {
    pub name: String,
    #[serde(rename = "box")]
    pub coords: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RoundRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    index: Option<usize>,
    question: String,
    answer: String,
    #[serde(default)]
    question_annotations: Vec<AnnotationRecord>,
    #[serde(default)]
    answer_annotations: Vec<AnnotationRecord>,
}

#[derive(Serialize, Deserialize)]
struct ThreadRecord {
    thread_id: String,
    image_id: String,
    image_dims: ImageDims,
    subset: Subset,
    rounds: Vec<RoundRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    chain: Option<Vec<ChainLink>>,
}

pub(crate) fn decode_quad(
    coords: &[f64],
    header: &CorpusHeader,
    dims: ImageDims,
) -> Result<crate::geometry::BBox, String> {
    let quad: [f64; 4] = coords
        .try_into()
        .map_err(|_| format!("box has {} coordinates, expected 4", coords.len()))?;
    convert(quad, header.box_format, header.dims_for(dims)).map_err(|e: GeometryError| e.to_string())
}

fn decode_annotations(
    records: Vec<AnnotationRecord>,
    header: &CorpusHeader,
    dims: ImageDims,
    line: usize,
    thread_id: &str,
    round: usize,
) -> Result<Vec<Annotation>, CorpusError> {
    records
        .into_iter()
        .map(|r| {
            if r.name.trim().is_empty() {
                return Err(CorpusError::at(
                    line,
                    format!("thread '{thread_id}' round {round}: annotation with empty name"),
                ));
            }
            let bbox = decode_quad(&r.coords, header, dims).map_err(|m| {
                CorpusError::at(
                    line,
                    format!("thread '{thread_id}' round {round}: annotation '{}': {m}", r.name),
                )
            })?;
            Ok(Annotation::new(r.name, bbox))
        })
        .collect()
}

fn encode_annotations(anns: &[Annotation], header: &CorpusHeader, dims: ImageDims) -> Vec<AnnotationRecord> {
    anns.iter()
        .map(|a| AnnotationRecord {
            name: a.name.clone(),
            coords: a.bbox.to_quad(header.box_format, header.dims_for(dims)).to_vec(),
        })
        .collect()
}

fn decode_thread(rec: ThreadRecord, header: &CorpusHeader, line: usize) -> Result<Thread, CorpusError> {
    if rec.rounds.is_empty() {
        return Err(CorpusError::at(line, format!("thread '{}' has no rounds", rec.thread_id)));
    }
    let mut rounds = Vec::with_capacity(rec.rounds.len());
    for (pos, r) in rec.rounds.into_iter().enumerate() {
        let index = pos + 1;
        if let Some(declared) = r.index {
            if declared != index {
                return Err(CorpusError::at(
                    line,
                    format!(
                        "thread '{}': round at position {index} declares index {declared}",
                        rec.thread_id
                    ),
                ));
            }
        }
        rounds.push(Round {
            index,
            question: r.question,
            answer: r.answer,
            question_annotations: decode_annotations(
                r.question_annotations,
                header,
                rec.image_dims,
                line,
                &rec.thread_id,
                index,
            )?,
            answer_annotations: decode_annotations(
                r.answer_annotations,
                header,
                rec.image_dims,
                line,
                &rec.thread_id,
                index,
            )?,
        });
    }
    let chain = match rec.chain {
        Some(links) => Some(
            RelationshipChain::new(links)
                .map_err(|e| CorpusError::at(line, format!("thread '{}': {e}", rec.thread_id)))?,
        ),
        None => None,
    };
    Ok(Thread {
        thread_id: rec.thread_id,
        image_id: rec.image_id,
        image_dims: rec.image_dims,
        subset: rec.subset,
        rounds,
        chain,
    })
}

fn encode_thread(t: &Thread, header: &CorpusHeader) -> ThreadRecord {
    ThreadRecord {
        thread_id: t.thread_id.clone(),
        image_id: t.image_id.clone(),
        image_dims: t.image_dims,
        subset: t.subset,
        rounds: t
            .rounds
            .iter()
            .map(|r| RoundRecord {
                index: Some(r.index),
                question: r.question.clone(),
                answer: r.answer.clone(),
                question_annotations: encode_annotations(&r.question_annotations, header, t.image_dims),
                answer_annotations: encode_annotations(&r.answer_annotations, header, t.image_dims),
            })
            .collect(),
        chain: t.chain.as_ref().map(|c| c.links().to_vec()),
    }
}

/// Split a JSON-lines stream into `(line_number, header, records)`.
pub(crate) fn read_header_and_lines<R: BufRead>(
    reader: R,
) -> Result<(CorpusHeader, Vec<(usize, String)>), CorpusError> {
    let mut header = None;
    let mut lines = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        if header.is_none() {
            let rec: HeaderRecord = serde_json::from_str(&line)
                .map_err(|_| CorpusError::MissingHeader)?;
            if rec.kind != "header" {
                return Err(CorpusError::MissingHeader);
            }
            header = Some(rec.header);
            continue;
        }
        lines.push((lineno, line));
    }
    Ok((header.ok_or(CorpusError::MissingHeader)?, lines))
}

pub(crate) fn write_header<W: Write>(w: &mut W, header: &CorpusHeader) -> std::io::Result<()> {
    let rec = HeaderRecord {
        kind: "header".into(),
        header: *header,
    };
    serde_json::to_writer(&mut *w, &rec)?;
    writeln!(w)
}

pub fn read_corpus<R: BufRead>(reader: R) -> Result<Corpus, CorpusError> {
    let (header, lines) = read_header_and_lines(reader)?;
    let mut threads = Vec::with_capacity(lines.len());
    for (lineno, line) in lines {
        let rec: ThreadRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::at(lineno, e.to_string()))?;
        threads.push(decode_thread(rec, &header, lineno)?);
    }
    Ok(Corpus { header, threads })
}

/// Like [`read_corpus`], but keeps going past bad records so every broken
/// line can be reported. Only a missing header or an I/O failure aborts.
pub fn read_corpus_lenient<R: BufRead>(
    reader: R,
) -> Result<(CorpusHeader, Vec<Result<Thread, CorpusError>>), CorpusError> {
    let (header, lines) = read_header_and_lines(reader)?;
    let records = lines
        .into_iter()
        .map(|(lineno, line)| {
            let rec: ThreadRecord =
                serde_json::from_str(&line).map_err(|e| CorpusError::at(lineno, e.to_string()))?;
            decode_thread(rec, &header, lineno)
        })
        .collect();
    Ok((header, records))
}

pub fn read_corpus_file(path: &Path) -> Result<Corpus, CorpusError> {
    read_corpus(BufReader::new(File::open(path)?))
}

pub fn write_corpus<W: Write>(mut w: W, header: &CorpusHeader, threads: &[Thread]) -> std::io::Result<()> {
    write_header(&mut w, header)?;
    for t in threads {
        serde_json::to_writer(&mut w, &encode_thread(t, header))?;
        writeln!(w)?;
    }
    w.flush()
}

pub fn write_corpus_file(path: &Path, header: &CorpusHeader, threads: &[Thread]) -> std::io::Result<()> {
    write_corpus(BufWriter::new(File::create(path)?), header, threads)
}
