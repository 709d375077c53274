//! Prediction files: JSON lines, one record per thread.
//!
//! An optional first line declares the box format the same way a corpus
//! header does; without it the corpus header applies.
//!
//! ```text
//! {"kind":"header","box_format":"corners","coordinate_scale":"normalized"}
//! {"thread_id":"img1:gnd:3","prompt":"Where is the [name]?","rounds":[{"answer":"It is here.","boxes":[[0.1,0.2,0.3,0.4]]}]}
//! ```

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::dialogue::corpus::decode_quad;
use crate::dialogue::{CoordinateScale, CorpusHeader, Thread};
use crate::geometry::{BoxFormat, ImageDims};
use crate::metric::{PredictionRecord, RoundPrediction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RawRound {
    answer: String,
    #[serde(default)]
    boxes: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RawRecord {
    thread_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prompt: Option<String>,
    rounds: Vec<RawRound>,
}

#[derive(Deserialize)]
struct MaybeHeader {
    kind: Option<String>,
    #[serde(flatten)]
    header: Option<CorpusHeader>,
}

/// A prediction record whose boxes are still in file coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionLine {
    pub line: usize,
    pub thread_id: String,
    pub prompt: Option<String>,
    raw: RawRecord,
}

impl PredictionLine {
    pub fn num_rounds(&self) -> usize {
        self.raw.rounds.len()
    }

    /// Convert boxes to normalized corners using the image size of the
    /// thread the record answers.
    pub fn decode(&self, header: &CorpusHeader, dims: ImageDims) -> Result<PredictionRecord, String> {
        let mut rounds = Vec::with_capacity(self.raw.rounds.len());
        for (i, r) in self.raw.rounds.iter().enumerate() {
            let boxes = r
                .boxes
                .iter()
                .map(|q| decode_quad(q, header, dims).map_err(|e| format!("round {}: {e}", i + 1)))
                .collect::<Result<Vec<_>, _>>()?;
            rounds.push(RoundPrediction {
                answer: r.answer.clone(),
                boxes,
            });
        }
        Ok(PredictionRecord {
            thread_id: self.thread_id.clone(),
            prompt: self.prompt.clone(),
            rounds,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionFile {
    pub header: Option<CorpusHeader>,
    pub records: Vec<PredictionLine>,
}

/// Parse a predictions stream. Errors carry the 1-based line number.
pub fn read_predictions<R: BufRead>(reader: R) -> Result<PredictionFile, (usize, String)> {
    let mut header = None;
    let mut records = Vec::new();
    let mut first = true;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| (lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        if std::mem::take(&mut first) {
            if let Ok(MaybeHeader { kind: Some(kind), header: h }) = serde_json::from_str::<MaybeHeader>(&line) {
                if kind != "header" {
                    return Err((lineno, format!("unexpected record kind '{kind}'")));
                }
                header = Some(h.ok_or((lineno, "malformed header".to_string()))?);
                continue;
            }
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| (lineno, e.to_string()))?;
        records.push(PredictionLine {
            line: lineno,
            thread_id: raw.thread_id.clone(),
            prompt: raw.prompt.clone(),
            raw,
        });
    }
    Ok(PredictionFile { header, records })
}

/// Write predictions with a header declaring normalized boxes in `format`.
pub fn write_predictions<W: Write>(mut w: W, format: BoxFormat, records: &[PredictionRecord]) -> std::io::Result<()> {
    let header = CorpusHeader::new(format, CoordinateScale::Normalized);
    crate::dialogue::corpus::write_header(&mut w, &header)?;
    for rec in records {
        let raw = RawRecord {
            thread_id: rec.thread_id.clone(),
            prompt: rec.prompt.clone(),
            rounds: rec
                .rounds
                .iter()
                .map(|r| RawRound {
                    answer: r.answer.clone(),
                    boxes: r.boxes.iter().map(|b| b.to_quad(format, None).to_vec()).collect(),
                })
                .collect(),
        };
        serde_json::to_writer(&mut w, &raw)?;
        writeln!(w)?;
    }
    w.flush()
}

/// Predictions that repeat the ground truth verbatim.
pub fn ground_truth_predictions(threads: &[Thread]) -> Vec<PredictionRecord> {
    threads
        .iter()
        .map(|t| PredictionRecord {
            thread_id: t.thread_id.clone(),
            prompt: None,
            rounds: t
                .rounds
                .iter()
                .map(|r| RoundPrediction {
                    answer: r.answer.clone(),
                    boxes: r.answer_annotations.iter().map(|a| a.bbox).collect(),
                })
                .collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;

    #[test]
    fn header_is_optional() {
        let src = "{\"thread_id\":\"a\",\"rounds\":[{\"answer\":\"x\"}]}\n";
        let f = read_predictions(src.as_bytes()).unwrap();
        assert!(f.header.is_none());
        assert_eq!(f.records[0].line, 1);
        assert_eq!(f.records[0].num_rounds(), 1);
    }

    #[test]
    fn pixel_boxes_are_normalized() {
        let src = concat!(
            "{\"kind\":\"header\",\"box_format\":\"xywh\",\"coordinate_scale\":\"pixel\"}\n",
            "{\"thread_id\":\"a\",\"prompt\":\"p\",\"rounds\":[{\"answer\":\"x\",\"boxes\":[[10,20,30,40]]}]}\n"
        );
        let f = read_predictions(src.as_bytes()).unwrap();
        let header = f.header.unwrap();
        let rec = f.records[0].decode(&header, ImageDims::new(100, 200)).unwrap();
        assert_eq!(rec.rounds[0].boxes[0], BBox::new(0.1, 0.1, 0.4, 0.3).unwrap());
        assert_eq!(rec.prompt.as_deref(), Some("p"));
    }

    #[test]
    fn errors_name_the_line() {
        let src = "{\"thread_id\":\"a\",\"rounds\":[]}\n\nnot json\n";
        assert_eq!(read_predictions(src.as_bytes()).unwrap_err().0, 3);

        let src = "{\"thread_id\":\"a\",\"rounds\":[{\"answer\":\"x\",\"boxes\":[[0.1,0.2,0.3]]}]}\n";
        let f = read_predictions(src.as_bytes()).unwrap();
        let err = f.records[0].decode(&CorpusHeader::default(), ImageDims::new(1, 1)).unwrap_err();
        assert!(err.contains("3 coordinates"), "{err}");
    }

    #[test]
    fn write_then_read() {
        let recs = vec![PredictionRecord {
            thread_id: "t".into(),
            prompt: None,
            rounds: vec![RoundPrediction {
                answer: "a cup".into(),
                boxes: vec![BBox::new(0.125, 0.25, 0.5, 0.75).unwrap()],
            }],
        }];
        let mut buf = Vec::new();
        write_predictions(&mut buf, BoxFormat::Xywh, &recs).unwrap();
        let f = read_predictions(buf.as_slice()).unwrap();
        let back = f.records[0].decode(&f.header.unwrap(), ImageDims::new(7, 9)).unwrap();
        assert_eq!(back, recs[0]);
    }
}
