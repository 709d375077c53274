//! Per-thread score records and the aggregate tables built from them.
//!
//! `evaluate` writes one JSON line per scored record after a leading run
//! line; `report` rebuilds the same tables from that file alone.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::evaluate::PROMPT_VARIANTS;
use crate::dialogue::Subset;
use crate::metric::{grounding_metrics, EvalError, GroundingMetrics, Tau, ThreadReport};

/// Settings a report was produced with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub lambda: f64,
    pub tau: Tau,
    pub iou_success_threshold: f64,
    pub provider: String,
}

/// One line of the per-thread records file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    Run(RunConfig),
    MultiRound {
        subset: Subset,
        #[serde(flatten)]
        report: ThreadReport,
    },
    Referring {
        thread_id: String,
        similarity: f64,
    },
    Grounding {
        thread_id: String,
        prompt: String,
        iou: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundColumn {
    pub round: usize,
    pub threads: usize,
    pub similarity: f64,
    /// Mean over the threads whose round needs grounding.
    pub mean_iou: Option<f64>,
    /// Mean truncated score.
    pub t: f64,
    /// Mean score before truncation.
    pub raw_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiRoundRow {
    pub subset: Subset,
    pub threads: usize,
    pub rounds: Vec<RoundColumn>,
    #[serde(rename = "T")]
    pub thread_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferringRow {
    pub threads: usize,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingRow {
    pub prompt: String,
    #[serde(flatten)]
    pub metrics: GroundingMetrics,
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub run: RunConfig,
    pub multi_round: Vec<MultiRoundRow>,
    pub referring: Option<ReferringRow>,
    pub grounding: Vec<GroundingRow>,
}

pub const GROUNDING_HEADERS: [&str; 3] = ["mIoU", "Succ. Rate", "mIoU @ Succ."];

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

fn multi_round_row(subset: Subset, reports: &[&ThreadReport]) -> MultiRoundRow {
    let max_rounds = reports.iter().map(|r| r.rounds.len()).max().unwrap_or(0);
    let rounds = (0..max_rounds)
        .map(|n| {
            let present: Vec<_> = reports.iter().filter_map(|r| r.rounds.get(n)).collect();
            let col = |f: fn(&crate::metric::RoundScore) -> f64| {
                mean(&present.iter().map(|r| f(r)).collect::<Vec<_>>()).unwrap_or(0.0)
            };
            let ious: Vec<f64> = present.iter().filter_map(|r| r.mean_iou).collect();
            RoundColumn {
                round: n + 1,
                threads: present.len(),
                similarity: col(|r| r.similarity),
                mean_iou: mean(&ious),
                t: col(|r| r.t),
                raw_t: col(|r| r.raw_t),
            }
        })
        .collect();
    MultiRoundRow {
        subset,
        threads: reports.len(),
        rounds,
        thread_score: mean(&reports.iter().map(|r| r.thread_score).collect::<Vec<_>>()).unwrap_or(0.0),
    }
}

fn prompt_rank(prompt: &str) -> usize {
    PROMPT_VARIANTS.iter().position(|p| *p == prompt).unwrap_or(PROMPT_VARIANTS.len())
}

/// Build the aggregate tables. Sums run over records in file order.
pub fn aggregate(run: &RunConfig, records: &[Record]) -> Result<Report, EvalError> {
    let mut by_subset: BTreeMap<Subset, Vec<&ThreadReport>> = BTreeMap::new();
    let mut referring = Vec::new();
    let mut by_prompt: BTreeMap<(usize, &str), Vec<f64>> = BTreeMap::new();
    for rec in records {
        match rec {
            Record::Run(_) => {}
            Record::MultiRound { subset, report } => by_subset.entry(*subset).or_default().push(report),
            Record::Referring { similarity, .. } => referring.push(*similarity),
            Record::Grounding { prompt, iou, .. } => {
                by_prompt.entry((prompt_rank(prompt), prompt.as_str())).or_default().push(*iou)
            }
        }
    }

    let multi_round = by_subset.iter().map(|(s, reps)| multi_round_row(*s, reps)).collect();
    let referring = mean(&referring).map(|similarity| ReferringRow {
        threads: referring.len(),
        similarity,
    });

    let mut grounding = by_prompt
        .iter()
        .map(|((_, prompt), ious)| {
            Ok(GroundingRow {
                prompt: prompt.to_string(),
                metrics: grounding_metrics(ious, run.iou_success_threshold)?,
                best: false,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    // Best prompt: highest success rate, then highest mIoU, then listing order.
    let best = grounding.iter().enumerate().fold(None::<usize>, |acc, (i, row)| match acc {
        Some(j) => {
            let b = &grounding[j].metrics;
            let better = (row.metrics.success_rate, row.metrics.miou) > (b.success_rate, b.miou);
            Some(if better { i } else { j })
        }
        None => Some(i),
    });
    if let Some(i) = best {
        grounding[i].best = true;
    }

    Ok(Report {
        run: run.clone(),
        multi_round,
        referring,
        grounding,
    })
}

/// Read a records file: a run line followed by score records.
pub fn read_records<R: BufRead>(reader: R) -> Result<(RunConfig, Vec<Record>), (usize, String)> {
    let mut run = None;
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| (lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| (lineno, e.to_string()))?;
        match (rec, &run) {
            (Record::Run(cfg), None) => run = Some(cfg),
            (Record::Run(_), Some(_)) => return Err((lineno, "duplicate run record".into())),
            (_, None) => return Err((lineno, "first record must describe the run".into())),
            (rec, Some(_)) => records.push(rec),
        }
    }
    let run = run.ok_or((0, "empty records file".to_string()))?;
    Ok((run, records))
}

fn tau_label(tau: &Tau) -> String {
    match tau {
        Tau::Scalar(v) => v.to_string(),
        Tau::PerRound(v) => v.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "--".to_string(), |v| format!("{v:.4}"))
}

fn raw_cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn max_rounds(rows: &[MultiRoundRow]) -> usize {
    rows.iter().map(|r| r.rounds.len()).max().unwrap_or(0)
}

impl Report {
    pub fn to_markdown(&self) -> String {
        let run = &self.run;
        let mut out = format!(
            "# Evaluation report\n\nSeed {}; lambda {}; tau {}; IoU success threshold {}; similarity provider `{}`.\n",
            run.seed,
            run.lambda,
            tau_label(&run.tau),
            run.iou_success_threshold,
            run.provider
        );

        if !self.multi_round.is_empty() {
            let n = max_rounds(&self.multi_round);
            out.push_str("\n## Multi-round\n\n");
            out.push_str("`t` is the truncated round mean, `t (raw)` the mean before truncation.\n\n");
            let mut header = String::from("| Set | Threads |");
            let mut rule = String::from("|---|--:|");
            for r in 1..=n {
                header.push_str(&format!(" R{r} BERT | R{r} IoU | R{r} t | R{r} t (raw) |"));
                rule.push_str("--:|--:|--:|--:|");
            }
            header.push_str(" T |\n");
            rule.push_str("--:|\n");
            out.push_str(&header);
            out.push_str(&rule);
            for row in &self.multi_round {
                out.push_str(&format!("| CB-{} | {} |", row.subset, row.threads));
                for i in 0..n {
                    match row.rounds.get(i) {
                        Some(c) => out.push_str(&format!(
                            " {} | {} | {} | {} |",
                            cell(Some(c.similarity)),
                            cell(c.mean_iou),
                            cell(Some(c.t)),
                            cell(Some(c.raw_t))
                        )),
                        None => out.push_str(" -- | -- | -- | -- |"),
                    }
                }
                out.push_str(&format!(" {} |\n", cell(Some(row.thread_score))));
            }
        }

        if let Some(r) = &self.referring {
            out.push_str("\n## Referring\n\n| Set | Threads | BERT |\n|---|--:|--:|\n");
            out.push_str(&format!("| CB-REF | {} | {} |\n", r.threads, cell(Some(r.similarity))));
        }

        if !self.grounding.is_empty() {
            out.push_str("\n## Grounding\n\n");
            out.push_str(&format!(
                "| Prompt | Cases | {} | {} | {} | Best |\n|---|--:|--:|--:|--:|:-:|\n",
                GROUNDING_HEADERS[0], GROUNDING_HEADERS[1], GROUNDING_HEADERS[2]
            ));
            for g in &self.grounding {
                out.push_str(&format!(
                    "| {} | {} | {} | {} | {} | {} |\n",
                    g.prompt,
                    g.metrics.cases,
                    cell(Some(g.metrics.miou)),
                    cell(Some(g.metrics.success_rate)),
                    cell(g.metrics.miou_at_success),
                    if g.best { "*" } else { "" }
                ));
            }
        }
        out
    }

    /// One CSV document per non-empty table, keyed by table name.
    pub fn to_csv(&self) -> Result<Vec<(&'static str, String)>, csv::Error> {
        let mut tables = Vec::new();

        if !self.multi_round.is_empty() {
            let n = max_rounds(&self.multi_round);
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["Set".to_string(), "Threads".to_string()];
            for r in 1..=n {
                for col in ["BERT", "IoU", "t", "t (raw)"] {
                    header.push(format!("R{r} {col}"));
                }
            }
            header.push("T".into());
            w.write_record(&header)?;
            for row in &self.multi_round {
                let mut rec = vec![format!("CB-{}", row.subset), row.threads.to_string()];
                for i in 0..n {
                    match row.rounds.get(i) {
                        Some(c) => rec.extend([
                            raw_cell(Some(c.similarity)),
                            raw_cell(c.mean_iou),
                            raw_cell(Some(c.t)),
                            raw_cell(Some(c.raw_t)),
                        ]),
                        None => rec.extend(std::iter::repeat_n(String::new(), 4)),
                    }
                }
                rec.push(raw_cell(Some(row.thread_score)));
                w.write_record(&rec)?;
            }
            tables.push(("multi_round", finish(w)?));
        }

        if let Some(r) = &self.referring {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["Set", "Threads", "BERT"])?;
            w.write_record(["CB-REF".to_string(), r.threads.to_string(), raw_cell(Some(r.similarity))])?;
            tables.push(("referring", finish(w)?));
        }

        if !self.grounding.is_empty() {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["Prompt", "Cases", GROUNDING_HEADERS[0], GROUNDING_HEADERS[1], GROUNDING_HEADERS[2], "Best"])?;
            for g in &self.grounding {
                w.write_record([
                    g.prompt.clone(),
                    g.metrics.cases.to_string(),
                    raw_cell(Some(g.metrics.miou)),
                    raw_cell(Some(g.metrics.success_rate)),
                    raw_cell(g.metrics.miou_at_success),
                    g.best.to_string(),
                ])?;
            }
            tables.push(("grounding", finish(w)?));
        }
        Ok(tables)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, csv::Error> {
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::RoundScore;

    fn run() -> RunConfig {
        RunConfig {
            seed: 1,
            lambda: 0.3,
            tau: Tau::Scalar(0.3),
            iou_success_threshold: 0.5,
            provider: "lexical-f1".into(),
        }
    }

    fn round(index: usize, sim: f64, iou: Option<f64>, t: f64) -> RoundScore {
        RoundScore {
            index,
            similarity: sim,
            mean_iou: iou,
            gt_boxes: usize::from(iou.is_some()),
            raw_t: t,
            t,
        }
    }

    fn mr(id: &str, rounds: Vec<RoundScore>) -> Record {
        let t = rounds.iter().map(|r| r.t).sum::<f64>() / rounds.len() as f64;
        Record::MultiRound {
            subset: Subset::Lc,
            report: ThreadReport {
                thread_id: id.into(),
                rounds,
                truncated_at: None,
                thread_score: t,
            },
        }
    }

    #[test]
    fn multi_round_means() {
        let recs = vec![
            mr("a", vec![round(1, 0.8, Some(0.6), 0.66), round(2, 1.0, None, 1.0)]),
            mr("b", vec![round(1, 0.6, None, 0.6)]),
        ];
        let rep = aggregate(&run(), &recs).unwrap();
        let row = &rep.multi_round[0];
        assert_eq!(row.threads, 2);
        assert!((row.rounds[0].similarity - 0.7).abs() < 1e-12);
        assert_eq!(row.rounds[0].mean_iou, Some(0.6));
        assert_eq!(row.rounds[1].threads, 1);
        assert_eq!(row.rounds[1].mean_iou, None);
        assert!((row.thread_score - (0.83 + 0.6) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn best_prompt_is_marked() {
        let g = |p: &str, iou: f64| Record::Grounding {
            thread_id: "x".into(),
            prompt: p.into(),
            iou,
        };
        let recs = vec![
            g(PROMPT_VARIANTS[0], 0.4),
            g(PROMPT_VARIANTS[1], 0.9),
            g(PROMPT_VARIANTS[2], 0.6),
        ];
        let rep = aggregate(&run(), &recs).unwrap();
        let best: Vec<_> = rep.grounding.iter().filter(|r| r.best).map(|r| r.prompt.as_str()).collect();
        assert_eq!(best, vec![PROMPT_VARIANTS[1]]);
        assert_eq!(rep.grounding[0].prompt, PROMPT_VARIANTS[0]);
    }

    #[test]
    fn renderings() {
        let recs = vec![
            mr("a", vec![round(1, 1.0, Some(1.0), 1.0)]),
            Record::Referring {
                thread_id: "r".into(),
                similarity: 0.5,
            },
            Record::Grounding {
                thread_id: "g".into(),
                prompt: PROMPT_VARIANTS[0].into(),
                iou: 0.2,
            },
        ];
        let rep = aggregate(&run(), &recs).unwrap();
        let md = rep.to_markdown();
        assert!(md.contains("| mIoU | Succ. Rate | mIoU @ Succ. |"), "{md}");
        assert!(md.contains("| CB-LC | 1 | 1.0000 | 1.0000 | 1.0000 | 1.0000 | 1.0000 |"), "{md}");
        assert!(md.contains("| CB-REF | 1 | 0.5000 |"));
        assert!(md.contains("| 0.2000 | 0.0000 | -- | * |"), "{md}");
        assert!(md.contains("Seed 1"));

        let csv = rep.to_csv().unwrap();
        assert_eq!(csv.iter().map(|(n, _)| *n).collect::<Vec<_>>(), vec!["multi_round", "referring", "grounding"]);
        assert!(csv[2].1.starts_with("Prompt,Cases,mIoU,Succ. Rate,mIoU @ Succ.,Best\n"));

        let back: Report = serde_json::from_str(&rep.to_json()).unwrap();
        assert_eq!(back, rep);
    }

    #[test]
    fn records_round_trip() {
        let recs = [
            Record::Run(run()),
            mr("a", vec![round(1, 0.1 + 0.2, Some(1.0 / 3.0), 0.7)]),
        ];
        let text: String = recs.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect();
        let (cfg, back) = read_records(text.as_bytes()).unwrap();
        assert_eq!(cfg, run());
        assert_eq!(back, recs[1..]);

        let missing_run = serde_json::to_string(&recs[1]).unwrap();
        assert_eq!(read_records(missing_run.as_bytes()).unwrap_err().0, 1);
    }
}
