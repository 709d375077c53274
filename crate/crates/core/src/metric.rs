//! The multi-round score: per-round `t` mixing text similarity with box
//! IoU, truncation at per-round thresholds, and the thread average `T`.
//! Also the single-round referring and grounding metrics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialogue::{normalize_answer_text, Round, Thread};
use crate::geometry::{iou, BBox};
use crate::similarity::{ProviderConfig, SimilarityError, SimilarityProvider, TextPair};

pub const DEFAULT_LAMBDA: f64 = 0.3;
pub const DEFAULT_TAU: f64 = 0.3;
pub const DEFAULT_IOU_SUCCESS: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("thread '{thread_id}': prediction has {predicted} rounds, ground truth has {expected}")]
    RoundMismatch {
        thread_id: String,
        expected: usize,
        predicted: usize,
    },
    #[error("prediction for thread '{predicted}' scored against thread '{expected}'")]
    ThreadMismatch { expected: String, predicted: String },
    #[error("truncation thresholds cover {given} rounds, thread '{thread_id}' has {needed}")]
    TauTooShort {
        thread_id: String,
        given: usize,
        needed: usize,
    },
    #[error("thread '{thread_id}': similarity provider failed: {source}")]
    Provider {
        thread_id: String,
        #[source]
        source: SimilarityError,
    },
    #[error("no evaluation cases")]
    NoCases,
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Truncation thresholds: one value for every round, or one per round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Tau {
    Scalar(f64),
    PerRound(Vec<f64>),
}

impl Default for Tau {
    fn default() -> Self {
        Tau::Scalar(DEFAULT_TAU)
    }
}

impl Tau {
    pub fn for_round(&self, index: usize) -> Option<f64> {
        match self {
            Tau::Scalar(v) => Some(*v),
            Tau::PerRound(v) => v.get(index - 1).copied(),
        }
    }

    /// Parse `0.3` or `0.3,0.2,0.1`.
    pub fn parse(s: &str) -> Result<Self, String> {
        let values = s
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("bad threshold '{p}': {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err("thresholds must lie in [0, 1]".into());
        }
        Ok(match values.as_slice() {
            [v] => Tau::Scalar(*v),
            _ => Tau::PerRound(values),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub lambda: f64,
    pub tau: Tau,
    pub iou_success_threshold: f64,
    pub provider: ProviderConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            tau: Tau::default(),
            iou_success_threshold: DEFAULT_IOU_SUCCESS,
            provider: ProviderConfig::default(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(EvalError::Config(format!("lambda {} outside [0, 1]", self.lambda)));
        }
        let taus: Vec<f64> = match &self.tau {
            Tau::Scalar(v) => vec![*v],
            Tau::PerRound(v) => v.clone(),
        };
        if taus.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(EvalError::Config("truncation thresholds must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.iou_success_threshold) {
            return Err(EvalError::Config("IoU success threshold outside [0, 1]".into()));
        }
        Ok(())
    }
}

/// A model's answer for one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundPrediction {
    pub answer: String,
    pub boxes: Vec<BBox>,
}

/// A model's answers for one thread. `prompt` labels the grounding prompt
/// variant the answers were produced with, when relevant.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub thread_id: String,
    pub prompt: Option<String>,
    pub rounds: Vec<RoundPrediction>,
}

/// Optimal one-to-one pairing of predicted to ground-truth boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxMatching {
    /// For each ground-truth box, the index of its predicted partner.
    pub assignment: Vec<Option<usize>>,
    /// For each ground-truth box, the IoU with its partner (0 if unmatched).
    pub ious: Vec<f64>,
}

impl BoxMatching {
    pub fn total(&self) -> f64 {
        self.ious.iter().sum()
    }
}

/// Minimum-cost assignment of every row to a distinct column.
/// Requires `rows <= cols`; returns the column of each row.
fn hungarian(cost: &[Vec<f64>], cols: usize) -> Vec<usize> {
    let n = cost.len();
    let inf = f64::INFINITY;
    // 1-based potentials; column 0 is a sentinel.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; cols + 1];
    let mut p = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 1..=cols {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Pair predictions with ground truth so that total IoU is maximal.
///
/// Unmatched ground-truth boxes score 0; surplus predictions are ignored.
pub fn match_boxes(predicted: &[BBox], ground_truth: &[BBox]) -> BoxMatching {
    let n = ground_truth.len();
    if n == 0 {
        return BoxMatching {
            assignment: vec![],
            ious: vec![],
        };
    }
    let cols = predicted.len().max(n);
    let cost: Vec<Vec<f64>> = ground_truth
        .iter()
        .map(|g| {
            (0..cols)
                .map(|j| predicted.get(j).map_or(0.0, |p| -iou(p, g)))
                .collect()
        })
        .collect();
    let cols_of = hungarian(&cost, cols);

    let mut assignment = Vec::with_capacity(n);
    let mut ious = Vec::with_capacity(n);
    for (g, &j) in ground_truth.iter().zip(&cols_of) {
        match predicted.get(j) {
            Some(p) => {
                assignment.push(Some(j));
                ious.push(iou(p, g));
            }
            None => {
                assignment.push(None);
                ious.push(0.0);
            }
        }
    }
    BoxMatching { assignment, ious }
}

/// The round score from its two components. `ious` holds one IoU per
/// ground-truth box; when it is empty the score is the similarity alone.
pub fn combine_round_score(similarity: f64, ious: &[f64], lambda: f64) -> f64 {
    if ious.is_empty() {
        return similarity;
    }
    let mean_iou = ious.iter().sum::<f64>() / ious.len() as f64;
    lambda * similarity + (1.0 - lambda) * mean_iou
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundScore {
    pub index: usize,
    pub similarity: f64,
    /// Mean matched IoU; absent when the round needs no grounding.
    pub mean_iou: Option<f64>,
    /// Number of ground-truth boxes `M`.
    pub gt_boxes: usize,
    /// Score before truncation.
    pub raw_t: f64,
    /// Score after truncation (0 for rounds after the first failure).
    pub t: f64,
}

/// Per-thread score report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreadReport {
    pub thread_id: String,
    pub rounds: Vec<RoundScore>,
    /// First round whose score fell below its threshold.
    pub truncated_at: Option<usize>,
    #[serde(rename = "T")]
    pub thread_score: f64,
}

fn round_components(similarity: f64, pred: &RoundPrediction, gt: &Round, lambda: f64) -> (f64, Option<f64>, f64) {
    if !gt.grounding_required() {
        return (similarity, None, similarity);
    }
    let gt_boxes: Vec<BBox> = gt.answer_annotations.iter().map(|a| a.bbox).collect();
    let matching = match_boxes(&pred.boxes, &gt_boxes);
    let mean = matching.total() / gt_boxes.len() as f64;
    (similarity, Some(mean), combine_round_score(similarity, &matching.ious, lambda))
}

/// Score one round. Both answers are cleaned before comparison.
pub fn single_round_score(
    pred: &RoundPrediction,
    gt: &Round,
    cfg: &EvalConfig,
    provider: &dyn SimilarityProvider,
) -> Result<RoundScore, SimilarityError> {
    let similarity = provider.score(&normalize_answer_text(&pred.answer), &normalize_answer_text(&gt.answer))?;
    let (similarity, mean_iou, t) = round_components(similarity, pred, gt, cfg.lambda);
    Ok(RoundScore {
        index: gt.index,
        similarity,
        mean_iou,
        gt_boxes: gt.answer_annotations.len(),
        raw_t: t,
        t,
    })
}

/// Apply truncation to raw round scores: the first round with
/// `t_n < tau_n` ends the thread and every later round scores 0.
/// Returns the truncated scores and the failing round.
pub fn truncate_scores(raw: &[f64], tau: &Tau) -> Result<(Vec<f64>, Option<usize>), usize> {
    let mut out = Vec::with_capacity(raw.len());
    let mut cut = None;
    for (i, &t) in raw.iter().enumerate() {
        let threshold = tau.for_round(i + 1).ok_or(i + 1)?;
        if cut.is_some() {
            out.push(0.0);
            continue;
        }
        out.push(t);
        if t < threshold {
            cut = Some(i + 1);
        }
    }
    Ok((out, cut))
}

/// Score a whole thread.
///
/// Similarity is requested for every round in a single batch; a provider
/// failure fails the whole thread rather than scoring it 0.
pub fn thread_score(
    pred: &PredictionRecord,
    gt: &Thread,
    cfg: &EvalConfig,
    provider: &dyn SimilarityProvider,
) -> Result<ThreadReport, EvalError> {
    if pred.thread_id != gt.thread_id {
        return Err(EvalError::ThreadMismatch {
            expected: gt.thread_id.clone(),
            predicted: pred.thread_id.clone(),
        });
    }
    if pred.rounds.len() != gt.rounds.len() {
        return Err(EvalError::RoundMismatch {
            thread_id: gt.thread_id.clone(),
            expected: gt.rounds.len(),
            predicted: pred.rounds.len(),
        });
    }
    if let Tau::PerRound(v) = &cfg.tau {
        if v.len() < gt.rounds.len() {
            return Err(EvalError::TauTooShort {
                thread_id: gt.thread_id.clone(),
                given: v.len(),
                needed: gt.rounds.len(),
            });
        }
    }

    let pairs: Vec<TextPair> = pred
        .rounds
        .iter()
        .zip(&gt.rounds)
        .map(|(p, g)| TextPair::new(normalize_answer_text(&p.answer), normalize_answer_text(&g.answer)))
        .collect();
    let sims = provider.score_batch(&pairs).map_err(|source| EvalError::Provider {
        thread_id: gt.thread_id.clone(),
        source,
    })?;
    if sims.len() != pairs.len() {
        return Err(EvalError::Provider {
            thread_id: gt.thread_id.clone(),
            source: SimilarityError::Protocol {
                range: 0..pairs.len(),
                message: format!("provider returned {} scores for {} pairs", sims.len(), pairs.len()),
            },
        });
    }

    let mut rounds: Vec<RoundScore> = pred
        .rounds
        .iter()
        .zip(&gt.rounds)
        .zip(sims)
        .map(|((p, g), sim)| {
            let (similarity, mean_iou, t) = round_components(sim, p, g, cfg.lambda);
            RoundScore {
                index: g.index,
                similarity,
                mean_iou,
                gt_boxes: g.answer_annotations.len(),
                raw_t: t,
                t,
            }
        })
        .collect();

    let raw: Vec<f64> = rounds.iter().map(|r| r.raw_t).collect();
    let (truncated, truncated_at) = truncate_scores(&raw, &cfg.tau).map_err(|needed| EvalError::TauTooShort {
        thread_id: gt.thread_id.clone(),
        given: needed - 1,
        needed,
    })?;
    for (r, t) in rounds.iter_mut().zip(&truncated) {
        r.t = *t;
    }
    let thread_score = truncated.iter().sum::<f64>() / truncated.len() as f64;

    Ok(ThreadReport {
        thread_id: gt.thread_id.clone(),
        rounds,
        truncated_at,
        thread_score,
    })
}

/// Single-round grounding summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundingMetrics {
    pub miou: f64,
    pub success_rate: f64,
    /// Mean IoU over successful cases; `None` when there are none.
    pub miou_at_success: Option<f64>,
    pub cases: usize,
}

pub fn grounding_metrics(ious: &[f64], success_threshold: f64) -> Result<GroundingMetrics, EvalError> {
    if ious.is_empty() {
        return Err(EvalError::NoCases);
    }
    let n = ious.len() as f64;
    let successes: Vec<f64> = ious.iter().copied().filter(|&v| v >= success_threshold).collect();
    Ok(GroundingMetrics {
        miou: ious.iter().sum::<f64>() / n,
        success_rate: successes.len() as f64 / n,
        miou_at_success: if successes.is_empty() {
            None
        } else {
            Some(successes.iter().sum::<f64>() / successes.len() as f64)
        },
        cases: ious.len(),
    })
}

/// Best IoU of any predicted box against the target, 0 with no predictions.
pub fn best_iou(predicted: &[BBox], target: &BBox) -> f64 {
    predicted.iter().map(|p| iou(p, target)).fold(0.0, f64::max)
}

/// Similarity of a predicted region caption to the reference caption.
pub fn referring_score(
    pred: &str,
    gt: &str,
    provider: &dyn SimilarityProvider,
) -> Result<f64, SimilarityError> {
    provider.score(&normalize_answer_text(pred), &normalize_answer_text(gt))
}

/// Number of rounds kept by [`curate_test_thread`].
pub const CURATED_ROUNDS: usize = 3;

/// Cut a logic-chain test thread down to its first three rounds. Threads
/// that are too short are excluded from the three-round protocol.
pub fn curate_test_thread(thread: &Thread) -> Option<Thread> {
    if thread.rounds.len() < CURATED_ROUNDS {
        log::info!(
            "thread {} has {} rounds, excluded from the {CURATED_ROUNDS}-round protocol",
            thread.thread_id,
            thread.rounds.len()
        );
        return None;
    }
    let mut out = thread.clone();
    out.rounds.truncate(CURATED_ROUNDS);
    Some(out)
}
