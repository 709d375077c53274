//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.
//!
//! Every check compares the library against an oracle written here
//! independently of the implementation.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use mrg_bench::dataset::{mix_groups, split_dataset, validate_logic_chain, Group, Holdout, RuleCode};
use mrg_bench::dialogue::{parse_annotated_text, render_annotated_text, Annotation, Round, Subset, Thread};
use mrg_bench::geometry::{convert, iou, nms, BBox, BoxFormat, ImageDims, ScoredBox};
use mrg_bench::harness::predictions::{ground_truth_predictions, write_predictions};
use mrg_bench::harness::report::GROUNDING_HEADERS;
use mrg_bench::harness::{cmd_build, cmd_evaluate, BuildOptions, EvaluateOptions, ReportFormat};
use mrg_bench::metric::{
    grounding_metrics, match_boxes, single_round_score, thread_score, EvalConfig, PredictionRecord, RoundPrediction,
    Tau,
};
use mrg_bench::similarity::{ProviderConfig, ProviderKind, SimilarityError, SimilarityProvider, TextPair};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<(), String>;

/// Name, runtime limit in seconds, check.
type Criterion = (&'static str, u64, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

/// Returns fixed similarities in order, whatever the texts.
struct Scripted(Vec<f64>);

impl SimilarityProvider for Scripted {
    fn name(&self) -> String {
        "scripted".into()
    }

    fn score_batch(&self, pairs: &[TextPair]) -> Result<Vec<f64>, SimilarityError> {
        Ok(self.0[..pairs.len()].to_vec())
    }
}

fn text_round(index: usize) -> Round {
    round(index, "q", vec![], "reference", vec![])
}

fn text_thread(n: usize) -> (Thread, PredictionRecord) {
    let t = thread("t", "i", Subset::Lc, (1..=n).map(text_round).collect(), None);
    let p = PredictionRecord {
        thread_id: "t".into(),
        prompt: None,
        rounds: (0..n)
            .map(|_| RoundPrediction {
                answer: "candidate".into(),
                boxes: vec![],
            })
            .collect(),
    };
    (t, p)
}

fn round_score_formula() -> Check {
    let defaults = EvalConfig::default();
    ensure!(defaults.lambda == 0.3, "default lambda {}", defaults.lambda);
    ensure!(defaults.tau == Tau::Scalar(0.3), "default tau {:?}", defaults.tau);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..1000 {
        let lambda: f64 = rng.gen();
        let sim: f64 = rng.gen();
        let m = rng.gen_range(0..=5usize);
        // Ground-truth boxes sit in disjoint vertical strips; each prediction
        // keeps a fraction `f` of its target's width, so its IoU is `f`.
        let fracs: Vec<f64> = (0..m).map(|_| rng.gen()).collect();
        let w = 0.15;
        let gt: Vec<BBox> = (0..m).map(|k| bx(0.01 + 0.19 * k as f64, 0.1, 0.01 + 0.19 * k as f64 + w, 0.9)).collect();
        let mut preds: Vec<BBox> = gt.iter().zip(&fracs).map(|(g, f)| bx(g.x1(), 0.1, g.x1() + f * w, 0.9)).collect();
        preds.shuffle(&mut rng);

        let gt_round = round(1, "q", vec![], "reference", gt.iter().map(|b| ann("o", *b)).collect());
        let pred = RoundPrediction {
            answer: "candidate".into(),
            boxes: preds,
        };
        let cfg = EvalConfig {
            lambda,
            ..EvalConfig::default()
        };
        let got = single_round_score(&pred, &gt_round, &cfg, &Scripted(vec![sim])).map_err(|e| e.to_string())?.raw_t;
        let want = if m == 0 { sim } else { lambda * sim + (1.0 - lambda) * fracs.iter().sum::<f64>() / m as f64 };
        ensure!((got - want).abs() <= 1e-12, "case {case}: got {got}, want {want}");
    }
    Ok(())
}

fn truncation() -> Check {
    let (t, p) = text_thread(3);
    let r = thread_score(&p, &t, &EvalConfig::default(), &Scripted(vec![0.2, 0.9, 0.9])).map_err(|e| e.to_string())?;
    ensure!(r.thread_score == 0.2 / 3.0, "T = {}", r.thread_score);

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..10_000 {
        let n = rng.gen_range(1..=6);
        let sims: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let taus: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let (t, p) = text_thread(n);
        let score = |tau: Tau| {
            let cfg = EvalConfig {
                tau,
                ..EvalConfig::default()
            };
            thread_score(&p, &t, &cfg, &Scripted(sims.clone())).map(|r| r.thread_score).map_err(|e| e.to_string())
        };
        let with_tau = score(Tau::PerRound(taus.clone()))?;
        let without = score(Tau::Scalar(0.0))?;
        ensure!(with_tau <= without, "case {case}: T(tau) {with_tau} > T(0) {without}");

        let mut expected = 0.0;
        for (s, tau) in sims.iter().zip(&taus) {
            expected += s;
            if s < tau {
                break;
            }
        }
        expected /= n as f64;
        ensure!(with_tau == expected, "case {case}: T {with_tau}, oracle {expected}");
    }
    Ok(())
}

/// Per-axis cell coverage of `[lo, hi]` on a grid of `cells` unit cells,
/// either as covered fractions or as 0/1 by cell center.
fn axis_coverage(lo: f64, hi: f64, cells: usize, by_center: bool) -> Vec<f64> {
    (0..cells)
        .map(|i| {
            let (a, b) = (i as f64 / cells as f64, (i + 1) as f64 / cells as f64);
            if by_center {
                let c = (a + b) / 2.0;
                f64::from(lo <= c && c <= hi)
            } else {
                ((hi.min(b) - lo.max(a)) * cells as f64).clamp(0.0, 1.0)
            }
        })
        .collect()
}

/// IoU by summing covered cells of a `cells x cells` raster. Axis-aligned
/// rectangles cover cell (i, j) by the product of their per-axis coverage,
/// so each area is a product of two axis sums.
fn raster_iou(a: &BBox, b: &BBox, cells: usize, by_center: bool) -> f64 {
    let area = |x1: f64, y1: f64, x2: f64, y2: f64| {
        let sum = |lo, hi| axis_coverage(lo, hi, cells, by_center).iter().sum::<f64>();
        sum(x1, x2) * sum(y1, y2)
    };
    let area_a = area(a.x1(), a.y1(), a.x2(), a.y2());
    let area_b = area(b.x1(), b.y1(), b.x2(), b.y2());
    let inter = area(a.x1().max(b.x1()), a.y1().max(b.y1()), a.x2().min(b.x2()), a.y2().min(b.y2()));
    let union = area_a + area_b - inter;
    if union == 0.0 {
        0.0
    } else {
        inter / union
    }
}

fn iou_raster() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // B is A jittered so most pairs overlap.
    let random_box = |rng: &mut ChaCha8Rng, cx: f64, cy: f64| {
        let w = rng.gen_range(0.05..0.6);
        let h = rng.gen_range(0.05..0.6);
        let x1 = (cx - w / 2.0).clamp(0.0, 1.0 - w);
        let y1 = (cy - h / 2.0).clamp(0.0, 1.0 - h);
        bx(x1, y1, x1 + w, y1 + h)
    };
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let (cx, cy) = (rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8));
        let a = random_box(&mut rng, cx, cy);
        let (dx, dy) = (rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3));
        let b = random_box(&mut rng, cx + dx, cy + dy);
        let err = (iou(&a, &b) - raster_iou(&a, &b, 1000, false)).abs();
        worst = worst.max((iou(&a, &b) - raster_iou(&a, &b, 1000, true)).abs());
        ensure!(err <= 2e-3, "case {case}: {a:?} {b:?} differ by {err}");
    }

    // Integer pixel boxes on a 1000-pixel image align with the raster, so
    // the count is the exact overlap.
    let dims = ImageDims::new(1000, 1000);
    let px = |q: [f64; 4]| convert(q, BoxFormat::Corners, Some(dims)).unwrap();
    let fixtures = [
        ([100.0, 100.0, 300.0, 300.0], [100.0, 100.0, 300.0, 300.0], 1.0),
        ([0.0, 0.0, 100.0, 100.0], [100.0, 0.0, 200.0, 100.0], 0.0),
        ([0.0, 0.0, 200.0, 100.0], [100.0, 0.0, 300.0, 100.0], 1.0 / 3.0),
        ([0.0, 0.0, 400.0, 400.0], [100.0, 100.0, 300.0, 300.0], 0.25),
        ([100.0, 100.0, 500.0, 500.0], [300.0, 300.0, 700.0, 700.0], 1.0 / 7.0),
        ([0.0, 0.0, 1000.0, 1000.0], [0.0, 0.0, 1000.0, 500.0], 0.5),
        ([0.0, 0.0, 200.0, 200.0], [100.0, 100.0, 300.0, 300.0], 1.0 / 7.0),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut cases: Vec<([f64; 4], [f64; 4], Option<f64>)> = fixtures.iter().map(|(a, b, v)| (*a, *b, Some(*v))).collect();
    for _ in 0..200 {
        let mut q = || {
            let (x1, x2) = (rng.gen_range(0..1000u32), rng.gen_range(0..1000u32));
            let (y1, y2) = (rng.gen_range(0..1000u32), rng.gen_range(0..1000u32));
            [x1.min(x2) as f64, y1.min(y2) as f64, x1.max(x2) as f64, y1.max(y2) as f64]
        };
        cases.push((q(), q(), None));
    }
    for (qa, qb, hand) in cases {
        let (a, b) = (px(qa), px(qb));
        let got = iou(&a, &b);
        let counted = raster_iou(&a, &b, 1000, true);
        ensure!((got - counted).abs() <= 1e-12, "{qa:?} {qb:?}: iou {got}, raster {counted}");
        if let Some(v) = hand {
            ensure!((got - v).abs() <= 1e-12, "{qa:?} {qb:?}: iou {got}, expected {v}");
        }
    }
    println!("    center-sampled raster, worst deviation on random pairs: {worst:.2e}");
    Ok(())
}

fn clustered_box(rng: &mut ChaCha8Rng) -> BBox {
    let x1 = rng.gen_range(0.0..0.5);
    let y1 = rng.gen_range(0.0..0.5);
    bx(x1, y1, x1 + rng.gen_range(0.05..0.5), y1 + rng.gen_range(0.05..0.5))
}

/// Best total IoU over every injective pairing, by exhaustive search.
fn brute_force_total(pred: &[BBox], gt: &[BBox]) -> f64 {
    fn go(k: usize, pred: &[BBox], gt: &[BBox], used: &mut Vec<bool>) -> f64 {
        if k == gt.len() {
            return 0.0;
        }
        // Leave gt[k] unmatched...
        let mut best = go(k + 1, pred, gt, used);
        // ...or pair it with any free prediction.
        for j in 0..pred.len() {
            if !used[j] {
                used[j] = true;
                best = best.max(iou(&pred[j], &gt[k]) + go(k + 1, pred, gt, used));
                used[j] = false;
            }
        }
        best
    }
    go(0, pred, gt, &mut vec![false; pred.len()])
}

fn box_matching() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..500 {
        let n_gt = rng.gen_range(1..=6);
        let n_pred = rng.gen_range(0..=7);
        let gt: Vec<BBox> = (0..n_gt).map(|_| clustered_box(&mut rng)).collect();
        let pred: Vec<BBox> = (0..n_pred).map(|_| clustered_box(&mut rng)).collect();
        let m = match_boxes(&pred, &gt);
        ensure!(m.ious.len() == n_gt, "case {case}: {} IoUs for {n_gt} boxes", m.ious.len());
        let partners: Vec<usize> = m.assignment.iter().flatten().copied().collect();
        ensure!(
            partners.iter().collect::<BTreeSet<_>>().len() == partners.len(),
            "case {case}: prediction used twice"
        );
        for (k, (a, v)) in m.assignment.iter().zip(&m.ious).enumerate() {
            let expect = a.map_or(0.0, |j| iou(&pred[j], &gt[k]));
            ensure!(*v == expect, "case {case}: reported IoU {v} for gt {k}, actual {expect}");
        }
        let best = brute_force_total(&pred, &gt);
        ensure!((m.total() - best).abs() <= 1e-12, "case {case}: total {} < optimum {best}", m.total());
    }
    Ok(())
}

fn nms_exhaustive() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for trial in 0..1000 {
        let n = rng.gen_range(0..=12usize);
        let mut ids: Vec<u64> = (0..n as u64).map(|i| i * 7 + 3).collect();
        ids.shuffle(&mut rng);
        let cands: Vec<ScoredBox> = (0..n)
            .map(|i| {
                // Coarse scores force ties, broken by the lower id.
                let score = rng.gen_range(1..=4) as f64 / 4.0;
                ScoredBox::new(clustered_box(&mut rng), score, ids[i])
            })
            .collect();
        let thr = [0.1, 0.3, 0.5, 0.7][rng.gen_range(0..4)];

        // Priority: higher score first, then lower id.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            cands[b].score.partial_cmp(&cands[a].score).unwrap().then(cands[a].object_id.cmp(&cands[b].object_id))
        });
        // higher[r]: bitmask of higher-priority ranks that would suppress rank r.
        let higher: Vec<u32> = (0..n)
            .map(|r| {
                (0..r)
                    .filter(|&s| iou(&cands[order[s]].bbox, &cands[order[r]].bbox) >= thr)
                    .fold(0u32, |m, s| m | (1 << s))
            })
            .collect();
        // The greedy result is the one subset where a box is kept exactly
        // when no kept higher-priority box suppresses it.
        let fixed: Vec<u32> = (0..1u32 << n)
            .filter(|&mask| (0..n).all(|r| (mask >> r & 1 == 1) == (mask & higher[r] == 0)))
            .collect();
        ensure!(fixed.len() == 1, "trial {trial}: {} consistent subsets", fixed.len());
        let expected: Vec<u64> = (0..n).filter(|&r| fixed[0] >> r & 1 == 1).map(|r| cands[order[r]].object_id).collect();

        let kept = nms(&cands, thr);
        let got: Vec<u64> = kept.iter().map(|c| c.object_id).collect();
        ensure!(got == expected, "trial {trial}: kept {got:?}, oracle {expected:?}");
        ensure!(nms(&kept, thr) == kept, "trial {trial}: not idempotent");
    }
    Ok(())
}

fn parser_round_trip() -> Check {
    let raw = "What is the color of the shirt of the man? <man: [0.1, 0.1, 0.3, 0.5], shirt: [0.1, 0.2, 0.3, 0.4]>";
    let (text, anns) = parse_annotated_text(raw, BoxFormat::Corners, None).map_err(|e| e.to_string())?;
    ensure!(text == "What is the color of the shirt of the man?", "text {text:?}");
    ensure!(
        anns == vec![ann("man", bx(0.1, 0.1, 0.3, 0.5)), ann("shirt", bx(0.1, 0.2, 0.3, 0.4))],
        "annotations {anns:?}"
    );
    let again = parse_annotated_text(&render_annotated_text(&text, &anns, BoxFormat::Corners), BoxFormat::Corners, None)
        .map_err(|e| e.to_string())?;
    ensure!(again == (text, anns), "example does not round-trip");
    let (_, chair) = parse_annotated_text("The man is sitting on a chair. <chair:[0.1, 0.4, 0.3, 0.6]>", BoxFormat::Corners, None)
        .map_err(|e| e.to_string())?;
    ensure!(chair == vec![ann("chair", bx(0.1, 0.4, 0.3, 0.6))], "chair {chair:?}");

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let text_chars: Vec<char> = "abcdefghijklmnopqrstuvwxyz ABCXYZ0123456789.,?!'-()".chars().collect();
    let name_chars: Vec<char> = "abcdefghijklmnopqrstuvwxyz _0123456789".chars().collect();
    let pick = |rng: &mut ChaCha8Rng, set: &[char], len: usize| (0..len).map(|_| set[rng.gen_range(0..set.len())]).collect::<String>();
    let coord = |rng: &mut ChaCha8Rng| rng.gen_range(0..=1_000_000u32) as f64 / 1e6;
    for case in 0..10_000 {
        let len = rng.gen_range(0..60);
        let text = pick(&mut rng, &text_chars, len).trim().to_string();
        let anns: Vec<Annotation> = (0..rng.gen_range(0..4))
            .map(|_| {
                let len = rng.gen_range(1..12);
                let mut name = pick(&mut rng, &name_chars, len).trim().to_string();
                if name.is_empty() {
                    name.push('x');
                }
                let (a, b, c, d) = (coord(&mut rng), coord(&mut rng), coord(&mut rng), coord(&mut rng));
                ann(&name, bx(a.min(c), b.min(d), a.max(c), b.max(d)))
            })
            .collect();
        let rendered = render_annotated_text(&text, &anns, BoxFormat::Corners);
        let parsed = parse_annotated_text(&rendered, BoxFormat::Corners, None)
            .map_err(|e| format!("case {case}: {rendered:?}: {e}"))?;
        ensure!(parsed == (text.clone(), anns.clone()), "case {case}: {rendered:?} parsed as {parsed:?}");
    }
    Ok(())
}

fn logic_chain_rules() -> Check {
    let codes = |t: &Thread| -> BTreeSet<RuleCode> {
        validate_logic_chain(t, t.chain.as_ref().unwrap()).into_iter().map(|v| v.rule).collect()
    };
    let pos = codes(&lc_positive());
    ensure!(pos.is_empty(), "positive example flagged {pos:?}");
    let excluded = codes(&lc_excluded());
    ensure!(excluded.contains(&RuleCode::LC4), "excluded example gave {excluded:?}");
    for (code, t) in lc_mutations() {
        let got: Vec<String> = codes(&t).iter().map(|c| c.to_string()).collect();
        ensure!(got == [code], "mutation {code} gave {got:?}");
    }
    Ok(())
}

fn split_contract() -> Check {
    let d = Holdout::default();
    ensure!(
        d == Holdout::new([(Subset::Mrg, 800), (Subset::Lc, 200)]),
        "default holdout {d:?}"
    );
    let mut threads = Vec::new();
    for i in 0..30 {
        threads.push(mrg_thread(&format!("m{i}"), &format!("img{}", i % 20)));
    }
    for i in 0..10 {
        threads.push(lc_three_rounds(&format!("l{i}"), &format!("img{}", (i * 3) % 20)));
    }
    for i in 0..10 {
        let mut t = lc_positive();
        t.thread_id = format!("r{i}");
        t.subset = Subset::Ref;
        t.chain = None;
        t.image_id = format!("img{}", 20 + i);
        threads.push(t);
    }
    let holdout = Holdout::new([(Subset::Mrg, 8), (Subset::Lc, 2)]);
    for seed in 0..100 {
        let s = split_dataset(&threads, &holdout, seed).map_err(|e| e.to_string())?;
        let count = |ts: &[Thread], sub: Subset| ts.iter().filter(|t| t.subset == sub).count();
        ensure!(
            count(&s.test, Subset::Mrg) == 8 && count(&s.test, Subset::Lc) == 2 && s.test.len() == 10,
            "seed {seed}: test has {} threads",
            s.test.len()
        );
        let images = |ts: &[Thread]| ts.iter().map(|t| t.image_id.clone()).collect::<BTreeSet<_>>();
        ensure!(images(&s.train).is_disjoint(&images(&s.test)), "seed {seed}: train and test share an image");
        ensure!(
            images(&s.quarantine).is_subset(&images(&s.test)),
            "seed {seed}: quarantined thread without a test sibling"
        );
        ensure!(s.train.len() + s.test.len() + s.quarantine.len() == threads.len(), "seed {seed}: threads lost");
    }
    Ok(())
}

fn mixer_ratios() -> Check {
    let ratios: Vec<(String, u32)> = Group::A.default_ratios().iter().map(|(n, r)| (n.to_string(), *r)).collect();
    let weights: Vec<u32> = ratios.iter().map(|(_, r)| *r).collect();
    ensure!(weights == [3, 2, 5], "group A ratios {weights:?}");
    let sources: BTreeMap<String, Vec<Thread>> = ratios
        .iter()
        .map(|(n, _)| (n.clone(), (0..40).map(|i| mrg_thread(&format!("{n}{i}"), "i")).collect()))
        .collect();
    let stream = mix_groups(&sources, Group::A, &ratios, 8).map_err(|e| e.to_string())?;
    let draws = 100_000;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for item in stream.take(draws) {
        let annotated = item
            .thread
            .rounds
            .iter()
            .any(|r| !r.question_annotations.is_empty() || !r.answer_annotations.is_empty());
        ensure!(!annotated, "group A item {} carries annotations", item.thread.thread_id);
        *counts.entry(item.source).or_default() += 1;
    }
    for (name, ratio) in &ratios {
        let frac = counts.get(name).copied().unwrap_or(0) as f64 / draws as f64;
        let target = *ratio as f64 / 10.0;
        ensure!((frac - target).abs() <= 0.01, "{name}: {frac} vs {target}");
    }
    Ok(())
}

fn grounding() -> Check {
    let m = grounding_metrics(&[0.6, 0.4], 0.5).map_err(|e| e.to_string())?;
    ensure!(
        (m.miou, m.success_rate, m.miou_at_success) == (0.5, 0.5, Some(0.6)),
        "got {m:?}"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for case in 0..10_000 {
        let ious: Vec<f64> = (0..rng.gen_range(1..20)).map(|_| rng.gen()).collect();
        let m = grounding_metrics(&ious, 0.5).map_err(|e| e.to_string())?;
        if m.success_rate > 0.0 {
            ensure!(m.miou_at_success.is_some_and(|v| v >= 0.5), "case {case}: {m:?}");
        } else {
            ensure!(m.miou_at_success.is_none(), "case {case}: {m:?}");
        }
    }
    ensure!(GROUNDING_HEADERS == ["mIoU", "Succ. Rate", "mIoU @ Succ."], "headers {GROUNDING_HEADERS:?}");
    Ok(())
}

fn hermetic_pipeline() -> Check {
    std::env::remove_var("MRG_BENCH_ENDPOINT");
    ensure!(ProviderConfig::default().kind == ProviderKind::Lexical, "default provider is not lexical");
    let fx = build_fixture();
    let mut opts = BuildOptions::new(&fx.scene_graphs, fx.dir.path().join("built"));
    opts.imports = vec![fx.imports.clone()];
    opts.holdout = Holdout::new([(Subset::Mrg, 2), (Subset::Lc, 2)]);
    cmd_build(&opts).map_err(|e| e.to_string())?;
    let test = mrg_bench::dialogue::read_corpus_file(&opts.out_dir.join("test.jsonl")).map_err(|e| e.to_string())?;
    let preds = fx.dir.path().join("preds.jsonl");
    let file = std::fs::File::create(&preds).map_err(|e| e.to_string())?;
    write_predictions(file, BoxFormat::Corners, &ground_truth_predictions(&test.threads)).map_err(|e| e.to_string())?;
    let report = cmd_evaluate(&EvaluateOptions {
        corpus: opts.out_dir.join("test.jsonl"),
        predictions: preds,
        out_dir: fx.dir.path().join("eval"),
        config: EvalConfig::default(),
        seed: 0,
        format: ReportFormat::Markdown,
    })
    .map_err(|e| e.to_string())?;
    ensure!(report.run.provider == "lexical-f1", "provider {}", report.run.provider);
    ensure!(report.multi_round.iter().all(|r| r.thread_score == 1.0), "ground truth did not score 1");
    Ok(())
}

fn main() -> ExitCode {
    let checks: [Criterion; 11] = [
        ("round score formula (1000 cases, 1e-12) and defaults", 1, round_score_formula),
        ("truncation fixture and T(tau) <= T(0) over 10000 threads", 5, truncation),
        ("IoU against 1000x1000 raster (2e-3) and integer fixtures", 30, iou_raster),
        ("optimal box matching against brute force (500 instances)", 10, box_matching),
        ("NMS against exhaustive suppressor (1000 trials) and idempotence", 10, nms_exhaustive),
        ("annotation grammar round trip (10000 cases and worked example)", 10, parser_round_trip),
        ("logic-chain validator: positive, excluded and five mutations", 10, logic_chain_rules),
        ("split 8/2 holdout with disjoint images over 100 seeds", 10, split_contract),
        ("group A mixer 3:2:5 within 0.01 over 100000 draws, annotation-free", 30, mixer_ratios),
        ("grounding metrics example, invariant and table headers", 10, grounding),
        ("hermetic build and evaluate with the lexical provider", 30, hermetic_pipeline),
    ];
    let mut failed = 0;
    for (name, limit, check) in checks {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let result = result.and_then(|()| {
            if elapsed > Duration::from_secs(limit) {
                Err(format!("took {elapsed:.2?}, limit {limit} s"))
            } else {
                Ok(())
            }
        });
        match result {
            Ok(()) => println!("PASS  {name} ({elapsed:.2?})"),
            Err(e) => {
                failed += 1;
                println!("FAIL  {name}: {e}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance check(s) failed");
        ExitCode::FAILURE
    }
}
