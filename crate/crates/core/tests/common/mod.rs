#![allow(dead_code)]

use std::path::{Path, PathBuf};

use mrg_bench::dataset::{ChainLink, RelationshipChain};
use mrg_bench::dialogue::{write_corpus_file, Annotation, CorpusHeader, Round, Subset, Thread};
use mrg_bench::geometry::{BBox, ImageDims};
use serde_json::json;

pub fn bx(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
    BBox::new(x1, y1, x2, y2).unwrap()
}

pub fn ann(name: &str, b: BBox) -> Annotation {
    Annotation::new(name, b)
}

pub fn round(index: usize, q: &str, qa: Vec<Annotation>, a: &str, aa: Vec<Annotation>) -> Round {
    Round {
        index,
        question: q.into(),
        answer: a.into(),
        question_annotations: qa,
        answer_annotations: aa,
    }
}

pub fn chain(links: &[(&str, &str, &str)]) -> RelationshipChain {
    RelationshipChain::new(links.iter().map(|(s, p, o)| ChainLink::new(s, p, o)).collect()).unwrap()
}

pub fn thread(id: &str, image: &str, subset: Subset, rounds: Vec<Round>, chain: Option<RelationshipChain>) -> Thread {
    Thread {
        thread_id: id.into(),
        image_id: image.into(),
        image_dims: ImageDims::new(500, 375),
        subset,
        rounds,
        chain,
    }
}

pub fn man() -> BBox {
    bx(0.1, 0.3, 0.4, 0.7)
}

pub fn cup() -> BBox {
    bx(0.1, 0.4, 0.15, 0.45)
}

pub fn water() -> BBox {
    bx(0.1, 0.41, 0.15, 0.45)
}

/// The man/cup/water logic-chain example.
pub fn lc_positive() -> Thread {
    thread(
        "lc-positive",
        "img-lc",
        Subset::Lc,
        vec![
            round(1, "What is the man holding?", vec![ann("man", man())], "The man is holding a cup.", vec![ann("cup", cup())]),
            round(2, "What does the cup have?", vec![ann("cup", cup())], "There is water in the cup.", vec![ann("water", water())]),
        ],
        Some(chain(&[("man", "holding", "cup"), ("cup", "has", "water")])),
    )
}

/// The excluded example: asks about the object and grounds the subject.
pub fn lc_excluded() -> Thread {
    thread(
        "lc-excluded",
        "img-lc",
        Subset::Lc,
        vec![round(1, "Where is the cup?", vec![ann("cup", cup())], "The cup is held by the man.", vec![ann("man", man())])],
        Some(chain(&[("man", "holding", "cup")])),
    )
}

/// Mutations of the positive example, each breaking exactly one rule.
pub fn lc_mutations() -> Vec<(&'static str, Thread)> {
    let mut lc1 = lc_positive();
    lc1.rounds[0].question = "What is the man holding, a cup?".into();

    let mut lc2 = lc_positive();
    lc2.rounds[1].question_annotations.push(ann("table", bx(0.0, 0.5, 0.6, 0.9)));

    let mut lc3 = lc_positive();
    lc3.rounds[1].answer_annotations.clear();

    let mut lc4 = lc_positive();
    lc4.rounds[1].answer = "The cup is held by the man.".into();
    lc4.rounds[1].answer_annotations = vec![ann("man", man())];

    let mut lc5 = lc_positive();
    lc5.rounds[1].question_annotations.clear();

    vec![("LC1", lc1), ("LC2", lc2), ("LC3", lc3), ("LC4", lc4), ("LC5", lc5)]
}

/// A valid three-round logic-chain thread on `image`.
pub fn lc_three_rounds(id: &str, image: &str) -> Thread {
    let table = bx(0.0, 0.5, 0.8, 0.95);
    let window = bx(0.5, 0.0, 0.9, 0.3);
    thread(
        id,
        image,
        Subset::Lc,
        vec![
            round(1, "What is the man holding?", vec![ann("man", man())], "The man is holding a cup.", vec![ann("cup", cup())]),
            round(2, "What is the cup on?", vec![ann("cup", cup())], "The cup is on a table.", vec![ann("table", table)]),
            round(3, "What is the table near?", vec![ann("table", table)], "The table is near a window.", vec![ann("window", window)]),
        ],
        Some(chain(&[("man", "holding", "cup"), ("cup", "on", "table"), ("table", "near", "window")])),
    )
}

/// A valid four-round multi-round thread on `image`.
pub fn mrg_thread(id: &str, image: &str) -> Thread {
    thread(
        id,
        image,
        Subset::Mrg,
        vec![
            round(1, "What is the color of the shirt of the man?", vec![ann("man", man()), ann("shirt", bx(0.1, 0.35, 0.4, 0.5))], "The color is red.", vec![ann("shirt", bx(0.1, 0.35, 0.4, 0.5))]),
            round(2, "Where is the man sitting?", vec![ann("man", man())], "The man is sitting on a chair.", vec![ann("chair", bx(0.1, 0.6, 0.4, 0.9))]),
            round(3, "Is the chair wooden?", vec![ann("chair", bx(0.1, 0.6, 0.4, 0.9))], "Yes, it is wooden.", vec![]),
            round(4, "What is next to the chair?", vec![], "A small dog.", vec![ann("dog", bx(0.5, 0.7, 0.7, 0.9))]),
        ],
        None,
    )
}

/// Scene graphs for `n` images, each with a near-duplicate box, a second
/// name for one object and a couple of relationships.
pub fn scene_graph_lines(n: usize) -> String {
    let mut out = String::from("{\"kind\":\"header\",\"box_format\":\"corners\",\"coordinate_scale\":\"pixel\"}\n");
    for i in 0..n {
        let rec = json!({
            "image_id": format!("img{i:02}"),
            "image_dims": {"width": 500, "height": 400},
            "objects": [
                {"object_id": 1, "names": ["man"], "box": [50, 120, 200, 280], "attributes": ["tall"]},
                {"object_id": 2, "names": ["cup"], "box": [50, 160, 75, 180], "attributes": ["red"]},
                {"object_id": 3, "names": ["cup"], "box": [51, 161, 75, 180], "attributes": []},
                {"object_id": 4, "names": ["table"], "box": [0, 200, 400, 380], "attributes": ["wooden"]},
                {"object_id": 5, "names": ["desk"], "box": [2, 202, 400, 380], "attributes": []},
                {"object_id": 6, "names": ["window"], "box": [250 + i, 0, 450, 120], "attributes": ["open"]},
                {"object_id": 7, "names": ["apple"], "box": [300, 210, 330, 240], "attributes": []},
                {"object_id": 8, "names": ["apple"], "box": [340, 210, 370, 240], "attributes": []},
            ],
            "relationships": [
                {"subject_id": 1, "predicate": "holding", "object_id": 2},
                {"subject_id": 2, "predicate": "on", "object_id": 4},
                {"subject_id": 5, "predicate": "near", "object_id": 6},
            ],
        });
        out.push_str(&rec.to_string());
        out.push('\n');
    }
    out
}

pub struct BuildFixture {
    pub dir: tempfile::TempDir,
    pub scene_graphs: PathBuf,
    pub imports: PathBuf,
}

/// Ten images with generated threads plus an import file holding eight
/// multi-round threads, four valid logic-chain threads (one too short for
/// the three-round protocol) and one that breaks the chain rules.
pub fn build_fixture() -> BuildFixture {
    let dir = tempfile::tempdir().unwrap();
    let scene_graphs = dir.path().join("scene_graphs.jsonl");
    std::fs::write(&scene_graphs, scene_graph_lines(10)).unwrap();

    let mut threads: Vec<Thread> = (0..8).map(|i| mrg_thread(&format!("mrg{i}"), &format!("img{i:02}"))).collect();
    for i in 0..3 {
        threads.push(lc_three_rounds(&format!("lc{i}"), &format!("img{:02}", 7 + i)));
    }
    let mut short = lc_positive();
    short.thread_id = "lc-short".into();
    short.image_id = "img09".into();
    threads.push(short);
    let mut bad = lc_excluded();
    bad.image_id = "img05".into();
    threads.push(bad);

    let imports = dir.path().join("imports.jsonl");
    write_corpus_file(&imports, &CorpusHeader::default(), &threads).unwrap();
    BuildFixture {
        dir,
        scene_graphs,
        imports,
    }
}

pub fn write_threads(path: &Path, threads: &[Thread]) {
    write_corpus_file(path, &CorpusHeader::default(), threads).unwrap();
}

pub fn bin() -> std::process::Command {
    std::process::Command::new(env!("CARGO_BIN_EXE_mrg-bench"))
}
