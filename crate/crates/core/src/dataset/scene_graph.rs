use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::dialogue::corpus::{decode_quad, read_header_and_lines};
use crate::dialogue::{CorpusError, CorpusHeader};
use crate::geometry::{nms, BBox, ImageDims, ScoredBox};

/// IoU threshold used by [`clean_scene_graph`] when none is configured.
pub const DEFAULT_CLEAN_IOU: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub object_id: u64,
    pub names: Vec<String>,
    pub bbox: BBox,
    pub attributes: Vec<String>,
}

impl SceneObject {
    /// The first non-blank name, if any.
    pub fn primary_name(&self) -> Option<&str> {
        self.names.iter().map(|n| n.trim()).find(|n| !n.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct SceneRelationship {
    pub subject_id: u64,
    pub predicate: String,
    pub object_id: u64,
}

/// Per-image metadata: objects with boxes and attributes, plus
/// subject-predicate-object relationships.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGraph {
    pub image_id: String,
    pub image_dims: ImageDims,
    pub objects: Vec<SceneObject>,
    pub relationships: Vec<SceneRelationship>,
}

#[derive(Debug, Error)]
pub enum SceneGraphError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
}

impl SceneGraph {
    pub fn object(&self, id: u64) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.object_id == id)
    }

    /// Check unique object ids and that every relationship endpoint exists.
    pub fn check(&self) -> Result<(), String> {
        let mut ids = BTreeSet::new();
        for o in &self.objects {
            if !ids.insert(o.object_id) {
                return Err(format!("image '{}': duplicate object id {}", self.image_id, o.object_id));
            }
        }
        for r in &self.relationships {
            for id in [r.subject_id, r.object_id] {
                if !ids.contains(&id) {
                    return Err(format!(
                        "image '{}': relationship '{}' references unknown object {id}",
                        self.image_id, r.predicate
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct ObjectRecord {
    object_id: u64,
    #[serde(default)]
    names: Vec<String>,
    #[serde(rename = "box")]
    coords: Vec<f64>,
    #[serde(default)]
    attributes: Vec<String>,
}

#[derive(Deserialize)]
struct SceneGraphRecord {
    image_id: String,
    image_dims: ImageDims,
    #[serde(default)]
    objects: Vec<ObjectRecord>,
    #[serde(default)]
    relationships: Vec<SceneRelationship>,
}

fn decode(rec: SceneGraphRecord, header: &CorpusHeader, line: usize) -> Result<SceneGraph, SceneGraphError> {
    let invalid = |message: String| SceneGraphError::Invalid { line, message };
    let objects = rec
        .objects
        .into_iter()
        .map(|o| {
            let bbox = decode_quad(&o.coords, header, rec.image_dims)
                .map_err(|m| invalid(format!("object {}: {m}", o.object_id)))?;
            Ok(SceneObject {
                object_id: o.object_id,
                names: o.names,
                bbox,
                attributes: o.attributes,
            })
        })
        .collect::<Result<Vec<_>, SceneGraphError>>()?;
    let sg = SceneGraph {
        image_id: rec.image_id,
        image_dims: rec.image_dims,
        objects,
        relationships: rec.relationships,
    };
    sg.check().map_err(invalid)?;
    Ok(sg)
}

/// Read scene graphs from JSON-lines: a header record declaring the box
/// format, then one image per line.
pub fn read_scene_graphs<R: BufRead>(reader: R) -> Result<Vec<SceneGraph>, SceneGraphError> {
    let (header, lines) = read_header_and_lines(reader)?;
    lines
        .into_iter()
        .map(|(line, text)| {
            let rec: SceneGraphRecord = serde_json::from_str(&text).map_err(|e| SceneGraphError::Invalid {
                line,
                message: e.to_string(),
            })?;
            decode(rec, &header, line)
        })
        .collect()
}

pub fn read_scene_graphs_file(path: &Path) -> Result<Vec<SceneGraph>, SceneGraphError> {
    let file = File::open(path).map_err(CorpusError::from)?;
    read_scene_graphs(BufReader::new(file))
}

fn area_scored(o: &SceneObject) -> ScoredBox {
    ScoredBox::new(o.bbox, o.bbox.area(), o.object_id)
}

/// Deduplicate a scene graph.
///
/// 1. Same-name objects are suppressed with area-priority NMS.
/// 2. Across names, an object overlapping a larger object at or above the
///    threshold is discarded.
/// 3. Names still shared by several survivors get `name_number`
///    identifiers, numbered from 1 in descending area order.
///
/// Relationships touching a discarded object are dropped. Unnamed objects
/// take part in step 2 only.
pub fn clean_scene_graph(sg: &SceneGraph, iou_threshold: f64) -> SceneGraph {
    let by_id: BTreeMap<u64, &SceneObject> = sg.objects.iter().map(|o| (o.object_id, o)).collect();

    let mut groups: BTreeMap<String, Vec<ScoredBox>> = BTreeMap::new();
    let mut survivors: Vec<ScoredBox> = Vec::new();
    for o in &sg.objects {
        match o.primary_name() {
            Some(name) => groups.entry(name.to_string()).or_default().push(area_scored(o)),
            None => survivors.push(area_scored(o)),
        }
    }
    for cands in groups.values() {
        survivors.extend(nms(cands, iou_threshold));
    }
    let kept = nms(&survivors, iou_threshold);

    // `kept` is in descending-area order, which fixes the numbering.
    let mut name_counts: BTreeMap<String, usize> = BTreeMap::new();
    for k in &kept {
        if let Some(name) = by_id[&k.object_id].primary_name() {
            *name_counts.entry(name.to_string()).or_default() += 1;
        }
    }
    let mut next_index: BTreeMap<String, usize> = BTreeMap::new();
    let mut renamed: BTreeMap<u64, SceneObject> = BTreeMap::new();
    for k in &kept {
        let mut obj = by_id[&k.object_id].clone();
        if let Some(name) = obj.primary_name().map(str::to_string) {
            if name_counts[&name] > 1 {
                let idx = next_index.entry(name.clone()).or_insert(0);
                *idx += 1;
                let pos = obj.names.iter().position(|n| n.trim() == name).expect("primary name present");
                obj.names[pos] = format!("{name}_{idx}");
            }
        }
        renamed.insert(k.object_id, obj);
    }

    let objects: Vec<SceneObject> = sg
        .objects
        .iter()
        .filter_map(|o| renamed.remove(&o.object_id))
        .collect();
    let alive: BTreeSet<u64> = objects.iter().map(|o| o.object_id).collect();
    let relationships = sg
        .relationships
        .iter()
        .filter(|r| alive.contains(&r.subject_id) && alive.contains(&r.object_id))
        .cloned()
        .collect();

    SceneGraph {
        image_id: sg.image_id.clone(),
        image_dims: sg.image_dims,
        objects,
        relationships,
    }
}
