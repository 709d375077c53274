//! Axis-aligned box arithmetic on normalized image coordinates.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack allowed when checking that normalized coordinates lie in `[0, 1]`.
const RANGE_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("box has negative extent: {0:?}")]
    NegativeExtent([f64; 4]),
    #[error("coordinates {0:?} exceed 1 but no image dimensions were given")]
    MissingImageDims([f64; 4]),
    #[error("coordinates {0:?} fall outside [0, 1] after normalization")]
    OutOfRange([f64; 4]),
    #[error("non-finite coordinate in {0:?}")]
    NonFinite([f64; 4]),
    #[error("image dimensions must be positive, got {0}x{1}")]
    BadImageDims(u32, u32),
}

/// Declared layout of a coordinate quadruple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BoxFormat {
    /// `[x1, y1, x2, y2]`
    #[default]
    Corners,
    /// `[x, y, w, h]`
    Xywh,
}

impl fmt::Display for BoxFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoxFormat::Corners => f.write_str("corners"),
            BoxFormat::Xywh => f.write_str("xywh"),
        }
    }
}

impl FromStr for BoxFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "corners" | "xyxy" => Ok(BoxFormat::Corners),
            "xywh" => Ok(BoxFormat::Xywh),
            other => Err(format!("unknown box format '{other}'")),
        }
    }
}

/// Pixel dimensions of an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageDims {
    pub width: u32,
    pub height: u32,
}

impl ImageDims {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }
}

/// Axis-aligned box in normalized corner form.
///
/// Construct through [`BBox::new`] or [`convert`]; both guarantee
/// `0 <= x1 <= x2 <= 1` and `0 <= y1 <= y2 <= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, GeometryError> {
        canonicalize([x1, y1, x2, y2])
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn y1(&self) -> f64 {
        self.y1
    }

    pub fn x2(&self) -> f64 {
        self.x2
    }

    pub fn y2(&self) -> f64 {
        self.y2
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn corners(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    /// Express the box as a quadruple in `format`, optionally scaled to pixels.
    pub fn to_quad(&self, format: BoxFormat, dims: Option<ImageDims>) -> [f64; 4] {
        let (sx, sy) = match dims {
            Some(d) => (d.width as f64, d.height as f64),
            None => (1.0, 1.0),
        };
        let [x1, y1, x2, y2] = self.corners();
        match format {
            BoxFormat::Corners => [x1 * sx, y1 * sy, x2 * sx, y2 * sy],
            BoxFormat::Xywh => [x1 * sx, y1 * sy, (x2 - x1) * sx, (y2 - y1) * sy],
        }
    }

    /// Translate by `(dx, dy)` and clip to the unit square.
    pub fn shifted(&self, dx: f64, dy: f64) -> BBox {
        let c = |v: f64| v.clamp(0.0, 1.0);
        BBox {
            x1: c(self.x1 + dx),
            y1: c(self.y1 + dy),
            x2: c(self.x2 + dx),
            y2: c(self.y2 + dy),
        }
    }
}

fn canonicalize(q: [f64; 4]) -> Result<BBox, GeometryError> {
    if q.iter().any(|v| !v.is_finite()) {
        return Err(GeometryError::NonFinite(q));
    }
    let [x1, y1, x2, y2] = q;
    if x2 < x1 || y2 < y1 {
        return Err(GeometryError::NegativeExtent(q));
    }
    if q.iter().any(|&v| !(-RANGE_EPS..=1.0 + RANGE_EPS).contains(&v)) {
        return Err(GeometryError::OutOfRange(q));
    }
    let c = |v: f64| v.clamp(0.0, 1.0);
    Ok(BBox {
        x1: c(x1),
        y1: c(y1),
        x2: c(x2),
        y2: c(y2),
    })
}

/// Convert a coordinate quadruple in the declared format into a canonical box.
///
/// When `dims` is given the quadruple is treated as pixel-valued and divided
/// by the image size. Without `dims` every value must already be normalized.
pub fn convert(
    coords: [f64; 4],
    format: BoxFormat,
    dims: Option<ImageDims>,
) -> Result<BBox, GeometryError> {
    if coords.iter().any(|v| !v.is_finite()) {
        return Err(GeometryError::NonFinite(coords));
    }
    let corners = match format {
        BoxFormat::Corners => coords,
        BoxFormat::Xywh => {
            let [x, y, w, h] = coords;
            if w < 0.0 || h < 0.0 {
                return Err(GeometryError::NegativeExtent(coords));
            }
            [x, y, x + w, y + h]
        }
    };
    match dims {
        Some(d) => {
            if d.width == 0 || d.height == 0 {
                return Err(GeometryError::BadImageDims(d.width, d.height));
            }
            let (w, h) = (d.width as f64, d.height as f64);
            canonicalize([corners[0] / w, corners[1] / h, corners[2] / w, corners[3] / h])
        }
        None => {
            if coords.iter().any(|&v| v > 1.0 + RANGE_EPS) {
                return Err(GeometryError::MissingImageDims(coords));
            }
            canonicalize(corners)
        }
    }
}

pub fn intersection_area(a: &BBox, b: &BBox) -> f64 {
    let w = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let h = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    w * h
}

/// Intersection over union. A zero-area operand yields 0.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let (area_a, area_b) = (a.area(), b.area());
    if area_a <= 0.0 || area_b <= 0.0 {
        return 0.0;
    }
    let inter = intersection_area(a, b);
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// A candidate for suppression: higher `score` wins, ties go to the lower id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredBox {
    pub bbox: BBox,
    pub score: f64,
    pub object_id: u64,
}

impl ScoredBox {
    pub fn new(bbox: BBox, score: f64, object_id: u64) -> Self {
        Self {
            bbox,
            score,
            object_id,
        }
    }

    /// Priority order used by [`nms`]: descending score, then ascending id.
    pub fn priority_cmp(&self, other: &ScoredBox) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then(self.object_id.cmp(&other.object_id))
    }
}

/// Greedy non-maximum suppression.
///
/// Returns the kept candidates in priority order. A candidate is dropped when
/// its IoU with an already-kept candidate is at least `iou_threshold`.
pub fn nms(candidates: &[ScoredBox], iou_threshold: f64) -> Vec<ScoredBox> {
    let mut order: Vec<ScoredBox> = candidates.to_vec();
    order.sort_by(|a, b| a.priority_cmp(b));

    let mut kept: Vec<ScoredBox> = Vec::with_capacity(order.len());
    for cand in order {
        if kept
            .iter()
            .all(|k| iou(&k.bbox, &cand.bbox) < iou_threshold)
        {
            kept.push(cand);
        }
    }
    kept
}
