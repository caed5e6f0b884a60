//! Bounding-box annotations: COCO-style JSON I/O and the row-drop shift.
//!
//! Boxes are held in center form `[center_x, center_y, height, width]`. On
//! disk they use the top-left `[x, y, w, h]` layout:
//!
//! ```json
//! {"images": [{"id": 1, "width": 640, "height": 480, "file_name": "a.ppm"}],
//!  "annotations": [{"image_id": 1, "category_id": 3, "bbox": [10.0, 20.0, 30.0, 40.0], "score": 0.9}]}
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::drops::DropSet;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundingBox {
    pub center_x: f64,
    pub center_y: f64,
    pub height: f64,
    pub width: f64,
    pub class_id: u64,
    /// Detector confidence; absent on ground truth.
    pub score: Option<f64>,
}

impl BoundingBox {
    pub fn from_top_left(x: f64, y: f64, width: f64, height: f64, class_id: u64) -> Self {
        BoundingBox {
            center_x: x + width / 2.0,
            center_y: y + height / 2.0,
            height,
            width,
            class_id,
            score: None,
        }
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = Some(score);
        self
    }

    /// `[x, y, w, h]` with `(x, y)` the top-left corner.
    pub fn to_top_left(&self) -> [f64; 4] {
        [
            self.center_x - self.width / 2.0,
            self.center_y - self.height / 2.0,
            self.width,
            self.height,
        ]
    }

    /// `(x0, y0, x1, y1)` edges in continuous coordinates.
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        let [x, y, w, h] = self.to_top_left();
        (x, y, x + w, y + h)
    }

    pub fn area(&self) -> f64 {
        self.width.max(0.0) * self.height.max(0.0)
    }

    fn within(&self, width: usize, height: usize) -> bool {
        let (x0, y0, x1, y1) = self.corners();
        x0 >= 0.0 && y0 >= 0.0 && x1 <= width as f64 && y1 <= height as f64
    }
}

/// One image with its boxes. Detections use the same type with scores set.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnotationSet {
    pub image_id: u64,
    pub file_name: String,
    pub width: usize,
    pub height: usize,
    pub boxes: Vec<BoundingBox>,
}

pub type DetectionSet = AnnotationSet;

impl AnnotationSet {
    pub fn new(image_id: u64, file_name: impl Into<String>, width: usize, height: usize) -> Self {
        AnnotationSet { image_id, file_name: file_name.into(), width, height, boxes: Vec::new() }
    }
}

/// Which drops move a box center up.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountMode {
    /// Drops with index `x < center_y`.
    #[default]
    BeforeCenter,
    /// Drops above the top edge, `x < top`.
    AboveTop,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShiftOptions {
    pub min_height: f64,
    pub count_mode: CountMode,
}

impl Default for ShiftOptions {
    fn default() -> Self {
        ShiftOptions { min_height: 2.0, count_mode: CountMode::BeforeCenter }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shifted {
    Kept(BoundingBox),
    Removed,
}

/// Moves a box from the clean image onto the attacked one: up by the drops
/// before it (`n1`), shorter by the drops inside it (`n2`).
pub fn shift_box(bbox: &BoundingBox, drops: &DropSet, opts: &ShiftOptions) -> Shifted {
    let half = (bbox.height - 1.0) / 2.0;
    let (top, bottom) = (bbox.center_y - half, bbox.center_y + half);
    let limit = match opts.count_mode {
        CountMode::BeforeCenter => bbox.center_y,
        CountMode::AboveTop => top,
    };
    let rows = drops.indices().iter().map(|&x| x as f64);
    let n1 = rows.clone().filter(|&x| x < limit).count() as f64;
    let n2 = rows.filter(|&x| top <= x && x <= bottom).count() as f64;

    let height = bbox.height - n2;
    if height < opts.min_height {
        return Shifted::Removed;
    }
    Shifted::Kept(BoundingBox { center_y: bbox.center_y - n1, height, ..*bbox })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShiftReport {
    pub set: AnnotationSet,
    pub removed: usize,
    /// Kept boxes that left the image and were clipped back to it.
    pub clipped: usize,
}

/// Shifts every box of `set`; removed boxes are dropped and boxes pushed past
/// the image edge are clipped vertically.
pub fn shift_annotation_set(set: &AnnotationSet, drops: &DropSet, opts: &ShiftOptions) -> ShiftReport {
    let mut out = AnnotationSet { boxes: Vec::with_capacity(set.boxes.len()), ..set.clone() };
    let (mut removed, mut clipped) = (0, 0);
    for b in &set.boxes {
        match shift_box(b, drops, opts) {
            Shifted::Removed => removed += 1,
            Shifted::Kept(mut nb) => {
                if !nb.within(set.width, set.height) {
                    let (_, y0, _, y1) = nb.corners();
                    let (y0, y1) = (y0.max(0.0), y1.min(set.height as f64));
                    if y1 - y0 < opts.min_height {
                        removed += 1;
                        continue;
                    }
                    nb.center_y = (y0 + y1) / 2.0;
                    nb.height = y1 - y0;
                    clipped += 1;
                }
                out.boxes.push(nb);
            }
        }
    }
    ShiftReport { set: out, removed, clipped }
}

#[derive(Deserialize)]
struct FileIn {
    images: Vec<ImageIn>,
    #[serde(default)]
    annotations: Vec<RecordIn>,
}

#[derive(Deserialize)]
struct ImageIn {
    id: Option<u64>,
    width: Option<usize>,
    height: Option<usize>,
    file_name: Option<String>,
}

#[derive(Deserialize)]
struct RecordIn {
    image_id: Option<u64>,
    category_id: Option<u64>,
    bbox: Option<Vec<f64>>,
    score: Option<f64>,
}

#[derive(Serialize)]
struct FileOut<'a> {
    images: Vec<ImageOut<'a>>,
    annotations: Vec<RecordOut>,
}

#[derive(Serialize)]
struct ImageOut<'a> {
    id: u64,
    width: usize,
    height: usize,
    file_name: &'a str,
}

#[derive(Serialize)]
struct RecordOut {
    image_id: u64,
    category_id: u64,
    bbox: [Box<RawValue>; 4],
    #[serde(skip_serializing_if = "Option::is_none")]
    score: Option<Box<RawValue>>,
}

fn fixed6(v: f64) -> Box<RawValue> {
    // -0.000000 is still valid JSON but reads badly in diffs
    let v = if v == 0.0 { 0.0 } else { v };
    RawValue::from_string(format!("{v:.6}")).expect("formatted float is valid JSON")
}

fn missing(record: usize, what: &str, field: &str) -> Error {
    Error::Annotation { record, message: format!("{what} is missing `{field}`") }
}

/// Parses an annotation document. Images keep file order; boxes keep record
/// order within each image.
pub fn parse_annotations(text: &str) -> Result<Vec<AnnotationSet>> {
    let file: FileIn = serde_json::from_str(text)?;

    let mut sets = Vec::with_capacity(file.images.len());
    let mut by_id = BTreeMap::new();
    for (i, img) in file.images.into_iter().enumerate() {
        let id = img.id.ok_or_else(|| missing(i, "image", "id"))?;
        let width = img.width.ok_or_else(|| missing(i, "image", "width"))?;
        let height = img.height.ok_or_else(|| missing(i, "image", "height"))?;
        if width == 0 || height == 0 {
            return Err(Error::Annotation { record: i, message: format!("image {id} has zero size") });
        }
        if by_id.insert(id, sets.len()).is_some() {
            return Err(Error::Annotation { record: i, message: format!("duplicate image id {id}") });
        }
        sets.push(AnnotationSet::new(id, img.file_name.unwrap_or_default(), width, height));
    }

    for (i, rec) in file.annotations.into_iter().enumerate() {
        let image_id = rec.image_id.ok_or_else(|| missing(i, "annotation", "image_id"))?;
        let class_id = rec.category_id.ok_or_else(|| missing(i, "annotation", "category_id"))?;
        let bbox = rec.bbox.ok_or_else(|| missing(i, "annotation", "bbox"))?;
        let err = |message: String| Error::Annotation { record: i, message };
        let &slot = by_id.get(&image_id).ok_or_else(|| err(format!("unknown image_id {image_id}")))?;
        let [x, y, w, h] = bbox[..]
            .try_into()
            .map_err(|_| err(format!("bbox has {} values, expected 4", bbox.len())))?;
        if w < 1.0 || h < 1.0 {
            return Err(err(format!("bbox {w}x{h} is smaller than one pixel")));
        }
        let mut b = BoundingBox::from_top_left(x, y, w, h, class_id);
        b.score = rec.score;
        let set: &mut AnnotationSet = &mut sets[slot];
        if !b.within(set.width, set.height) {
            return Err(err(format!(
                "bbox [{x}, {y}, {w}, {h}] leaves the {}x{} image",
                set.width, set.height
            )));
        }
        set.boxes.push(b);
    }
    Ok(sets)
}

pub fn render_annotations(sets: &[AnnotationSet]) -> String {
    let file = FileOut {
        images: sets
            .iter()
            .map(|s| ImageOut { id: s.image_id, width: s.width, height: s.height, file_name: &s.file_name })
            .collect(),
        annotations: sets
            .iter()
            .flat_map(|s| {
                s.boxes.iter().map(move |b| RecordOut {
                    image_id: s.image_id,
                    category_id: b.class_id,
                    bbox: b.to_top_left().map(fixed6),
                    score: b.score.map(fixed6),
                })
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("annotation file serializes");
    text.push('\n');
    text
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<AnnotationSet>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(&text)
}

pub fn save_annotations(sets: &[AnnotationSet], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_annotations(sets)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drops::validate_drop_set;
    use proptest::prelude::*;

    fn centered(cy: f64, h: f64) -> BoundingBox {
        BoundingBox { center_x: 30.0, center_y: cy, height: h, width: 12.0, class_id: 1, score: None }
    }

    fn kept(s: Shifted) -> BoundingBox {
        match s {
            Shifted::Kept(b) => b,
            Shifted::Removed => panic!("box removed"),
        }
    }

    #[test]
    fn box_below_both_drops() {
        let d = validate_drop_set(&[10, 20], 100).unwrap();
        let b = kept(shift_box(&centered(50.0, 21.0), &d, &ShiftOptions::default()));
        assert_eq!((b.center_x, b.center_y, b.height, b.width), (30.0, 48.0, 21.0, 12.0));
    }

    #[test]
    fn box_straddling_both_drops() {
        let d = validate_drop_set(&[10, 20], 100).unwrap();
        let b = kept(shift_box(&centered(15.0, 15.0), &d, &ShiftOptions::default()));
        assert_eq!((b.center_y, b.height), (14.0, 13.0));

        let opts = ShiftOptions { count_mode: CountMode::AboveTop, ..Default::default() };
        let b = kept(shift_box(&centered(15.0, 15.0), &d, &opts));
        assert_eq!((b.center_y, b.height), (15.0, 13.0));
    }

    #[test]
    fn box_above_drops_unchanged() {
        let d = validate_drop_set(&[40, 60], 100).unwrap();
        let b = centered(10.0, 9.0);
        assert_eq!(kept(shift_box(&b, &d, &ShiftOptions::default())), b);
    }

    #[test]
    fn thin_box_removed() {
        let d = validate_drop_set(&[5, 10, 12], 100).unwrap();
        assert_eq!(shift_box(&centered(11.0, 3.0), &d, &ShiftOptions::default()), Shifted::Removed);
        let lax = ShiftOptions { min_height: 1.0, ..Default::default() };
        assert!(matches!(shift_box(&centered(11.0, 3.0), &d, &lax), Shifted::Kept(_)));
    }

    #[test]
    fn set_shift_counts_and_translation() {
        let d = validate_drop_set(&[3, 7, 12], 64).unwrap();
        let mut set = AnnotationSet::new(1, "a", 64, 64);
        set.boxes = vec![centered(30.0, 10.0), centered(40.5, 5.0), centered(7.0, 2.0)];
        let r = shift_annotation_set(&set, &d, &ShiftOptions::default());
        assert_eq!(r.removed, 1);
        assert_eq!(r.set.boxes.len(), 2);
        assert_eq!(r.set.boxes[0].center_y, 27.0);
        assert_eq!(r.set.boxes[1].center_y, 37.5);
        assert_eq!(r.set.boxes[1].height, 5.0);

        let same = shift_annotation_set(&set, &DropSet::empty(64), &ShiftOptions::default());
        assert_eq!(same.set, set);
    }

    #[test]
    fn shifted_past_top_is_clipped() {
        let d = validate_drop_set(&[1, 4], 64).unwrap();
        let mut set = AnnotationSet::new(1, "a", 64, 64);
        set.boxes = vec![BoundingBox::from_top_left(0.0, 0.0, 8.0, 12.0, 0)];
        let r = shift_annotation_set(&set, &d, &ShiftOptions::default());
        assert_eq!(r.clipped, 1);
        let [_, y, _, h] = r.set.boxes[0].to_top_left();
        assert_eq!((y, h), (0.0, 9.0));
    }

    const DOC: &str = r#"{
      "images": [{"id": 7, "width": 64, "height": 48, "file_name": "a.ppm"},
                 {"id": 9, "width": 64, "height": 48, "file_name": "b.ppm"}],
      "annotations": [
        {"image_id": 7, "category_id": 1, "bbox": [1.5, 2, 10, 20]},
        {"image_id": 9, "category_id": 2, "bbox": [0, 0, 64, 48], "score": 0.25}
      ]
    }"#;

    #[test]
    fn parse_and_render() {
        let sets = parse_annotations(DOC).unwrap();
        assert_eq!(sets.len(), 2);
        assert_eq!(sets[0].boxes[0].center_x, 6.5);
        assert_eq!(sets[0].boxes[0].center_y, 12.0);
        assert_eq!(sets[1].boxes[0].score, Some(0.25));
        let text = render_annotations(&sets);
        assert!(text.contains("1.500000"));
        assert!(text.contains("\"score\": 0.250000"));
        assert!(!text.contains("\"score\": null"));
        assert_eq!(parse_annotations(&text).unwrap(), sets);
    }

    #[test]
    fn diagnostics_name_the_record() {
        let bad = DOC.replace("[0, 0, 64, 48]", "[0, 0, 65, 48]");
        let e = parse_annotations(&bad).unwrap_err();
        assert!(matches!(e, Error::Annotation { record: 1, .. }), "{e}");

        let bad = DOC.replace("\"bbox\": [1.5, 2, 10, 20]", "\"box\": [1.5, 2, 10, 20]");
        let e = parse_annotations(&bad).unwrap_err();
        assert!(e.to_string().contains("record 0") && e.to_string().contains("bbox"), "{e}");

        let bad = DOC.replace("\"image_id\": 9", "\"image_id\": 8");
        assert!(parse_annotations(&bad).unwrap_err().to_string().contains("unknown image_id 8"));

        let e = parse_annotations("{\"images\": [}").unwrap_err();
        assert!(e.to_string().contains("line 1"), "{e}");
    }

    proptest! {
        #[test]
        fn half_pixel_round_trip(
            x2 in 0u32..100, y2 in 0u32..100, w2 in 2u32..100, h2 in 2u32..100,
            class in 0u64..5, score in proptest::option::of(0u32..1000),
        ) {
            let (x, y, w, h) = (x2 as f64 / 2.0, y2 as f64 / 2.0, w2 as f64 / 2.0, h2 as f64 / 2.0);
            let mut b = BoundingBox::from_top_left(x, y, w, h, class);
            prop_assert_eq!(b.to_top_left(), [x, y, w, h]);
            b.score = score.map(|s| s as f64 / 1000.0);
            let mut set = AnnotationSet::new(3, "t", 128, 128);
            set.boxes.push(b);
            let back = parse_annotations(&render_annotations(&[set.clone()])).unwrap();
            prop_assert_eq!(back, vec![set]);
        }
    }
}
