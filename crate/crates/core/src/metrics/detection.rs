//! IoU, average precision and mAP over annotation sets.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::annotations::{AnnotationSet, BoundingBox, DetectionSet};
use crate::error::{Error, Result};

pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (ax0, ay0, ax1, ay1) = a.corners();
    let (bx0, by0, bx1, by1) = b.corners();
    let iw = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
    let ih = (ay1.min(by1) - ay0.max(by0)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    /// Every recall step, precision replaced by its running max from the right.
    #[default]
    AllPoint,
    /// Mean interpolated precision at recall 0, 0.01, ..., 1.
    Point101,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PrCurve {
    /// `(recall, precision)` after each detection, by descending score.
    pub points: Vec<(f64, f64)>,
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
}

impl PrCurve {
    /// Area under the curve.
    pub fn average_precision(&self, interp: Interpolation) -> f64 {
        match interp {
            Interpolation::AllPoint => {
                let mut envelope: Vec<f64> = self.points.iter().map(|p| p.1).collect();
                for i in (0..envelope.len().saturating_sub(1)).rev() {
                    envelope[i] = envelope[i].max(envelope[i + 1]);
                }
                let mut prev = 0.0;
                let mut ap = 0.0;
                for (&(r, _), p) in self.points.iter().zip(envelope) {
                    ap += (r - prev) * p;
                    prev = r;
                }
                ap
            }
            Interpolation::Point101 => {
                let total: f64 = (0..=100)
                    .map(|i| {
                        let r = i as f64 / 100.0;
                        self.points
                            .iter()
                            .filter(|p| p.0 >= r)
                            .map(|p| p.1)
                            .fold(0.0, f64::max)
                    })
                    .sum();
                total / 101.0
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ApResult {
    pub per_class: BTreeMap<u64, f64>,
    pub curves: BTreeMap<u64, PrCurve>,
    /// Mean over classes with ground truth.
    pub mean: f64,
}

struct Candidate<'a> {
    image: u64,
    det: &'a BoundingBox,
}

/// PR curve of one class. Detections are taken by descending score (input
/// order on ties); each claims the unmatched truth box of the same image with
/// the highest IoU at or above the threshold, lowest index on ties.
fn class_curve(
    dets: &[Candidate<'_>],
    truth: &HashMap<u64, Vec<&BoundingBox>>,
    n_truth: usize,
    threshold: f64,
) -> PrCurve {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        let (sa, sb) = (dets[a].det.score.unwrap_or(0.0), dets[b].det.score.unwrap_or(0.0));
        sb.total_cmp(&sa)
    });

    let mut used: HashMap<u64, Vec<bool>> =
        truth.iter().map(|(&k, v)| (k, vec![false; v.len()])).collect();
    let mut curve = PrCurve::default();
    for i in order {
        let c = &dets[i];
        let mut best: Option<(usize, f64)> = None;
        if let Some(boxes) = truth.get(&c.image) {
            let taken = &used[&c.image];
            for (j, t) in boxes.iter().enumerate() {
                if taken[j] {
                    continue;
                }
                let v = iou(c.det, t);
                if v >= threshold && best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((j, v));
                }
            }
        }
        match best {
            Some((j, _)) => {
                used.get_mut(&c.image).unwrap()[j] = true;
                curve.true_positive += 1;
            }
            None => curve.false_positive += 1,
        }
        let tp = curve.true_positive as f64;
        curve.points.push((tp / n_truth as f64, tp / (curve.true_positive + curve.false_positive) as f64));
    }
    curve.false_negative = n_truth - curve.true_positive;
    curve
}

/// Per-class AP at one IoU threshold. Detections on images or classes absent
/// from `truth` count as false positives of their class; classes without any
/// truth box are left out of the mean.
pub fn average_precision_with(
    detections: &[DetectionSet],
    truth: &[AnnotationSet],
    iou_threshold: f64,
    interp: Interpolation,
) -> Result<ApResult> {
    let mut truth_by_class: BTreeMap<u64, HashMap<u64, Vec<&BoundingBox>>> = BTreeMap::new();
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    for set in truth {
        for b in &set.boxes {
            truth_by_class.entry(b.class_id).or_default().entry(set.image_id).or_default().push(b);
            *counts.entry(b.class_id).or_default() += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::Undefined);
    }

    let mut dets_by_class: BTreeMap<u64, Vec<Candidate<'_>>> = BTreeMap::new();
    for set in detections {
        for det in &set.boxes {
            dets_by_class.entry(det.class_id).or_default().push(Candidate { image: set.image_id, det });
        }
    }

    let mut result = ApResult { per_class: BTreeMap::new(), curves: BTreeMap::new(), mean: 0.0 };
    for (class, boxes) in &truth_by_class {
        let dets = dets_by_class.get(class).map(Vec::as_slice).unwrap_or(&[]);
        let curve = class_curve(dets, boxes, counts[class], iou_threshold);
        result.per_class.insert(*class, curve.average_precision(interp));
        result.curves.insert(*class, curve);
    }
    result.mean = result.per_class.values().sum::<f64>() / result.per_class.len() as f64;
    Ok(result)
}

pub fn average_precision(
    detections: &[DetectionSet],
    truth: &[AnnotationSet],
    iou_threshold: f64,
) -> Result<ApResult> {
    average_precision_with(detections, truth, iou_threshold, Interpolation::AllPoint)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MapVariant {
    #[serde(rename = "mAP50")]
    Map50,
    #[serde(rename = "mAP75")]
    Map75,
    #[serde(rename = "mAP50:95")]
    Map50To95,
}

impl MapVariant {
    pub const ALL: [MapVariant; 3] = [MapVariant::Map50, MapVariant::Map75, MapVariant::Map50To95];

    pub fn thresholds(self) -> Vec<f64> {
        match self {
            MapVariant::Map50 => vec![0.5],
            MapVariant::Map75 => vec![0.75],
            MapVariant::Map50To95 => (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MapVariant::Map50 => "mAP50",
            MapVariant::Map75 => "mAP75",
            MapVariant::Map50To95 => "mAP50:95",
        }
    }
}

impl fmt::Display for MapVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MapVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MapVariant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidParam(format!("unknown mAP variant `{s}`")))
    }
}

pub fn mean_ap_with(
    detections: &[DetectionSet],
    truth: &[AnnotationSet],
    variant: MapVariant,
    interp: Interpolation,
) -> Result<f64> {
    let thresholds = variant.thresholds();
    let mut total = 0.0;
    for &t in &thresholds {
        total += average_precision_with(detections, truth, t, interp)?.mean;
    }
    Ok(total / thresholds.len() as f64)
}

pub fn mean_ap(detections: &[DetectionSet], truth: &[AnnotationSet], variant: MapVariant) -> Result<f64> {
    mean_ap_with(detections, truth, variant, Interpolation::AllPoint)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tl(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::from_top_left(x, y, w, h, 0)
    }

    fn image(boxes: Vec<BoundingBox>) -> Vec<AnnotationSet> {
        let mut s = AnnotationSet::new(1, "x", 100, 100);
        s.boxes = boxes;
        vec![s]
    }

    #[test]
    fn iou_geometry() {
        let a = tl(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &tl(20.0, 0.0, 10.0, 10.0)), 0.0);
        assert!((iou(&a, &tl(5.0, 0.0, 10.0, 10.0)) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(iou(&tl(0.0, 0.0, 0.0, 0.0), &tl(0.0, 0.0, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn perfect_and_empty() {
        let truth = image(vec![tl(0.0, 0.0, 10.0, 10.0), tl(30.0, 30.0, 5.0, 8.0)]);
        let dets = image(vec![tl(0.0, 0.0, 10.0, 10.0).with_score(0.1), tl(30.0, 30.0, 5.0, 8.0).with_score(0.9)]);
        for v in MapVariant::ALL {
            assert_eq!(mean_ap(&dets, &truth, v).unwrap(), 1.0);
        }
        assert_eq!(average_precision(&image(vec![]), &truth, 0.5).unwrap().mean, 0.0);
        assert!(matches!(average_precision(&dets, &image(vec![]), 0.5), Err(Error::Undefined)));
    }

    #[test]
    fn one_hit_one_miss() {
        let truth = image(vec![tl(0.0, 0.0, 10.0, 10.0), tl(50.0, 50.0, 10.0, 10.0)]);
        let dets = image(vec![
            tl(0.0, 0.0, 10.0, 10.0).with_score(0.9),
            tl(80.0, 0.0, 10.0, 10.0).with_score(0.5),
        ]);
        let r = average_precision(&dets, &truth, 0.5).unwrap();
        assert_eq!(r.curves[&0].points, vec![(0.5, 1.0), (0.5, 0.5)]);
        assert_eq!(r.mean, 0.5);
        assert_eq!(r.curves[&0].false_negative, 1);
    }

    #[test]
    fn iou_point_six_passes_fifty_fails_seventy_five() {
        // width 10 vs 6 nested: IoU = 60 / 100
        let truth = image(vec![tl(0.0, 0.0, 10.0, 10.0)]);
        let dets = image(vec![tl(0.0, 0.0, 6.0, 10.0).with_score(1.0)]);
        assert!((iou(&truth[0].boxes[0], &dets[0].boxes[0]) - 0.6).abs() < 1e-15);
        assert_eq!(mean_ap(&dets, &truth, MapVariant::Map50).unwrap(), 1.0);
        assert_eq!(mean_ap(&dets, &truth, MapVariant::Map75).unwrap(), 0.0);
        let m = mean_ap(&dets, &truth, MapVariant::Map50To95).unwrap();
        assert!((m - 0.3).abs() < 1e-12, "{m}");
    }

    #[test]
    fn classes_and_images_are_separate() {
        let mut truth = image(vec![tl(0.0, 0.0, 10.0, 10.0)]);
        truth.push(AnnotationSet { image_id: 2, ..truth[0].clone() });
        let mut other_class = tl(0.0, 0.0, 10.0, 10.0).with_score(0.9);
        other_class.class_id = 4;
        let mut dets = image(vec![other_class]);
        dets.push(AnnotationSet { image_id: 2, ..truth[0].clone() });
        dets[1].boxes[0].score = Some(0.5);
        let r = average_precision(&dets, &truth, 0.5).unwrap();
        assert_eq!(r.per_class.keys().copied().collect::<Vec<_>>(), vec![0]);
        assert_eq!(r.mean, 0.5);
    }

    #[test]
    fn point101_on_simple_curve() {
        let curve = PrCurve { points: vec![(0.5, 1.0), (0.5, 0.5)], ..Default::default() };
        let ap = curve.average_precision(Interpolation::Point101);
        assert!((ap - 51.0 / 101.0).abs() < 1e-15);
    }

    #[test]
    fn variant_names() {
        for v in MapVariant::ALL {
            assert_eq!(v.name().parse::<MapVariant>().unwrap(), v);
            assert_eq!(serde_json::to_string(&v).unwrap(), format!("\"{}\"", v.name()));
        }
        assert_eq!(MapVariant::Map50To95.thresholds()[9], 0.95);
    }
}
