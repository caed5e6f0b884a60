use proptest::prelude::*;

use emistrip::annotations::{shift_annotation_set, shift_box, ShiftOptions, Shifted};
use emistrip::metrics::{average_precision, ssim, welch_t_test, SsimParams};
use emistrip::metrics::MetricRow;
use emistrip::report::EvalReport;
use emistrip::{
    apply_attack, dropped_rows_from_positions, strip_positions, AnnotationSet, BoundingBox, CfaPattern,
    DropSampler, Padding, RawImage,
};

fn labelled(h: usize) -> RawImage {
    RawImage::from_fn(2, h, CfaPattern::Grbg, 65535, |r, c| (r * 2 + c) as u16).unwrap()
}

proptest! {
    #[test]
    fn positions_invert_on_tall_images(seed in any::<u64>(), n in 0usize..30, half in 64usize..600) {
        let h = 2 * half;
        if let Ok(d) = DropSampler::new(seed).sample(n, h, 2) {
            let back = dropped_rows_from_positions(&strip_positions(&d), h).unwrap();
            prop_assert_eq!(back, d);
        }
    }

    #[test]
    fn attack_is_delete_then_wrap(seed in any::<u64>(), n in 0usize..8, half in 30usize..80) {
        let h = 2 * half;
        let img = labelled(h);
        let d = DropSampler::new(seed).sample(n, h, 2).unwrap();
        let out = apply_attack(&img, &d, Padding::WrapTop).unwrap();
        let mut want: Vec<usize> = (0..h).filter(|r| !d.indices().contains(r)).collect();
        want.extend(0..d.len());
        let got: Vec<usize> = (0..h).map(|r| out.get(r, 0) as usize / 2).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn welch_swap_symmetry(a in prop::collection::vec(-1e3f64..1e3, 2..12), b in prop::collection::vec(-1e3f64..1e3, 2..12)) {
        if let (Ok(x), Ok(y)) = (welch_t_test(&a, &b), welch_t_test(&b, &a)) {
            prop_assert_eq!(x.t_statistic, -y.t_statistic);
            prop_assert_eq!(x.p_value, y.p_value);
            prop_assert!((0.0..=1.0).contains(&x.p_value));
        }
    }

    #[test]
    fn ssim_bounded_and_symmetric(seed in any::<u64>(), w in 8usize..14, h in 8usize..14) {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 52) as u16
        };
        let x: Vec<u16> = (0..w * h).map(|_| next()).collect();
        let y: Vec<u16> = (0..w * h).map(|_| next()).collect();
        let p = SsimParams::new(4095.0);
        let a = ssim(&x, &y, w, h, &p).unwrap();
        prop_assert!((-1.0..=1.0).contains(&a));
        prop_assert_eq!(a, ssim(&y, &x, w, h, &p).unwrap());
    }

    #[test]
    fn shift_conserves_boxes(seed in any::<u64>(), n in 0usize..6, ys in prop::collection::vec((0u32..180, 2u32..40), 0..12)) {
        let d = DropSampler::new(seed).sample(n, 192, 2).unwrap();
        let mut set = AnnotationSet::new(0, "x", 64, 192);
        for (y, hh) in ys {
            let hh = hh.min(192 - y).max(2);
            set.boxes.push(BoundingBox::from_top_left(3.0, y as f64, 10.0, hh as f64, 0));
        }
        let r = shift_annotation_set(&set, &d, &ShiftOptions::default());
        prop_assert_eq!(r.set.boxes.len(), set.boxes.len() - r.removed);
        let first = d.indices().first().copied().unwrap_or(usize::MAX) as f64;
        for b in set.boxes.iter().filter(|b| b.center_y + (b.height - 1.0) / 2.0 < first) {
            // boxes entirely above the first drop are untouched
            prop_assert_eq!(shift_box(b, &d, &ShiftOptions::default()), Shifted::Kept(*b));
        }
    }

    #[test]
    fn aggregates_recompute(vals in prop::collection::vec((0f64..1.0, 0usize..3), 1..40)) {
        let rows: Vec<MetricRow> = vals
            .iter()
            .enumerate()
            .map(|(i, &(v, c))| MetricRow::new(i.to_string(), "m", format!("c{c}"), v))
            .collect();
        let report = EvalReport::from_rows(rows.clone());
        for a in &report.aggregates {
            let xs: Vec<f64> = rows.iter().filter(|r| r.variant == a.variant).map(|r| r.value).collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            prop_assert!((a.mean - mean).abs() <= 1e-12);
            prop_assert_eq!(a.count, xs.len());
        }
    }
}

fn tl(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
    BoundingBox::from_top_left(x, y, w, h, 0)
}

fn ap(dets: &[BoundingBox], truth: &[BoundingBox]) -> f64 {
    let mut d = AnnotationSet::new(0, "x", 40, 40);
    d.boxes = dets.to_vec();
    let mut t = AnnotationSet::new(0, "x", 40, 40);
    t.boxes = truth.to_vec();
    average_precision(&[d], &[t], 0.5).unwrap().mean
}

#[test]
fn ap_monotone_under_added_detections() {
    // small instances on a coarse grid: adding an exact copy of an unmatched
    // truth box never lowers AP; adding a lowest-score miss never raises it
    let grid = [0.0, 6.0, 12.0];
    let mut checked = 0;
    for seed in 0..3000u64 {
        let mut s = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
        let mut pick = |k: usize| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s % k as u64) as usize
        };
        let nt = 1 + pick(3);
        let nd = pick(4);
        let truth: Vec<_> = (0..nt).map(|i| tl(grid[i], grid[pick(3)], 5.0, 5.0)).collect();
        let dets: Vec<_> = (0..nd)
            .map(|_| tl(grid[pick(3)], grid[pick(3)], 5.0, 5.0).with_score(0.2 + 0.2 * pick(4) as f64))
            .collect();
        let base = ap(&dets, &truth);

        let mut miss = dets.clone();
        miss.push(tl(30.0, 30.0, 5.0, 5.0).with_score(0.1));
        assert!(ap(&miss, &truth) <= base + 1e-12);

        for t in &truth {
            let covered = dets.iter().any(|d| emistrip::iou(d, t) >= 0.5);
            if !covered {
                for score in [0.05, 0.5, 0.95] {
                    let mut more = dets.clone();
                    more.push(t.with_score(score));
                    assert!(ap(&more, &truth) >= base - 1e-12, "{truth:?} {dets:?} + {t:?}@{score}");
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 1000);
}
