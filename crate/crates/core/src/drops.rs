//! Drop sets and the strip geometry they induce.
//!
//! Row indices are 0-based throughout. Dropping row `x_i` shifts every later
//! row up by one; wherever the accumulated shift is odd, the CFA phase is
//! flipped and the reconstruction shows a color strip. With `D` sorted
//! ascending the strip boundaries in the attacked image are
//!
//! ```text
//!   x'_0 = x_0
//!   x'_i = x_i - 2 * floor((i + 1) / 2)      (i >= 1)
//! ```
//!
//! and strips are the inclusive intervals `[x'_0, x'_1]`, `[x'_2, x'_3]`, ...
//! An odd-sized set leaves a final strip running to the bottom of the image.

use std::fmt;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Validated, ascending, non-adjacent dropped-row indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DropSet {
    indices: Vec<usize>,
    image_height: usize,
}

impl DropSet {
    pub fn empty(image_height: usize) -> Self {
        DropSet { indices: Vec::new(), image_height }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn image_height(&self) -> usize {
        self.image_height
    }

    /// Parses the one-line text form, e.g. `10,20,30,40`.
    pub fn parse(text: &str, image_height: usize) -> Result<Self> {
        validate_drop_set(&parse_indices(text)?, image_height)
    }

    /// Strip boundaries in attacked-image coordinates.
    pub fn strip_positions(&self) -> Vec<usize> {
        strip_positions(self)
    }

    pub fn layout(&self) -> StripLayout {
        strips_from_positions(&self.strip_positions(), self.image_height)
    }
}

impl fmt::Display for DropSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, x) in self.indices.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{x}")?;
        }
        Ok(())
    }
}

/// Splits a comma separated index list; blank input is the empty list.
pub fn parse_indices(text: &str) -> Result<Vec<usize>> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|e| Error::InvalidParam(format!("bad row index `{}`: {e}", tok.trim())))
        })
        .collect()
}

impl DropSet {
    /// Checks ordering, adjacency and range only. Pairs exactly two rows apart
    /// are accepted here; they produce one-row strips that
    /// [`validate_drop_set`] rejects.
    pub fn new(indices: &[usize], image_height: usize) -> Result<Self> {
        check_rows(indices, image_height)?;
        Ok(DropSet { indices: indices.to_vec(), image_height })
    }
}

fn check_rows(indices: &[usize], image_height: usize) -> Result<()> {
    for (i, &x) in indices.iter().enumerate() {
        if i > 0 {
            let prev = indices[i - 1];
            if x <= prev {
                return Err(Error::NotAscending { index: i, value: x });
            }
            if x == prev + 1 {
                return Err(Error::AdjacentRows { index: i, value: x });
            }
        }
        if x >= image_height {
            return Err(Error::OutOfRange { index: i, value: x, height: image_height });
        }
    }
    Ok(())
}

/// Full validation: [`DropSet::new`] plus strictly ascending strip positions.
pub fn validate_drop_set(indices: &[usize], image_height: usize) -> Result<DropSet> {
    check_rows(indices, image_height)?;
    // A pair two rows apart maps both boundaries onto the same row.
    for i in (0..indices.len().saturating_sub(1)).step_by(2) {
        if indices[i + 1] == indices[i] + 2 {
            return Err(Error::DegenerateStrip {
                index: i,
                next: i + 1,
                position: indices[i] - i,
            });
        }
    }
    Ok(DropSet { indices: indices.to_vec(), image_height })
}

#[inline]
fn boundary_offset(i: usize) -> usize {
    2 * ((i + 1) / 2)
}

pub fn strip_positions(drops: &DropSet) -> Vec<usize> {
    drops
        .indices
        .iter()
        .enumerate()
        .map(|(i, &x)| x - boundary_offset(i))
        .collect()
}

/// Inverse of [`strip_positions`].
pub fn dropped_rows_from_positions(positions: &[usize], image_height: usize) -> Result<DropSet> {
    let rows: Vec<usize> =
        positions.iter().enumerate().map(|(i, &p)| p + boundary_offset(i)).collect();
    validate_drop_set(&rows, image_height)
}

/// One color strip, inclusive row range in the attacked image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strip {
    pub start: usize,
    pub end: usize,
}

impl Strip {
    pub fn height(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn contains(&self, row: usize) -> bool {
        (self.start..=self.end).contains(&row)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StripLayout {
    pub strips: Vec<Strip>,
    pub image_height: usize,
}

#[derive(Serialize)]
struct StripRecord {
    start: usize,
    end: usize,
    height: usize,
}

impl StripLayout {
    pub fn len(&self) -> usize {
        self.strips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strips.is_empty()
    }

    pub fn contains(&self, row: usize) -> bool {
        self.strips.iter().any(|s| s.contains(row))
    }

    /// `[{"start":..,"end":..,"height":..}, ...]`
    pub fn to_json(&self) -> serde_json::Value {
        let recs: Vec<StripRecord> = self
            .strips
            .iter()
            .map(|s| StripRecord { start: s.start, end: s.end, height: s.height() })
            .collect();
        serde_json::to_value(recs).expect("strip records serialize")
    }
}

pub fn strips_from_positions(positions: &[usize], image_height: usize) -> StripLayout {
    let strips = positions
        .chunks(2)
        .map(|pair| match *pair {
            [start, end] => Strip { start, end },
            [start] => Strip { start, end: image_height - 1 },
            _ => unreachable!(),
        })
        .collect();
    StripLayout { strips, image_height }
}

pub fn strip_count(m: usize) -> usize {
    m.div_ceil(2)
}

/// Seeded generator of random drop sets.
///
/// Each call draws `2 * n_strips` rows uniformly among all placements that
/// respect the gap constraints: consecutive drops at least `max(2, min_gap)`
/// apart, and the two drops bounding a strip at least `max(3, min_gap)`
/// apart so no strip is degenerate.
#[derive(Debug, Clone)]
pub struct DropSampler {
    rng: ChaCha8Rng,
}

impl DropSampler {
    pub fn new(seed: u64) -> Self {
        DropSampler { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn sample(&mut self, n_strips: usize, image_height: usize, min_gap: usize) -> Result<DropSet> {
        if n_strips == 0 {
            return Ok(DropSet::empty(image_height));
        }
        let m = 2 * n_strips;
        let gaps: Vec<usize> = (0..m - 1)
            .map(|j| if j % 2 == 0 { min_gap.max(3) } else { min_gap.max(2) })
            .collect();
        let span = 1 + gaps.iter().sum::<usize>();
        if span > image_height {
            return Err(Error::Infeasible { n_strips, height: image_height, min_gap });
        }
        let slack = image_height - span;
        // Non-decreasing offsets in [0, slack] <-> distinct picks in [0, slack + m).
        let mut picks = index::sample(&mut self.rng, slack + m, m).into_vec();
        picks.sort_unstable();
        let mut rows = Vec::with_capacity(m);
        let mut base = 0;
        for (j, z) in picks.into_iter().enumerate() {
            if j > 0 {
                base += gaps[j - 1];
            }
            rows.push(z - j + base);
        }
        validate_drop_set(&rows, image_height)
    }
}

pub fn sample_drop_set(
    n_strips: usize,
    image_height: usize,
    seed: u64,
    min_gap: usize,
) -> Result<DropSet> {
    DropSampler::new(seed).sample(n_strips, image_height, min_gap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(v: &[usize], h: usize) -> DropSet {
        validate_drop_set(v, h).unwrap()
    }

    #[test]
    fn validation_errors_name_the_offender() {
        assert!(validate_drop_set(&[10, 20], 100).is_ok());
        assert!(matches!(
            validate_drop_set(&[10, 11], 100),
            Err(Error::AdjacentRows { index: 1, value: 11 })
        ));
        assert!(matches!(
            validate_drop_set(&[10, 200], 100),
            Err(Error::OutOfRange { index: 1, value: 200, .. })
        ));
        assert!(matches!(
            validate_drop_set(&[20, 10], 100),
            Err(Error::NotAscending { index: 1, value: 10 })
        ));
        assert!(matches!(
            validate_drop_set(&[0, 2], 100),
            Err(Error::DegenerateStrip { index: 0, next: 1, position: 0 })
        ));
        // Gap of two between strips (odd -> even index) is fine.
        assert!(validate_drop_set(&[0, 3, 5, 9], 100).is_ok());
        // The structural constructor keeps the one-row strip.
        let loose = DropSet::new(&[0, 2], 100).unwrap();
        assert_eq!(loose.strip_positions(), vec![0, 0]);
        assert_eq!(loose.layout().strips, vec![Strip { start: 0, end: 0 }]);
        assert!(DropSet::new(&[3, 4], 100).is_err());
    }

    #[test]
    fn positions_follow_boundary_formula() {
        assert_eq!(strip_positions(&ds(&[10], 100)), vec![10]);
        assert_eq!(strip_positions(&ds(&[10, 20, 30, 40], 100)), vec![10, 18, 28, 36]);
        assert_eq!(strip_positions(&ds(&[5, 11, 15], 100)), vec![5, 9, 13]);
    }

    #[test]
    fn inverse_mapping() {
        assert_eq!(dropped_rows_from_positions(&[10], 100).unwrap().indices(), &[10]);
        assert_eq!(
            dropped_rows_from_positions(&[10, 18, 28, 36], 100).unwrap().indices(),
            &[10, 20, 30, 40]
        );
        assert_eq!(dropped_rows_from_positions(&[5, 9, 13], 100).unwrap().indices(), &[5, 11, 15]);
        assert!(dropped_rows_from_positions(&[0, 0], 100).is_err());
    }

    #[test]
    fn layout_pairs_positions() {
        let l = strips_from_positions(&[10, 18, 28, 36], 100);
        assert_eq!(l.strips, vec![Strip { start: 10, end: 18 }, Strip { start: 28, end: 36 }]);
        assert_eq!(l.strips[0].height(), 9);
        let l = strips_from_positions(&[50], 100);
        assert_eq!(l.strips, vec![Strip { start: 50, end: 99 }]);
        assert!(strips_from_positions(&[], 100).is_empty());
        let json = strips_from_positions(&[10, 18], 100).to_json();
        assert_eq!(json, serde_json::json!([{"start": 10, "end": 18, "height": 9}]));
    }

    #[test]
    fn strip_count_is_ceiling_half() {
        assert_eq!(strip_count(3), 2);
        assert_eq!(strip_count(0), 0);
        let fifteen: Vec<usize> = (0..40).filter(|&m| strip_count(m) == 15).collect();
        assert_eq!(fifteen, vec![29, 30]);
    }

    #[test]
    fn text_form_round_trips() {
        let d = DropSet::parse(" 10, 20,30 ,40\n", 100).unwrap();
        assert_eq!(d.to_string(), "10,20,30,40");
        assert!(DropSet::parse("", 100).unwrap().is_empty());
        assert!(DropSet::parse("1,x", 100).is_err());
    }

    #[test]
    fn sampler_on_four_rows() {
        // Valid 2-subsets of {0..3} are [0,2], [0,3], [1,3]; the degenerate-strip
        // rule removes [0,2] and [1,3].
        for seed in 0..50 {
            let d = sample_drop_set(1, 4, seed, 2).unwrap();
            assert!([vec![0, 2], vec![0, 3], vec![1, 3]].contains(&d.indices().to_vec()));
            assert_eq!(d.indices(), &[0, 3]);
        }
    }

    #[test]
    fn sampler_edge_cases() {
        assert!(sample_drop_set(0, 10, 1, 2).unwrap().is_empty());
        assert!(matches!(sample_drop_set(20, 50, 1, 2), Err(Error::Infeasible { .. })));
        let a = sample_drop_set(7, 480, 99, 2).unwrap();
        let b = sample_drop_set(7, 480, 99, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 14);
        assert_eq!(a.layout().len(), 7);
    }

    #[test]
    fn sampler_respects_min_gap() {
        let mut s = DropSampler::new(5);
        for _ in 0..200 {
            let d = s.sample(5, 200, 6).unwrap();
            assert!(d.indices().windows(2).all(|w| w[1] - w[0] >= 6));
        }
    }

    #[test]
    fn sampler_reaches_every_placement() {
        // n=1, H=7: pairs (a, b) with b - a >= 3 -> 10 placements.
        let mut seen = std::collections::BTreeSet::new();
        let mut s = DropSampler::new(0);
        for _ in 0..2000 {
            seen.insert(s.sample(1, 7, 2).unwrap().indices().to_vec());
        }
        assert_eq!(seen.len(), 10);
    }
}
