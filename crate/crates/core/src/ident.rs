//! Recovering the dropped rows from a clean / attacked raw pair.
//!
//! Rows whose accumulated shift is odd compare samples of different CFA
//! channels and light up in the per-row difference profile; rows with an even
//! shift compare same-channel samples a few rows apart and stay dark. The
//! bright runs give the strip boundaries, which invert to the drop set.

use std::fmt::Write as _;

use crate::cfa::RawImage;
use rayon::prelude::*;

use crate::drops::{dropped_rows_from_positions, validate_drop_set, DropSet};
use crate::error::{Error, Result};

/// Mean absolute sample difference per row, normalized by the max value.
#[derive(Clone, Debug, PartialEq)]
pub struct RowDifferenceProfile {
    pub values: Vec<f64>,
    pub max_value: u16,
}

impl RowDifferenceProfile {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `row_index,value` lines with a header, LF terminated.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row_index,value\n");
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{i},{v}").unwrap();
        }
        out
    }

    /// Centered 3-row moving average, edge rows replicated.
    pub fn smoothed(&self) -> Vec<f64> {
        let v = &self.values;
        let n = v.len();
        (0..n)
            .map(|i| {
                let prev = v[i.saturating_sub(1)];
                let next = v[(i + 1).min(n - 1)];
                (prev + v[i] + next) / 3.0
            })
            .collect()
    }
}

pub fn row_difference_profile(clean: &RawImage, attacked: &RawImage) -> Result<RowDifferenceProfile> {
    if !clean.same_layout(attacked) {
        return Err(Error::Mismatch(format!(
            "clean is {}x{} {} max {}, attacked is {}x{} {} max {}",
            clean.width(),
            clean.height(),
            clean.pattern(),
            clean.max_value(),
            attacked.width(),
            attacked.height(),
            attacked.pattern(),
            attacked.max_value()
        )));
    }
    let norm = clean.width() as f64 * clean.max_value() as f64;
    let values = (0..clean.height())
        .map(|r| row_distance(clean.row(r), attacked.row(r)) as f64 / norm)
        .collect();
    Ok(RowDifferenceProfile { values, max_value: clean.max_value() })
}

fn row_distance(a: &[u16], b: &[u16]) -> u64 {
    a.iter().zip(b).map(|(&x, &y)| x.abs_diff(y) as u64).sum()
}

/// How the profile is binarized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ThresholdPolicy {
    /// Halfway between the smoothed profile's min and max.
    Midpoint { noise_floor: f64 },
    /// Midpoint of the two cluster means of a 1-D two-means split.
    TwoMeans { noise_floor: f64 },
    /// A fixed normalized threshold.
    Fixed(f64),
}

pub const DEFAULT_NOISE_FLOOR: f64 = 0.02;

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy::Midpoint { noise_floor: DEFAULT_NOISE_FLOOR }
    }
}

impl ThresholdPolicy {
    /// Threshold for `smoothed`, or `None` when nothing rises above the floor.
    pub fn threshold(&self, smoothed: &[f64]) -> Option<f64> {
        let (lo, hi) = min_max(smoothed)?;
        match *self {
            ThresholdPolicy::Fixed(t) => Some(t),
            ThresholdPolicy::Midpoint { noise_floor } => (hi > noise_floor).then_some((lo + hi) / 2.0),
            ThresholdPolicy::TwoMeans { noise_floor } => {
                (hi > noise_floor).then(|| two_means_split(smoothed, lo, hi))
            }
        }
    }
}

fn min_max(v: &[f64]) -> Option<(f64, f64)> {
    if v.is_empty() {
        return None;
    }
    Some(v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x))))
}

fn two_means_split(values: &[f64], lo: f64, hi: f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    for _ in 0..100 {
        let t = (a + b) / 2.0;
        let (mut sa, mut na, mut sb, mut nb) = (0.0, 0usize, 0.0, 0usize);
        for &v in values {
            if v <= t {
                sa += v;
                na += 1;
            } else {
                sb += v;
                nb += 1;
            }
        }
        let na_mean = if na > 0 { sa / na as f64 } else { a };
        let nb_mean = if nb > 0 { sb / nb as f64 } else { b };
        if na_mean == a && nb_mean == b {
            break;
        }
        a = na_mean;
        b = nb_mean;
    }
    (a + b) / 2.0
}

/// Inclusive row run above the threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Run {
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeDetection {
    /// Strip boundaries `x'_0, x'_1, ...`. A run reaching the bottom row
    /// contributes only its start, as the last entry.
    pub positions: Vec<usize>,
    pub runs: Vec<Run>,
    pub threshold: Option<f64>,
    /// Whether the last run reaches the bottom row.
    pub reaches_bottom: bool,
    /// Many profile values sit close to the threshold.
    pub low_confidence: bool,
}

impl EdgeDetection {
    fn none() -> Self {
        EdgeDetection {
            positions: Vec::new(),
            runs: Vec::new(),
            threshold: None,
            reaches_bottom: false,
            low_confidence: false,
        }
    }
}

/// Binarizes the profile and reports strip boundaries.
///
/// The threshold comes from the smoothed profile; the unsmoothed profile is
/// then binarized so run edges stay on exact rows, and one-row runs away from
/// the bottom are discarded as noise (real strips are at least two rows tall).
pub fn detect_strip_edges(profile: &RowDifferenceProfile, policy: ThresholdPolicy) -> EdgeDetection {
    let n = profile.len();
    if n == 0 {
        return EdgeDetection::none();
    }
    let smoothed = profile.smoothed();
    let Some(threshold) = policy.threshold(&smoothed) else {
        return EdgeDetection::none();
    };

    let mut runs = Vec::new();
    let mut start = None;
    for (i, &v) in profile.values.iter().enumerate() {
        match (v > threshold, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push(Run { start: s, end: i - 1 });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push(Run { start: s, end: n - 1 });
    }
    runs.retain(|r| r.end > r.start || r.end == n - 1);

    let reaches_bottom = runs.last().is_some_and(|r| r.end == n - 1);
    let mut positions = Vec::with_capacity(runs.len() * 2);
    for (i, r) in runs.iter().enumerate() {
        positions.push(r.start);
        if !(reaches_bottom && i == runs.len() - 1) {
            positions.push(r.end);
        }
    }

    let (lo, hi) = min_max(&profile.values).unwrap();
    let band = 0.1 * (hi - lo);
    let near = profile.values.iter().filter(|&&v| (v - threshold).abs() < band).count();
    let low_confidence = near * 20 > n;

    EdgeDetection { positions, runs, threshold: Some(threshold), reaches_bottom, low_confidence }
}

/// Which route produced an [`Identification`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    /// Thresholded difference profile, boundaries inverted.
    Profile,
    /// Row alignment search (see [`align_drops`]).
    Aligned,
}

/// Drop set recovered from a pair, with the intermediate products.
#[derive(Clone, Debug)]
pub struct Identification {
    pub drops: DropSet,
    pub profile: RowDifferenceProfile,
    pub edges: EdgeDetection,
    pub route: Route,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentifyOptions {
    pub policy: ThresholdPolicy,
    /// Upper bound on drops the alignment search considers; 0 disables it.
    pub max_aligned_drops: usize,
    /// Normalized cost charged per drop by the alignment search.
    pub drop_penalty: f64,
}

impl Default for IdentifyOptions {
    fn default() -> Self {
        IdentifyOptions {
            policy: ThresholdPolicy::default(),
            max_aligned_drops: 128,
            drop_penalty: 1e-3,
        }
    }
}

/// Recovers the drop set that turned `clean` into `attacked`.
pub fn identify_dropped_rows(clean: &RawImage, attacked: &RawImage) -> Result<DropSet> {
    identify(clean, attacked, &IdentifyOptions::default()).map(|id| id.drops)
}

/// Profile route only: threshold the difference profile, read the strip
/// boundaries off the bright runs and invert them.
pub fn identify_with_policy(
    clean: &RawImage,
    attacked: &RawImage,
    policy: ThresholdPolicy,
) -> Result<Identification> {
    let profile = row_difference_profile(clean, attacked)?;
    let edges = detect_strip_edges(&profile, policy);
    let noise_floor = match policy {
        ThresholdPolicy::Midpoint { noise_floor } | ThresholdPolicy::TwoMeans { noise_floor } => noise_floor,
        ThresholdPolicy::Fixed(_) => DEFAULT_NOISE_FLOOR,
    };
    let positions = resolve_bottom_run(clean, attacked, &edges, noise_floor);
    let drops = dropped_rows_from_positions(&positions, clean.height())?;
    Ok(Identification { drops, profile, edges, route: Route::Profile })
}

/// Profile route, refined by the alignment search.
///
/// On natural images the even-shift rows between strips can differ almost as
/// much as the strip rows themselves, so the thresholded profile misreads
/// boundaries. Both candidates are replayed against the pair and the one
/// explaining `attacked` at lower cost wins; ties keep the profile answer.
pub fn identify(clean: &RawImage, attacked: &RawImage, opts: &IdentifyOptions) -> Result<Identification> {
    let profile_id = identify_with_policy(clean, attacked, opts.policy);
    let quiet = profile_id.as_ref().is_ok_and(|id| id.edges.threshold.is_none());
    if opts.max_aligned_drops == 0 || quiet {
        return profile_id;
    }
    let aligned = align_drops(clean, attacked, opts.max_aligned_drops, opts.drop_penalty)?;
    let profile_id = match profile_id {
        Ok(id) => id,
        Err(_) => {
            let profile = row_difference_profile(clean, attacked)?;
            let edges = detect_strip_edges(&profile, opts.policy);
            return Ok(Identification { drops: aligned, profile, edges, route: Route::Aligned });
        }
    };
    if aligned == profile_id.drops {
        return Ok(profile_id);
    }
    let cost_profile = replay_cost(clean, attacked, &profile_id.drops, opts.drop_penalty);
    let cost_aligned = replay_cost(clean, attacked, &aligned, opts.drop_penalty);
    if cost_aligned < cost_profile - 1e-12 {
        Ok(Identification { drops: aligned, route: Route::Aligned, ..profile_id })
    } else {
        Ok(profile_id)
    }
}

fn row_cost(clean: &RawImage, attacked: &RawImage, row: usize, shift: usize) -> f64 {
    let norm = clean.width() as f64 * clean.max_value() as f64;
    row_distance(attacked.row(row), clean.row(row + shift)) as f64 / norm
}

/// Cost of explaining `attacked` as `clean` with `drops` removed: summed
/// row mismatch over the surviving rows plus `drop_penalty` per drop.
pub fn replay_cost(clean: &RawImage, attacked: &RawImage, drops: &DropSet, drop_penalty: f64) -> f64 {
    let h = clean.height();
    let m = drops.len();
    let mut cost = drop_penalty * m as f64;
    let mut shift = 0;
    let mut next = drops.indices().iter().peekable();
    for y in 0..h - m {
        while next.peek().is_some_and(|&&x| x == y + shift) {
            shift += 1;
            next.next();
        }
        cost += row_cost(clean, attacked, y, shift);
    }
    cost
}

/// Minimum-cost drop set by dynamic programming over per-row shifts.
///
/// Row `y` of the attacked image is modelled as clean row `y + k(y)`, where
/// `k` starts at 0 or 1 and grows by at most one per row; each step is one
/// drop. The path stops once it reaches the clean bottom row (or drops it);
/// the rows below are padding and are not scored. Pairs that would form a
/// one-row strip are excluded, so the result always validates.
pub fn align_drops(
    clean: &RawImage,
    attacked: &RawImage,
    max_drops: usize,
    drop_penalty: f64,
) -> Result<DropSet> {
    if !clean.same_layout(attacked) {
        return Err(Error::Mismatch("clean and attacked layouts differ".into()));
    }
    let h = clean.height();
    let width = max_drops.min(h / 2) + 1;
    const INF: f64 = f64::INFINITY;

    // dp[y][k][stepped]: best cost of rows 0..=y with shift k at row y, where
    // `stepped` marks a drop taken on row y itself. Rows with y + k >= h stay INF.
    let mut dp = vec![vec![[INF; 2]; width]; h];
    let mut back = vec![vec![[0u8; 2]; width]; h];
    let costs: Vec<Vec<f64>> = (0..h)
        .into_par_iter()
        .map(|y| (0..width.min(h - y)).map(|k| row_cost(clean, attacked, y, k)).collect())
        .collect();

    dp[0][0][0] = costs[0][0];
    if costs[0].len() > 1 {
        dp[0][1][1] = costs[0][1] + drop_penalty;
    }
    for y in 1..h {
        for (k, &c) in costs[y].iter().enumerate() {
            let p = dp[y - 1][k];
            let (stay, from) = if p[0] <= p[1] { (p[0], 0) } else { (p[1], 1) };
            dp[y][k][0] = stay + c;
            back[y][k][0] = from;
            if k > 0 {
                // Two steps on consecutive rows ending at even k close a one-row strip.
                let p = dp[y - 1][k - 1];
                let (best, from) = if k % 2 == 1 && p[1] < p[0] { (p[1], 1) } else { (p[0], 0) };
                dp[y][k][1] = best + c + drop_penalty;
                back[y][k][1] = from;
            }
        }
    }

    // (cost, last row, k, stepped, clean bottom row dropped)
    let mut best: Option<(f64, usize, usize, u8, bool)> = None;
    let mut consider = |cand: (f64, usize, usize, u8, bool)| {
        if cand.0 < best.map_or(INF, |b| b.0) {
            best = Some(cand);
        }
    };
    for k in 0..width {
        if let Some(y) = (h - 1).checked_sub(k) {
            for b in 0..2u8 {
                consider((dp[y][k][b as usize], y, k, b, false));
            }
        }
        if k + 1 < width {
            if let Some(y) = (h - 2).checked_sub(k) {
                for b in 0..2u8 {
                    if b == 1 && k % 2 == 1 {
                        continue;
                    }
                    consider((dp[y][k][b as usize] + drop_penalty, y, k, b, true));
                }
            }
        }
    }
    let (_, mut y, mut k, mut b, bottom) = best.expect("the no-drop path always exists");

    let mut rows = Vec::new();
    if bottom {
        rows.push(h - 1);
    }
    loop {
        let from = back[y][k][b as usize];
        if b == 1 {
            rows.push(y + k - 1);
            k -= 1;
        }
        if y == 0 {
            break;
        }
        y -= 1;
        b = from;
    }
    rows.reverse();
    validate_drop_set(&rows, h)
}

/// Turns detected boundaries into a full `x'` list.
///
/// With `k` closed runs above it, a run reaching the bottom row and starting
/// at `s` is one of:
/// * the padding alone (`m = 2k`, `s = H - m`),
/// * a strip running to the bottom (`m = 2k + 1`),
/// * a closed strip merged with the padding (`m = 2k + 2`, strip ends at
///   `H - m - 1`, which means the clean bottom row itself was dropped).
///
/// The last two agree everywhere except row `H - 2k - 2`: content (the clean
/// bottom row) for `m = 2k + 1`, padding for `m = 2k + 2`. The row above it
/// holds clean row `H - 2` either way and serves as the noise reference.
fn resolve_bottom_run(
    clean: &RawImage,
    attacked: &RawImage,
    edges: &EdgeDetection,
    noise_floor: f64,
) -> Vec<usize> {
    let mut positions = edges.positions.clone();
    if !edges.reaches_bottom {
        return positions;
    }
    let h = clean.height();
    let s = positions.pop().expect("bottom run has a start");
    let k = positions.len() / 2;
    if s + 2 * k >= h {
        return positions;
    }
    let probe = h - 2 * k - 2;
    match probe.checked_sub(1) {
        Some(end) if end > s => {
            let norm = clean.width() as f64 * clean.max_value() as f64;
            let d_content = row_distance(attacked.row(probe), clean.row(h - 1)) as f64 / norm;
            let d_ref = row_distance(attacked.row(end), clean.row(h - 2)) as f64 / norm;
            if d_content <= 2.0 * d_ref + noise_floor / 2.0 {
                positions.push(s);
            } else {
                positions.extend([s, end]);
            }
        }
        _ => positions.push(s),
    }
    positions
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::{apply_attack, Padding};
    use crate::cfa::{CfaPattern, Channel};

    fn distinct(h: usize) -> RawImage {
        RawImage::from_fn(16, h, CfaPattern::Grbg, 255, |r, c| match CfaPattern::Grbg.channel_at(r, c) {
            Channel::R => 200,
            Channel::G => 50,
            Channel::B => 120,
        })
        .unwrap()
    }

    fn profile_of(values: Vec<f64>) -> RowDifferenceProfile {
        RowDifferenceProfile { values, max_value: 255 }
    }

    fn bright(n: usize, runs: &[(usize, usize)]) -> RowDifferenceProfile {
        profile_of(
            (0..n)
                .map(|i| if runs.iter().any(|&(a, b)| (a..=b).contains(&i)) { 0.5 } else { 0.0 })
                .collect(),
        )
    }

    #[test]
    fn identical_images_give_zero_profile() {
        let img = distinct(20);
        let p = row_difference_profile(&img, &img).unwrap();
        assert!(p.values.iter().all(|&v| v == 0.0));
        assert!(detect_strip_edges(&p, ThresholdPolicy::default()).positions.is_empty());
        assert!(identify_dropped_rows(&img, &img).unwrap().is_empty());
    }

    #[test]
    fn labelled_image_profile() {
        let clean = RawImage::from_fn(4, 6, CfaPattern::Grbg, 255, |r, _| r as u16 * 10).unwrap();
        let d = crate::drops::DropSet::new(&[1, 3], 6).unwrap();
        let att = apply_attack(&clean, &d, Padding::WrapTop).unwrap();
        let p = row_difference_profile(&clean, &att).unwrap();
        assert_eq!(p.values[0], 0.0);
        assert!(p.values[1..].iter().all(|&v| v > 0.0));
    }

    #[test]
    fn channel_distinct_profile_lights_strip_rows() {
        let clean = distinct(100);
        let d = validate_drop_set(&[10, 20], 100).unwrap();
        let att = apply_attack(&clean, &d, Padding::WrapTop).unwrap();
        let p = row_difference_profile(&clean, &att).unwrap();
        for (r, &v) in p.values.iter().enumerate() {
            if (10..=18).contains(&r) {
                assert!(v > 0.2, "row {r}: {v}");
            } else {
                assert_eq!(v, 0.0, "row {r}");
            }
        }
    }

    #[test]
    fn mismatched_layouts_are_rejected() {
        assert!(row_difference_profile(&distinct(20), &distinct(22)).is_err());
    }

    #[test]
    fn edges_of_synthetic_profiles() {
        let pol = ThresholdPolicy::default();
        assert!(detect_strip_edges(&profile_of(vec![0.0; 50]), pol).positions.is_empty());
        assert_eq!(detect_strip_edges(&bright(100, &[(10, 18)]), pol).positions, vec![10, 18]);
        assert_eq!(
            detect_strip_edges(&bright(100, &[(10, 18), (28, 36)]), pol).positions,
            vec![10, 18, 28, 36]
        );
        let e = detect_strip_edges(&bright(100, &[(10, 18), (60, 99)]), pol);
        assert_eq!(e.positions, vec![10, 18, 60]);
        assert!(e.reaches_bottom);
        for pol in [ThresholdPolicy::TwoMeans { noise_floor: 0.02 }, ThresholdPolicy::Fixed(0.25)] {
            assert_eq!(detect_strip_edges(&bright(100, &[(10, 18), (20, 30)]), pol).positions, vec![10, 18, 20, 30]);
        }
    }

    #[test]
    fn single_row_spikes_are_ignored() {
        let mut p = bright(60, &[(10, 18)]);
        p.values[40] = 0.5;
        assert_eq!(detect_strip_edges(&p, ThresholdPolicy::default()).positions, vec![10, 18]);
    }

    #[test]
    fn round_trips_with_each_bottom_case() {
        let clean = distinct(64);
        for rows in [
            vec![10, 20, 30, 40],
            vec![10, 20, 30],
            vec![10, 20, 30, 63],
            vec![5, 11, 15],
            vec![0, 5],
            vec![40, 63],
            vec![63],
            vec![61],
            vec![20, 58, 60, 63],
        ] {
            let d = validate_drop_set(&rows, 64).unwrap();
            for pad in [Padding::WrapTop, Padding::Zero] {
                let att = apply_attack(&clean, &d, pad).unwrap();
                assert_eq!(identify_dropped_rows(&clean, &att).unwrap(), d, "{rows:?} {pad:?}");
            }
        }
    }

    #[test]
    fn noise_below_floor_is_silent() {
        let clean = RawImage::from_fn(32, 32, CfaPattern::Grbg, 255, |_, _| 128).unwrap();
        let mut s = 7u64;
        let mut noisy = |_: usize, _: usize| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            128 + ((s >> 40) % 3) as u16 - 1
        };
        let a = RawImage::from_fn(32, 32, CfaPattern::Grbg, 255, &mut noisy).unwrap();
        let b = RawImage::from_fn(32, 32, CfaPattern::Grbg, 255, &mut noisy).unwrap();
        assert!(identify_dropped_rows(&a, &b).unwrap().is_empty());
        assert!(identify_dropped_rows(&clean, &a).unwrap().is_empty());
    }

    #[test]
    fn csv_dump() {
        let p = profile_of(vec![0.0, 0.25]);
        assert_eq!(p.to_csv(), "row_index,value\n0,0\n1,0.25\n");
    }
}
