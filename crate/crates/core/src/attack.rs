//! Row-drop attack simulation on raw images.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cfa::{demosaic, mosaic, CfaPattern, RawImage, RgbImage};
use crate::drops::DropSet;
use crate::error::{Error, Result};

/// How the `m` rows lost at the bottom are refilled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PaddingStrategy {
    /// First `m` rows of the original image.
    #[default]
    WrapTop,
    /// First `m` rows of a companion (next) frame.
    NextFrame,
    /// Repeat the last surviving row.
    ReplicateLast,
    Zero,
}

impl PaddingStrategy {
    pub fn name(self) -> &'static str {
        match self {
            PaddingStrategy::WrapTop => "wrap-top",
            PaddingStrategy::NextFrame => "next-frame",
            PaddingStrategy::ReplicateLast => "replicate-last",
            PaddingStrategy::Zero => "zero",
        }
    }
}

impl fmt::Display for PaddingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PaddingStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            PaddingStrategy::WrapTop,
            PaddingStrategy::NextFrame,
            PaddingStrategy::ReplicateLast,
            PaddingStrategy::Zero,
        ]
        .into_iter()
        .find(|p| p.name() == s.trim())
        .ok_or_else(|| Error::InvalidParam(format!("unknown padding `{s}`")))
    }
}

/// A padding strategy together with the data it needs.
#[derive(Clone, Copy, Debug)]
pub enum Padding<'a> {
    WrapTop,
    NextFrame(&'a RawImage),
    ReplicateLast,
    Zero,
}

impl Padding<'_> {
    pub fn strategy(&self) -> PaddingStrategy {
        match self {
            Padding::WrapTop => PaddingStrategy::WrapTop,
            Padding::NextFrame(_) => PaddingStrategy::NextFrame,
            Padding::ReplicateLast => PaddingStrategy::ReplicateLast,
            Padding::Zero => PaddingStrategy::Zero,
        }
    }
}

impl<'a> Padding<'a> {
    /// Pairs a strategy with its companion frame; `NextFrame` needs one.
    pub fn new(strategy: PaddingStrategy, next_frame: Option<&'a RawImage>) -> Result<Self> {
        Ok(match strategy {
            PaddingStrategy::WrapTop => Padding::WrapTop,
            PaddingStrategy::ReplicateLast => Padding::ReplicateLast,
            PaddingStrategy::Zero => Padding::Zero,
            PaddingStrategy::NextFrame => Padding::NextFrame(next_frame.ok_or_else(|| {
                Error::InvalidParam("next-frame padding needs a companion image".into())
            })?),
        })
    }
}

/// Drops the rows in `drops` from `raw` (bottom-up) and pads the bottom back
/// to the original height. The result records `drops` as its applied set.
pub fn apply_attack(raw: &RawImage, drops: &DropSet, pad: Padding<'_>) -> Result<RawImage> {
    if drops.image_height() != raw.height() {
        return Err(Error::Mismatch(format!(
            "drop set is for height {}, image has {}",
            drops.image_height(),
            raw.height()
        )));
    }
    if let Padding::NextFrame(next) = pad {
        if !next.same_layout(raw) {
            return Err(Error::Mismatch(format!(
                "next frame is {}x{} {}, image is {}x{} {}",
                next.width(),
                next.height(),
                next.pattern(),
                raw.width(),
                raw.height(),
                raw.pattern()
            )));
        }
    }
    if drops.is_empty() {
        return Ok(raw.clone());
    }

    let (w, h, m) = (raw.width(), raw.height(), drops.len());
    let mut rows: Vec<&[u16]> = (0..h).map(|r| raw.row(r)).collect();
    for &x in drops.indices().iter().rev() {
        rows.remove(x);
    }

    let zeros = vec![0u16; w];
    let last = *rows.last().expect("drops never remove every row");
    for i in 0..m {
        rows.push(match pad {
            Padding::WrapTop => raw.row(i),
            Padding::NextFrame(next) => next.row(i),
            Padding::ReplicateLast => last,
            Padding::Zero => &zeros,
        });
    }

    let samples = rows.concat();
    Ok(RawImage::new(w, h, raw.pattern(), raw.max_value(), samples)?
        .with_applied_drops(Some(drops.clone())))
}

/// Mosaic, attack, demosaic.
pub fn simulate_attacked_rgb(
    rgb: &RgbImage,
    pattern: CfaPattern,
    drops: &DropSet,
    pad: Padding<'_>,
) -> Result<RgbImage> {
    let raw = mosaic(rgb, pattern)?;
    Ok(demosaic(&apply_attack(&raw, drops, pad)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labelled(h: usize) -> RawImage {
        RawImage::from_fn(4, h, CfaPattern::Grbg, 255, |r, _| r as u16).unwrap()
    }

    fn row_labels(img: &RawImage) -> Vec<u16> {
        (0..img.height()).map(|r| img.get(r, 0)).collect()
    }

    #[test]
    fn empty_attack_is_identity() {
        let img = labelled(6);
        let d = DropSet::empty(6);
        for pad in [Padding::WrapTop, Padding::Zero, Padding::ReplicateLast, Padding::NextFrame(&img)] {
            assert_eq!(apply_attack(&img, &d, pad).unwrap(), img);
        }
    }

    #[test]
    fn hand_simulated_wrap_top_and_zero() {
        let img = labelled(6);
        let d = DropSet::new(&[1, 3], 6).unwrap();
        let out = apply_attack(&img, &d, Padding::WrapTop).unwrap();
        assert_eq!(row_labels(&out), vec![0, 2, 4, 5, 0, 1]);
        assert_eq!(out.applied_drops(), Some(&d));
        let out = apply_attack(&img, &d, Padding::Zero).unwrap();
        assert_eq!(row_labels(&out), vec![0, 2, 4, 5, 0, 0]);
        assert!(out.row(4).iter().chain(out.row(5)).all(|&v| v == 0));
        let out = apply_attack(&img, &d, Padding::ReplicateLast).unwrap();
        assert_eq!(row_labels(&out), vec![0, 2, 4, 5, 5, 5]);
    }

    #[test]
    fn next_frame_padding_and_mismatch() {
        let img = labelled(6);
        let next = RawImage::from_fn(4, 6, CfaPattern::Grbg, 255, |r, _| 100 + r as u16).unwrap();
        let d = DropSet::new(&[1, 3], 6).unwrap();
        let out = apply_attack(&img, &d, Padding::NextFrame(&next)).unwrap();
        assert_eq!(row_labels(&out), vec![0, 2, 4, 5, 100, 101]);

        let small = labelled(4);
        assert!(matches!(
            apply_attack(&img, &d, Padding::NextFrame(&small)),
            Err(Error::Mismatch(_))
        ));
        assert!(Padding::new(PaddingStrategy::NextFrame, None).is_err());
    }

    #[test]
    fn drop_set_height_must_match() {
        let img = labelled(6);
        let d = DropSet::new(&[1, 3], 8).unwrap();
        assert!(apply_attack(&img, &d, Padding::WrapTop).is_err());
    }

    #[test]
    fn padding_names_round_trip() {
        for p in [
            PaddingStrategy::WrapTop,
            PaddingStrategy::NextFrame,
            PaddingStrategy::ReplicateLast,
            PaddingStrategy::Zero,
        ] {
            assert_eq!(p.name().parse::<PaddingStrategy>().unwrap(), p);
        }
    }
}
