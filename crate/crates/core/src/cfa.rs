//! Bayer color filter arrays, RGB -> raw mosaicing and bilinear demosaicing.
//!
//! Bilinear kernels, applied per missing channel over the 3x3 neighbourhood:
//!
//! ```text
//!   green at R/B sites      (1/4) * [ 0 1 0 ; 1 0 1 ; 0 1 0 ]
//!   R/B at G sites          (1/2) * [ 0 1 0 ] or its transpose
//!   B at R, R at B sites    (1/4) * [ 1 0 1 ; 0 0 0 ; 1 0 1 ]
//! ```
//!
//! Neighbours outside the image are mirrored about the border pixel
//! (`-1 -> 1`, `w -> w - 2`), which keeps the CFA phase and so always
//! replicates the nearest sample of the wanted channel.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drops::DropSet;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Channel {
    R,
    G,
    B,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::R, Channel::G, Channel::B];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Channel::R => 0,
            Channel::G => 1,
            Channel::B => 2,
        }
    }
}

/// 2x2 Bayer tile, named by its first row then second row.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CfaPattern {
    #[default]
    Grbg,
    Rggb,
    Bggr,
    Gbrg,
}

impl CfaPattern {
    pub const ALL: [CfaPattern; 4] =
        [CfaPattern::Grbg, CfaPattern::Rggb, CfaPattern::Bggr, CfaPattern::Gbrg];

    pub fn tile(self) -> [[Channel; 2]; 2] {
        use Channel::*;
        match self {
            CfaPattern::Grbg => [[G, R], [B, G]],
            CfaPattern::Rggb => [[R, G], [G, B]],
            CfaPattern::Bggr => [[B, G], [G, R]],
            CfaPattern::Gbrg => [[G, B], [R, G]],
        }
    }

    #[inline]
    pub fn channel_at(self, row: usize, col: usize) -> Channel {
        self.tile()[row & 1][col & 1]
    }

    pub fn name(self) -> &'static str {
        match self {
            CfaPattern::Grbg => "GRBG",
            CfaPattern::Rggb => "RGGB",
            CfaPattern::Bggr => "BGGR",
            CfaPattern::Gbrg => "GBRG",
        }
    }
}

impl fmt::Display for CfaPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CfaPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CfaPattern::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidParam(format!("unknown CFA pattern `{s}`")))
    }
}

/// Free function form of [`CfaPattern::channel_at`].
pub fn channel_at(pattern: CfaPattern, row: usize, col: usize) -> Channel {
    pattern.channel_at(row, col)
}

/// Single-channel Bayer mosaic, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawImage {
    width: usize,
    height: usize,
    pattern: CfaPattern,
    max_value: u16,
    samples: Vec<u16>,
    applied_drops: Option<DropSet>,
}

impl RawImage {
    pub fn new(
        width: usize,
        height: usize,
        pattern: CfaPattern,
        max_value: u16,
        samples: Vec<u16>,
    ) -> Result<Self> {
        if width < 2 || height < 2 || width % 2 != 0 || height % 2 != 0 {
            return Err(Error::OddDimensions { width, height });
        }
        check_samples(width * height, max_value, samples.iter().copied(), samples.len())?;
        Ok(RawImage { width, height, pattern, max_value, samples, applied_drops: None })
    }

    /// Builds an image by evaluating `f(row, col)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        pattern: CfaPattern,
        max_value: u16,
        mut f: impl FnMut(usize, usize) -> u16,
    ) -> Result<Self> {
        let mut samples = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                samples.push(f(r, c));
            }
        }
        Self::new(width, height, pattern, max_value, samples)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pattern(&self) -> CfaPattern {
        self.pattern
    }

    pub fn max_value(&self) -> u16 {
        self.max_value
    }

    pub fn samples(&self) -> &[u16] {
        &self.samples
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.samples[row * self.width + col]
    }

    pub fn row(&self, row: usize) -> &[u16] {
        &self.samples[row * self.width..(row + 1) * self.width]
    }

    /// Drop set recorded by the attack that produced this image, if any.
    pub fn applied_drops(&self) -> Option<&DropSet> {
        self.applied_drops.as_ref()
    }

    pub fn with_applied_drops(mut self, drops: Option<DropSet>) -> Self {
        self.applied_drops = drops;
        self
    }

    /// Same geometry, pattern and range; samples may differ.
    pub fn same_layout(&self, other: &RawImage) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.pattern == other.pattern
            && self.max_value == other.max_value
    }
}

/// Three-channel image, row-major `[r, g, b]` triples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    max_value: u16,
    samples: Vec<[u16; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, max_value: u16, samples: Vec<[u16; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParam(format!("empty image {width}x{height}")));
        }
        check_samples(
            width * height,
            max_value,
            samples.iter().map(|px| *px.iter().max().unwrap()),
            samples.len(),
        )?;
        Ok(RgbImage { width, height, max_value, samples })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        max_value: u16,
        mut f: impl FnMut(usize, usize) -> [u16; 3],
    ) -> Result<Self> {
        let mut samples = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                samples.push(f(r, c));
            }
        }
        Self::new(width, height, max_value, samples)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn max_value(&self) -> u16 {
        self.max_value
    }

    pub fn samples(&self) -> &[[u16; 3]] {
        &self.samples
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> [u16; 3] {
        self.samples[row * self.width + col]
    }

    /// One channel as a plane, row-major.
    pub fn channel(&self, channel: Channel) -> Vec<u16> {
        let k = channel.index();
        self.samples.iter().map(|px| px[k]).collect()
    }
}

fn check_samples(
    expected: usize,
    max_value: u16,
    values: impl Iterator<Item = u16>,
    got: usize,
) -> Result<()> {
    if got != expected {
        return Err(Error::SampleCount { expected, got });
    }
    if max_value == 0 {
        return Err(Error::InvalidParam("max value must be positive".into()));
    }
    for (index, v) in values.enumerate() {
        if v > max_value {
            return Err(Error::SampleOutOfRange { index, value: v as u32, max_value });
        }
    }
    Ok(())
}

/// Samples each pixel's channel selected by the CFA.
pub fn mosaic(rgb: &RgbImage, pattern: CfaPattern) -> Result<RawImage> {
    let (w, h) = (rgb.width, rgb.height);
    if w % 2 != 0 || h % 2 != 0 || w < 2 || h < 2 {
        return Err(Error::OddDimensions { width: w, height: h });
    }
    let samples = rgb
        .samples
        .iter()
        .enumerate()
        .map(|(i, px)| px[pattern.channel_at(i / w, i % w).index()])
        .collect();
    RawImage::new(w, h, pattern, rgb.max_value, samples)
}

/// Neighbour offsets carrying `channel` around a pixel at phase `(pr, pc)`.
fn stencil(pattern: CfaPattern, pr: usize, pc: usize, channel: Channel) -> Vec<(isize, isize)> {
    let mut out = Vec::with_capacity(4);
    for dr in -1isize..=1 {
        for dc in -1isize..=1 {
            if dr == 0 && dc == 0 {
                continue;
            }
            let r = (pr as isize + dr + 2) as usize;
            let c = (pc as isize + dc + 2) as usize;
            if pattern.channel_at(r, c) == channel {
                out.push((dr, dc));
            }
        }
    }
    out
}

#[inline]
fn mirror(i: isize, len: usize) -> usize {
    if i < 0 {
        (-i) as usize
    } else if i as usize >= len {
        2 * (len - 1) - i as usize
    } else {
        i as usize
    }
}

/// Bilinear reconstruction of full RGB from the mosaic.
///
/// Averages round half up on the integer grid; the natively sampled channel
/// is copied through untouched.
pub fn demosaic(raw: &RawImage) -> RgbImage {
    let (w, h) = (raw.width, raw.height);
    let pattern = raw.pattern;

    // stencils[phase][channel]
    let stencils: Vec<Vec<Vec<(isize, isize)>>> = (0..4)
        .map(|phase| {
            Channel::ALL
                .iter()
                .map(|&ch| stencil(pattern, phase >> 1, phase & 1, ch))
                .collect()
        })
        .collect();

    let mut out = vec![[0u16; 3]; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(r, row_out)| {
        for (c, px) in row_out.iter_mut().enumerate() {
            let native = pattern.channel_at(r, c);
            let taps = &stencils[((r & 1) << 1) | (c & 1)];
            for ch in Channel::ALL {
                px[ch.index()] = if ch == native {
                    raw.samples[r * w + c]
                } else {
                    let offsets = &taps[ch.index()];
                    let sum: u32 = offsets
                        .iter()
                        .map(|&(dr, dc)| {
                            let rr = mirror(r as isize + dr, h);
                            let cc = mirror(c as isize + dc, w);
                            raw.samples[rr * w + cc] as u32
                        })
                        .sum();
                    let n = offsets.len() as u32;
                    ((sum + n / 2) / n) as u16
                };
            }
        }
    });

    RgbImage { width: w, height: h, max_value: raw.max_value, samples: out }
}
