//! Windowed structural similarity.
//!
//! ```text
//!             (2 mu_x mu_y + c1) (2 sigma_xy + c2)
//! SSIM(x,y) = -------------------------------------------
//!             (mu_x^2 + mu_y^2 + c1) (sigma_x^2 + sigma_y^2 + c2)
//! ```
//!
//! evaluated on every fully-inside `window x window` block (stride 1, uniform
//! weights, unbiased variances) and averaged. Window moments are accumulated
//! in integers, so identical inputs score exactly 1.

use rayon::prelude::*;

use crate::cfa::{Channel, RawImage, RgbImage};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range `L` of the samples.
    pub dynamic_range: f64,
}

impl SsimParams {
    pub fn new(dynamic_range: f64) -> Self {
        SsimParams { window: 8, k1: 0.01, k2: 0.03, dynamic_range }
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = window;
        self
    }

    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }

    fn check(&self, width: usize, height: usize) -> Result<()> {
        if self.window < 2 || self.window > width.min(height) {
            return Err(Error::InvalidParam(format!(
                "SSIM window {} must lie in 2..={} for a {width}x{height} image",
                self.window,
                width.min(height)
            )));
        }
        if !(self.k1 > 0.0 && self.k2 > 0.0 && self.dynamic_range > 0.0) {
            return Err(Error::InvalidParam("SSIM k1, k2 and L must be positive".into()));
        }
        Ok(())
    }
}

/// SSIM of two single-channel planes of `width x height` samples.
pub fn ssim(x: &[u16], y: &[u16], width: usize, height: usize, params: &SsimParams) -> Result<f64> {
    if x.len() != width * height || y.len() != width * height {
        return Err(Error::Mismatch(format!(
            "planes of {} and {} samples for a {width}x{height} image",
            x.len(),
            y.len()
        )));
    }
    params.check(width, height)?;

    let win = params.window;
    let n = (win * win) as i128;
    let (c1, c2) = (params.c1(), params.c2());
    let cov_norm = (n * (n - 1)) as f64;

    let row_sums: Vec<f64> = (0..=height - win)
        .into_par_iter()
        .map(|top| {
            // Per-column moments over rows top..top+win: [sx, sy, sxx, syy, sxy].
            let mut cols = vec![[0u64; 5]; width];
            for r in top..top + win {
                let (xr, yr) = (&x[r * width..(r + 1) * width], &y[r * width..(r + 1) * width]);
                for (c, col) in cols.iter_mut().enumerate() {
                    let (a, b) = (xr[c] as u64, yr[c] as u64);
                    col[0] += a;
                    col[1] += b;
                    col[2] += a * a;
                    col[3] += b * b;
                    col[4] += a * b;
                }
            }
            let mut acc = [0u64; 5];
            for col in &cols[..win] {
                for (s, v) in acc.iter_mut().zip(col) {
                    *s += v;
                }
            }
            let mut total = 0.0;
            for left in 0..=width - win {
                if left > 0 {
                    for i in 0..5 {
                        acc[i] = acc[i] + cols[left + win - 1][i] - cols[left - 1][i];
                    }
                }
                let [sx, sy, sxx, syy, sxy] = acc.map(|v| v as i128);
                let mu_x = sx as f64 / n as f64;
                let mu_y = sy as f64 / n as f64;
                let var_x = (n * sxx - sx * sx) as f64 / cov_norm;
                let var_y = (n * syy - sy * sy) as f64 / cov_norm;
                let cov = (n * sxy - sx * sy) as f64 / cov_norm;
                total += ((2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2))
                    / ((mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2));
            }
            total
        })
        .collect();

    let count = ((height - win + 1) * (width - win + 1)) as f64;
    Ok(row_sums.iter().sum::<f64>() / count)
}

/// SSIM of two raw mosaics, `L` taken from their max value.
pub fn ssim_raw(x: &RawImage, y: &RawImage, window: usize) -> Result<f64> {
    if x.width() != y.width() || x.height() != y.height() || x.max_value() != y.max_value() {
        return Err(Error::Mismatch("raw images differ in size or range".into()));
    }
    let params = SsimParams::new(x.max_value() as f64).with_window(window);
    ssim(x.samples(), y.samples(), x.width(), x.height(), &params)
}

/// Mean of the per-channel SSIMs.
pub fn ssim_rgb(x: &RgbImage, y: &RgbImage, window: usize) -> Result<f64> {
    if x.width() != y.width() || x.height() != y.height() || x.max_value() != y.max_value() {
        return Err(Error::Mismatch("RGB images differ in size or range".into()));
    }
    let params = SsimParams::new(x.max_value() as f64).with_window(window);
    let mut total = 0.0;
    for ch in Channel::ALL {
        total += ssim(&x.channel(ch), &y.channel(ch), x.width(), x.height(), &params)?;
    }
    Ok(total / 3.0)
}
