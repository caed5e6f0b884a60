//! Dataset-scale attack generation and evaluation.
//!
//! For every input image and every strip count `n` of the sweep, writes
//!
//! ```text
//! <out>/<stem>_s<n>.pgm    attacked raw mosaic
//! <out>/<stem>_s<n>.ppm    its bilinear reconstruction
//! <out>/<stem>_s<n>.json   sidecar: drops, strips, pattern, padding, seed
//! <out>/annotations_s<n>.json   shifted ground truth, when annotations are given
//! <out>/report.csv, report.json
//! ```
//!
//! Each image draws its drop sets from a seed derived from the global seed
//! and the image id alone, so results do not depend on scheduling or on
//! which other images are present.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::annotations::{load_annotations, save_annotations, shift_annotation_set, AnnotationSet, ShiftOptions};
use crate::attack::{apply_attack, Padding, PaddingStrategy};
use crate::cfa::{demosaic, mosaic, CfaPattern, RawImage, RgbImage};
use crate::drops::{DropSampler, DropSet};
use crate::error::{Error, Result};
use crate::metrics::{ssim_raw, ssim_rgb, MetricRow};
use crate::pnm::{encode_pgm, encode_ppm, read_image, Image};
use crate::report::EvalReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatchConfig {
    pub input_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Pattern used to mosaic RGB inputs and to read PGMs without metadata.
    pub pattern: CfaPattern,
    /// Strip counts to simulate.
    pub sweep: Vec<usize>,
    pub padding: PaddingStrategy,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub parallelism: usize,
    pub report_formats: Vec<ReportFormat>,
    /// Optional ground truth; its images define the input list.
    pub annotations: Option<PathBuf>,
    pub min_gap: usize,
    pub ssim_window: usize,
    /// Rewrite outputs that already exist.
    pub force: bool,
}

impl Default for BatchConfig {
    fn default() -> Self {
        BatchConfig {
            input_dir: PathBuf::from("."),
            output_dir: PathBuf::from("out"),
            pattern: CfaPattern::default(),
            sweep: (1..=20).collect(),
            padding: PaddingStrategy::default(),
            seed: 0,
            parallelism: 0,
            report_formats: vec![ReportFormat::Csv, ReportFormat::Json],
            annotations: None,
            min_gap: 2,
            ssim_window: 8,
            force: false,
        }
    }
}

impl BatchConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Attack record written next to every attacked image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub image_id: String,
    pub strip_count: usize,
    pub seed: Option<u64>,
    pub pattern: CfaPattern,
    pub padding: PaddingStrategy,
    pub height: usize,
    pub drops: Vec<usize>,
    pub strips: serde_json::Value,
}

impl Sidecar {
    pub fn new(
        image_id: &str,
        drops: &DropSet,
        seed: Option<u64>,
        pattern: CfaPattern,
        padding: PaddingStrategy,
    ) -> Self {
        Sidecar {
            image_id: image_id.to_string(),
            strip_count: drops.layout().len(),
            seed,
            pattern,
            padding,
            height: drops.image_height(),
            drops: drops.indices().to_vec(),
            strips: drops.layout().to_json(),
        }
    }

    pub fn drop_set(&self) -> Result<DropSet> {
        DropSet::new(&self.drops, self.height)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("sidecar serializes");
        s.push('\n');
        s
    }
}

/// Stable 64-bit seed for `(seed, key)`: the first 8 bytes of SHA-256.
pub fn derive_seed(seed: u64, key: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Seed of the attack with `n_strips` strips on image `image_id`.
pub fn attack_seed(global_seed: u64, image_id: &str, n_strips: usize) -> u64 {
    derive_seed(derive_seed(global_seed, image_id), &format!("s{n_strips}"))
}

#[derive(Clone, Debug)]
struct Input {
    id: String,
    path: PathBuf,
}

fn list_inputs(cfg: &BatchConfig, truth: Option<&[AnnotationSet]>) -> Result<Vec<Input>> {
    if let Some(sets) = truth {
        return Ok(sets
            .iter()
            .map(|s| {
                let path = cfg.input_dir.join(&s.file_name);
                Input { id: stem(&path), path }
            })
            .collect());
    }
    let dir = &cfg.input_dir;
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("ppm" | "pgm")))
        .collect();
    paths.sort();
    Ok(paths.into_iter().map(|path| Input { id: stem(&path), path }).collect())
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Clean raw mosaic and its reconstruction for an input file.
pub fn load_clean(path: &Path, pattern: CfaPattern) -> Result<(RawImage, RgbImage)> {
    Ok(match read_image(path, Some(pattern))? {
        Image::Rgb(rgb) => {
            let raw = mosaic(&rgb, pattern)?;
            let rgb = demosaic(&raw);
            (raw, rgb)
        }
        Image::Raw(raw) => {
            let rgb = demosaic(&raw);
            (raw, rgb)
        }
    })
}

#[derive(Clone, Debug)]
struct Attacked {
    n_strips: usize,
    drops: DropSet,
    ssim_raw: f64,
    ssim_rgb: f64,
    written: bool,
}

fn write_new(path: &Path, bytes: &[u8], force: bool) -> Result<bool> {
    if !force && path.exists() {
        return Ok(false);
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    Ok(true)
}

fn process(cfg: &BatchConfig, input: &Input, next: Option<&Input>) -> Result<Vec<Attacked>> {
    let (raw, rgb) = load_clean(&input.path, cfg.pattern)?;
    let companion = match (cfg.padding, next) {
        (PaddingStrategy::NextFrame, Some(n)) => Some(load_clean(&n.path, cfg.pattern)?.0),
        _ => None,
    };
    let pad = Padding::new(cfg.padding, companion.as_ref())?;

    let mut out = Vec::with_capacity(cfg.sweep.len());
    for &n in &cfg.sweep {
        let seed = attack_seed(cfg.seed, &input.id, n);
        let drops = DropSampler::new(seed).sample(n, raw.height(), cfg.min_gap)?;
        let attacked = apply_attack(&raw, &drops, pad)?;
        let attacked_rgb = demosaic(&attacked);

        let out_path = |ext: &str| cfg.output_dir.join(format!("{}_s{n}.{ext}", input.id));
        let sidecar = Sidecar::new(&input.id, &drops, Some(seed), raw.pattern(), cfg.padding);
        let mut written = false;
        written |= write_new(&out_path("pgm"), &encode_pgm(&attacked), cfg.force)?;
        written |= write_new(&out_path("ppm"), &encode_ppm(&attacked_rgb), cfg.force)?;
        written |= write_new(&out_path("json"), sidecar.to_json().as_bytes(), cfg.force)?;

        out.push(Attacked {
            n_strips: n,
            ssim_raw: ssim_raw(&raw, &attacked, cfg.ssim_window)?,
            ssim_rgb: ssim_rgb(&rgb, &attacked_rgb, cfg.ssim_window)?,
            drops,
            written,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct ImageFailure {
    pub image_id: String,
    pub path: PathBuf,
    pub error: String,
}

#[derive(Clone, Debug)]
pub struct BatchOutcome {
    pub report: EvalReport,
    pub failures: Vec<ImageFailure>,
    pub images: usize,
    /// Attacked images whose files were (re)written this run.
    pub written: usize,
    pub skipped: usize,
}

/// Runs the whole sweep. Per-image failures are collected in the outcome;
/// only configuration, listing and report I/O errors abort the run.
pub fn run_batch(cfg: &BatchConfig) -> Result<BatchOutcome> {
    if cfg.input_dir == cfg.output_dir {
        return Err(Error::InvalidParam("output directory must differ from the input directory".into()));
    }
    if (1..cfg.sweep.len()).any(|i| cfg.sweep[..i].contains(&cfg.sweep[i])) {
        return Err(Error::InvalidParam(format!("sweep {:?} repeats a strip count", cfg.sweep)));
    }
    if cfg.report_formats.is_empty() {
        return Err(Error::InvalidParam("no report format selected".into()));
    }
    let truth = cfg.annotations.as_ref().map(load_annotations).transpose()?;
    let inputs = list_inputs(cfg, truth.as_deref())?;
    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| Error::InvalidParam(format!("thread pool: {e}")))?;
    let results: Vec<Result<Vec<Attacked>>> = pool.install(|| {
        inputs
            .par_iter()
            .enumerate()
            .map(|(i, input)| {
                let next = (inputs.len() > 1).then(|| &inputs[(i + 1) % inputs.len()]);
                process(cfg, input, next)
            })
            .collect()
    });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let (mut written, mut skipped) = (0, 0);
    let mut shifted: Vec<Vec<AnnotationSet>> = vec![Vec::new(); cfg.sweep.len()];
    for (i, (input, result)) in inputs.iter().zip(results).enumerate() {
        match result {
            Ok(attacks) => {
                for (k, a) in attacks.into_iter().enumerate() {
                    let variant = format!("s{}", a.n_strips);
                    rows.push(MetricRow::new(&input.id, "ssim_raw", &variant, a.ssim_raw));
                    rows.push(MetricRow::new(&input.id, "ssim_rgb", &variant, a.ssim_rgb));
                    if a.written {
                        written += 1;
                    } else {
                        skipped += 1;
                    }
                    if let Some(sets) = &truth {
                        shifted[k].push(shift_annotation_set(&sets[i], &a.drops, &ShiftOptions::default()).set);
                    }
                }
            }
            Err(e) => failures.push(ImageFailure {
                image_id: input.id.clone(),
                path: input.path.clone(),
                error: e.to_string(),
            }),
        }
    }

    if truth.is_some() {
        for (&n, sets) in cfg.sweep.iter().zip(&shifted) {
            save_annotations(sets, cfg.output_dir.join(format!("annotations_s{n}.json")))?;
        }
    }

    rows.sort_by_key(|r| cfg.sweep.iter().position(|&n| r.variant == format!("s{n}")));
    let report = EvalReport::from_rows(rows);
    for f in &cfg.report_formats {
        match f {
            ReportFormat::Csv => report.write_csv(cfg.output_dir.join("report.csv"))?,
            ReportFormat::Json => report.write_json(cfg.output_dir.join("report.json"))?,
        }
    }
    Ok(BatchOutcome { report, failures, images: inputs.len(), written, skipped })
}
