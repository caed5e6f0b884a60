use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use emistrip::annotations::{shift_annotation_set, CountMode, ShiftOptions};
use emistrip::batch::{load_clean, ReportFormat, Sidecar};
use emistrip::ident::{identify, identify_with_policy, IdentifyOptions};
use emistrip::metrics::{mean_ap, ssim_raw, ssim_rgb, MapVariant, MetricRow};
use emistrip::pnm::{read_image, read_pgm, write_pgm, write_ppm, Image};
use emistrip::{
    apply_attack, demosaic, load_annotations, mosaic, run_batch, save_annotations, validate_drop_set,
    BatchConfig, CfaPattern, DropSampler, DropSet, EvalReport, Padding, PaddingStrategy,
    ThresholdPolicy,
};

#[derive(Parser)]
#[command(name = "emistrip", version, about = "Row-drop color-strip attack toolkit for Bayer raw images")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// RGB PPM -> raw PGM.
    Mosaic {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value = "GRBG")]
        pattern: CfaPattern,
    },
    /// Raw PGM -> RGB PPM (bilinear).
    Demosaic {
        input: PathBuf,
        output: PathBuf,
        /// Pattern for PGMs without an emistrip pattern comment.
        #[arg(long)]
        pattern: Option<CfaPattern>,
    },
    /// Drop rows from a raw (or mosaiced RGB) image.
    Attack(AttackArgs),
    /// Recover the dropped rows from a clean/attacked pair.
    Detect(DetectArgs),
    /// Score images and/or detections into a report.
    Eval(EvalArgs),
    /// Move annotation boxes onto an attacked image.
    ShiftAnn(ShiftArgs),
    /// Attack a whole directory over a strip-count sweep.
    Batch(BatchArgs),
}

#[derive(Args)]
struct AttackArgs {
    input: PathBuf,
    /// Attacked raw PGM.
    output: PathBuf,
    /// Explicit drop rows, e.g. `10,20,30,40`.
    #[arg(long, conflicts_with = "strips")]
    drops: Option<String>,
    /// Number of strips to place at random.
    #[arg(long)]
    strips: Option<usize>,
    #[arg(long, env = "EMISTRIP_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    min_gap: usize,
    #[arg(long, default_value = "wrap-top")]
    padding: PaddingStrategy,
    /// Companion frame for `--padding next-frame`.
    #[arg(long)]
    next_frame: Option<PathBuf>,
    #[arg(long, default_value = "GRBG")]
    pattern: CfaPattern,
    /// Also write the RGB reconstruction.
    #[arg(long)]
    rgb: Option<PathBuf>,
    /// Sidecar path (default: output with `.json`).
    #[arg(long)]
    sidecar: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    clean: PathBuf,
    attacked: PathBuf,
    #[arg(long, default_value = "GRBG")]
    pattern: CfaPattern,
    /// Write the row-difference profile as CSV.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Write the recovered drop set as a sidecar JSON.
    #[arg(long)]
    output: Option<PathBuf>,
    /// `midpoint`, `two-means` or a fixed threshold in [0, 1].
    #[arg(long, default_value = "midpoint")]
    threshold: String,
    /// Skip the alignment refinement.
    #[arg(long)]
    profile_only: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Ground-truth annotations.
    #[arg(long, requires = "detections")]
    truth: Option<PathBuf>,
    /// Detection files, one per condition (labelled by file stem).
    #[arg(long, requires = "truth")]
    detections: Vec<PathBuf>,
    /// Clean images (`<stem>.ppm` or `.pgm`).
    #[arg(long, requires = "attacked_dir")]
    clean_dir: Option<PathBuf>,
    /// Attacked images named `<stem>_s<n>.pgm`.
    #[arg(long, requires = "clean_dir")]
    attacked_dir: Option<PathBuf>,
    #[arg(long, default_value = "GRBG")]
    pattern: CfaPattern,
    #[arg(long, default_value_t = 8)]
    window: usize,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ShiftArgs {
    input: PathBuf,
    output: PathBuf,
    /// Drop rows applied to every image.
    #[arg(long, conflicts_with = "sidecar", required_unless_present = "sidecar")]
    drops: Option<String>,
    /// Take the drop rows from an attack sidecar.
    #[arg(long)]
    sidecar: Option<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    min_height: f64,
    /// Count drops above the box top instead of before its center.
    #[arg(long)]
    above_top: bool,
}

#[derive(Args)]
struct BatchArgs {
    /// JSON file with BatchConfig fields; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    pattern: Option<CfaPattern>,
    /// Strip counts, e.g. `1,3,6`.
    #[arg(long, value_delimiter = ',')]
    sweep: Option<Vec<usize>>,
    #[arg(long)]
    padding: Option<PaddingStrategy>,
    #[arg(long, env = "EMISTRIP_SEED")]
    seed: Option<u64>,
    #[arg(long, short = 'j')]
    parallelism: Option<usize>,
    #[arg(long, value_delimiter = ',', value_parser = parse_format)]
    formats: Option<Vec<ReportFormat>>,
    #[arg(long)]
    annotations: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    match s {
        "csv" => Ok(ReportFormat::Csv),
        "json" => Ok(ReportFormat::Json),
        _ => Err(format!("unknown report format `{s}`")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let io = e.chain().any(|c| {
                c.downcast_ref::<emistrip::Error>().is_some_and(|e| e.is_io()) || c.is::<std::io::Error>()
            });
            ExitCode::from(if io { 1 } else { 2 })
        }
    }
}

fn run(cmd: Cmd) -> anyhow::Result<ExitCode> {
    match cmd {
        Cmd::Mosaic { input, output, pattern } => {
            let rgb = emistrip::pnm::read_ppm(&input)?;
            write_pgm(&output, &mosaic(&rgb, pattern)?)?;
        }
        Cmd::Demosaic { input, output, pattern } => {
            write_ppm(&output, &demosaic(&read_pgm(&input, pattern)?))?;
        }
        Cmd::Attack(a) => attack(a)?,
        Cmd::Detect(a) => detect(a)?,
        Cmd::Eval(a) => eval(a)?,
        Cmd::ShiftAnn(a) => shift_ann(a)?,
        Cmd::Batch(a) => return batch(a),
    }
    Ok(ExitCode::SUCCESS)
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn attack(a: AttackArgs) -> anyhow::Result<()> {
    let (raw, _) = load_clean(&a.input, a.pattern)?;
    let (drops, seed) = match (&a.drops, a.strips) {
        (Some(text), _) => (validate_drop_set(&emistrip::drops::parse_indices(text)?, raw.height())?, None),
        (None, Some(n)) => (DropSampler::new(a.seed).sample(n, raw.height(), a.min_gap)?, Some(a.seed)),
        (None, None) => bail!("give either --drops or --strips"),
    };
    let next = a.next_frame.as_ref().map(|p| load_clean(p, a.pattern)).transpose()?.map(|x| x.0);
    let attacked = apply_attack(&raw, &drops, Padding::new(a.padding, next.as_ref())?)?;

    write_pgm(&a.output, &attacked)?;
    if let Some(p) = &a.rgb {
        write_ppm(p, &demosaic(&attacked))?;
    }
    let sidecar = Sidecar::new(&stem(&a.input), &drops, seed, raw.pattern(), a.padding);
    let path = a.sidecar.unwrap_or_else(|| a.output.with_extension("json"));
    std::fs::write(&path, sidecar.to_json()).with_context(|| format!("writing {}", path.display()))?;
    println!("{drops}");
    Ok(())
}

fn detect(a: DetectArgs) -> anyhow::Result<()> {
    let (clean, _) = load_clean(&a.clean, a.pattern)?;
    let attacked = match read_image(&a.attacked, Some(a.pattern))? {
        Image::Raw(r) => r,
        Image::Rgb(_) => bail!("{}: attacked image must be a raw PGM", a.attacked.display()),
    };
    let policy = match a.threshold.as_str() {
        "midpoint" => ThresholdPolicy::default(),
        "two-means" => ThresholdPolicy::TwoMeans { noise_floor: emistrip::ident::DEFAULT_NOISE_FLOOR },
        t => ThresholdPolicy::Fixed(t.parse().with_context(|| format!("threshold `{t}`"))?),
    };
    let id = if a.profile_only {
        identify_with_policy(&clean, &attacked, policy)?
    } else {
        identify(&clean, &attacked, &IdentifyOptions { policy, ..Default::default() })?
    };
    if let Some(p) = &a.profile {
        std::fs::write(p, id.profile.to_csv()).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &a.output {
        let s = Sidecar::new(&stem(&a.attacked), &id.drops, None, clean.pattern(), PaddingStrategy::default());
        std::fs::write(p, s.to_json()).with_context(|| format!("writing {}", p.display()))?;
    }
    if id.edges.low_confidence {
        eprintln!("warning: difference profile is close to the threshold on many rows");
    }
    println!("{}", id.drops);
    Ok(())
}

fn attacked_strip_count(name: &str) -> Option<(String, usize)> {
    let (base, n) = name.rsplit_once("_s")?;
    Some((base.to_string(), n.parse().ok()?))
}

fn eval(a: EvalArgs) -> anyhow::Result<()> {
    let mut rows = Vec::new();
    let mut summary = Vec::new();

    if let (Some(clean_dir), Some(att_dir)) = (&a.clean_dir, &a.attacked_dir) {
        let mut pairs = Vec::new();
        for entry in std::fs::read_dir(att_dir).with_context(|| format!("reading {}", att_dir.display()))? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "pgm") {
                if let Some((base, n)) = attacked_strip_count(&stem(&path)) {
                    pairs.push((n, base, path));
                }
            }
        }
        pairs.sort();
        for (n, base, path) in pairs {
            let clean_path = ["ppm", "pgm"]
                .iter()
                .map(|ext| clean_dir.join(format!("{base}.{ext}")))
                .find(|p| p.exists())
                .with_context(|| format!("no clean image for {}", path.display()))?;
            let (raw, rgb) = load_clean(&clean_path, a.pattern)?;
            let att = read_pgm(&path, Some(a.pattern))?;
            let variant = format!("s{n}");
            rows.push(MetricRow::new(&base, "ssim_raw", &variant, ssim_raw(&raw, &att, a.window)?));
            rows.push(MetricRow::new(&base, "ssim_rgb", &variant, ssim_rgb(&rgb, &demosaic(&att), a.window)?));
        }
    }

    if let Some(truth_path) = &a.truth {
        let truth = load_annotations(truth_path)?;
        for det_path in &a.detections {
            let dets = load_annotations(det_path)?;
            let label = stem(det_path);
            for variant in MapVariant::ALL {
                summary.push(MetricRow::new(
                    emistrip::report::ALL_IMAGES,
                    variant.name(),
                    &label,
                    mean_ap(&dets, &truth, variant)?,
                ));
            }
            for t in &truth {
                if t.boxes.is_empty() {
                    continue;
                }
                let d: Vec<_> = dets.iter().filter(|d| d.image_id == t.image_id).cloned().collect();
                for variant in MapVariant::ALL {
                    let v = mean_ap(&d, std::slice::from_ref(t), variant)?;
                    rows.push(MetricRow::new(t.image_id.to_string(), variant.name(), &label, v));
                }
            }
        }
    }

    if rows.is_empty() && summary.is_empty() {
        bail!("nothing to evaluate: give --truth/--detections and/or --clean-dir/--attacked-dir");
    }
    let mut report = EvalReport::from_rows(rows);
    report.summary = summary;
    match (&a.csv, &a.json) {
        (None, None) => print!("{}", report.to_csv()?),
        (csv, json) => {
            if let Some(p) = csv {
                report.write_csv(p)?;
            }
            if let Some(p) = json {
                report.write_json(p)?;
            }
        }
    }
    Ok(())
}

fn shift_ann(a: ShiftArgs) -> anyhow::Result<()> {
    let sets = load_annotations(&a.input)?;
    let rows = match (&a.drops, &a.sidecar) {
        (Some(text), _) => emistrip::drops::parse_indices(text)?,
        (None, Some(p)) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<Sidecar>(&text)?.drops
        }
        (None, None) => unreachable!("clap requires one of them"),
    };
    let opts = ShiftOptions {
        min_height: a.min_height,
        count_mode: if a.above_top { CountMode::AboveTop } else { CountMode::BeforeCenter },
    };
    let mut out = Vec::with_capacity(sets.len());
    let (mut removed, mut clipped) = (0, 0);
    for set in &sets {
        let drops: DropSet = validate_drop_set(&rows, set.height)
            .with_context(|| format!("drop rows for image {}", set.image_id))?;
        let r = shift_annotation_set(set, &drops, &opts);
        removed += r.removed;
        clipped += r.clipped;
        out.push(r.set);
    }
    save_annotations(&out, &a.output)?;
    eprintln!("removed {removed} boxes, clipped {clipped}");
    Ok(())
}

fn batch(a: BatchArgs) -> anyhow::Result<ExitCode> {
    let mut cfg = match &a.config {
        Some(p) => BatchConfig::from_json_file(p)?,
        None => BatchConfig::default(),
    };
    if let Some(v) = a.input {
        cfg.input_dir = v;
    }
    if let Some(v) = a.output {
        cfg.output_dir = v;
    }
    if let Some(v) = a.pattern {
        cfg.pattern = v;
    }
    if let Some(v) = a.sweep {
        cfg.sweep = v;
    }
    if let Some(v) = a.padding {
        cfg.padding = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.parallelism {
        cfg.parallelism = v;
    }
    if let Some(v) = a.formats {
        cfg.report_formats = v;
    }
    if let Some(v) = a.annotations {
        cfg.annotations = Some(v);
    }
    cfg.force |= a.force;

    let outcome = run_batch(&cfg)?;
    eprintln!(
        "{} images, {} attacked outputs written, {} skipped, {} failed",
        outcome.images,
        outcome.written,
        outcome.skipped,
        outcome.failures.len()
    );
    for f in &outcome.failures {
        eprintln!("failed {}: {}", f.image_id, f.error);
    }
    Ok(if outcome.failures.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(3) })
}
