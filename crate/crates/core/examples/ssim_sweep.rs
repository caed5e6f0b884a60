//! Mean raw and RGB SSIM over the corpus as the strip count grows.

use std::path::Path;

use emistrip::batch::load_clean;
use emistrip::metrics::{ssim_raw, ssim_rgb};
use emistrip::{apply_attack, demosaic, CfaPattern, DropSampler, Padding};

fn main() -> anyhow::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/corpus");
    let mut paths: Vec<_> = std::fs::read_dir(&dir)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
    paths.sort();
    let images = paths.iter().map(|p| load_clean(p, CfaPattern::Grbg)).collect::<Result<Vec<_>, _>>()?;
    println!("strips  ssim_raw  ssim_rgb");
    for n in [0, 1, 2, 4, 8, 16] {
        let (mut raw_sum, mut rgb_sum) = (0.0, 0.0);
        for (i, (raw, rgb)) in images.iter().enumerate() {
            let d = DropSampler::new(i as u64 * 100 + n as u64).sample(n, raw.height(), 2)?;
            let attacked = apply_attack(raw, &d, Padding::WrapTop)?;
            raw_sum += ssim_raw(raw, &attacked, 8)?;
            rgb_sum += ssim_rgb(rgb, &demosaic(&attacked), 8)?;
        }
        let k = images.len() as f64;
        println!("{n:>6}  {:.4}    {:.4}", raw_sum / k, rgb_sum / k);
    }
    Ok(())
}
