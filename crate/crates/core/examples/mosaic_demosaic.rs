//! Mosaic an RGB tile under each Bayer pattern and demosaic it back.

use std::path::Path;

use emistrip::metrics::ssim_rgb;
use emistrip::pnm::read_ppm;
use emistrip::{demosaic, mosaic, CfaPattern};

fn main() -> anyhow::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/corpus/n00_astronaut.ppm");
    let rgb = read_ppm(&path)?;
    println!("{}: {}x{}, max {}", path.display(), rgb.width(), rgb.height(), rgb.max_value());
    for pattern in CfaPattern::ALL {
        let raw = mosaic(&rgb, pattern)?;
        let back = demosaic(&raw);
        println!("{:>4}  first row {:?}  ssim(rgb, demosaic) = {:.4}", pattern.name(), &raw.row(0)[..4], ssim_rgb(&rgb, &back, 8)?);
    }
    Ok(())
}
