//! Apply the row-drop attack with every padding strategy and write the
//! results next to each other as PPMs.

use std::path::Path;

use emistrip::pnm::{read_ppm, write_ppm};
use emistrip::{apply_attack, demosaic, mosaic, CfaPattern, DropSampler, Padding};

fn main() -> anyhow::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/corpus");
    let raw = mosaic(&read_ppm(dir.join("n00_astronaut.ppm"))?, CfaPattern::Grbg)?;
    let next = mosaic(&read_ppm(dir.join("n01_astronaut.ppm"))?, CfaPattern::Grbg)?;

    let drops = DropSampler::new(1).sample(4, raw.height(), 2)?;
    println!("D = {:?}", drops.indices());

    let out = std::env::temp_dir().join("emistrip-attack");
    std::fs::create_dir_all(&out)?;
    for pad in [Padding::WrapTop, Padding::NextFrame(&next), Padding::ReplicateLast, Padding::Zero] {
        let attacked = apply_attack(&raw, &drops, pad)?;
        let path = out.join(format!("attacked_{}.ppm", pad.strategy().name()));
        write_ppm(&path, &demosaic(&attacked))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
