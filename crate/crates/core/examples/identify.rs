//! Recover the dropped rows from a clean / attacked pair, comparing the
//! thresholded profile alone with the full identification.

use std::path::Path;

use emistrip::ident::{identify_with_policy, ThresholdPolicy};
use emistrip::pnm::read_ppm;
use emistrip::{apply_attack, identify_dropped_rows, mosaic, row_difference_profile, CfaPattern, DropSampler, Padding};

fn main() -> anyhow::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/corpus");
    let (mut profile_hits, mut full_hits, mut total) = (0, 0, 0);
    let mut paths: Vec<_> = std::fs::read_dir(&dir)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
    paths.sort();
    for (i, path) in paths.iter().enumerate() {
        let raw = mosaic(&read_ppm(path)?, CfaPattern::Grbg)?;
        let drops = DropSampler::new(i as u64).sample(1 + i % 6, raw.height(), 2)?;
        let attacked = apply_attack(&raw, &drops, Padding::WrapTop)?;

        // the profile route can misread a boundary badly enough to yield no valid set
        let profile = identify_with_policy(&raw, &attacked, ThresholdPolicy::default());
        let full = identify_dropped_rows(&raw, &attacked)?;
        profile_hits += profile.is_ok_and(|p| p.drops == drops) as usize;
        full_hits += (full == drops) as usize;
        total += 1;
        if i == 0 {
            let p = row_difference_profile(&raw, &attacked)?;
            let peak = p.values.iter().cloned().fold(0.0, f64::max);
            println!("first image: D = {:?}, profile peak {peak:.3}", drops.indices());
        }
    }
    println!("profile only: {profile_hits}/{total} exact");
    println!("identify:     {full_hits}/{total} exact");
    Ok(())
}
