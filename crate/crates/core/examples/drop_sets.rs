//! Drop sets, the strips they produce in the attacked frame, and the
//! position mapping between the two.

use emistrip::{dropped_rows_from_positions, strip_positions, validate_drop_set, DropSampler};

fn main() -> anyhow::Result<()> {
    let d = validate_drop_set(&[10, 20, 30, 40], 100)?;
    let pos = strip_positions(&d);
    println!("D = {:?}", d.indices());
    println!("positions = {pos:?}");
    for s in &d.layout().strips {
        println!("  strip rows {}..={} ({} rows)", s.start, s.end, s.height());
    }
    assert_eq!(dropped_rows_from_positions(&pos, 100)?, d);

    // adjacent drops would make an empty strip
    println!("D = [10, 12]: {}", validate_drop_set(&[10, 12], 100).unwrap_err());

    let mut sampler = DropSampler::new(7);
    for n in [1, 3, 6] {
        let d = sampler.sample(n, 480, 2)?;
        println!("{n} strips: {:?}", d.indices());
    }
    Ok(())
}
