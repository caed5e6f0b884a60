//! Move ground-truth boxes from the clean frame onto the attacked one.

use emistrip::annotations::{ShiftOptions, ShiftReport};
use emistrip::{shift_annotation_set, validate_drop_set, AnnotationSet, BoundingBox};

fn main() -> anyhow::Result<()> {
    let drops = validate_drop_set(&[10, 20], 100)?;
    let mut set = AnnotationSet::new(1, "a.ppm", 64, 100);
    set.boxes = vec![
        BoundingBox::from_top_left(5.0, 40.0, 8.0, 21.0, 0),
        BoundingBox::from_top_left(5.0, 8.0, 8.0, 15.0, 0),
        BoundingBox::from_top_left(30.0, 19.5, 4.0, 2.0, 1),
        BoundingBox::from_top_left(30.0, 90.0, 4.0, 10.0, 1),
    ];
    let ShiftReport { set: out, removed, clipped } = shift_annotation_set(&set, &drops, &ShiftOptions::default());
    println!("D = {:?}", drops.indices());
    for b in &set.boxes {
        println!("  in : cy {:>5.1} h {:>4.1}", b.center_y, b.height);
    }
    for b in &out.boxes {
        println!("  out: cy {:>5.1} h {:>4.1}", b.center_y, b.height);
    }
    println!("removed {removed}, clipped {clipped}");
    Ok(())
}
