//! AP per class and the three mAP variants on a small hand-made example.

use emistrip::metrics::{average_precision, mean_ap};
use emistrip::{AnnotationSet, BoundingBox, MapVariant};

fn main() -> anyhow::Result<()> {
    let mut truth = AnnotationSet::new(1, "street.ppm", 200, 100);
    truth.boxes = vec![
        BoundingBox::from_top_left(10.0, 10.0, 40.0, 60.0, 0),
        BoundingBox::from_top_left(100.0, 20.0, 30.0, 50.0, 0),
        BoundingBox::from_top_left(150.0, 40.0, 20.0, 20.0, 1),
    ];
    let mut dets = AnnotationSet::new(1, "street.ppm", 200, 100);
    dets.boxes = vec![
        BoundingBox::from_top_left(12.0, 12.0, 40.0, 58.0, 0).with_score(0.9),
        BoundingBox::from_top_left(60.0, 60.0, 20.0, 20.0, 0).with_score(0.8),
        BoundingBox::from_top_left(104.0, 28.0, 30.0, 50.0, 0).with_score(0.6),
        BoundingBox::from_top_left(150.0, 40.0, 20.0, 20.0, 1).with_score(0.7),
    ];
    let ap = average_precision(std::slice::from_ref(&dets), std::slice::from_ref(&truth), 0.5)?;
    for (class, v) in &ap.per_class {
        println!("class {class}: AP50 = {v:.4}");
    }
    for variant in MapVariant::ALL {
        println!("{:>8} = {:.4}", variant.name(), mean_ap(&[dets.clone()], &[truth.clone()], variant)?);
    }
    Ok(())
}
