//! Image and detection quality metrics, and the tabular report they feed.

mod detection;
mod ssim;
mod ttest;

pub use detection::{
    average_precision, average_precision_with, iou, mean_ap, mean_ap_with, ApResult, Interpolation,
    MapVariant, PrCurve,
};
pub use ssim::{ssim, ssim_raw, ssim_rgb, SsimParams};
pub use ttest::{student_t_two_sided, welch_t_test, TTestResult};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One long-form report row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub image_id: String,
    pub metric: String,
    pub variant: String,
    pub value: f64,
}

impl MetricRow {
    pub fn new(image_id: impl Into<String>, metric: impl Into<String>, variant: impl Into<String>, value: f64) -> Self {
        MetricRow { image_id: image_id.into(), metric: metric.into(), variant: variant.into(), value }
    }
}

/// RFC 4180 with LF endings and a header row; floats print in shortest
/// round-trip form.
pub fn rows_to_csv(rows: &[MetricRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record(["image_id", "metric", "variant", "value"])?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn rows_from_csv(text: &str) -> Result<Vec<MetricRow>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(Into::into)
}
