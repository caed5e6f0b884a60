//! Evaluation reports: per-image metric rows, per-condition aggregates and
//! t-tests between neighbouring conditions.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{rows_to_csv, welch_t_test, MetricRow, TTestResult};

/// `image_id` used by aggregate and t-test rows.
pub const ALL_IMAGES: &str = "*";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Aggregate {
    pub metric: String,
    pub variant: String,
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single image.
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TTestRow {
    pub metric: String,
    pub a: String,
    pub b: String,
    /// Absent when both conditions have zero variance.
    pub result: Option<TTestResult>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EvalReport {
    pub images: Vec<MetricRow>,
    /// Dataset-level values not derived from per-image rows.
    pub summary: Vec<MetricRow>,
    pub aggregates: Vec<Aggregate>,
    pub ttests: Vec<TTestRow>,
}

fn distinct<'a>(it: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for s in it {
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

impl EvalReport {
    /// Builds aggregates and t-tests from per-image rows. Metrics and
    /// conditions (variants) keep their first-appearance order; each
    /// condition is tested against the one before it.
    pub fn from_rows(images: Vec<MetricRow>) -> Self {
        let mut aggregates = Vec::new();
        let mut ttests = Vec::new();
        for metric in distinct(images.iter().map(|r| r.metric.as_str())) {
            let variants = distinct(images.iter().filter(|r| r.metric == metric).map(|r| r.variant.as_str()));
            let values = |variant: &str| -> Vec<f64> {
                images
                    .iter()
                    .filter(|r| r.metric == metric && r.variant == variant)
                    .map(|r| r.value)
                    .collect()
            };
            for &v in &variants {
                let vals = values(v);
                let (mean, std) = mean_std(&vals);
                aggregates.push(Aggregate {
                    metric: metric.to_string(),
                    variant: v.to_string(),
                    count: vals.len(),
                    mean,
                    std,
                });
            }
            for pair in variants.windows(2) {
                let result = match welch_t_test(&values(pair[0]), &values(pair[1])) {
                    Ok(r) => Some(r),
                    Err(Error::ZeroVariance | Error::TooFewSamples { .. }) => None,
                    Err(e) => unreachable!("t-test: {e}"),
                };
                ttests.push(TTestRow {
                    metric: metric.to_string(),
                    a: pair[0].to_string(),
                    b: pair[1].to_string(),
                    result,
                });
            }
        }
        EvalReport { images, summary: Vec::new(), aggregates, ttests }
    }

    pub fn aggregate(&self, metric: &str, variant: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.metric == metric && a.variant == variant)
    }

    /// All rows in the long `image_id,metric,variant,value` layout. Aggregates
    /// use metric `<name>_mean` / `<name>_std`, t-tests `<name>_t`, `_df`,
    /// `_p` with variant `a~b`.
    pub fn long_rows(&self) -> Vec<MetricRow> {
        let mut rows = self.images.clone();
        rows.extend(self.summary.iter().cloned());
        for a in &self.aggregates {
            rows.push(MetricRow::new(ALL_IMAGES, format!("{}_mean", a.metric), &a.variant, a.mean));
            rows.push(MetricRow::new(ALL_IMAGES, format!("{}_std", a.metric), &a.variant, a.std));
        }
        for t in &self.ttests {
            if let Some(r) = &t.result {
                let variant = format!("{}~{}", t.a, t.b);
                rows.push(MetricRow::new(ALL_IMAGES, format!("{}_t", t.metric), &variant, r.t_statistic));
                rows.push(MetricRow::new(ALL_IMAGES, format!("{}_df", t.metric), &variant, r.degrees_of_freedom));
                rows.push(MetricRow::new(ALL_IMAGES, format!("{}_p", t.metric), &variant, r.p_value));
            }
        }
        rows
    }

    pub fn to_csv(&self) -> Result<String> {
        rows_to_csv(&self.long_rows())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()?).map_err(|e| Error::io(path, e))
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}
