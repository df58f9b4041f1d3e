//! Turning dated periods into key-year class labels.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::Result;
use serde::{Deserialize, Serialize};

use scriptdate::manifest::{DatasetManifest, Sample};

/// A document dated to a span of years (inclusive; BCE negative).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub id: String,
    pub path: PathBuf,
    pub start_year: i32,
    pub end_year: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub writer: Option<String>,
}

/// Median year of an inclusive span, rounded toward the earlier year.
pub fn median_year(start: i32, end: i32) -> i32 {
    let (a, b) = if start <= end { (start, end) } else { (end, start) };
    (a + b).div_euclid(2)
}

/// Labels each record with its period's median year and drops classes with
/// fewer than `min_per_class` documents. Returns the manifest and the dropped years.
pub fn refine_labels(records: &[PeriodRecord], min_per_class: usize) -> Result<(DatasetManifest, Vec<i32>)> {
    let mut counts: BTreeMap<i32, usize> = BTreeMap::new();
    for r in records {
        *counts.entry(median_year(r.start_year, r.end_year)).or_default() += 1;
    }
    let dropped: Vec<i32> = counts.iter().filter(|(_, &n)| n < min_per_class).map(|(&y, _)| y).collect();
    let entries = records
        .iter()
        .filter_map(|r| {
            let year = median_year(r.start_year, r.end_year);
            (!dropped.contains(&year)).then(|| Sample {
                id: r.id.clone(),
                path: r.path.clone(),
                label_year: year,
                writer: r.writer.clone(),
                source_id: None,
                seed: None,
            })
        })
        .collect();
    Ok((DatasetManifest::new(entries)?, dropped))
}
