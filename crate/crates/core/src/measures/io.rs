use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{DiscreteMeasure, WeightPolicy};
use crate::error::{EgwError, Result};

/// On-disk JSON layout of a measure.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MeasureFile {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    #[serde(default)]
    pub raw_weights: bool,
}

impl MeasureFile {
    pub fn from_measure(mu: &DiscreteMeasure) -> Self {
        Self {
            dim: mu.dim(),
            points: mu.points().outer_iter().map(|r| r.to_vec()).collect(),
            weights: mu.weights().to_vec(),
            raw_weights: false,
        }
    }

    pub fn into_measure(self, policy: WeightPolicy) -> Result<DiscreteMeasure> {
        let n = self.points.len();
        if let Some((i, p)) = self
            .points
            .iter()
            .enumerate()
            .find(|(_, p)| p.len() != self.dim)
        {
            return Err(EgwError::Parse(format!(
                "point {i} has {} coordinates, expected dim = {}",
                p.len(),
                self.dim
            )));
        }
        let flat: Vec<f64> = self.points.into_iter().flatten().collect();
        let points = Array2::from_shape_vec((n, self.dim), flat)
            .map_err(|e| EgwError::Parse(e.to_string()))?;
        let policy = WeightPolicy {
            renormalize: policy.renormalize || self.raw_weights,
            ..policy
        };
        DiscreteMeasure::with_policy(points, Array1::from(self.weights), policy)
    }
}

pub fn parse_json(text: &str, policy: WeightPolicy) -> Result<DiscreteMeasure> {
    let file: MeasureFile =
        serde_json::from_str(text).map_err(|e| EgwError::Parse(e.to_string()))?;
    file.into_measure(policy)
}

/// CSV with header `w,x1,...,xd` and one atom per row.
pub fn parse_csv(text: &str, policy: WeightPolicy) -> Result<DiscreteMeasure> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| EgwError::Parse(e.to_string()))?
        .clone();
    if headers.len() < 2 || &headers[0] != "w" {
        return Err(EgwError::Parse(
            "csv header must be w,x1,...,xd".to_string(),
        ));
    }
    let d = headers.len() - 1;
    let mut weights = Vec::new();
    let mut coords = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| EgwError::Parse(e.to_string()))?;
        if record.len() != d + 1 {
            return Err(EgwError::Parse(format!(
                "row {row} has {} fields, expected {}",
                record.len(),
                d + 1
            )));
        }
        for (k, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| EgwError::Parse(format!("row {row}: cannot parse {field:?}")))?;
            if k == 0 {
                weights.push(v);
            } else {
                coords.push(v);
            }
        }
    }
    let points = Array2::from_shape_vec((weights.len(), d), coords)
        .map_err(|e| EgwError::Parse(e.to_string()))?;
    DiscreteMeasure::with_policy(points, Array1::from(weights), policy)
}

/// Load a measure from `.json` or `.csv` (by extension; anything else is tried as JSON).
pub fn load_measure(path: impl AsRef<Path>, policy: WeightPolicy) -> Result<DiscreteMeasure> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let is_csv = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        parse_csv(&text, policy)
    } else {
        parse_json(&text, policy)
    }
}

pub fn save_json(mu: &DiscreteMeasure, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(&MeasureFile::from_measure(mu))
        .map_err(|e| EgwError::Parse(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}
