//! Labeled collections of duration samples and their CSV input.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A named collection of durations in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub label: String,
    samples: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset, rejecting non-finite samples.
    pub fn new(label: impl Into<String>, samples: Vec<f64>) -> Result<Self> {
        let label = label.into();
        if let Some(bad) = samples.iter().find(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("dataset `{label}` contains non-finite sample {bad}")));
        }
        Ok(Self { label, samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Ascending copy of the samples.
    pub fn sorted(&self) -> Vec<f64> {
        let mut v = self.samples.clone();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Returns a copy with every sample multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            label: self.label.clone(),
            samples: self.samples.iter().map(|x| x * c).collect(),
        }
    }

    pub(crate) fn require_nonempty(&self) -> Result<()> {
        if self.samples.is_empty() {
            Err(Error::EmptyDataset(self.label.clone()))
        } else {
            Ok(())
        }
    }

    /// Reads one column, addressed by header name, from a CSV file.
    /// Blank cells are skipped.
    pub fn from_csv(path: impl AsRef<Path>, column: &str) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::File {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_csv_reader(file, column, &path.display().to_string())
    }

    /// Header names of a CSV file, in order.
    pub fn csv_columns(path: impl AsRef<Path>) -> Result<Vec<String>> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::File {
            path: path.display().to_string(),
            source,
        })?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        Ok(rdr.headers()?.iter().map(String::from).collect())
    }

    pub fn from_csv_reader<R: std::io::Read>(reader: R, column: &str, label: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let idx = headers.iter().position(|h| h == column).ok_or_else(|| {
            Error::Parse(format!(
                "column `{column}` not found in {label}; available: {}",
                headers.iter().collect::<Vec<_>>().join(", ")
            ))
        })?;
        let mut samples = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let cell = rec.get(idx).unwrap_or("");
            if cell.is_empty() {
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::Parse(format!("{label}: row {} column `{column}`: `{cell}` is not a number", row + 2)))?;
            samples.push(v);
        }
        Self::new(format!("{label}:{column}"), samples)
    }
}

/// Sample mean, n-denominator standard deviation, minimum and maximum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

pub fn empirical_summary(data: &Dataset) -> Result<Summary> {
    if data.n() < 2 {
        return Err(Error::Domain(format!(
            "summary of `{}` needs at least two samples, got {}",
            data.label,
            data.n()
        )));
    }
    let xs = data.samples();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let (min, max) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    Ok(Summary {
        mean,
        sd: var.sqrt(),
        min,
        max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        assert!(Dataset::new("x", vec![1.0, f64::NAN]).is_err());
        assert!(Dataset::new("x", vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn summary_of_one_two_three() {
        let s = empirical_summary(&Dataset::new("d", vec![1.0, 2.0, 3.0]).unwrap()).unwrap();
        assert_eq!(s.mean, 2.0);
        assert!((s.sd - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!((s.min, s.max), (1.0, 3.0));
    }

    #[test]
    fn summary_of_constant_data_has_zero_sd() {
        let s = empirical_summary(&Dataset::new("d", vec![4.0; 6]).unwrap()).unwrap();
        assert_eq!(s.sd, 0.0);
    }

    #[test]
    fn summary_needs_two_samples() {
        assert!(empirical_summary(&Dataset::new("d", vec![4.0]).unwrap()).is_err());
    }

    #[test]
    fn csv_column_by_name() {
        let text = "session_id,order1_s,order2_s\na,12.5,3\nb,7,\n";
        let d = Dataset::from_csv_reader(text.as_bytes(), "order1_s", "mem").unwrap();
        assert_eq!(d.samples(), &[12.5, 7.0]);
        let d = Dataset::from_csv_reader(text.as_bytes(), "order2_s", "mem").unwrap();
        assert_eq!(d.samples(), &[3.0]);
        let err = Dataset::from_csv_reader(text.as_bytes(), "nope", "mem").unwrap_err();
        assert!(err.to_string().contains("order1_s"));
    }

    #[test]
    fn csv_header_names() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "x, y\n1,2\n").unwrap();
        assert_eq!(Dataset::csv_columns(&path).unwrap(), vec!["x", "y"]);
        let missing = Dataset::csv_columns(dir.path().join("none.csv")).unwrap_err();
        assert!(missing.to_string().contains("none.csv"));
    }
}
