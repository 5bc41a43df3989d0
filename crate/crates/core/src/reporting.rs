//! Plot data for fit diagnostics: CDF overlays, density histograms and Q-Q plots.
//!
//! Nothing is rendered here. Each series is one or two column tables that
//! any plotting tool can read as CSV.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::distributions::DurationModel;
use crate::error::{Error, Result};

pub const GRID_POINTS: usize = 256;
/// Upper end of the model-curve grid, as a model quantile.
pub const GRID_UPPER_P: f64 = 0.999;
const MAX_BINS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    CdfOverlay,
    DensityHistogram,
    #[serde(rename = "qq")]
    QQ,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinRule {
    FreedmanDiaconis,
    Sturges,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

/// Named columns of equal length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    columns: Vec<Column>,
}

impl Table {
    pub fn new(columns: Vec<(&str, Vec<f64>)>) -> Result<Self> {
        if let Some(len) = columns.first().map(|c| c.1.len()) {
            if let Some(bad) = columns.iter().find(|c| c.1.len() != len) {
                return Err(Error::Domain(format!(
                    "column `{}` has {} values, expected {len}",
                    bad.0,
                    bad.1.len()
                )));
            }
        }
        Ok(Self {
            columns: columns
                .into_iter()
                .map(|(name, values)| Column {
                    name: name.to_string(),
                    values,
                })
                .collect(),
        })
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|c| c.name == name).map(|c| c.values.as_slice())
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, |c| c.values.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        for i in 0..self.len() {
            w.write_record(self.columns.iter().map(|c| c.values[i].to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub kind: PlotKind,
    pub model: DurationModel,
    /// Points derived from the data (paired with the model where applicable).
    pub data: Table,
    /// Model curve on a regular grid, if the plot has one.
    pub model_curve: Option<Table>,
    pub bin_rule: Option<BinRule>,
}

impl PlotSeries {
    /// Writes the data table to `path` and any model curve next to it as
    /// `<stem>.model.csv`. Returns the paths written.
    pub fn write_files(&self, path: &Path) -> Result<Vec<PathBuf>> {
        let mut written = vec![path.to_path_buf()];
        self.data.write_csv(create(path)?)?;
        if let Some(curve) = &self.model_curve {
            let p = model_curve_path(path);
            curve.write_csv(create(&p)?)?;
            written.push(p);
        }
        Ok(written)
    }
}

fn create(path: &Path) -> Result<std::fs::File> {
    std::fs::File::create(path).map_err(|source| Error::File {
        path: path.display().to_string(),
        source,
    })
}

pub fn model_curve_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.model.csv"))
}

/// Q-Q points `(quantile((i − 0.5)/n), x₍ᵢ₎)` with Hazen plotting positions.
pub fn qq_points(model: &DurationModel, data: &Dataset) -> Result<PlotSeries> {
    data.require_nonempty()?;
    let sorted = data.sorted();
    let n = sorted.len() as f64;
    let theoretical = (0..sorted.len())
        .map(|i| model.quantile((i as f64 + 0.5) / n))
        .collect::<Result<Vec<_>>>()?;
    Ok(PlotSeries {
        kind: PlotKind::QQ,
        model: *model,
        data: Table::new(vec![("theoretical_q", theoretical), ("empirical_q", sorted)])?,
        model_curve: None,
        bin_rule: None,
    })
}

fn model_grid(model: &DurationModel) -> Result<Vec<f64>> {
    let mut hi = model.quantile(GRID_UPPER_P)?;
    let mut lo = 0.0;
    if hi <= 0.0 {
        lo = model.quantile(1.0 - GRID_UPPER_P)?;
        hi = hi.max(lo + 1.0);
    }
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    Ok((0..GRID_POINTS).map(|i| lo + step * i as f64).collect())
}

/// Linear-interpolation sample quantile of sorted data.
fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Density-normalized histogram plus the model pdf on a regular grid.
///
/// Bin width follows Freedman-Diaconis, `2·IQR·n^(−1/3)`, falling back to
/// Sturges' `⌈log₂ n⌉ + 1` bins when the IQR is zero.
pub fn density_histogram(model: &DurationModel, data: &Dataset) -> Result<PlotSeries> {
    if data.n() < 2 {
        return Err(Error::Domain(format!(
            "histogram of `{}` needs at least two samples",
            data.label
        )));
    }
    let sorted = data.sorted();
    let n = sorted.len();
    let (min, max) = (sorted[0], sorted[n - 1]);
    let iqr = sorted_quantile(&sorted, 0.75) - sorted_quantile(&sorted, 0.25);
    let (lo, width, bins, rule) = if iqr > 0.0 {
        let w = 2.0 * iqr * (n as f64).powf(-1.0 / 3.0);
        let bins = (((max - min) / w).ceil() as usize).clamp(1, MAX_BINS);
        let w = w.max((max - min) / bins as f64);
        (min, w, bins, BinRule::FreedmanDiaconis)
    } else {
        let bins = (n as f64).log2().ceil() as usize + 1;
        let (lo, hi) = if max > min { (min, max) } else { (min - 0.5, max + 0.5) };
        (lo, (hi - lo) / bins as f64, bins, BinRule::Sturges)
    };
    let mut counts = vec![0usize; bins];
    for &x in &sorted {
        let j = (((x - lo) / width).floor() as usize).min(bins - 1);
        counts[j] += 1;
    }
    let left: Vec<f64> = (0..bins).map(|j| lo + width * j as f64).collect();
    let right: Vec<f64> = left.iter().map(|l| l + width).collect();
    let center: Vec<f64> = left.iter().map(|l| l + 0.5 * width).collect();
    let density: Vec<f64> = counts.iter().map(|&c| c as f64 / (n as f64 * width)).collect();
    let grid = model_grid(model)?;
    let pdf: Vec<f64> = grid.iter().map(|&x| model.pdf(x)).collect();
    Ok(PlotSeries {
        kind: PlotKind::DensityHistogram,
        model: *model,
        data: Table::new(vec![
            ("bin_left", left),
            ("bin_right", right),
            ("bin_center", center),
            ("density", density),
        ])?,
        model_curve: Some(Table::new(vec![("x", grid), ("pdf", pdf)])?),
        bin_rule: Some(rule),
    })
}

/// Empirical cdf steps `(x₍ᵢ₎, i/n)` plus the model cdf on a regular grid.
pub fn cdf_overlay(model: &DurationModel, data: &Dataset) -> Result<PlotSeries> {
    data.require_nonempty()?;
    let sorted = data.sorted();
    let n = sorted.len() as f64;
    let ecdf: Vec<f64> = (1..=sorted.len()).map(|i| i as f64 / n).collect();
    let grid = model_grid(model)?;
    let cdf: Vec<f64> = grid.iter().map(|&x| model.cdf(x)).collect();
    Ok(PlotSeries {
        kind: PlotKind::CdfOverlay,
        model: *model,
        data: Table::new(vec![("x", sorted), ("ecdf", ecdf)])?,
        model_curve: Some(Table::new(vec![("x", grid), ("cdf", cdf)])?),
        bin_rule: None,
    })
}
