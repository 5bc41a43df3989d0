//! Goodness-of-fit statistics and ranked comparison of the candidate families.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::distributions::{DurationModel, Family};
use crate::error::{Error, Result};
use crate::fitting::{fit_mle, FitResult};
use crate::par::Execution;

/// Bounds applied to cdf values inside the logarithms of the AD statistic.
pub const AD_CLAMP_LOW: f64 = 1e-300;
pub const AD_CLAMP_HIGH: f64 = 1.0 - 1e-16;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Anderson-Darling A² of `data` against a fully specified `model`.
///
/// No small-sample correction is applied. Lower values indicate a better fit.
pub fn anderson_darling(model: &DurationModel, data: &Dataset) -> Result<f64> {
    data.require_nonempty()?;
    let u: Vec<f64> = data.sorted().into_iter().map(|x| model.cdf(x)).collect();
    Ok(ad_sorted_uniform(&u))
}

/// A² of ascending probability-integral-transform values against Uniform(0, 1).
pub fn ad_sorted_uniform(u: &[f64]) -> f64 {
    let n = u.len();
    let nf = n as f64;
    let clamp = |v: f64| v.clamp(AD_CLAMP_LOW, AD_CLAMP_HIGH);
    let s: f64 = (0..n)
        .map(|i| {
            let lo = clamp(u[i]).ln();
            let hi = (1.0 - clamp(u[n - 1 - i])).ln();
            (2 * i + 1) as f64 * (lo + hi)
        })
        .sum();
    -nf - s / nf
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InformationCriteria {
    pub aic: f64,
    pub bic: f64,
}

impl InformationCriteria {
    /// AIC = 2k − 2 lnL, BIC = k ln n − 2 lnL.
    pub fn new(log_likelihood: f64, k: usize, n: usize) -> Self {
        let k = k as f64;
        Self {
            aic: 2.0 * k - 2.0 * log_likelihood,
            bic: k * (n as f64).ln() - 2.0 * log_likelihood,
        }
    }
}

pub fn information_criteria(fit: &FitResult, n: usize) -> InformationCriteria {
    InformationCriteria::new(fit.log_likelihood, fit.k, n)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub fit: FitResult,
    pub ad: f64,
    pub aic: f64,
    pub bic: f64,
    pub n: usize,
}

impl FitReport {
    pub fn family(&self) -> Family {
        self.fit.model.family()
    }

    pub fn value(&self, c: Criterion) -> f64 {
        match c {
            Criterion::Ad => self.ad,
            Criterion::Aic => self.aic,
            Criterion::Bic => self.bic,
        }
    }
}

/// Fits one family and evaluates all three criteria in-sample.
pub fn fit_report(family: Family, data: &Dataset) -> Result<FitReport> {
    let fit = fit_mle(family, data)?;
    let ic = information_criteria(&fit, data.n());
    let ad = anderson_darling(&fit.model, data)?;
    Ok(FitReport {
        fit,
        ad,
        aic: ic.aic,
        bic: ic.bic,
        n: data.n(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Ad,
    Aic,
    Bic,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::Ad, Criterion::Aic, Criterion::Bic];

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Ad => "ad",
            Criterion::Aic => "aic",
            Criterion::Bic => "bic",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub criterion: Criterion,
    /// Families sorted best (lowest) first.
    pub order: Vec<Family>,
    /// Set when two families share a criterion value; the fixed family order decided.
    pub tied: bool,
}

impl Ranking {
    pub fn selected(&self) -> Family {
        self.order[0]
    }

    /// Zero-based rank of `family`, if it was fitted.
    pub fn position(&self, family: Family) -> Option<usize> {
        self.order.iter().position(|&f| f == family)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Omitted {
    pub family: Family,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub label: String,
    pub n: usize,
    /// One report per fitted family, in fixed family order.
    pub reports: Vec<FitReport>,
    pub rankings: Vec<Ranking>,
    pub omitted: Vec<Omitted>,
}

impl ComparisonTable {
    pub fn ranking(&self, c: Criterion) -> &Ranking {
        self.rankings
            .iter()
            .find(|r| r.criterion == c)
            .expect("every criterion is ranked")
    }

    pub fn selected(&self, c: Criterion) -> Family {
        self.ranking(c).selected()
    }

    pub fn report(&self, family: Family) -> Option<&FitReport> {
        self.reports.iter().find(|r| r.family() == family)
    }

    /// Writes `family,ad,aic,bic,log_likelihood,converged,mu,sigma,shape,scale,rate`;
    /// parameters that do not belong to a family are left blank.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        const PARAMS: [&str; 5] = ["mu", "sigma", "shape", "scale", "rate"];
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["family", "ad", "aic", "bic", "log_likelihood", "converged"];
        header.extend(PARAMS);
        w.write_record(&header)?;
        for r in &self.reports {
            let fam = r.family();
            let mut row = vec![
                fam.to_string(),
                r.ad.to_string(),
                r.aic.to_string(),
                r.bic.to_string(),
                r.fit.log_likelihood.to_string(),
                r.fit.converged.to_string(),
            ];
            let names = fam.param_names();
            let vals = r.fit.model.values();
            for p in PARAMS {
                row.push(match names.iter().position(|&n| n == p) {
                    Some(i) => vals[i].to_string(),
                    None => String::new(),
                });
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Per-dataset report laid out as statistics-by-family plus rankings.
    pub fn to_report(&self) -> ComparisonReport {
        let statistics = self
            .reports
            .iter()
            .map(|r| {
                (
                    r.family(),
                    Statistics {
                        ad: r.ad,
                        aic: r.aic,
                        bic: r.bic,
                        log_likelihood: r.fit.log_likelihood,
                        converged: r.fit.converged,
                    },
                )
            })
            .collect();
        let parameters = self
            .reports
            .iter()
            .map(|r| {
                let names = r.family().param_names();
                let vals = r.fit.model.values();
                (r.family(), names.iter().zip(vals).map(|(n, v)| (n.to_string(), v)).collect())
            })
            .collect();
        ComparisonReport {
            schema_version: REPORT_SCHEMA_VERSION,
            dataset: self.label.clone(),
            n: self.n,
            statistics,
            parameters,
            rankings: self.rankings.iter().map(|r| (r.criterion, r.order.clone())).collect(),
            selected: self.rankings.iter().map(|r| (r.criterion, r.selected())).collect(),
            ties: self.rankings.iter().map(|r| (r.criterion, r.tied)).collect(),
            omitted: self.omitted.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Statistics {
    pub ad: f64,
    pub aic: f64,
    pub bic: f64,
    pub log_likelihood: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schema_version: u32,
    pub dataset: String,
    pub n: usize,
    pub statistics: BTreeMap<Family, Statistics>,
    pub parameters: BTreeMap<Family, BTreeMap<String, f64>>,
    pub rankings: BTreeMap<Criterion, Vec<Family>>,
    pub selected: BTreeMap<Criterion, Family>,
    pub ties: BTreeMap<Criterion, bool>,
    pub omitted: Vec<Omitted>,
}

fn rank(reports: &[FitReport], criterion: Criterion) -> Ranking {
    let mut order: Vec<(f64, Family)> = reports.iter().map(|r| (r.value(criterion), r.family())).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let tied = order.windows(2).any(|w| w[0].0 == w[1].0);
    Ranking {
        criterion,
        order: order.into_iter().map(|(_, f)| f).collect(),
        tied,
    }
}

pub fn compare_models(data: &Dataset, families: &[Family]) -> Result<ComparisonTable> {
    compare_models_with(data, families, Execution::default())
}

/// Fits every requested family, scores it and ranks per criterion.
///
/// Families that cannot be fitted (support violation, degenerate data) are
/// omitted with a reason. It is an error only if none remain.
pub fn compare_models_with(data: &Dataset, families: &[Family], exec: Execution) -> Result<ComparisonTable> {
    data.require_nonempty()?;
    let mut fams = families.to_vec();
    fams.sort();
    fams.dedup();
    if fams.is_empty() {
        return Err(Error::Config("no families requested".into()));
    }
    let results = exec.map_slice(&fams, |&f| (f, fit_report(f, data)));
    let mut reports = Vec::new();
    let mut omitted = Vec::new();
    for (family, res) in results {
        match res {
            Ok(r) => reports.push(r),
            Err(e) => omitted.push(Omitted {
                family,
                reason: e.to_string(),
            }),
        }
    }
    if reports.is_empty() {
        let reasons: Vec<String> = omitted.iter().map(|o| format!("{}: {}", o.family, o.reason)).collect();
        return Err(Error::Domain(format!(
            "no family could be fitted to `{}` ({})",
            data.label,
            reasons.join("; ")
        )));
    }
    let rankings = Criterion::ALL.iter().map(|&c| rank(&reports, c)).collect();
    Ok(ComparisonTable {
        label: data.label.clone(),
        n: data.n(),
        reports,
        rankings,
        omitted,
    })
}
