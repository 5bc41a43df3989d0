//! The four candidate duration families: evaluation, inversion and sampling.
//!
//! Parameterizations: Normal (mean, sd), Weibull (shape, scale), Gamma
//! (shape, rate) and Log-Normal (mean and sd of the logarithm). All times
//! are in seconds.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::special::{gamma_p, gamma_q, ln_gamma, norm_cdf, norm_inv, norm_sf};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Deterministic generator used for every seeded draw in the crate.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Normal,
    Weibull,
    Gamma,
    LogNormal,
}

impl Family {
    /// Fixed order, also used to break ranking ties.
    pub const ALL: [Family; 4] = [Family::Normal, Family::Weibull, Family::Gamma, Family::LogNormal];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Normal => "normal",
            Family::Weibull => "weibull",
            Family::Gamma => "gamma",
            Family::LogNormal => "lognormal",
        }
    }

    /// Names of the two parameters in serialized form.
    pub fn param_names(self) -> [&'static str; 2] {
        match self {
            Family::Normal | Family::LogNormal => ["mu", "sigma"],
            Family::Weibull => ["shape", "scale"],
            Family::Gamma => ["shape", "rate"],
        }
    }

    /// True for the families supported on `x > 0` only.
    pub fn positive_support(self) -> bool {
        !matches!(self, Family::Normal)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" => Ok(Family::Normal),
            "weibull" => Ok(Family::Weibull),
            "gamma" => Ok(Family::Gamma),
            "lognormal" | "log-normal" => Ok(Family::LogNormal),
            other => Err(Error::Parse(format!(
                "unknown family `{other}` (expected normal, weibull, gamma or lognormal)"
            ))),
        }
    }
}

/// Raw parameters of one family. Use [`DurationModel::new`] to validate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum FamilyParams {
    Normal { mu: f64, sigma: f64 },
    Weibull { shape: f64, scale: f64 },
    Gamma { shape: f64, rate: f64 },
    LogNormal { mu: f64, sigma: f64 },
}

impl FamilyParams {
    pub fn family(&self) -> Family {
        match self {
            FamilyParams::Normal { .. } => Family::Normal,
            FamilyParams::Weibull { .. } => Family::Weibull,
            FamilyParams::Gamma { .. } => Family::Gamma,
            FamilyParams::LogNormal { .. } => Family::LogNormal,
        }
    }

    /// Parameters in `Family::param_names` order.
    pub fn values(&self) -> [f64; 2] {
        match *self {
            FamilyParams::Normal { mu, sigma } | FamilyParams::LogNormal { mu, sigma } => [mu, sigma],
            FamilyParams::Weibull { shape, scale } => [shape, scale],
            FamilyParams::Gamma { shape, rate } => [shape, rate],
        }
    }

    pub fn from_values(family: Family, v: [f64; 2]) -> Self {
        match family {
            Family::Normal => FamilyParams::Normal { mu: v[0], sigma: v[1] },
            Family::Weibull => FamilyParams::Weibull { shape: v[0], scale: v[1] },
            Family::Gamma => FamilyParams::Gamma { shape: v[0], rate: v[1] },
            Family::LogNormal => FamilyParams::LogNormal { mu: v[0], sigma: v[1] },
        }
    }
}

/// A validated duration distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FamilyParams", into = "FamilyParams")]
pub struct DurationModel {
    params: FamilyParams,
}

fn check(family: Family, name: &'static str, value: f64, positive: bool) -> Result<()> {
    let ok = value.is_finite() && (!positive || value > 0.0);
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            family,
            name,
            value,
            requirement: if positive { "finite and > 0" } else { "finite" },
        })
    }
}

impl DurationModel {
    pub fn new(params: FamilyParams) -> Result<Self> {
        let family = params.family();
        let [a, b] = params.values();
        let [na, nb] = family.param_names();
        // location parameters may be any finite value, everything else must be positive
        check(family, na, a, !matches!(family, Family::Normal | Family::LogNormal))?;
        check(family, nb, b, true)?;
        Ok(Self { params })
    }

    pub fn normal(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(FamilyParams::Normal { mu, sigma })
    }

    pub fn weibull(shape: f64, scale: f64) -> Result<Self> {
        Self::new(FamilyParams::Weibull { shape, scale })
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        Self::new(FamilyParams::Gamma { shape, rate })
    }

    pub fn lognormal(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(FamilyParams::LogNormal { mu, sigma })
    }

    pub fn from_values(family: Family, v: [f64; 2]) -> Result<Self> {
        Self::new(FamilyParams::from_values(family, v))
    }

    pub fn family(&self) -> Family {
        self.params.family()
    }

    pub fn params(&self) -> FamilyParams {
        self.params
    }

    pub fn values(&self) -> [f64; 2] {
        self.params.values()
    }

    /// Log density; `-inf` outside the support.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        match self.params {
            FamilyParams::Normal { mu, sigma } => {
                let z = (x - mu) / sigma;
                -0.5 * z * z - sigma.ln() - LN_SQRT_2PI
            }
            _ if x <= 0.0 => f64::NEG_INFINITY,
            FamilyParams::Weibull { shape, scale } => {
                let r = x / scale;
                shape.ln() - scale.ln() + (shape - 1.0) * r.ln() - r.powf(shape)
            }
            FamilyParams::Gamma { shape, rate } => {
                shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - ln_gamma(shape)
            }
            FamilyParams::LogNormal { mu, sigma } => {
                let lx = x.ln();
                let z = (lx - mu) / sigma;
                -0.5 * z * z - lx - sigma.ln() - LN_SQRT_2PI
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.params {
            FamilyParams::Normal { mu, sigma } => norm_cdf((x - mu) / sigma),
            _ if x <= 0.0 => 0.0,
            FamilyParams::Weibull { shape, scale } => -(-(x / scale).powf(shape)).exp_m1(),
            FamilyParams::Gamma { shape, rate } => gamma_p(shape, rate * x),
            FamilyParams::LogNormal { mu, sigma } => norm_cdf((x.ln() - mu) / sigma),
        }
    }

    /// Survival function `1 - cdf(x)`, accurate in the right tail.
    pub fn sf(&self, x: f64) -> f64 {
        match self.params {
            FamilyParams::Normal { mu, sigma } => norm_sf((x - mu) / sigma),
            _ if x <= 0.0 => 1.0,
            FamilyParams::Weibull { shape, scale } => (-(x / scale).powf(shape)).exp(),
            FamilyParams::Gamma { shape, rate } => gamma_q(shape, rate * x),
            FamilyParams::LogNormal { mu, sigma } => norm_sf((x.ln() - mu) / sigma),
        }
    }

    /// Inverse cdf for `p` in `(0, 1)`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("quantile probability {p} is not in (0, 1)")));
        }
        Ok(match self.params {
            FamilyParams::Normal { mu, sigma } => mu + sigma * norm_inv(p),
            FamilyParams::LogNormal { mu, sigma } => (mu + sigma * norm_inv(p)).exp(),
            FamilyParams::Weibull { shape, scale } => scale * (-(-p).ln_1p()).powf(1.0 / shape),
            FamilyParams::Gamma { shape, rate } => gamma_quantile(shape, p) / rate,
        })
    }

    pub fn mean(&self) -> f64 {
        match self.params {
            FamilyParams::Normal { mu, .. } => mu,
            FamilyParams::Weibull { shape, scale } => scale * ln_gamma(1.0 + 1.0 / shape).exp(),
            FamilyParams::Gamma { shape, rate } => shape / rate,
            FamilyParams::LogNormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
        }
    }

    /// One draw from the model.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.params {
            FamilyParams::Normal { mu, sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                mu + sigma * z
            }
            FamilyParams::LogNormal { mu, sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                (mu + sigma * z).exp()
            }
            FamilyParams::Weibull { shape, scale } => {
                // 1 - u lies in (0, 1]
                let u: f64 = rng.random();
                scale * (-(1.0 - u).ln()).powf(1.0 / shape)
            }
            FamilyParams::Gamma { shape, rate } => marsaglia_tsang(shape, rng) / rate,
        }
    }

    /// `n` draws from a generator seeded with `seed`.
    pub fn sample(&self, seed: u64, n: usize) -> Dataset {
        let mut rng = seeded_rng(seed);
        let samples = (0..n).map(|_| self.draw(&mut rng)).collect();
        Dataset::new(format!("{self} seed={seed}"), samples).expect("draws from a valid model are finite")
    }

    /// Sum of log densities over the dataset.
    pub fn log_likelihood(&self, data: &Dataset) -> Result<f64> {
        data.require_nonempty()?;
        Ok(data.samples().iter().map(|&x| self.ln_pdf(x)).sum())
    }

    /// Flat key-value form, e.g. `family=lognormal mu=3.85 sigma=0.62`.
    pub fn to_record(&self) -> String {
        let [a, b] = self.values();
        let [na, nb] = self.family().param_names();
        format!("family={} {na}={a} {nb}={b}", self.family())
    }

    /// Parses either the key-value record or the JSON object form.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if text.starts_with('{') {
            return Ok(serde_json::from_str(text)?);
        }
        let mut family = None;
        let mut fields: Vec<(String, f64)> = Vec::new();
        for tok in text.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("model record token `{tok}` is not key=value")))?;
            if k == "family" {
                family = Some(v.parse::<Family>()?);
            } else {
                let v: f64 = v
                    .parse()
                    .map_err(|_| Error::Parse(format!("model record field `{k}`: `{v}` is not a number")))?;
                fields.push((k.to_string(), v));
            }
        }
        let family = family.ok_or_else(|| Error::Parse("model record is missing `family=`".into()))?;
        let names = family.param_names();
        if let Some((k, _)) = fields.iter().find(|(k, _)| !names.contains(&k.as_str())) {
            return Err(Error::Parse(format!(
                "unknown field `{k}` for {family} (expected {} and {})",
                names[0], names[1]
            )));
        }
        let get = |name: &str| {
            fields
                .iter()
                .find(|(k, _)| k == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::Parse(format!("model record for {family} is missing `{name}`")))
        };
        Self::from_values(family, [get(names[0])?, get(names[1])?])
    }
}

impl TryFrom<FamilyParams> for DurationModel {
    type Error = Error;

    fn try_from(p: FamilyParams) -> Result<Self> {
        Self::new(p)
    }
}

impl From<DurationModel> for FamilyParams {
    fn from(m: DurationModel) -> Self {
        m.params
    }
}

impl fmt::Display for DurationModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_record())
    }
}

impl FromStr for DurationModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

/// Standard gamma variate with the given shape (unit rate).
fn marsaglia_tsang<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape < 1.0 {
        // boost: G(a) = G(a + 1) * U^(1/a)
        let u: f64 = rng.random();
        return marsaglia_tsang(shape + 1.0, rng) * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u: f64 = rng.random();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Quantile of the unit-rate gamma by safeguarded Newton on `ln x` inside a
/// cdf bracket. Working in log space keeps tiny lower-tail quantiles of
/// small shapes within reach of bisection.
fn gamma_quantile(shape: f64, p: f64) -> f64 {
    let resid = |t: f64| gamma_p(shape, t.exp()) - p;
    let mut hi = shape.max(1.0).ln();
    let mut lo = hi;
    let mut step = 1.0;
    while resid(hi) < 0.0 {
        lo = hi;
        hi += step;
        step *= 2.0;
    }
    if lo == hi {
        step = 1.0;
        lo = hi - step;
        while resid(lo) > 0.0 {
            hi = lo;
            step *= 2.0;
            lo -= step;
        }
    }
    // Wilson-Hilferty start, or the leading lower-tail term when it goes negative
    let z = norm_inv(p);
    let w = 1.0 / (9.0 * shape);
    let wh = shape * (1.0 - w + z * w.sqrt()).powi(3);
    let x0 = if wh > 0.0 {
        wh
    } else {
        ((p.ln() + ln_gamma(shape + 1.0)) / shape).exp()
    };
    let mut t = x0.ln();
    if !(t > lo && t < hi) {
        t = 0.5 * (lo + hi);
    }
    let unit = DurationModel {
        params: FamilyParams::Gamma { shape, rate: 1.0 },
    };
    for _ in 0..300 {
        let f = resid(t);
        if f.abs() <= 1e-15 * p {
            break;
        }
        if f < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let x = t.exp();
        let slope = unit.pdf(x) * x;
        let mut next = if slope > 0.0 { t - f / slope } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-15 * t.abs().max(1.0) {
            t = next;
            break;
        }
        t = next;
    }
    t.exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ln1() -> DurationModel {
        DurationModel::lognormal(3.85, 0.62).unwrap()
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(DurationModel::normal(1.0, 0.0).is_err());
        assert!(DurationModel::weibull(-1.0, 2.0).is_err());
        assert!(DurationModel::gamma(2.0, f64::NAN).is_err());
        assert!(DurationModel::lognormal(-3.0, 0.5).is_ok());
        assert!(DurationModel::normal(-3.0, 0.5).is_ok());
    }

    #[test]
    fn pdf_examples() {
        let m = ln1();
        // 1 / (x sigma sqrt(2 pi)) at the median
        let x = 3.85f64.exp();
        let want = 1.0 / (x * 0.62 * (2.0 * std::f64::consts::PI).sqrt());
        assert!((m.pdf(x) - want).abs() < 1e-15);
        assert!((m.pdf(x) - 0.013692559001722013).abs() < 1e-12);
        assert_eq!(DurationModel::gamma(2.18, 0.04).unwrap().pdf(-1.0), 0.0);
        let n = DurationModel::normal(60.04, 59.57).unwrap();
        let peak = 1.0 / (59.57 * (2.0 * std::f64::consts::PI).sqrt());
        assert!((n.pdf(60.04) - peak).abs() < 1e-15);
        assert!((n.pdf(60.04) - 0.006697).abs() < 1e-6);
    }

    #[test]
    fn positive_families_vanish_off_support() {
        for m in [
            DurationModel::weibull(0.5, 2.0).unwrap(),
            DurationModel::gamma(0.5, 2.0).unwrap(),
            ln1(),
        ] {
            assert_eq!(m.pdf(0.0), 0.0);
            assert_eq!(m.pdf(-3.0), 0.0);
            assert_eq!(m.cdf(0.0), 0.0);
        }
    }

    #[test]
    fn cdf_examples() {
        assert!((ln1().cdf(3.85f64.exp()) - 0.5).abs() < 1e-15);
        let w = DurationModel::weibull(1.30, 65.97).unwrap();
        assert!((w.cdf(65.97) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert_eq!(DurationModel::gamma(2.18, 0.04).unwrap().cdf(0.0), 0.0);
    }

    #[test]
    fn quantile_examples() {
        let m = ln1();
        assert!((m.quantile(0.5).unwrap() - 3.85f64.exp()).abs() < 1e-12);
        // z_0.75 = 0.67449 from mpmath
        let want = (3.85 + 0.62 * 0.6744897501960817f64).exp();
        assert!((m.quantile(0.75).unwrap() - want).abs() < 1e-10);
        assert!((m.quantile(0.75).unwrap() - 71.4).abs() < 0.01);
        let w = DurationModel::weibull(1.30, 65.97).unwrap();
        assert!((w.quantile(1.0 - (-1.0f64).exp()).unwrap() - 65.97).abs() < 1e-11);
    }

    #[test]
    fn quantile_rejects_closed_interval_ends() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(ln1().quantile(p), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn gamma_quantile_inverts_cdf_for_small_shape() {
        let m = DurationModel::gamma(0.05, 3.0).unwrap();
        for p in [1e-6, 0.01, 0.3, 0.9, 0.999] {
            let x = m.quantile(p).unwrap();
            assert!((m.cdf(x) - p).abs() < 1e-9 * p.max(1e-3), "p={p} x={x} cdf={}", m.cdf(x));
        }
    }

    #[test]
    fn sf_matches_cdf() {
        for m in [
            DurationModel::normal(3.0, 2.0).unwrap(),
            DurationModel::weibull(1.3, 65.97).unwrap(),
            DurationModel::gamma(2.18, 0.04).unwrap(),
            ln1(),
        ] {
            for x in [0.5, 10.0, 50.0, 200.0] {
                assert!((m.cdf(x) + m.sf(x) - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn log_likelihood_examples() {
        let m = ln1();
        let d = Dataset::new("one", vec![3.85f64.exp()]).unwrap();
        let ll = m.log_likelihood(&d).unwrap();
        assert!((ll - (-4.290902732261673)).abs() < 1e-12);
        let g = DurationModel::gamma(2.18, 0.04).unwrap();
        let d = Dataset::new("zero", vec![10.0, 0.0, 3.0]).unwrap();
        assert_eq!(g.log_likelihood(&d).unwrap(), f64::NEG_INFINITY);
        assert!(matches!(
            m.log_likelihood(&Dataset::new("e", vec![]).unwrap()),
            Err(Error::EmptyDataset(_))
        ));
    }

    #[test]
    fn log_likelihood_from_reported_aic() {
        // lnL = (2k - AIC) / 2 with AIC = 961.9, k = 2
        assert!(((2.0 * 2.0 - 961.9) / 2.0 - (-478.95f64)).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic() {
        for m in [
            DurationModel::normal(3.0, 2.0).unwrap(),
            DurationModel::weibull(1.3, 65.97).unwrap(),
            DurationModel::gamma(0.4, 0.04).unwrap(),
            ln1(),
        ] {
            assert_eq!(m.sample(17, 5), m.sample(17, 5));
            assert_ne!(m.sample(17, 5).samples(), m.sample(18, 5).samples());
        }
    }

    #[test]
    fn lognormal_sample_mean() {
        let d = ln1().sample(3, 100_000);
        let mean = d.samples().iter().sum::<f64>() / d.n() as f64;
        let want = (3.85 + 0.62f64 * 0.62 / 2.0).exp();
        assert!((want - 56.95).abs() < 0.01);
        assert!((mean / want - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn weibull_sample_scale_fraction() {
        let d = DurationModel::weibull(1.30, 65.97).unwrap().sample(4, 100_000);
        let frac = d.samples().iter().filter(|&&x| x <= 65.97).count() as f64 / d.n() as f64;
        assert!((frac - 0.6321).abs() < 0.005, "fraction {frac}");
    }

    #[test]
    fn gamma_sample_moments() {
        for (shape, rate) in [(2.18, 0.04), (0.3, 1.5), (11.88, 0.30)] {
            let d = DurationModel::gamma(shape, rate).unwrap().sample(5, 200_000);
            let n = d.n() as f64;
            let mean = d.samples().iter().sum::<f64>() / n;
            let var = d.samples().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            assert!((mean / (shape / rate) - 1.0).abs() < 0.01, "mean {mean}");
            assert!((var / (shape / rate / rate) - 1.0).abs() < 0.03, "var {var}");
        }
    }

    #[test]
    fn record_and_json_forms() {
        let m = ln1();
        assert_eq!(m.to_record(), "family=lognormal mu=3.85 sigma=0.62");
        assert_eq!(serde_json::to_string(&m).unwrap(), r#"{"family":"lognormal","mu":3.85,"sigma":0.62}"#);
        assert_eq!(DurationModel::parse("family=lognormal mu=3.85 sigma=0.62").unwrap(), m);
        assert_eq!(DurationModel::parse(r#"{"family":"lognormal","mu":3.85,"sigma":0.62}"#).unwrap(), m);
        let g: DurationModel = "family=gamma shape=2.18 rate=0.04".parse().unwrap();
        assert_eq!(g, DurationModel::gamma(2.18, 0.04).unwrap());
        let w: DurationModel = serde_json::from_str(r#"{"family":"weibull","shape":1.3,"scale":65.97}"#).unwrap();
        assert_eq!(w.family(), Family::Weibull);
    }

    #[test]
    fn record_rejects_bad_input() {
        assert!(DurationModel::parse("family=gamma shape=2.18").is_err());
        assert!(DurationModel::parse("family=gamma shape=2.18 scale=3").is_err());
        assert!(DurationModel::parse("family=cauchy mu=1 sigma=2").is_err());
        assert!(DurationModel::parse("mu=1 sigma=2").is_err());
        assert!(DurationModel::parse("family=normal mu=1 sigma=-2").is_err());
        assert!(serde_json::from_str::<DurationModel>(r#"{"family":"normal","mu":1,"sigma":0}"#).is_err());
    }
}
