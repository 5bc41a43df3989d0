//! Maximum-likelihood estimation for the four duration families.
//!
//! Normal and Log-Normal have closed forms (n-denominator variances).
//! Weibull and Gamma reduce to a one-dimensional equation in the shape,
//! solved by Newton's method with a bisection fallback inside
//! `[SHAPE_MIN, SHAPE_MAX]`; the second parameter then follows in closed form.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::distributions::{DurationModel, Family, FamilyParams};
use crate::error::{Error, Result};
use crate::special::{digamma, gamma, ln_gamma, trigamma};

pub const SHAPE_MIN: f64 = 1e-3;
pub const SHAPE_MAX: f64 = 1e3;
pub const MAX_ITERATIONS: usize = 200;
/// Relative stationarity residual required to report convergence.
pub const TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: DurationModel,
    pub log_likelihood: f64,
    /// Number of free parameters.
    pub k: usize,
    pub converged: bool,
    pub iterations: usize,
}

fn validate(family: Family, data: &Dataset) -> Result<()> {
    if data.n() < 2 {
        return Err(if data.is_empty() {
            Error::EmptyDataset(data.label.clone())
        } else {
            Error::Domain(format!("fitting `{}` needs at least two samples", data.label))
        });
    }
    if family.positive_support() {
        if let Some(&bad) = data.samples().iter().find(|&&x| x <= 0.0) {
            return Err(Error::Support { family, value: bad });
        }
    }
    let first = data.samples()[0];
    if data.samples().iter().all(|&x| x == first) {
        return Err(Error::DegenerateData(data.label.clone()));
    }
    Ok(())
}

fn mean_sd(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Method-of-moments starting point for the likelihood maximization.
pub fn moment_init(family: Family, data: &Dataset) -> Result<FamilyParams> {
    validate(family, data)?;
    let xs = data.samples();
    let (m, sd) = mean_sd(xs.iter().copied());
    let params = match family {
        Family::Normal => FamilyParams::Normal { mu: m, sigma: sd },
        Family::LogNormal => {
            let (mu, sigma) = mean_sd(xs.iter().map(|x| x.ln()));
            FamilyParams::LogNormal { mu, sigma }
        }
        Family::Gamma => {
            let v = sd * sd;
            FamilyParams::Gamma {
                shape: m * m / v,
                rate: m / v,
            }
        }
        Family::Weibull => {
            let shape = weibull_shape_from_cv(sd / m).unwrap_or(1.0);
            FamilyParams::Weibull {
                shape,
                scale: m / gamma(1.0 + 1.0 / shape),
            }
        }
    };
    if params.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateData(data.label.clone()));
    }
    Ok(params)
}

/// Coarse bisection on cv² = Γ(1+2/k)/Γ(1+1/k)² - 1, which falls as k grows.
fn weibull_shape_from_cv(cv: f64) -> Option<f64> {
    let cv2 = |k: f64| (ln_gamma(1.0 + 2.0 / k) - 2.0 * ln_gamma(1.0 + 1.0 / k)).exp() - 1.0;
    let target = cv * cv;
    let (mut lo, mut hi) = (0.1f64, 50.0f64);
    if !(target < cv2(lo) && target > cv2(hi)) {
        return None;
    }
    for _ in 0..40 {
        let mid = (lo * hi).sqrt();
        if cv2(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some((lo * hi).sqrt())
}

/// Result of a bracketed scalar solve.
struct Solve {
    root: f64,
    converged: bool,
    iterations: usize,
}

/// Newton's method on an increasing function `f` (returning value,
/// derivative and relative residual), falling back to bisection whenever a
/// step leaves the current bracket.
fn newton_bracketed<F>(f: F, start: f64) -> Solve
where
    F: Fn(f64) -> (f64, f64, f64),
{
    let (mut lo, mut hi) = (SHAPE_MIN, SHAPE_MAX);
    let (flo, _, _) = f(lo);
    let (fhi, _, _) = f(hi);
    if !(flo < 0.0 && fhi > 0.0) {
        // root outside the bracket: report the nearer end, not converged
        let root = if flo >= 0.0 { lo } else { hi };
        return Solve {
            root,
            converged: false,
            iterations: 0,
        };
    }
    let mut x = start.clamp(lo, hi);
    for it in 1..=MAX_ITERATIONS {
        let (fx, dfx, resid) = f(x);
        if resid < TOLERANCE {
            return Solve {
                root: x,
                converged: true,
                iterations: it,
            };
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = x - fx / dfx;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next == x {
            break;
        }
        x = next;
    }
    let (_, _, resid) = f(x);
    Solve {
        root: x,
        converged: resid < TOLERANCE,
        iterations: MAX_ITERATIONS,
    }
}

/// Maximum-likelihood fit of one family.
pub fn fit_mle(family: Family, data: &Dataset) -> Result<FitResult> {
    let init = moment_init(family, data)?;
    let xs = data.samples();
    let n = xs.len() as f64;
    let (params, converged, iterations) = match family {
        Family::Normal | Family::LogNormal => (init, true, 0),
        Family::Weibull => {
            let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
            let mean_lx = lx.iter().sum::<f64>() / n;
            let dev: Vec<f64> = lx.iter().map(|l| l - mean_lx).collect();
            let dmax = dev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            // weights x^k normalized by the largest sample to avoid overflow
            let profile = |k: f64| {
                let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
                for &d in &dev {
                    let w = (k * (d - dmax)).exp();
                    s0 += w;
                    s1 += w * d;
                    s2 += w * d * d;
                }
                let a = s1 / s0;
                let g = a - 1.0 / k;
                let dg = (s2 / s0 - a * a) + 1.0 / (k * k);
                (g, dg, (g * k).abs())
            };
            let start = init.values()[0];
            let s = newton_bracketed(profile, start);
            let k = s.root;
            let s0: f64 = dev.iter().map(|&d| (k * (d - dmax)).exp()).sum();
            let scale = (mean_lx + dmax + (s0 / n).ln() / k).exp();
            (FamilyParams::Weibull { shape: k, scale }, s.converged, s.iterations)
        }
        Family::Gamma => {
            let m = xs.iter().sum::<f64>() / n;
            let mean_lx = xs.iter().map(|x| x.ln()).sum::<f64>() / n;
            let s = m.ln() - mean_lx;
            if !(s > 0.0) {
                return Err(Error::DegenerateData(data.label.clone()));
            }
            // ln a - ψ(a) - s is decreasing; negate it for the increasing solver
            let eq = |a: f64| {
                let h = a.ln() - digamma(a) - s;
                (-h, -(1.0 / a - trigamma(a)), (h / s).abs())
            };
            let sol = newton_bracketed(eq, init.values()[0]);
            let shape = sol.root;
            (
                FamilyParams::Gamma { shape, rate: shape / m },
                sol.converged,
                sol.iterations,
            )
        }
    };
    let model = DurationModel::new(params)?;
    Ok(FitResult {
        log_likelihood: model.log_likelihood(data)?,
        model,
        k: 2,
        converged,
        iterations,
    })
}

/// Analytic gradient of the log-likelihood in the model's own parameters.
pub fn score(model: &DurationModel, data: &Dataset) -> [f64; 2] {
    let xs = data.samples();
    match model.params() {
        FamilyParams::Normal { mu, sigma } => normal_score(xs.iter().copied(), mu, sigma),
        FamilyParams::LogNormal { mu, sigma } => normal_score(xs.iter().map(|x| x.ln()), mu, sigma),
        FamilyParams::Weibull { shape, scale } => xs.iter().fold([0.0, 0.0], |[a, b], &x| {
            let r = x / scale;
            let lr = r.ln();
            let rk = r.powf(shape);
            [a + 1.0 / shape + lr - rk * lr, b + shape / scale * (rk - 1.0)]
        }),
        FamilyParams::Gamma { shape, rate } => {
            let psi = digamma(shape);
            let lr = rate.ln();
            xs.iter()
                .fold([0.0, 0.0], |[a, b], &x| [a + lr + x.ln() - psi, b + shape / rate - x])
        }
    }
}

fn normal_score(xs: impl Iterator<Item = f64>, mu: f64, sigma: f64) -> [f64; 2] {
    let s2 = sigma * sigma;
    xs.fold([0.0, 0.0], |[a, b], x| {
        let d = x - mu;
        [a + d / s2, b - 1.0 / sigma + d * d / (s2 * sigma)]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn ds(v: &[f64]) -> Dataset {
        Dataset::new("t", v.to_vec()).unwrap()
    }

    #[test]
    fn degenerate_data_rejected() {
        for f in Family::ALL {
            assert!(matches!(moment_init(f, &ds(&[2.0; 4])), Err(Error::DegenerateData(_))));
            assert!(matches!(fit_mle(f, &ds(&[2.0; 4])), Err(Error::DegenerateData(_))));
        }
    }

    #[test]
    fn support_violation_rejected() {
        for f in [Family::Weibull, Family::Gamma, Family::LogNormal] {
            assert!(matches!(fit_mle(f, &ds(&[1.0, 0.0, 3.0])), Err(Error::Support { .. })));
            assert!(matches!(fit_mle(f, &ds(&[1.0, -2.0])), Err(Error::Support { .. })));
        }
        assert!(fit_mle(Family::Normal, &ds(&[1.0, -2.0])).is_ok());
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(matches!(fit_mle(Family::Normal, &ds(&[])), Err(Error::EmptyDataset(_))));
        assert!(matches!(fit_mle(Family::Normal, &ds(&[1.0])), Err(Error::Domain(_))));
    }

    #[test]
    fn gamma_init_matches_moment_arithmetic() {
        let h = 1361f64.sqrt();
        let p = moment_init(Family::Gamma, &ds(&[54.5 - h, 54.5 + h])).unwrap();
        let [shape, rate] = p.values();
        assert!((shape - 54.5 * 54.5 / 1361.0).abs() < 1e-9);
        assert!((rate - 54.5 / 1361.0).abs() < 1e-12);
        assert!((shape - 2.18).abs() < 0.005 && (rate - 0.04).abs() < 0.0005);
    }

    #[test]
    fn lognormal_init_from_log_moments() {
        let p = moment_init(Family::LogNormal, &ds(&[E, E, E.powi(3), E.powi(3)])).unwrap();
        let [mu, sigma] = p.values();
        assert!((mu - 2.0).abs() < 1e-14 && (sigma - 1.0).abs() < 1e-14);
    }

    #[test]
    fn weibull_init_recovers_exponential_cv() {
        // cv = 1 corresponds to shape 1
        let k = weibull_shape_from_cv(1.0).unwrap();
        assert!((k - 1.0).abs() < 1e-6);
        assert_eq!(weibull_shape_from_cv(1000.0), None);
    }

    #[test]
    fn lognormal_two_point_fit() {
        let r = fit_mle(Family::LogNormal, &ds(&[E * E, E.powi(4)])).unwrap();
        let [mu, sigma] = r.model.values();
        assert!((mu - 3.0).abs() < 1e-14 && (sigma - 1.0).abs() < 1e-14);
        assert!(r.converged);
        assert_eq!(r.k, 2);
    }

    #[test]
    fn weibull_recovery() {
        let truth = DurationModel::weibull(1.30, 65.97).unwrap();
        let r = fit_mle(Family::Weibull, &truth.sample(101, 10_000)).unwrap();
        let [shape, scale] = r.model.values();
        assert!(r.converged);
        assert!((shape - 1.30).abs() < 0.05, "shape {shape}");
        assert!((scale - 65.97).abs() < 1.5, "scale {scale}");
    }

    #[test]
    fn gamma_recovery() {
        let truth = DurationModel::gamma(11.88, 0.30).unwrap();
        let r = fit_mle(Family::Gamma, &truth.sample(102, 10_000)).unwrap();
        let [shape, rate] = r.model.values();
        assert!(r.converged);
        assert!((shape - 11.88).abs() < 0.5, "shape {shape}");
        assert!((rate - 0.30).abs() < 0.015, "rate {rate}");
    }

    #[test]
    fn fit_log_likelihood_is_consistent() {
        let data = DurationModel::lognormal(3.47, 0.30).unwrap().sample(9, 300);
        for f in Family::ALL {
            let r = fit_mle(f, &data).unwrap();
            assert!((r.log_likelihood - r.model.log_likelihood(&data).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn shape_outside_bracket_is_not_converged() {
        // nearly constant data pushes the gamma shape far beyond 1e3
        let data = ds(&[100.0, 100.001, 99.999, 100.0005]);
        let r = fit_mle(Family::Gamma, &data).unwrap();
        assert!(!r.converged);
        assert_eq!(r.model.values()[0], SHAPE_MAX);
    }
}
