use proptest::prelude::*;
use teamtime_core::fitting::score;
use teamtime_core::{fit_mle, moment_init, Dataset, DurationModel, Family, FamilyParams};

fn model_strategy() -> impl Strategy<Value = DurationModel> {
    prop_oneof![
        (10.0..100.0f64, 1.0..30.0f64).prop_map(|(m, s)| DurationModel::normal(m, s).unwrap()),
        (0.5..6.0f64, 5.0..150.0f64).prop_map(|(k, l)| DurationModel::weibull(k, l).unwrap()),
        (0.5..30.0f64, 0.01..2.0f64).prop_map(|(a, b)| DurationModel::gamma(a, b).unwrap()),
        (0.0..5.0f64, 0.05..1.5f64).prop_map(|(m, s)| DurationModel::lognormal(m, s).unwrap()),
    ]
}

/// A generating model plus a family to fit, restricted to valid data for that family.
fn fit_case() -> impl Strategy<Value = (Family, Dataset)> {
    (model_strategy(), 0usize..4, any::<u64>(), 5usize..300).prop_filter_map("support", |(m, f, seed, n)| {
        let family = Family::ALL[f];
        let data = m.sample(seed, n);
        let ok = !family.positive_support() || data.samples().iter().all(|&x| x > 0.0);
        ok.then_some((family, data))
    })
}

fn central_difference(model: &DurationModel, data: &Dataset) -> [f64; 2] {
    let v = model.values();
    let mut g = [0.0; 2];
    for i in 0..2 {
        let h = 1e-5 * v[i].abs().max(1e-3);
        let mut up = v;
        let mut down = v;
        up[i] += h;
        down[i] -= h;
        let f = |w: [f64; 2]| {
            DurationModel::from_values(model.family(), w)
                .unwrap()
                .log_likelihood(data)
                .unwrap()
        };
        g[i] = (f(up) - f(down)) / (2.0 * h);
    }
    g
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn mle_dominates_moment_start((family, data) in fit_case()) {
        let fit = fit_mle(family, &data).unwrap();
        let start = DurationModel::new(moment_init(family, &data).unwrap()).unwrap();
        let at_start = start.log_likelihood(&data).unwrap();
        prop_assert!(fit.log_likelihood >= at_start, "{family}: {} < {at_start}", fit.log_likelihood);
    }

    #[test]
    fn score_vanishes_at_the_fit((family, data) in fit_case()) {
        let fit = fit_mle(family, &data).unwrap();
        prop_assume!(fit.converged);
        let s = score(&fit.model, &data);
        let norm = s[0].hypot(s[1]);
        prop_assert!(norm < 1e-6, "{family} {:?}: |score| = {norm:e}", fit.model);
        let fd = central_difference(&fit.model, &data);
        // finite differences of a stationary point are rounding noise
        prop_assert!(fd[0].hypot(fd[1]) < 1e-3, "{family}: fd {:?}", fd);
    }

    #[test]
    fn analytic_score_matches_finite_differences(model in model_strategy(), truth in model_strategy(), seed in any::<u64>()) {
        let data = truth.sample(seed, 50);
        let positive = data.samples().iter().all(|&x| x > 0.0);
        prop_assume!(!model.family().positive_support() || positive);
        let s = score(&model, &data);
        let fd = central_difference(&model, &data);
        for i in 0..2 {
            let scale = s[i].abs().max(fd[i].abs()).max(1.0);
            prop_assert!((s[i] - fd[i]).abs() <= 1e-4 * scale, "{:?}: {:?} vs {:?}", model, s, fd);
        }
    }

    #[test]
    fn fits_are_scale_equivariant((family, data) in fit_case(), c in 0.01..100.0f64) {
        let base = fit_mle(family, &data).unwrap();
        let scaled = fit_mle(family, &data.scaled(c)).unwrap();
        prop_assume!(base.converged && scaled.converged);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-7 * a.abs().max(b.abs()).max(1e-12);
        let ok = match (base.model.params(), scaled.model.params()) {
            (FamilyParams::Normal { mu, sigma }, FamilyParams::Normal { mu: m2, sigma: s2 }) => {
                (mu * c - m2).abs() <= 1e-9 * (mu * c).abs().max(s2) && close(sigma * c, s2)
            }
            (FamilyParams::Weibull { shape, scale }, FamilyParams::Weibull { shape: k2, scale: l2 }) => {
                close(shape, k2) && close(scale * c, l2)
            }
            (FamilyParams::Gamma { shape, rate }, FamilyParams::Gamma { shape: a2, rate: b2 }) => {
                close(shape, a2) && close(rate / c, b2)
            }
            (FamilyParams::LogNormal { mu, sigma }, FamilyParams::LogNormal { mu: m2, sigma: s2 }) => {
                (mu + c.ln() - m2).abs() <= 1e-9 * m2.abs().max(1.0) && close(sigma, s2)
            }
            _ => false,
        };
        prop_assert!(ok, "{:?} scaled by {c} gave {:?}", base.model, scaled.model);
    }
}

/// Plain Nelder-Mead minimizer over two parameters; a test oracle only.
fn nelder_mead(f: impl Fn([f64; 2]) -> f64, start: [f64; 2], step: [f64; 2]) -> [f64; 2] {
    let mut simplex = [
        start,
        [start[0] + step[0], start[1]],
        [start[0], start[1] + step[1]],
    ];
    let mut values = simplex.map(&f);
    for _ in 0..20_000 {
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let (best, mid, worst) = (idx[0], idx[1], idx[2]);
        let size = (0..2)
            .map(|d| (simplex[worst][d] - simplex[best][d]).abs() + (simplex[mid][d] - simplex[best][d]).abs())
            .fold(0.0, f64::max);
        if size < 1e-12 {
            break;
        }
        let centroid = [
            (simplex[best][0] + simplex[mid][0]) / 2.0,
            (simplex[best][1] + simplex[mid][1]) / 2.0,
        ];
        let along = |t: f64| {
            [
                centroid[0] + t * (simplex[worst][0] - centroid[0]),
                centroid[1] + t * (simplex[worst][1] - centroid[1]),
            ]
        };
        let r = along(-1.0);
        let fr = f(r);
        if fr < values[best] {
            let e = along(-2.0);
            let fe = f(e);
            (simplex[worst], values[worst]) = if fe < fr { (e, fe) } else { (r, fr) };
        } else if fr < values[mid] {
            (simplex[worst], values[worst]) = (r, fr);
        } else {
            let c = if fr < values[worst] { along(-0.5) } else { along(0.5) };
            let fc = f(c);
            if fc < values[worst].min(fr) {
                (simplex[worst], values[worst]) = (c, fc);
            } else {
                for i in [mid, worst] {
                    simplex[i] = [
                        (simplex[i][0] + simplex[best][0]) / 2.0,
                        (simplex[i][1] + simplex[best][1]) / 2.0,
                    ];
                    values[i] = f(simplex[i]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    simplex[best]
}

#[test]
fn closed_forms_agree_with_a_generic_maximizer() {
    let cases = [
        DurationModel::normal(60.04, 59.57).unwrap(),
        DurationModel::normal(35.0, 4.0).unwrap(),
        DurationModel::lognormal(3.85, 0.62).unwrap(),
        DurationModel::lognormal(3.47, 0.30).unwrap(),
        DurationModel::lognormal(0.5, 1.2).unwrap(),
    ];
    for (i, truth) in cases.iter().enumerate() {
        for seed in 0..4u64 {
            let data = truth.sample(1000 * i as u64 + seed, 100);
            let fit = fit_mle(truth.family(), &data).unwrap();
            // optimize over (location, ln scale); start away from the answer
            let v = truth.values();
            let negll = |w: [f64; 2]| {
                -DurationModel::from_values(truth.family(), [w[0], w[1].exp()])
                    .unwrap()
                    .log_likelihood(&data)
                    .unwrap()
            };
            let w = nelder_mead(negll, [v[0] * 1.1 + 0.3, (v[1] * 0.8).ln()], [0.5, 0.2]);
            let got = [w[0], w[1].exp()];
            let want = fit.model.values();
            for d in 0..2 {
                // a double-precision objective cannot resolve absolute 1e-6 once σ is tens of seconds
                assert!(
                    (got[d] - want[d]).abs() < 1e-6 * want[d].abs().max(1.0),
                    "{:?} seed {seed}: oracle {:?} vs closed form {:?}",
                    truth,
                    got,
                    want
                );
            }
        }
    }
}
