use biwarranty::benefit::{benefit, calibrate_rate, retention_ratio, EconomicConfig};
use biwarranty::copula::{gumbel_copula_cdf, joint_cdf, joint_density, joint_loglik, joint_reliability, JointModel};
use biwarranty::data::Dataset;
use biwarranty::gof::{ad_statistic_from_probabilities, bootstrap_p_value, kaplan_meier};
use biwarranty::marginal::{fit_weibull_mle, weibull_cdf, weibull_loglik, weibull_pdf, weibull_quantile, WeibullParams};
use biwarranty::policy::{cost_1d, cost_2d, AxisPolicy, PolicyKind, PolicyPair, WarrantyRegion};
use biwarranty::quadrature::GaussLegendre;
use biwarranty::utility::{expected_warranty_cost, QuadratureSpec};
use proptest::prelude::*;

fn psi_hat() -> JointModel {
    JointModel::from_params(0.9132, 2.1807, 0.8518, 1.0398, 6.5937).unwrap()
}

fn cfg() -> EconomicConfig {
    EconomicConfig {
        price: 700.0,
        unit_profit: 200.0,
        market_size: 1.0,
        retention_t: 0.75,
        retention_u: 0.75,
        anchor_p: 0.1,
        anchor_t: 0.1855,
        anchor_u: 0.0741,
        rate_t: 11.844,
        rate_u: 29.665,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn cdf_quantile_round_trip(shape in 0.2f64..8.0, scale in 0.01f64..100.0, p in 0.0f64..0.999_999) {
        let w = WeibullParams::new(shape, scale).unwrap();
        let x = weibull_quantile(&w, p).unwrap();
        prop_assert!((weibull_cdf(&w, x).unwrap() - p).abs() < 1e-9);
    }

    #[test]
    fn pdf_is_nonnegative(shape in 0.2f64..8.0, scale in 0.01f64..100.0, e in -6.0f64..3.0) {
        let w = WeibullParams::new(shape, scale).unwrap();
        prop_assert!(weibull_pdf(&w, scale * 10f64.powf(e)).unwrap().value() >= 0.0);
    }

    #[test]
    fn copula_within_frechet_bounds(v1 in 0.0f64..=1.0, v2 in 0.0f64..=1.0, theta in 1.0f64..60.0) {
        let c = gumbel_copula_cdf(v1, v2, theta).unwrap();
        prop_assert!(c >= (v1 + v2 - 1.0).max(0.0) - 1e-15);
        prop_assert!(c <= v1.min(v2) + 1e-15);
    }

    #[test]
    fn joint_cdf_tends_to_marginal(t in 0.01f64..10.0) {
        let m = psi_hat();
        let f = joint_cdf(&m, t, 1e3).unwrap();
        prop_assert!((f - weibull_cdf(m.margin_t(), t).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn loglik_is_permutation_invariant(seed in any::<u64>()) {
        let d = Dataset::traction_motors();
        let mut rows: Vec<(f64, f64)> = d.records().iter().map(|r| (r.age, r.usage)).collect();
        // Fisher–Yates driven by a splitmix sequence.
        let mut s = seed;
        for i in (1..rows.len()).rev() {
            s = s.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let j = (s >> 33) as usize % (i + 1);
            rows.swap(i, j);
        }
        let shuffled = Dataset::from_pairs(&rows, "shuffled").unwrap();
        let m = psi_hat();
        prop_assert_eq!(joint_loglik(&m, &d).unwrap().to_bits(), joint_loglik(&m, &shuffled).unwrap().to_bits());
    }

    #[test]
    fn independence_factorizes_density(t in 0.01f64..5.0, u in 0.01f64..5.0, kt in 0.5f64..3.0, ku in 0.5f64..3.0) {
        let m = JointModel::from_params(kt, 1.3, ku, 0.7, 1.0).unwrap();
        let f = joint_density(&m, t, u).unwrap();
        let g = weibull_pdf(m.margin_t(), t).unwrap().value() * weibull_pdf(m.margin_u(), u).unwrap().value();
        prop_assert!((f - g).abs() <= 1e-12 * g.max(1e-300));
    }

    #[test]
    fn cost_bounded_and_monotone(
        w1 in 0.0f64..1.0, k in 0.0f64..1.0, v1 in 0.0f64..1.0, l in 0.0f64..1.0,
        t in 0.0f64..3.0, dt in 0.0f64..0.5, u in 0.0f64..3.0, du in 0.0f64..0.5,
    ) {
        let pair = PolicyPair::new(AxisPolicy::cw(w1, w1 + k).unwrap(), AxisPolicy::cw(v1, v1 + l).unwrap());
        let c = cost_2d(&pair, 700.0, t, u).unwrap();
        prop_assert!((0.0..=700.0).contains(&c));
        prop_assert!(cost_2d(&pair, 700.0, t + dt, u).unwrap() <= c + 1e-9);
        prop_assert!(cost_2d(&pair, 700.0, t, u + du).unwrap() <= c + 1e-9);
        if c == 700.0 {
            prop_assert!(t <= w1 && u <= v1);
        }
    }

    #[test]
    fn cw_collapses_to_frw_and_prw(w in 0.01f64..2.0, x in 0.0f64..3.0) {
        let frw = AxisPolicy::frw(w).unwrap();
        let prw = AxisPolicy::prw(w).unwrap();
        prop_assert_eq!(cost_1d(&AxisPolicy::cw(w, w).unwrap(), 700.0, x).unwrap(), cost_1d(&frw, 700.0, x).unwrap());
        let a = cost_1d(&AxisPolicy::cw(0.0, w).unwrap(), 700.0, x).unwrap();
        let b = cost_1d(&prw, 700.0, x).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn cost_matches_case_formula(
        w1 in 0.0f64..1.0, k in 0.01f64..1.0, v1 in 0.0f64..1.0, l in 0.01f64..1.0,
        t in 0.0f64..2.5, u in 0.0f64..2.5,
    ) {
        let (w2, v2) = (w1 + k, v1 + l);
        let pair = PolicyPair::new(AxisPolicy::cw(w1, w2).unwrap(), AxisPolicy::cw(v1, v2).unwrap());
        let s = 700.0;
        let expect = if t <= w1 && u <= v1 {
            s
        } else if t > w1 && t <= w2 && u <= v1 {
            s * (w2 - t) / (w2 - w1)
        } else if t <= w1 && u > v1 && u <= v2 {
            s * (v2 - u) / (v2 - v1)
        } else if t > w1 && t <= w2 && u > v1 && u <= v2 {
            s * (w2 - t) / (w2 - w1) * (v2 - u) / (v2 - v1)
        } else {
            0.0
        };
        prop_assert!((cost_2d(&pair, s, t, u).unwrap() - expect).abs() < 1e-9);
    }

    #[test]
    fn benefit_monotone_and_bounded(
        r in (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0),
        idx in 0usize..4, step in 0.0f64..0.5,
    ) {
        let base = [r.0, r.0 + r.1, r.2, r.2 + r.3];
        let region = WarrantyRegion::new(base[0], base[1], base[2], base[3]).unwrap();
        let b = benefit(&region, &cfg());
        prop_assert!((0.0..=200.0).contains(&b));
        let mut bumped = base;
        bumped[idx] += step;
        if idx == 0 { bumped[1] = bumped[1].max(bumped[0]); }
        if idx == 2 { bumped[3] = bumped[3].max(bumped[2]); }
        let r2 = WarrantyRegion::new(bumped[0], bumped[1], bumped[2], bumped[3]).unwrap();
        prop_assert!(benefit(&r2, &cfg()) >= b);
    }

    #[test]
    fn calibration_inverts_retention(q in 0.5001f64..0.9999, w in 1e-3f64..10.0) {
        let a = calibrate_rate(q, w).unwrap();
        prop_assert!((retention_ratio(a, w).unwrap() - q).abs() < 1e-8);
    }

    #[test]
    fn p_value_monotone_in_statistic(reps in proptest::collection::vec(0.0f64..5.0, 200..400), a in 0.0f64..5.0, bump in 0.0f64..2.0) {
        let p = bootstrap_p_value(a, &reps);
        prop_assert!(p > 0.0 && p <= 1.0);
        prop_assert!(bootstrap_p_value(a + bump, &reps) <= p);
    }

    #[test]
    fn km_ends_at_zero(data in proptest::collection::vec(0.01f64..10.0, 1..60)) {
        let km = kaplan_meier(&data).unwrap();
        let max = data.iter().cloned().fold(f64::MIN, f64::max);
        prop_assert_eq!(km.eval(max), 0.0);
        prop_assert!(km.values().windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn expected_cost_within_zero_and_price(
        w1 in 0.0f64..1.0, k in 0.0f64..1.5, v1 in 0.0f64..0.5, l in 0.0f64..0.8,
    ) {
        let r = WarrantyRegion::new(w1, w1 + k, v1, v1 + l).unwrap();
        let c = expected_warranty_cost(&psi_hat(), &r, &cfg(), &QuadratureSpec::default()).unwrap();
        prop_assert!((0.0..=700.0).contains(&c));
    }
}

#[test]
fn copula_bounds_and_two_increasing_on_grid() {
    let n = 50;
    let grid: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    for theta in [1.0, 2.0, 6.59, 50.0] {
        let c = |a: f64, b: f64| gumbel_copula_cdf(a, b, theta).unwrap();
        for i in 0..n {
            for j in 0..n {
                let (a1, b1, a2, b2) = (grid[i], grid[i + 1], grid[j], grid[j + 1]);
                let v = c(b1, b2) - c(a1, b2) - c(b1, a2) + c(a1, a2);
                assert!(v >= -1e-14, "theta={theta} cell ({i},{j}): {v}");
                let x = c(b1, b2);
                assert!(x >= (b1 + b2 - 1.0).max(0.0) - 1e-15 && x <= b1.min(b2) + 1e-15);
            }
        }
    }
}

#[test]
fn marginal_pdf_integrates_to_one() {
    let rule = GaussLegendre::new(64).unwrap();
    for (k, s) in [(1.5, 2.0), (2.0, 1.0), (3.5, 0.4)] {
        let w = WeibullParams::new(k, s).unwrap();
        // Composite rule on [0, 20σ].
        let edges: Vec<f64> = (0..=40).map(|i| 0.5 * s * i as f64).collect();
        let total: f64 = edges
            .windows(2)
            .map(|e| rule.integrate(e[0], e[1], |x| weibull_pdf(&w, x).unwrap().value()))
            .sum();
        assert!((total - 1.0).abs() < 1e-6, "k={k}: {total}");
    }
}

#[test]
fn marginal_mle_is_stationary() {
    let d = Dataset::traction_motors();
    for col in [d.ages(), d.usages()] {
        let fit = fit_weibull_mle(&col).unwrap();
        let (k, s) = (fit.params.shape(), fit.params.scale());
        let ll = |lk: f64, ls: f64| weibull_loglik(&WeibullParams::new(lk.exp(), ls.exp()).unwrap(), &col).unwrap();
        let h = 1e-6;
        let gk = (ll(k.ln() + h, s.ln()) - ll(k.ln() - h, s.ln())) / (2.0 * h);
        let gs = (ll(k.ln(), s.ln() + h) - ll(k.ln(), s.ln() - h)) / (2.0 * h);
        assert!(gk.abs() < 1e-4 && gs.abs() < 1e-4, "gradient ({gk}, {gs})");
    }
}

#[test]
fn density_matches_second_difference_of_reliability() {
    let m = psi_hat();
    let r = |t, u| joint_reliability(&m, t, u).unwrap();
    for &(t, u) in &[(1.0, 0.5), (0.3, 0.12), (2.5, 1.4)] {
        let h = 1e-4;
        let fd = (r(t + h, u + h) - r(t + h, u - h) - r(t - h, u + h) + r(t - h, u - h)) / (4.0 * h * h);
        let f = joint_density(&m, t, u).unwrap();
        assert!(((fd - f) / f).abs() < 1e-5, "({t},{u}): fd={fd} f={f}");
    }
}

#[test]
fn loglik_anchor_from_two_code_paths() {
    let m = psi_hat();
    let d = Dataset::traction_motors();
    let closed = joint_loglik(&m, &d).unwrap();
    let r = |t, u| joint_reliability(&m, t, u).unwrap();
    let fd: f64 = d
        .records()
        .iter()
        .map(|rec| {
            let (t, u) = (rec.age, rec.usage);
            let (ht, hu) = (1e-3 * t, 1e-3 * u);
            ((r(t + ht, u + hu) - r(t + ht, u - hu) - r(t - ht, u + hu) + r(t - ht, u - hu)) / (4.0 * ht * hu)).ln()
        })
        .sum();
    assert!((closed - fd).abs() < 1e-4, "{closed} vs {fd}");
    assert!((closed - (-60.509)).abs() < 5e-3, "{closed}");
}

#[test]
fn independence_factorizes_likelihood() {
    let d = Dataset::traction_motors();
    let m = JointModel::from_params(0.9, 2.2, 0.85, 1.0, 1.0).unwrap();
    let joint = joint_loglik(&m, &d).unwrap();
    let split = weibull_loglik(m.margin_t(), &d.ages()).unwrap() + weibull_loglik(m.margin_u(), &d.usages()).unwrap();
    assert!((joint - split).abs() < 1e-10);
}

#[test]
fn km_on_shipped_ages_counts_ranks() {
    let ages = Dataset::traction_motors().ages();
    let km = kaplan_meier(&ages).unwrap();
    let at_or_below = ages.iter().filter(|&&a| a <= 1.66).count();
    assert!((km.eval(1.66) - (1.0 - at_or_below as f64 / 40.0)).abs() < 1e-12);
}

#[test]
fn ad_uniform_grid_two_evaluations() {
    let n = 10;
    let z: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect();
    let a = ad_statistic_from_probabilities(&z).unwrap();
    let nf = n as f64;
    let mut acc = 0.0;
    for i in (1..=n).rev() {
        acc += (2.0 * i as f64 - 1.0) * (z[i - 1].ln() + (1.0 - z[n - i]).ln());
    }
    assert!((a - (-nf - acc / nf)).abs() < 1e-12);
}

#[test]
fn nine_pairs_share_one_cw_formula() {
    let m = psi_hat();
    let spec = QuadratureSpec::default();
    let (w, v) = (0.4, 0.15);
    for t in PolicyKind::ALL {
        for u in PolicyKind::ALL {
            let axis = |k: PolicyKind, x: f64| match k {
                PolicyKind::Frw => AxisPolicy::frw(x).unwrap(),
                PolicyKind::Prw => AxisPolicy::prw(x).unwrap(),
                PolicyKind::Cw => AxisPolicy::cw(0.5 * x, x).unwrap(),
            };
            let pair = PolicyPair::new(axis(t, w), axis(u, v));
            let (a1, a2) = pair.t.breakpoints();
            let (b1, b2) = pair.u.breakpoints();
            let as_cw = PolicyPair::new(AxisPolicy::cw(a1, a2).unwrap(), AxisPolicy::cw(b1, b2).unwrap());
            let c1 = expected_warranty_cost(&m, &pair.region(), &cfg(), &spec).unwrap();
            let c2 = expected_warranty_cost(&m, &as_cw.region(), &cfg(), &spec).unwrap();
            assert_eq!(c1, c2);
            for (x, y) in [(0.1, 0.05), (0.3, 0.1), (0.39, 0.149), (0.5, 0.2)] {
                let d = cost_2d(&pair, 700.0, x, y).unwrap() - cost_2d(&as_cw, 700.0, x, y).unwrap();
                assert!(d.abs() < 1e-12);
            }
        }
    }
}
