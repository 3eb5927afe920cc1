//! Sampling, Monte-Carlo and optimizer checks against independent oracles.

use biwarranty::benefit::{EconomicConfig, EconomicSettings};
use biwarranty::copula::{fit_joint_mle, joint_cdf, sample_copula, sample_joint, JointFitOptions, JointModel};
use biwarranty::data::Dataset;
use biwarranty::gof::{ad_pvalue, anderson_darling_stat};
use biwarranty::kendall::kendall_tau;
use biwarranty::marginal::{fit_weibull_mle, weibull_cdf, WeibullParams};
use biwarranty::optimizer::{optimize_region, OptimizerOptions};
use biwarranty::policy::{PolicyKind, WarrantyRegion};
use biwarranty::rng::child_rng;
use biwarranty::utility::{
    expected_utility, expected_warranty_cost, mc_expected_cost, subregion_integrals, QuadratureSpec,
};
use rand::Rng;

fn psi_hat() -> JointModel {
    JointModel::from_params(0.9132, 2.1807, 0.8518, 1.0398, 6.5937).unwrap()
}

fn calibrated(m: &JointModel) -> EconomicConfig {
    EconomicSettings::default().calibrate(m).unwrap()
}

#[test]
fn sampled_kendall_tau_matches_theta() {
    let pairs = sample_copula(2.0, 100_000, 11).unwrap();
    let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let tau = kendall_tau(&a, &b).unwrap();
    assert!((tau - 0.5).abs() < 0.01, "{tau}");
}

#[test]
fn sampled_margins_pass_ks_check() {
    let m = psi_hat();
    let d = sample_joint(&m, 100_000, 5).unwrap();
    for (mut xs, p) in [(d.ages(), *m.margin_t()), (d.usages(), *m.margin_u())] {
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let sup = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = weibull_cdf(&p, x).unwrap();
                (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max);
        assert!(sup < 0.01, "{sup}");
    }
}

#[test]
fn weibull_mle_recovers_parameters() {
    let p = WeibullParams::new(2.0, 1.0).unwrap();
    let mut rng = child_rng(3, 0);
    let xs: Vec<f64> = (0..100_000).map(|_| p.scale() * (-(1.0 - rng.random::<f64>()).ln()).powf(0.5)).collect();
    let fit = fit_weibull_mle(&xs).unwrap();
    assert!((fit.params.shape() - 2.0).abs() < 0.04);
    assert!((fit.params.scale() - 1.0).abs() < 0.02);
}

#[test]
fn joint_mle_recovers_theta() {
    let truth = JointModel::from_params(1.4, 2.0, 0.9, 1.0, 3.0).unwrap();
    let d = sample_joint(&truth, 5000, 21).unwrap();
    let fit = fit_joint_mle(&d, None, &JointFitOptions::default()).unwrap();
    assert!((fit.model.theta() - 3.0).abs() < 0.3, "{}", fit.model.theta());
    assert!(!fit.report.at_independence_boundary);
}

#[test]
fn independent_sample_lands_near_boundary() {
    let truth = JointModel::from_params(1.2, 1.0, 1.5, 2.0, 1.0).unwrap();
    let d = sample_joint(&truth, 2000, 8).unwrap();
    let fit = fit_joint_mle(&d, None, &JointFitOptions::default()).unwrap();
    assert!(fit.model.theta() < 1.1, "{}", fit.model.theta());
}

#[test]
fn joint_mle_on_shipped_data_is_a_local_maximum() {
    let d = Dataset::traction_motors();
    let fit = fit_joint_mle(&d, None, &JointFitOptions::default()).unwrap();
    let m = fit.model;
    let ll = |theta: f64| {
        let probe = JointModel::new(*m.margin_t(), *m.margin_u(), theta).unwrap();
        biwarranty::copula::joint_loglik(&probe, &d).unwrap()
    };
    assert!(ll(m.theta() + 0.5) < fit.loglik);
    assert!(ll(m.theta() - 0.5) < fit.loglik);

    // Scaled gradient in the fit's own coordinates.
    let x = [
        m.margin_t().shape().ln(),
        m.margin_t().scale().ln(),
        m.margin_u().shape().ln(),
        m.margin_u().scale().ln(),
        (m.theta() - 1.0).ln(),
    ];
    let eval = |x: &[f64]| {
        let probe = JointModel::from_params(x[0].exp(), x[1].exp(), x[2].exp(), x[3].exp(), 1.0 + x[4].exp()).unwrap();
        biwarranty::copula::joint_loglik(&probe, &d).unwrap()
    };
    for i in 0..5 {
        let h = 1e-5;
        let (mut a, mut b) = (x, x);
        a[i] += h;
        b[i] -= h;
        let g = (eval(&a) - eval(&b)) / (2.0 * h);
        assert!(g.abs() < 1e-3, "coordinate {i}: {g}");
    }
}

#[test]
fn mc_agrees_with_quadrature() {
    let m = psi_hat();
    let cfg = calibrated(&m);
    let spec = QuadratureSpec::default();
    for (i, r) in [
        WarrantyRegion::new(0.2578, 0.4884, 0.0470, 0.3854).unwrap(),
        WarrantyRegion::new(0.0, 0.7834, 0.0, 0.2397).unwrap(),
        WarrantyRegion::new(0.3708, 0.3708, 0.1373, 0.1373).unwrap(),
    ]
    .iter()
    .enumerate()
    {
        let q = expected_warranty_cost(&m, r, &cfg, &spec).unwrap();
        let mc = mc_expected_cost(&m, r, &cfg, 1_000_000, 100 + i as u64).unwrap();
        assert!((mc.mean - q).abs() < 3.0 * mc.std_error, "{r:?}: mc {} ± {} vs {q}", mc.mean, mc.std_error);
    }
}

#[test]
fn mc_under_independence_agrees_with_factorized_quadrature() {
    let m = JointModel::from_params(1.6, 2.0, 2.2, 1.0, 1.0).unwrap();
    let cfg = calibrated(&m);
    let r = WarrantyRegion::new(0.3, 1.2, 0.2, 0.7).unwrap();
    let q = expected_warranty_cost(&m, &r, &cfg, &QuadratureSpec::default()).unwrap();
    let mc = mc_expected_cost(&m, &r, &cfg, 1_000_000, 77).unwrap();
    assert!((mc.mean - q).abs() < 3.0 * mc.std_error);
}

#[test]
fn mc_error_shrinks_like_root_n() {
    let m = psi_hat();
    let cfg = calibrated(&m);
    let r = WarrantyRegion::new(0.2578, 0.4884, 0.0470, 0.3854).unwrap();
    let ratios: f64 = (0..20)
        .map(|s| {
            let a = mc_expected_cost(&m, &r, &cfg, 10_000, 1000 + s).unwrap();
            let b = mc_expected_cost(&m, &r, &cfg, 20_000, 2000 + s).unwrap();
            b.std_error / a.std_error
        })
        .sum::<f64>()
        / 20.0;
    assert!((ratios - 1.0 / 2f64.sqrt()).abs() < 0.2 / 2f64.sqrt(), "{ratios}");
}

#[test]
fn frw_mc_matches_closed_form() {
    let m = psi_hat();
    let cfg = calibrated(&m);
    let r = WarrantyRegion::new(0.3708, 0.3708, 0.1373, 0.1373).unwrap();
    let f = joint_cdf(&m, 0.3708, 0.1373).unwrap();
    let closed = 700.0 * f * f;
    assert!((closed - 13.78).abs() < 0.05);
    let q = expected_warranty_cost(&m, &r, &cfg, &QuadratureSpec::default()).unwrap();
    assert!((q - closed).abs() < 1e-8 * closed);
    let mc = mc_expected_cost(&m, &r, &cfg, 1_000_000, 9).unwrap();
    assert!((mc.mean - closed).abs() < 3.0 * mc.std_error);
}

#[test]
fn doubling_nodes_is_stable_on_published_regions() {
    let m = psi_hat();
    let regions = [
        (0.2742, 0.5292, 0.0496, 0.3914),
        (0.1964, 0.5478, 0.0, 0.4072),
        (0.1558, 1.0992, 0.1508, 0.1508),
        (0.0, 1.0816, 0.0774, 0.2219),
        (0.0, 0.8187, 0.0, 0.2627),
        (0.0, 1.0858, 0.1334, 0.1334),
        (0.3716, 0.3716, 0.0620, 0.4076),
        (0.3269, 0.3269, 0.0, 0.4237),
        (0.3967, 0.3967, 0.1469, 0.1469),
        (0.2578, 0.4884, 0.0470, 0.3854),
        (0.1844, 0.5037, 0.0, 0.3953),
        (0.1478, 1.0788, 0.1402, 0.1402),
        (0.0, 1.0430, 0.0725, 0.2053),
        (0.0, 0.7834, 0.0, 0.2397),
        (0.0, 1.0503, 0.1230, 0.1230),
        (0.3447, 0.3447, 0.0583, 0.4037),
        (0.3008, 0.3008, 0.0, 0.4120),
        (0.3708, 0.3708, 0.1373, 0.1373),
        (0.2454, 0.4587, 0.0451, 0.3823),
        (0.1753, 0.4713, 0.0, 0.3875),
        (0.1417, 1.0662, 0.1324, 0.1324),
        (0.0, 1.0161, 0.0688, 0.1930),
        (0.0, 0.7636, 0.0, 0.2220),
        (0.0, 1.0258, 0.1153, 0.1153),
        (0.3250, 0.3250, 0.0556, 0.4021),
        (0.2816, 0.2816, 0.0, 0.4043),
        (0.3515, 0.3515, 0.1302, 0.1302),
    ];
    let cfg = calibrated(&m);
    let base = QuadratureSpec::default();
    let doubled = QuadratureSpec { nodes_per_axis: 128, ..base };
    for (a, b, c, d) in regions {
        let r = WarrantyRegion::new(a, b, c, d).unwrap();
        let e1 = expected_warranty_cost(&m, &r, &cfg, &base).unwrap();
        let e2 = expected_warranty_cost(&m, &r, &cfg, &doubled).unwrap();
        assert!((e1 - e2).abs() <= base.rel_tol * e1.abs(), "{r:?}: {e1} vs {e2}");
    }
}

#[test]
fn ad_statistic_small_under_fitted_null() {
    let p = WeibullParams::new(0.9, 2.2).unwrap();
    let below = (0..100u64)
        .filter(|&seed| {
            let mut rng = child_rng(seed, 42);
            let xs: Vec<f64> =
                (0..100_000).map(|_| p.scale() * (-(1.0 - rng.random::<f64>()).ln()).powf(1.0 / p.shape())).collect();
            let fitted = fit_weibull_mle(&xs).unwrap().params;
            anderson_darling_stat(&xs, &fitted).unwrap() < 2.5
        })
        .count();
    assert!(below >= 99, "{below}");
}

#[test]
fn ad_rejects_grossly_wrong_model() {
    let mut rng = child_rng(17, 0);
    let xs: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
    let test = ad_pvalue(&xs, 1000, 4).unwrap();
    assert!(test.p_value < 0.05, "{test:?}");
}

#[test]
fn optimizer_is_deterministic_and_feasible() {
    let m = psi_hat();
    let cfg = calibrated(&m);
    let opts = OptimizerOptions::default();
    for kinds in [(PolicyKind::Cw, PolicyKind::Prw), (PolicyKind::Frw, PolicyKind::Cw)] {
        let a = optimize_region(kinds, &m, &cfg, &opts, 5).unwrap();
        let b = optimize_region(kinds, &m, &cfg, &opts, 5).unwrap();
        assert_eq!(a.utility.to_bits(), b.utility.to_bits());
        assert_eq!(a.region, b.region);
        let r = a.region;
        assert!(r.t_w1 >= 0.0 && r.u_w1 >= 0.0 && r.t_w1 <= r.t_w2 && r.u_w1 <= r.u_w2);
        for s in &a.start_reports {
            if let Some(u0) = s.initial_utility {
                assert!(a.utility >= u0 - 1e-9, "start {} at {u0} beats {}", s.index, a.utility);
            }
        }
        let again = expected_utility(&m, &r, &cfg, &QuadratureSpec::default()).unwrap();
        assert!((again - a.utility).abs() < 1e-6);
    }
}

#[test]
fn frw_optimum_is_consistent_with_cw_subspace() {
    let m = psi_hat();
    let cfg = calibrated(&m);
    let opts = OptimizerOptions::default();
    let frw = optimize_region((PolicyKind::Frw, PolicyKind::Frw), &m, &cfg, &opts, 1).unwrap();
    let r = frw.region;
    assert_eq!(r.t_w1, r.t_w2);
    assert_eq!(r.u_w1, r.u_w2);
    let as_cw = WarrantyRegion::new(r.t_w1, r.t_w1 + 0.0, r.u_w1, r.u_w1 + 0.0).unwrap();
    let u = expected_utility(&m, &as_cw, &cfg, &QuadratureSpec::default()).unwrap();
    assert!((u - frw.utility).abs() < 1e-8);
    // The CW × CW optimum can only do at least as well.
    let cw = optimize_region((PolicyKind::Cw, PolicyKind::Cw), &m, &cfg, &opts, 1).unwrap();
    assert!(cw.utility >= frw.utility - 1e-9);
}

#[test]
fn subregion_integrals_are_nonnegative() {
    let m = psi_hat();
    let mut rng = child_rng(99, 0);
    for _ in 0..50 {
        let a: f64 = rng.random::<f64>() * 1.5;
        let b = a + rng.random::<f64>();
        let c: f64 = rng.random::<f64>() * 0.5;
        let d = c + rng.random::<f64>() * 0.5;
        let w = subregion_integrals(&m, &WarrantyRegion::new(a, b, c, d).unwrap(), &QuadratureSpec::default()).unwrap();
        assert!(w.as_array().iter().all(|&v| v >= 0.0));
    }
}
