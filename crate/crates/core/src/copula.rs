//! Gumbel-copula joint lifetime model with Weibull margins.
//!
//! Two couplings of the same Gumbel copula `C` appear in the model:
//!
//! * the joint cdf `F(t, u) = C(F_T(t), F_U(u))`, and
//! * the joint reliability `R(t, u) = C(R_T(t), R_U(u))`,
//!   which has the closed form `exp(-(a + b)^(1/θ))` with
//!   `a = (t/σ_T)^(k_T θ)`, `b = (u/σ_U)^(k_U θ)`.
//!
//! The density is `∂²R/∂t∂u`:
//!
//! ```text
//! f(t, u) = k_T k_U / (t u) · a b · s^(1/θ − 2) · (s^(1/θ) + θ − 1) · exp(−s^(1/θ)),   s = a + b
//! ```
//!
//! For `θ > 1` these are two different joint laws (the cdf of the density above
//! is `F_T + F_U − 1 + R`, not `C(F_T, F_U)`). Warranty cost evaluation follows
//! the published formulas, which use `F` for cell probabilities and `f` for
//! prorated integrals; see [`crate::utility`].

use rand::distr::Open01;
use rand::Rng as _;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FailureRecord};
use crate::error::{domain, Error, Result};
use crate::kendall::kendall_tau;
use crate::marginal::{fit_weibull_mle, WeibullParams};
use crate::quadrature::pairwise_sum;
use crate::rng::{child_rng, rng_from_seed, Rng};
use crate::simplex::{self, SimplexOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointModel {
    margin_t: WeibullParams,
    margin_u: WeibullParams,
    theta: f64,
}

impl JointModel {
    pub fn new(margin_t: WeibullParams, margin_u: WeibullParams, theta: f64) -> Result<Self> {
        if !(theta.is_finite() && theta >= 1.0) {
            return Err(Error::InvalidParameter(format!("Gumbel theta must be finite and >= 1, got {theta}")));
        }
        Ok(Self { margin_t, margin_u, theta })
    }

    /// Build from `(shape_t, scale_t, shape_u, scale_u, theta)`.
    pub fn from_params(shape_t: f64, scale_t: f64, shape_u: f64, scale_u: f64, theta: f64) -> Result<Self> {
        Self::new(WeibullParams::new(shape_t, scale_t)?, WeibullParams::new(shape_u, scale_u)?, theta)
    }

    pub fn margin_t(&self) -> &WeibullParams {
        &self.margin_t
    }

    pub fn margin_u(&self) -> &WeibullParams {
        &self.margin_u
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Kendall's tau implied by θ: `1 − 1/θ`.
    pub fn kendall_tau(&self) -> f64 {
        1.0 - 1.0 / self.theta
    }

    pub(crate) fn axis_t(&self, t: f64) -> AxisTerm {
        AxisTerm::new(&self.margin_t, self.theta, t)
    }

    pub(crate) fn axis_u(&self, u: f64) -> AxisTerm {
        AxisTerm::new(&self.margin_u, self.theta, u)
    }

    /// Log density from precomputed per-axis terms.
    pub(crate) fn log_density_parts(&self, t: &AxisTerm, u: &AxisTerm) -> f64 {
        let theta = self.theta;
        let (hi, lo) = if t.log_a >= u.log_a { (t.log_a, u.log_a) } else { (u.log_a, t.log_a) };
        let log_s = hi + (lo - hi).exp().ln_1p();
        let s_root = (log_s / theta).exp();
        t.log_h + u.log_h + (1.0 / theta - 2.0) * log_s + (s_root + theta - 1.0).ln() - s_root
    }
}

/// Per-axis factors of the density: `log_a = kθ(ln x − ln σ)` and
/// `log_h = ln k + log_a − ln x`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct AxisTerm {
    pub log_a: f64,
    pub log_h: f64,
}

impl AxisTerm {
    fn new(p: &WeibullParams, theta: f64, x: f64) -> Self {
        let lx = x.ln();
        let log_a = p.shape() * theta * (lx - p.scale().ln());
        Self { log_a, log_h: p.shape().ln() + log_a - lx }
    }
}

/// `(x^θ + y^θ)^(1/θ)` for `x, y ≥ 0` without overflow or underflow at large θ.
fn gumbel_norm(x: f64, y: f64, theta: f64) -> f64 {
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    if hi == 0.0 {
        return 0.0;
    }
    if hi.is_infinite() {
        return f64::INFINITY;
    }
    hi * ((lo / hi).powf(theta).ln_1p() / theta).exp()
}

pub fn gumbel_copula_cdf(v1: f64, v2: f64, theta: f64) -> Result<f64> {
    for v in [v1, v2] {
        if !(0.0..=1.0).contains(&v) {
            return Err(domain("copula argument", v));
        }
    }
    if !(theta.is_finite() && theta >= 1.0) {
        return Err(domain("Gumbel theta", theta));
    }
    if v1 == 0.0 || v2 == 0.0 {
        return Ok(0.0);
    }
    Ok((-gumbel_norm(-v1.ln(), -v2.ln(), theta)).exp())
}

fn check_nonneg(what: &'static str, x: f64) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        Err(domain(what, x))
    } else {
        Ok(())
    }
}

/// `−ln F(x)` for a Weibull margin; `+∞` at `x = 0`.
fn neg_log_cdf(p: &WeibullParams, x: f64) -> f64 {
    if x == 0.0 {
        return f64::INFINITY;
    }
    if x.is_infinite() {
        return 0.0;
    }
    -(p.cdf_unchecked(x)).ln()
}

/// `F(t, u) = C(F_T(t), F_U(u))`.
pub fn joint_cdf(m: &JointModel, t: f64, u: f64) -> Result<f64> {
    check_nonneg("age", t)?;
    check_nonneg("usage", u)?;
    Ok(joint_cdf_unchecked(m, t, u))
}

pub(crate) fn joint_cdf_unchecked(m: &JointModel, t: f64, u: f64) -> f64 {
    if t == 0.0 || u == 0.0 {
        return 0.0;
    }
    let x = neg_log_cdf(&m.margin_t, t);
    let y = neg_log_cdf(&m.margin_u, u);
    (-gumbel_norm(x, y, m.theta)).exp()
}

/// `R(t, u) = P(T > t, U > u) = exp(−[(t/σ_T)^(k_T θ) + (u/σ_U)^(k_U θ)]^(1/θ))`.
pub fn joint_reliability(m: &JointModel, t: f64, u: f64) -> Result<f64> {
    check_nonneg("age", t)?;
    check_nonneg("usage", u)?;
    let x = m.margin_t.cum_hazard(t);
    let y = m.margin_u.cum_hazard(u);
    Ok((-gumbel_norm(x, y, m.theta)).exp())
}

pub fn joint_log_density(m: &JointModel, t: f64, u: f64) -> Result<f64> {
    for (what, v) in [("age", t), ("usage", u)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(domain(what, v));
        }
    }
    Ok(m.log_density_parts(&m.axis_t(t), &m.axis_u(u)))
}

pub fn joint_density(m: &JointModel, t: f64, u: f64) -> Result<f64> {
    joint_log_density(m, t, u).map(f64::exp)
}

/// Complete-sample log-likelihood.
///
/// Pointwise terms are summed in sorted order, so permuting the rows leaves
/// the result bit-identical.
pub fn joint_loglik(m: &JointModel, d: &Dataset) -> Result<f64> {
    let mut terms = Vec::with_capacity(d.len());
    for (row, r) in d.records().iter().enumerate() {
        let v = m.log_density_parts(&m.axis_t(r.age), &m.axis_u(r.usage));
        if !v.is_finite() {
            return Err(Error::Evaluation { row, value: v });
        }
        terms.push(v);
    }
    terms.sort_by(f64::total_cmp);
    Ok(pairwise_sum(&terms))
}

#[derive(Debug, Clone)]
pub struct JointFitOptions {
    /// Number of simplex starts (the first is the unjittered initial point).
    pub starts: usize,
    pub seed: u64,
    /// Standard deviation of the Gaussian jitter applied in unconstrained coordinates.
    pub jitter: f64,
    pub simplex: SimplexOptions,
}

impl Default for JointFitOptions {
    fn default() -> Self {
        Self {
            starts: 6,
            seed: 20_240_101,
            jitter: 0.3,
            simplex: SimplexOptions {
                initial_step: 0.2,
                max_evaluations: 30_000,
                ..SimplexOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointFitReport {
    pub starts: usize,
    pub best_start: usize,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// θ ended within 1e-4 of the independence bound.
    pub at_independence_boundary: bool,
    pub initial: JointModel,
    pub sample_kendall_tau: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointFit {
    pub model: JointModel,
    pub loglik: f64,
    pub report: JointFitReport,
}

const LOG_THETA_EXCESS_MIN: f64 = -30.0;

fn to_unconstrained(m: &JointModel) -> [f64; 5] {
    [
        m.margin_t.shape().ln(),
        m.margin_t.scale().ln(),
        m.margin_u.shape().ln(),
        m.margin_u.scale().ln(),
        (m.theta - 1.0).max((LOG_THETA_EXCESS_MIN).exp()).ln(),
    ]
}

fn from_unconstrained(z: &[f64]) -> Option<JointModel> {
    if z[4] < LOG_THETA_EXCESS_MIN {
        return None;
    }
    JointModel::from_params(z[0].exp(), z[1].exp(), z[2].exp(), z[3].exp(), 1.0 + z[4].exp()).ok()
}

/// Default starting point: marginal MLEs with `θ₀ = 1/(1 − τ̂)`, clamped to [1.01, 100].
pub fn initial_joint_model(d: &Dataset) -> Result<(JointModel, f64)> {
    let ages = d.ages();
    let usages = d.usages();
    let mt = fit_weibull_mle(&ages)?.params;
    let mu = fit_weibull_mle(&usages)?.params;
    let tau = kendall_tau(&ages, &usages).unwrap_or(0.0);
    let theta0 = if tau < 0.99 { (1.0 / (1.0 - tau)).clamp(1.01, 100.0) } else { 100.0 };
    Ok((JointModel::new(mt, mu, theta0)?, tau))
}

/// Maximize the complete-sample log-likelihood over all five parameters.
///
/// Works in `(ln k_T, ln σ_T, ln k_U, ln σ_U, ln(θ − 1))` with a multi-start
/// simplex search. Start `i > 0` jitters the initial point with the stream
/// `child_rng(seed, i)`.
pub fn fit_joint_mle(d: &Dataset, init: Option<JointModel>, options: &JointFitOptions) -> Result<JointFit> {
    if d.len() < 5 {
        return Err(Error::Fit(format!("joint fit needs at least 5 records, got {}", d.len())));
    }
    let (default_init, tau) = initial_joint_model(d)?;
    let init = init.unwrap_or(default_init);
    let z0 = to_unconstrained(&init);

    let objective = |z: &[f64]| match from_unconstrained(z) {
        Some(m) => joint_loglik(&m, d).map(|l| -l).unwrap_or(f64::INFINITY),
        None => f64::INFINITY,
    };

    let starts = options.starts.max(1);
    let mut best: Option<(usize, simplex::SimplexOutcome)> = None;
    let mut iterations = 0;
    let mut evaluations = 0;
    for s in 0..starts {
        let mut start = z0;
        if s > 0 {
            let mut rng = child_rng(options.seed, s as u64);
            for z in start.iter_mut() {
                let g: f64 = rng.sample(rand_distr::StandardNormal);
                *z += options.jitter * g;
            }
        }
        if !objective(&start).is_finite() {
            continue;
        }
        let out = simplex::minimize(objective, &start, &options.simplex);
        iterations += out.iterations;
        evaluations += out.evaluations;
        let better = match &best {
            None => true,
            Some((_, b)) => out.value < b.value,
        };
        if better {
            best = Some((s, out));
        }
    }

    let (best_start, out) = best.ok_or_else(|| Error::Fit("no start produced a finite likelihood".into()))?;
    if !out.converged {
        return Err(Error::NonConvergence {
            message: "joint likelihood search exhausted its evaluation budget".into(),
            best_point: out.x.iter().map(|z| z.exp()).collect(),
            best_value: -out.value,
        });
    }
    let model = from_unconstrained(&out.x).ok_or_else(|| Error::Fit("optimum left the parameter space".into()))?;
    Ok(JointFit {
        model,
        loglik: -out.value,
        report: JointFitReport {
            starts,
            best_start,
            iterations,
            evaluations,
            converged: out.converged,
            at_independence_boundary: model.theta - 1.0 < 1e-4,
            initial: init,
            sample_kendall_tau: tau,
        },
    })
}

/// Positive stable variate with Laplace transform `exp(−s^α)`, `0 < α ≤ 1`
/// (Chambers–Mallows–Stuck in Kanter's form).
fn positive_stable(alpha: f64, rng: &mut Rng) -> f64 {
    if alpha >= 1.0 {
        return 1.0;
    }
    let u: f64 = rng.sample(Open01);
    let phi = std::f64::consts::PI * u;
    let w: f64 = rng.sample(Exp1);
    let a = (alpha * phi).sin() / phi.sin().powf(1.0 / alpha);
    let b = (((1.0 - alpha) * phi).sin() / w).powf((1.0 - alpha) / alpha);
    a * b
}

/// Copula draws in exponent form: returns `(y1, y2)` with `(e^{−y1}, e^{−y2})`
/// distributed as the Gumbel copula. Keeping the exponent avoids rounding
/// `v` to 1 in the tails.
pub(crate) fn sample_copula_exponents(theta: f64, rng: &mut Rng) -> (f64, f64) {
    let alpha = 1.0 / theta;
    loop {
        let v = positive_stable(alpha, rng);
        let e1: f64 = rng.sample(Exp1);
        let e2: f64 = rng.sample(Exp1);
        let y1 = (e1 / v).powf(alpha);
        let y2 = (e2 / v).powf(alpha);
        if y1 > 0.0 && y2 > 0.0 && y1.is_finite() && y2.is_finite() {
            return (y1, y2);
        }
    }
}

/// `n` pairs `(v1, v2)` from the Gumbel copula (Marshall–Olkin construction).
pub fn sample_copula(theta: f64, n: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    if !(theta.is_finite() && theta >= 1.0) {
        return Err(domain("Gumbel theta", theta));
    }
    let mut rng = rng_from_seed(seed);
    Ok((0..n)
        .map(|_| {
            let (y1, y2) = sample_copula_exponents(theta, &mut rng);
            ((-y1).exp(), (-y2).exp())
        })
        .collect())
}

/// Draw `n` (age, usage) records whose joint reliability is `R(t, u)`.
pub fn sample_joint(m: &JointModel, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be >= 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mt = m.margin_t;
    let mu = m.margin_u;
    let records = (0..n)
        .map(|_| {
            let (y1, y2) = sample_copula_exponents(m.theta, &mut rng);
            FailureRecord {
                age: mt.scale() * y1.powf(1.0 / mt.shape()),
                usage: mu.scale() * y2.powf(1.0 / mu.shape()),
            }
        })
        .collect();
    Dataset::new(records, format!("sample(n={n}, seed={seed})"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn psi_hat() -> JointModel {
        JointModel::from_params(0.9132, 2.1807, 0.8518, 1.0398, 6.5937).unwrap()
    }

    #[test]
    fn copula_examples() {
        assert!((gumbel_copula_cdf(0.3, 0.7, 1.0).unwrap() - 0.21).abs() < 1e-15);
        assert!((gumbel_copula_cdf(0.5, 0.5, 1e6).unwrap() - 0.5).abs() < 1e-6);
        let v = gumbel_copula_cdf(0.1799, 0.1632, 6.5937).unwrap();
        assert!((v - 0.1403).abs() < 2e-4, "{v}");
        assert_eq!(gumbel_copula_cdf(0.0, 0.4, 3.0).unwrap(), 0.0);
        assert!(gumbel_copula_cdf(1.2, 0.4, 3.0).is_err());
        assert!(gumbel_copula_cdf(0.2, -0.1, 3.0).is_err());
        assert!(gumbel_copula_cdf(0.2, 0.1, 0.5).is_err());
    }

    #[test]
    fn reliability_margins() {
        let m = psi_hat();
        assert_eq!(joint_reliability(&m, 0.0, 0.0).unwrap(), 1.0);
        let r = joint_reliability(&m, 1.0, 0.0).unwrap();
        let rt = crate::marginal::weibull_survival(m.margin_t(), 1.0).unwrap();
        assert!((r - rt).abs() < 1e-12);
        let f = joint_cdf(&m, 1.0, 1e3).unwrap();
        let ft = crate::marginal::weibull_cdf(m.margin_t(), 1.0).unwrap();
        assert!((f - ft).abs() < 1e-8);
        assert!(joint_cdf(&m, -1.0, 1.0).is_err());
        assert!(joint_reliability(&m, 1.0, -1.0).is_err());
    }

    #[test]
    fn density_independence_product() {
        let m = JointModel::from_params(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let v = joint_density(&m, 1.0, 1.0).unwrap();
        assert!((v - (-2f64).exp()).abs() < 1e-15);
        assert!(joint_density(&m, 0.0, 1.0).is_err());
    }

    #[test]
    fn density_matches_mixed_finite_difference() {
        let m = psi_hat();
        let (t, u, h) = (1.0, 0.5, 1e-4);
        let r = |a, b| joint_reliability(&m, a, b).unwrap();
        let fd = (r(t + h, u + h) - r(t + h, u - h) - r(t - h, u + h) + r(t - h, u - h)) / (4.0 * h * h);
        let f = joint_density(&m, t, u).unwrap();
        assert!(((fd - f) / f).abs() < 1e-5, "fd={fd} f={f}");
    }

    #[test]
    fn loglik_reports_offending_row() {
        let m = JointModel::from_params(50.0, 1.0, 1.0, 1.0, 2.0).unwrap();
        let d = Dataset::from_pairs(&[(1.0, 0.5), (1e300, 0.5)], "t").unwrap();
        match joint_loglik(&m, &d) {
            Err(Error::Evaluation { row, .. }) => assert_eq!(row, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn theta_validation() {
        assert!(JointModel::from_params(1.0, 1.0, 1.0, 1.0, 0.99).is_err());
        assert!(JointModel::from_params(1.0, 1.0, 1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = psi_hat();
        let a = sample_joint(&m, 50, 9).unwrap();
        let b = sample_joint(&m, 50, 9).unwrap();
        assert_eq!(a.records(), b.records());
        assert!(sample_joint(&m, 0, 9).is_err());
    }
}
