//! Two-parameter Weibull marginals.
//!
//! Parameterization: `F(x) = 1 - exp(-(x / scale)^shape)`. Published tables often
//! swap the Greek letters for these two roles; this crate only ever speaks of
//! `shape` and `scale`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullParams {
    shape: f64,
    scale: f64,
}

impl WeibullParams {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape.is_finite() && shape > 0.0) {
            return Err(Error::InvalidParameter(format!("Weibull shape must be finite and > 0, got {shape}")));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParameter(format!("Weibull scale must be finite and > 0, got {scale}")));
        }
        Ok(Self { shape, scale })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Cumulative hazard `(x / scale)^shape`, evaluated in log space.
    pub(crate) fn cum_hazard(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        (self.shape * (x.ln() - self.scale.ln())).exp()
    }

    pub(crate) fn survival_unchecked(&self, x: f64) -> f64 {
        (-self.cum_hazard(x)).exp()
    }

    pub(crate) fn cdf_unchecked(&self, x: f64) -> f64 {
        -(-self.cum_hazard(x)).exp_m1()
    }

    /// `x` with cdf `p`, for any `p` in [0, 1).
    pub(crate) fn quantile_unchecked(&self, p: f64) -> f64 {
        self.scale * (-(-p).ln_1p()).powf(1.0 / self.shape)
    }
}

fn check_support(x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(domain("Weibull argument", x))
    }
}

pub fn weibull_cdf(p: &WeibullParams, x: f64) -> Result<f64> {
    check_support(x)?;
    Ok(p.cdf_unchecked(x))
}

pub fn weibull_survival(p: &WeibullParams, x: f64) -> Result<f64> {
    check_support(x)?;
    Ok(p.survival_unchecked(x))
}

pub fn weibull_quantile(p: &WeibullParams, prob: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&prob) {
        return Err(domain("quantile probability", prob));
    }
    Ok(p.quantile_unchecked(prob))
}

/// Density value, or [`Density::Infinite`] at the origin when `shape < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Density {
    Finite(f64),
    Infinite,
}

impl Density {
    pub fn value(self) -> f64 {
        match self {
            Density::Finite(v) => v,
            Density::Infinite => f64::INFINITY,
        }
    }
}

pub fn weibull_pdf(p: &WeibullParams, x: f64) -> Result<Density> {
    check_support(x)?;
    let k = p.shape;
    if x == 0.0 {
        return Ok(if k < 1.0 {
            Density::Infinite
        } else if k == 1.0 {
            Density::Finite(1.0 / p.scale)
        } else {
            Density::Finite(0.0)
        });
    }
    Ok(Density::Finite(weibull_log_pdf(p, x).exp()))
}

/// Log density for `x > 0`.
pub(crate) fn weibull_log_pdf(p: &WeibullParams, x: f64) -> f64 {
    let z = x.ln() - p.scale.ln();
    p.shape.ln() - p.scale.ln() + (p.shape - 1.0) * z - (p.shape * z).exp()
}

pub fn weibull_loglik(p: &WeibullParams, data: &[f64]) -> Result<f64> {
    let mut terms = Vec::with_capacity(data.len());
    for &x in data {
        if !(x.is_finite() && x > 0.0) {
            return Err(domain("Weibull observation", x));
        }
        terms.push(weibull_log_pdf(p, x));
    }
    Ok(crate::quadrature::pairwise_sum(&terms))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullFit {
    pub params: WeibullParams,
    pub loglik: f64,
}

const SHAPE_LO: f64 = 1e-3;
const SHAPE_HI: f64 = 1e3;
const SHAPE_TOL: f64 = 1e-10;

/// Shape-profile sums at `k`, normalized by the largest observation to stay finite.
struct Profile<'a> {
    logs: &'a [f64],
    max_log: f64,
    mean_log: f64,
}

impl Profile<'_> {
    /// Returns `(g(k), g'(k))` for the score `g(k) = Σx^k ln x / Σx^k − 1/k − mean(ln x)`.
    fn score(&self, k: f64) -> (f64, f64) {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for &l in self.logs {
            let w = (k * (l - self.max_log)).exp();
            s0 += w;
            s1 += w * l;
            s2 += w * l * l;
        }
        let m1 = s1 / s0;
        let var = s2 / s0 - m1 * m1;
        (m1 - 1.0 / k - self.mean_log, var.max(0.0) + 1.0 / (k * k))
    }

    fn scale_for(&self, k: f64) -> f64 {
        let mean_w = self.logs.iter().map(|&l| (k * (l - self.max_log)).exp()).sum::<f64>()
            / self.logs.len() as f64;
        (self.max_log + mean_w.ln() / k).exp()
    }
}

/// Maximum-likelihood Weibull fit for a complete sample.
///
/// The shape solves the profile score equation by a safeguarded Newton
/// iteration inside a shrinking bisection bracket on [1e-3, 1e3]; the scale then
/// follows in closed form as `(mean x^k)^(1/k)`.
pub fn fit_weibull_mle(data: &[f64]) -> Result<WeibullFit> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for &x in data {
        if !x.is_finite() {
            return Err(domain("Weibull observation", x));
        }
        if x <= 0.0 {
            return Err(Error::Fit(format!(
                "observations must be strictly positive (got {x}); zeros are not perturbed"
            )));
        }
    }
    let logs: Vec<f64> = data.iter().map(|x| x.ln()).collect();
    let max_log = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_log = logs.iter().copied().fold(f64::INFINITY, f64::min);
    if max_log == min_log {
        return Err(Error::Fit("need at least two distinct values".into()));
    }
    let mean_log = logs.iter().sum::<f64>() / logs.len() as f64;
    let profile = Profile { logs: &logs, max_log, mean_log };

    let (mut lo, mut hi) = (SHAPE_LO, SHAPE_HI);
    let (g_lo, _) = profile.score(lo);
    let (g_hi, _) = profile.score(hi);
    if !(g_lo < 0.0 && g_hi > 0.0) {
        return Err(Error::Fit(format!(
            "shape root not bracketed in [{SHAPE_LO}, {SHAPE_HI}] (score {g_lo:e}, {g_hi:e})"
        )));
    }

    let mut k = 1.0;
    for _ in 0..200 {
        let (g, dg) = profile.score(k);
        if g == 0.0 {
            break;
        }
        if g < 0.0 {
            lo = k;
        } else {
            hi = k;
        }
        let newton = k - g / dg;
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        let step = (next - k).abs();
        k = next;
        if step < SHAPE_TOL * k.max(1.0) || hi - lo < SHAPE_TOL {
            break;
        }
    }

    let params = WeibullParams::new(k, profile.scale_for(k))?;
    let loglik = weibull_loglik(&params, data)?;
    Ok(WeibullFit { params, loglik })
}
