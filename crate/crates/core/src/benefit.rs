//! Economic benefit of offering a warranty region, and calibration of its rates.
//!
//! `B = A1 · M · (1 − e^{−A2 (t_w1 + t_w2)/2}) · (1 − e^{−A3 (u_w1 + u_w2)/2})`
//!
//! The rates are pinned by the share of benefit retained when one axis moves
//! from FRW to PRW at the market anchors `(t_w, u_w)`:
//! `h(A) = (1 − e^{−A w/2}) / (1 − e^{−A w}) = 1 / (1 + e^{−A w/2})`.

use serde::{Deserialize, Serialize};

use crate::copula::JointModel;
use crate::error::{domain, Error, Result};
use crate::marginal::weibull_quantile;
use crate::policy::WarrantyRegion;

/// Fully calibrated economic inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EconomicConfig {
    /// Sale price `S`.
    pub price: f64,
    /// Profit per unit `A1`.
    pub unit_profit: f64,
    /// Potential sales `M`.
    pub market_size: f64,
    pub retention_t: f64,
    pub retention_u: f64,
    pub anchor_p: f64,
    pub anchor_t: f64,
    pub anchor_u: f64,
    /// `A2`, per unit of age.
    pub rate_t: f64,
    /// `A3`, per unit of usage.
    pub rate_u: f64,
}

/// Raw economic inputs; [`EconomicSettings::calibrate`] derives anchors and rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EconomicSettings {
    pub price: f64,
    pub unit_profit: f64,
    pub market_size: f64,
    pub retention_t: f64,
    pub retention_u: f64,
    pub anchor_p: f64,
    pub anchor_t: Option<f64>,
    pub anchor_u: Option<f64>,
    pub rate_t: Option<f64>,
    pub rate_u: Option<f64>,
}

impl Default for EconomicSettings {
    fn default() -> Self {
        Self {
            price: 700.0,
            unit_profit: 200.0,
            market_size: 1.0,
            retention_t: 0.75,
            retention_u: 0.75,
            anchor_p: 0.1,
            anchor_t: None,
            anchor_u: None,
            rate_t: None,
            rate_u: None,
        }
    }
}

impl EconomicSettings {
    /// Anchors default to the `anchor_p` quantiles of the model's margins;
    /// rates default to the closed-form solution of `h(A) = q`.
    pub fn calibrate(&self, model: &JointModel) -> Result<EconomicConfig> {
        if !(self.anchor_p > 0.0 && self.anchor_p < 1.0) {
            return Err(domain("anchor quantile", self.anchor_p));
        }
        let anchor_t = match self.anchor_t {
            Some(v) => v,
            None => weibull_quantile(model.margin_t(), self.anchor_p)?,
        };
        let anchor_u = match self.anchor_u {
            Some(v) => v,
            None => weibull_quantile(model.margin_u(), self.anchor_p)?,
        };
        let rate_t = match self.rate_t {
            Some(v) => v,
            None => calibrate_rate(self.retention_t, anchor_t)?,
        };
        let rate_u = match self.rate_u {
            Some(v) => v,
            None => calibrate_rate(self.retention_u, anchor_u)?,
        };
        let cfg = EconomicConfig {
            price: self.price,
            unit_profit: self.unit_profit,
            market_size: self.market_size,
            retention_t: self.retention_t,
            retention_u: self.retention_u,
            anchor_p: self.anchor_p,
            anchor_t,
            anchor_u,
            rate_t,
            rate_u,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl EconomicConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.price.is_finite() && self.price > 0.0) {
            return bad(format!("price must be > 0, got {}", self.price));
        }
        if !(self.unit_profit.is_finite() && self.unit_profit >= 0.0) {
            return bad(format!("unit profit must be >= 0, got {}", self.unit_profit));
        }
        if !(self.market_size.is_finite() && self.market_size >= 1.0) {
            return bad(format!("market size must be >= 1, got {}", self.market_size));
        }
        for (name, q) in [("retention_t", self.retention_t), ("retention_u", self.retention_u)] {
            if !(q > 0.5 && q < 1.0) {
                return bad(format!("{name} must lie in (0.5, 1), got {q}"));
            }
        }
        for (name, v) in [
            ("anchor_t", self.anchor_t),
            ("anchor_u", self.anchor_u),
            ("rate_t", self.rate_t),
            ("rate_u", self.rate_u),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be > 0, got {v}"));
            }
        }
        Ok(())
    }

    pub fn with_price(mut self, price: f64) -> Self {
        self.price = price;
        self
    }

    /// Upper bound on the benefit, `A1 · M`.
    pub fn max_benefit(&self) -> f64 {
        self.unit_profit * self.market_size
    }
}

fn axis_benefit(rate: f64, w1: f64, w2: f64) -> f64 {
    -(-rate * 0.5 * (w1 + w2)).exp_m1()
}

pub fn benefit(region: &WarrantyRegion, cfg: &EconomicConfig) -> f64 {
    cfg.max_benefit()
        * axis_benefit(cfg.rate_t, region.t_w1, region.t_w2)
        * axis_benefit(cfg.rate_u, region.u_w1, region.u_w2)
}

fn check_positive(what: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(domain(what, v))
    }
}

/// `h(A) = 1 / (1 + e^{−A w / 2})`; increases from 1/2 to 1.
pub fn retention_ratio(rate: f64, anchor: f64) -> Result<f64> {
    check_positive("benefit rate", rate)?;
    check_positive("warranty anchor", anchor)?;
    Ok(1.0 / (1.0 + (-0.5 * rate * anchor).exp()))
}

/// Solve `h(A) = q` in closed form: `A = (2/w) ln(q / (1 − q))`.
pub fn calibrate_rate(q: f64, anchor: f64) -> Result<f64> {
    if !(q > 0.5 && q < 1.0) {
        return Err(domain("retention target", q));
    }
    check_positive("warranty anchor", anchor)?;
    Ok(2.0 / anchor * (q / (1.0 - q)).ln())
}

/// Solve `h(A) = q` by bisection on the unsimplified ratio, to `tol` in `A`.
pub fn calibrate_rate_bisection(q: f64, anchor: f64, tol: f64) -> Result<f64> {
    if !(q > 0.5 && q < 1.0) {
        return Err(domain("retention target", q));
    }
    check_positive("warranty anchor", anchor)?;
    let h = |a: f64| (-(-a * anchor / 2.0).exp_m1()) / (-(-a * anchor).exp_m1());
    let (mut lo, mut hi) = (f64::MIN_POSITIVE, 1.0 / anchor);
    while h(hi) < q {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Fit(format!("no finite rate reaches retention {q}")));
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if h(mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `h1(A2) · h2(A3)`: retained share when both axes move from FRW to PRW.
pub fn combined_retention(rate_t: f64, rate_u: f64, anchor_t: f64, anchor_u: f64) -> Result<f64> {
    Ok(retention_ratio(rate_t, anchor_t)? * retention_ratio(rate_u, anchor_u)?)
}
