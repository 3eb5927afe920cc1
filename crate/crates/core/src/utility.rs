//! Expected warranty cost and expected utility of a warranty region.
//!
//! The region `[0, t_w2] × [0, u_w2]` splits into four cells at `(t_w1, u_w1)`:
//! full refund (1), age-prorated (2), usage-prorated (3) and doubly prorated
//! (4). With `F` the joint cdf and `P_k` the cdf mass of cell `k`, the
//! published expected cost is
//!
//! ```text
//! E[W] = M S [ P_1 W1 + P_2 W2 + P_3 W3 + P_4 W4 ],     W1 = F(t_w1, u_w1) = P_1
//! ```
//!
//! where `W2..W4` integrate the prorate weight against the density `f` over
//! their cell. Each term multiplies a cell probability by an unconditional
//! weighted integral over the same cell, so FRW × FRW reduces to `M S F²`.
//! [`CostMode::Conventional`] gives `M S ∫∫ c(t, u) f dt du` instead, for
//! comparison only.

use serde::{Deserialize, Serialize};

use crate::benefit::{benefit, EconomicConfig};
use crate::copula::{joint_cdf_unchecked, joint_reliability, sample_copula_exponents, JointModel};
use crate::error::{Error, Result};
use crate::policy::WarrantyRegion;
use crate::quadrature::{pairwise_sum, GaussLegendre};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub nodes_per_axis: usize,
    /// Also integrate with half the nodes and fail if the two disagree.
    pub refinement: bool,
    pub rel_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { nodes_per_axis: 64, refinement: true, rel_tol: 1e-8 }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nodes_per_axis < 8 {
            return Err(Error::InvalidParameter(format!(
                "quadrature needs at least 8 nodes per axis, got {}",
                self.nodes_per_axis
            )));
        }
        if !(self.rel_tol.is_finite() && self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter(format!("rel_tol must be > 0, got {}", self.rel_tol)));
        }
        Ok(())
    }

    pub fn without_refinement(self) -> Self {
        Self { refinement: false, ..self }
    }
}

/// Which expected-cost formula to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CostMode {
    /// Cell probability times weighted integral, as published.
    #[default]
    Published,
    /// `M S ∫∫ c(t, u) f(t, u) dt du`.
    Conventional,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubregionIntegrals {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
}

impl SubregionIntegrals {
    pub fn as_array(&self) -> [f64; 4] {
        [self.w1, self.w2, self.w3, self.w4]
    }
}

/// Joint-cdf mass of the four cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellProbabilities {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
}

pub fn cell_probabilities(m: &JointModel, r: &WarrantyRegion) -> CellProbabilities {
    let f = |t, u| joint_cdf_unchecked(m, t, u);
    let f11 = f(r.t_w1, r.u_w1);
    let f21 = f(r.t_w2, r.u_w1);
    let f12 = f(r.t_w1, r.u_w2);
    let f22 = f(r.t_w2, r.u_w2);
    CellProbabilities {
        p1: f11,
        p2: (f21 - f11).max(0.0),
        p3: (f12 - f11).max(0.0),
        p4: (f22 + f11 - f21 - f12).max(0.0),
    }
}

/// Cdf of the law with density `f = ∂²R/∂t∂u`: `F_T + F_U − 1 + R`.
pub fn density_cdf(m: &JointModel, t: f64, u: f64) -> Result<f64> {
    let ft = crate::marginal::weibull_cdf(m.margin_t(), t)?;
    let fu = crate::marginal::weibull_cdf(m.margin_u(), u)?;
    Ok((ft + fu - 1.0 + joint_reliability(m, t, u)?).max(0.0))
}

/// Prorate weight along one axis of a cell.
#[derive(Debug, Clone, Copy)]
enum Weight {
    One,
    /// `(end − x) / (end − start)`
    Prorate { start: f64, end: f64 },
}

impl Weight {
    fn at(self, x: f64) -> f64 {
        match self {
            Weight::One => 1.0,
            Weight::Prorate { start, end } => (end - x) / (end - start),
        }
    }
}

/// Precomputed rules plus the model; evaluates integrals for many regions.
#[derive(Debug, Clone)]
pub struct CostIntegrator {
    model: JointModel,
    spec: QuadratureSpec,
    rule: GaussLegendre,
    coarse: Option<GaussLegendre>,
}

impl CostIntegrator {
    pub fn new(model: JointModel, spec: QuadratureSpec) -> Result<Self> {
        spec.validate()?;
        let rule = GaussLegendre::new(spec.nodes_per_axis)?;
        let coarse = if spec.refinement {
            Some(GaussLegendre::new(spec.nodes_per_axis / 2)?)
        } else {
            None
        };
        Ok(Self { model, spec, rule, coarse })
    }

    pub fn model(&self) -> &JointModel {
        &self.model
    }

    pub fn spec(&self) -> &QuadratureSpec {
        &self.spec
    }

    /// `∫∫ g_t(t) g_u(u) f(t, u) dt du` over `[a, b] × [c, d]`.
    ///
    /// Integrates in the coordinates `r = (A + B)^{1/θ}`, `w = A / (A + B)` with
    /// `A = (t/σ_T)^{k_T θ}` and `B = (u/σ_U)^{k_U θ}`. There `w` is uniform and
    /// independent of `r`, whose density `e^{−r}((1 − 1/θ) + r/θ)` is smooth, so
    /// the ridge of the Gumbel density and its singularity at the origin
    /// disappear. For fixed `w` the cell is an interval in `r`; the `w` range
    /// splits where the binding edge changes.
    fn cell(&self, rule: &GaussLegendre, (a, b): (f64, f64), (c, d): (f64, f64), gt: Weight, gu: Weight) -> f64 {
        if b <= a || d <= c {
            return 0.0;
        }
        let m = &self.model;
        let theta = m.theta();
        let alpha = 1.0 / theta;
        let (kt, ku) = (m.margin_t().shape(), m.margin_u().shape());
        let (ln_st, ln_su) = (m.margin_t().scale().ln(), m.margin_u().scale().ln());
        let (la1, la2) = (m.axis_t(a).log_a, m.axis_t(b).log_a);
        let (lb1, lb2) = (m.axis_u(c).log_a, m.axis_u(d).log_a);

        let mut cuts = vec![0.0, 0.5, 1.0];
        for la in [la1, la2] {
            for lb in [lb1, lb2] {
                if la.is_finite() && lb.is_finite() {
                    cuts.push(1.0 / (1.0 + (lb - la).exp()));
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();

        let origin = la1 == f64::NEG_INFINITY && lb1 == f64::NEG_INFINITY;
        let mut inner = vec![0.0; rule.len()];
        let mut rows = Vec::with_capacity(rule.len() * (cuts.len() - 1));
        for pair in cuts.windows(2) {
            let (wl, wr) = (pair[0], pair[1]);
            if wr <= wl {
                continue;
            }
            for (y, wy) in rule.nodes().iter().zip(rule.weights()) {
                let y = 0.5 * (y + 1.0);
                // (w, 1 − w, dw/dy), graded towards 0 or 1 where t or u vanishes.
                let (w, w_c, jac) = if wl == 0.0 {
                    let w = wr * y.powi(GRADING);
                    (w, 1.0 - w, wr * GRADING as f64 * y.powi(GRADING - 1))
                } else if wr == 1.0 {
                    let w_c = (1.0 - wl) * y.powi(GRADING);
                    (1.0 - w_c, w_c, (1.0 - wl) * GRADING as f64 * y.powi(GRADING - 1))
                } else {
                    // Logit scale keeps features near either end resolved.
                    let (xl, xr) = (logit(wl), logit(wr));
                    let x = xl + (xr - xl) * y;
                    let (w, w_c) = (1.0 / (1.0 + (-x).exp()), 1.0 / (1.0 + x.exp()));
                    (w, w_c, (xr - xl) * w * w_c)
                };
                if !(w > 0.0 && w_c > 0.0) {
                    continue;
                }
                let (ln_w, ln_wc) = (w.ln(), w_c.ln());
                let ln_s_lo = (la1 - ln_w).max(lb1 - ln_wc);
                let ln_s_hi = (la2 - ln_w).min(lb2 - ln_wc);
                if ln_s_hi <= ln_s_lo {
                    continue;
                }
                let r_lo = (alpha * ln_s_lo).exp();
                let r_hi = (alpha * ln_s_hi).exp().min(R_MAX);
                if r_hi <= r_lo {
                    continue;
                }
                let log_ratio = (r_hi / r_lo).ln();
                for ((slot, z), wz) in inner.iter_mut().zip(rule.nodes()).zip(rule.weights()) {
                    let z = 0.5 * (z + 1.0);
                    let (r, dr) = if origin {
                        (r_hi * z.powi(GRADING), r_hi * GRADING as f64 * z.powi(GRADING - 1))
                    } else {
                        let r = r_lo * (z * log_ratio).exp();
                        (r, r * log_ratio)
                    };
                    let mut v = (-r).exp() * ((1.0 - alpha) + alpha * r);
                    if let Weight::Prorate { .. } = gt {
                        let ln_r = r.ln();
                        v *= gt.at((ln_st + ln_r / kt + alpha * ln_w / kt).exp());
                    }
                    if let Weight::Prorate { .. } = gu {
                        let ln_r = r.ln();
                        v *= gu.at((ln_su + ln_r / ku + alpha * ln_wc / ku).exp());
                    }
                    *slot = 0.5 * wz * dr * v;
                }
                rows.push(0.5 * wy * jac * pairwise_sum(&inner));
            }
        }
        pairwise_sum(&rows)
    }

    fn integrals_with(&self, rule: &GaussLegendre, r: &WarrantyRegion) -> [f64; 3] {
        let pt = Weight::Prorate { start: r.t_w1, end: r.t_w2 };
        let pu = Weight::Prorate { start: r.u_w1, end: r.u_w2 };
        [
            self.cell(rule, (r.t_w1, r.t_w2), (0.0, r.u_w1), pt, Weight::One),
            self.cell(rule, (0.0, r.t_w1), (r.u_w1, r.u_w2), Weight::One, pu),
            self.cell(rule, (r.t_w1, r.t_w2), (r.u_w1, r.u_w2), pt, pu),
        ]
    }

    /// `∫∫ f` over `[t0, t1] × [u0, u1]`.
    pub fn density_mass(&self, (t0, t1): (f64, f64), (u0, u1): (f64, f64)) -> f64 {
        self.cell(&self.rule, (t0, t1), (u0, u1), Weight::One, Weight::One)
    }

    /// `W1 = F(t_w1, u_w1)`; `W2..W4` by tensor Gauss–Legendre.
    pub fn subregion_integrals(&self, r: &WarrantyRegion) -> Result<SubregionIntegrals> {
        r.validate()?;
        let fine = self.integrals_with(&self.rule, r);
        if let Some(coarse_rule) = &self.coarse {
            let coarse = self.integrals_with(coarse_rule, r);
            let achieved = fine
                .iter()
                .zip(&coarse)
                .map(|(f, c)| (f - c).abs() / f.abs().max(REFINEMENT_FLOOR))
                .fold(0.0, f64::max);
            if !(achieved <= self.spec.rel_tol) {
                return Err(Error::Quadrature { achieved, requested: self.spec.rel_tol });
            }
        }
        Ok(SubregionIntegrals {
            w1: joint_cdf_unchecked(&self.model, r.t_w1, r.u_w1),
            w2: fine[0],
            w3: fine[1],
            w4: fine[2],
        })
    }

    pub fn expected_cost(&self, r: &WarrantyRegion, cfg: &EconomicConfig, mode: CostMode) -> Result<f64> {
        let w = self.subregion_integrals(r)?;
        let scale = cfg.market_size * cfg.price;
        Ok(match mode {
            CostMode::Published => {
                let p = cell_probabilities(&self.model, r);
                scale * (p.p1 * w.w1 + p.p2 * w.w2 + p.p3 * w.w3 + p.p4 * w.w4)
            }
            CostMode::Conventional => {
                let full = density_cdf(&self.model, r.t_w1, r.u_w1)?;
                scale * (full + w.w2 + w.w3 + w.w4)
            }
        })
    }

    pub fn expected_utility(&self, r: &WarrantyRegion, cfg: &EconomicConfig, mode: CostMode) -> Result<f64> {
        Ok(benefit(r, cfg) - self.expected_cost(r, cfg, mode)?)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Exponent of the polynomial grading used at integration limits where an
/// axis variable vanishes.
const GRADING: i32 = 6;

/// `e^{−r}` is below 1e-26 beyond this radius.
const R_MAX: f64 = 60.0;

/// Relative-change floor for the refinement check; integrals below it are
/// compared in absolute terms.
const REFINEMENT_FLOOR: f64 = 1e-6;

pub fn subregion_integrals(m: &JointModel, r: &WarrantyRegion, spec: &QuadratureSpec) -> Result<SubregionIntegrals> {
    CostIntegrator::new(*m, *spec)?.subregion_integrals(r)
}

pub fn expected_warranty_cost(
    m: &JointModel,
    r: &WarrantyRegion,
    cfg: &EconomicConfig,
    spec: &QuadratureSpec,
) -> Result<f64> {
    CostIntegrator::new(*m, *spec)?.expected_cost(r, cfg, CostMode::Published)
}

pub fn expected_utility(m: &JointModel, r: &WarrantyRegion, cfg: &EconomicConfig, spec: &QuadratureSpec) -> Result<f64> {
    CostIntegrator::new(*m, *spec)?.expected_utility(r, cfg, CostMode::Published)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Monte-Carlo estimate of the published expected cost.
///
/// Each Gumbel-copula draw `(v1, v2)` is mapped twice: through the inverse
/// marginal cdfs (a draw from the law with cdf `F`, used for the cell
/// probabilities) and through the inverse marginal reliabilities (a draw from
/// the law with density `f`, used for the prorated integrals). The standard
/// error comes from the delta method on the seven sample means.
pub fn mc_expected_cost(m: &JointModel, r: &WarrantyRegion, cfg: &EconomicConfig, n: usize, seed: u64) -> Result<McEstimate> {
    r.validate()?;
    if n < 1000 {
        return Err(Error::InvalidParameter(format!("Monte-Carlo needs at least 1000 samples, got {n}")));
    }
    let mt = *m.margin_t();
    let mu = *m.margin_u();
    let mut rng = rng_from_seed(seed);

    // Per-draw indicators p1..p4 (cdf coupling) and weights w2..w4 (survival coupling).
    let mut draws: Vec<[f64; 7]> = Vec::with_capacity(n);
    for _ in 0..n {
        let (y1, y2) = sample_copula_exponents(m.theta(), &mut rng);
        let x = mt.scale() * (-(-(-y1).exp_m1()).ln()).powf(1.0 / mt.shape());
        let y = mu.scale() * (-(-(-y2).exp_m1()).ln()).powf(1.0 / mu.shape());
        let t = mt.scale() * y1.powf(1.0 / mt.shape());
        let u = mu.scale() * y2.powf(1.0 / mu.shape());

        let mut d = [0.0; 7];
        let (xa, xb) = (x < r.t_w1, x >= r.t_w1 && x < r.t_w2);
        let (ya, yb) = (y < r.u_w1, y >= r.u_w1 && y < r.u_w2);
        d[0] = f64::from(u8::from(xa && ya));
        d[1] = f64::from(u8::from(xb && ya));
        d[2] = f64::from(u8::from(xa && yb));
        d[3] = f64::from(u8::from(xb && yb));

        let (ta, tb) = (t < r.t_w1, t >= r.t_w1 && t < r.t_w2);
        let (ua, ub) = (u < r.u_w1, u >= r.u_w1 && u < r.u_w2);
        let gt = if tb { (r.t_w2 - t) / (r.t_w2 - r.t_w1) } else { 0.0 };
        let gu = if ub { (r.u_w2 - u) / (r.u_w2 - r.u_w1) } else { 0.0 };
        d[4] = if ua { gt } else { 0.0 };
        d[5] = if ta { gu } else { 0.0 };
        d[6] = gt * gu;
        draws.push(d);
    }

    let nf = n as f64;
    let mut mean = [0.0; 7];
    for k in 0..7 {
        let col: Vec<f64> = draws.iter().map(|d| d[k]).collect();
        mean[k] = pairwise_sum(&col) / nf;
    }
    let [p1, p2, p3, p4, w2, w3, w4] = mean;
    let g = p1 * p1 + p2 * w2 + p3 * w3 + p4 * w4;
    let grad = [2.0 * p1, w2, w3, w4, p2, p3, p4];

    let lin: Vec<f64> = draws
        .iter()
        .map(|d| d.iter().zip(&grad).map(|(x, g)| x * g).sum::<f64>())
        .collect();
    let lin_mean = pairwise_sum(&lin) / nf;
    let sq: Vec<f64> = lin.iter().map(|v| (v - lin_mean).powi(2)).collect();
    let var = pairwise_sum(&sq) / (nf - 1.0);

    let scale = cfg.market_size * cfg.price;
    Ok(McEstimate {
        mean: scale * g,
        std_error: scale * (var / nf).sqrt(),
        samples: n,
    })
}
