//! Reimbursement cost of a failed item under one- and two-dimensional policies.
//!
//! One axis carries one of three policies:
//!
//! | policy | cost at `x`                                       |
//! |--------|---------------------------------------------------|
//! | FRW    | `S` on `[0, w]`                                   |
//! | PRW    | `S (1 − x/w)` on `[0, w]`                         |
//! | CW     | `S` on `[0, w1]`, `S (w2 − x)/(w2 − w1)` on `(w1, w2]` |
//!
//! and is zero beyond coverage. A two-dimensional policy multiplies the two
//! axis costs and divides by `S` once. Shared breakpoints belong to the left
//! branch; the choice has measure zero for every integral in this crate.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "FRW")]
    Frw,
    #[serde(rename = "PRW")]
    Prw,
    #[serde(rename = "CW")]
    Cw,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Cw, PolicyKind::Prw, PolicyKind::Frw];

    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::Frw => "FRW",
            PolicyKind::Prw => "PRW",
            PolicyKind::Cw => "CW",
        }
    }

    /// Free variables the optimizer searches over for this axis.
    pub fn free_variables(self) -> usize {
        match self {
            PolicyKind::Cw => 2,
            PolicyKind::Frw | PolicyKind::Prw => 1,
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "FRW" => Ok(PolicyKind::Frw),
            "PRW" => Ok(PolicyKind::Prw),
            "CW" => Ok(PolicyKind::Cw),
            other => Err(Error::InvalidParameter(format!("unknown policy `{other}` (expected FRW, PRW or CW)"))),
        }
    }
}

/// The nine axis combinations in the row order of the published tables.
pub const TABLE_ORDER: [(PolicyKind, PolicyKind); 9] = {
    use PolicyKind::*;
    [
        (Cw, Cw),
        (Cw, Prw),
        (Cw, Frw),
        (Prw, Cw),
        (Prw, Prw),
        (Prw, Frw),
        (Frw, Cw),
        (Frw, Prw),
        (Frw, Frw),
    ]
};

pub fn pair_label(kinds: (PolicyKind, PolicyKind)) -> String {
    format!("{} × {}", kinds.0, kinds.1)
}

/// A policy on one axis together with its breakpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum AxisPolicy {
    #[serde(rename = "FRW")]
    Frw { w: f64 },
    #[serde(rename = "PRW")]
    Prw { w: f64 },
    #[serde(rename = "CW")]
    Cw { w1: f64, w2: f64 },
}

impl AxisPolicy {
    pub fn frw(w: f64) -> Result<Self> {
        check_breakpoint(w, true)?;
        Ok(AxisPolicy::Frw { w })
    }

    pub fn prw(w: f64) -> Result<Self> {
        check_breakpoint(w, true)?;
        Ok(AxisPolicy::Prw { w })
    }

    pub fn cw(w1: f64, w2: f64) -> Result<Self> {
        check_breakpoint(w1, false)?;
        check_breakpoint(w2, false)?;
        if w1 > w2 {
            return Err(Error::InvalidParameter(format!("CW breakpoints out of order: {w1} > {w2}")));
        }
        Ok(AxisPolicy::Cw { w1, w2 })
    }

    pub fn kind(&self) -> PolicyKind {
        match self {
            AxisPolicy::Frw { .. } => PolicyKind::Frw,
            AxisPolicy::Prw { .. } => PolicyKind::Prw,
            AxisPolicy::Cw { .. } => PolicyKind::Cw,
        }
    }

    /// The equivalent CW breakpoints `(w1, w2)`.
    pub fn breakpoints(&self) -> (f64, f64) {
        match *self {
            AxisPolicy::Frw { w } => (w, w),
            AxisPolicy::Prw { w } => (0.0, w),
            AxisPolicy::Cw { w1, w2 } => (w1, w2),
        }
    }

    pub fn from_breakpoints(kind: PolicyKind, w1: f64, w2: f64) -> Result<Self> {
        match kind {
            PolicyKind::Frw if w1 == w2 => Self::frw(w2),
            PolicyKind::Prw if w1 == 0.0 => Self::prw(w2),
            PolicyKind::Cw => Self::cw(w1, w2),
            _ => Err(Error::InvalidParameter(format!(
                "breakpoints ({w1}, {w2}) do not describe a {kind} axis"
            ))),
        }
    }

    /// Fraction of the sale price reimbursed at `x` (the cost divided by `S`).
    fn fraction(&self, x: f64) -> f64 {
        match *self {
            AxisPolicy::Frw { w } => {
                if x <= w {
                    1.0
                } else {
                    0.0
                }
            }
            AxisPolicy::Prw { w } => {
                if x <= w {
                    1.0 - x / w
                } else {
                    0.0
                }
            }
            AxisPolicy::Cw { w1, w2 } => {
                if x <= w1 {
                    1.0
                } else if x <= w2 {
                    (w2 - x) / (w2 - w1)
                } else {
                    0.0
                }
            }
        }
    }
}

fn check_breakpoint(w: f64, strictly_positive: bool) -> Result<()> {
    let ok = w.is_finite() && if strictly_positive { w > 0.0 } else { w >= 0.0 };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("invalid warranty breakpoint {w}")))
    }
}

fn check_price(price: f64) -> Result<()> {
    if price.is_finite() && price > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("sale price must be > 0, got {price}")))
    }
}

pub fn cost_1d(policy: &AxisPolicy, price: f64, x: f64) -> Result<f64> {
    check_price(price)?;
    if x.is_nan() || x < 0.0 {
        return Err(domain("age/usage", x));
    }
    Ok(price * policy.fraction(x))
}

/// Rectangular two-stage warranty region; the CW × CW superset of all nine policies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarrantyRegion {
    pub t_w1: f64,
    pub t_w2: f64,
    pub u_w1: f64,
    pub u_w2: f64,
}

impl WarrantyRegion {
    pub fn new(t_w1: f64, t_w2: f64, u_w1: f64, u_w2: f64) -> Result<Self> {
        let r = Self { t_w1, t_w2, u_w1, u_w2 };
        r.validate()?;
        Ok(r)
    }

    pub fn zero() -> Self {
        Self { t_w1: 0.0, t_w2: 0.0, u_w1: 0.0, u_w2: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.t_w1, self.t_w2, self.u_w1, self.u_w2];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(format!("region breakpoints must be finite and >= 0: {all:?}")));
        }
        if self.t_w1 > self.t_w2 || self.u_w1 > self.u_w2 {
            return Err(Error::InvalidParameter(format!("region breakpoints out of order: {all:?}")));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.t_w1, self.t_w2, self.u_w1, self.u_w2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyPair {
    pub t: AxisPolicy,
    pub u: AxisPolicy,
}

impl PolicyPair {
    pub fn new(t: AxisPolicy, u: AxisPolicy) -> Self {
        Self { t, u }
    }

    pub fn kinds(&self) -> (PolicyKind, PolicyKind) {
        (self.t.kind(), self.u.kind())
    }

    pub fn label(&self) -> String {
        pair_label(self.kinds())
    }

    pub fn region(&self) -> WarrantyRegion {
        let (t_w1, t_w2) = self.t.breakpoints();
        let (u_w1, u_w2) = self.u.breakpoints();
        WarrantyRegion { t_w1, t_w2, u_w1, u_w2 }
    }

    pub fn from_region(kinds: (PolicyKind, PolicyKind), r: &WarrantyRegion) -> Result<Self> {
        Ok(Self {
            t: AxisPolicy::from_breakpoints(kinds.0, r.t_w1, r.t_w2)?,
            u: AxisPolicy::from_breakpoints(kinds.1, r.u_w1, r.u_w2)?,
        })
    }
}

/// `C(t, u) = C_t(t) · C_u(u) / S`.
pub fn cost_2d(pair: &PolicyPair, price: f64, t: f64, u: f64) -> Result<f64> {
    let ct = cost_1d(&pair.t, price, t)?;
    let cu = cost_1d(&pair.u, price, u)?;
    Ok(ct * cu / price)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub t_max: f64,
    pub u_max: f64,
    pub t_points: usize,
    pub u_points: usize,
}

impl GridSpec {
    /// A grid reaching 20% past the outer breakpoints of `pair`.
    pub fn covering(pair: &PolicyPair, points: usize) -> Self {
        let r = pair.region();
        Self {
            t_max: 1.2 * r.t_w2,
            u_max: 1.2 * r.u_w2,
            t_points: points,
            u_points: points,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub t: f64,
    pub u: f64,
    pub cost: f64,
}

fn linspace(max: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| max * i as f64 / (n - 1) as f64)
}

/// Evaluate [`cost_2d`] on an inclusive grid over `[0, t_max] × [0, u_max]`, t-major.
pub fn cost_surface_grid(pair: &PolicyPair, price: f64, grid: &GridSpec) -> Result<Vec<GridPoint>> {
    if grid.t_points < 2 || grid.u_points < 2 {
        return Err(Error::InvalidParameter("grid needs at least 2 points per axis".into()));
    }
    if !(grid.t_max.is_finite() && grid.t_max > 0.0 && grid.u_max.is_finite() && grid.u_max > 0.0) {
        return Err(Error::InvalidParameter("grid extents must be finite and > 0".into()));
    }
    let mut out = Vec::with_capacity(grid.t_points * grid.u_points);
    for t in linspace(grid.t_max, grid.t_points) {
        for u in linspace(grid.u_max, grid.u_points) {
            out.push(GridPoint { t, u, cost: cost_2d(pair, price, t, u)? });
        }
    }
    Ok(out)
}

pub fn grid_to_csv(points: &[GridPoint]) -> String {
    let mut s = String::from("t,u,cost\n");
    for p in points {
        s.push_str(&format!("{},{},{}\n", p.t, p.u, p.cost));
    }
    s
}
