//! Maximization of expected utility over the warranty region for any policy pair.
//!
//! Free variables per axis: CW uses `(w1, k)` with `w2 = w1 + k`, FRW a single
//! `w`, PRW a single `w2`. Each is the square of an unconstrained coordinate,
//! so the simplex search never leaves the nonnegative orthant.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::benefit::{benefit, EconomicConfig};
use crate::copula::JointModel;
use crate::error::{Error, Result};
use crate::marginal::weibull_quantile;
use crate::policy::{pair_label, PolicyKind, PolicyPair, WarrantyRegion, TABLE_ORDER};
use crate::rng::child_rng;
use crate::simplex::{minimize, SimplexOptions};
use crate::utility::{CostIntegrator, CostMode, QuadratureSpec};

#[derive(Debug, Clone)]
pub struct OptimizerOptions {
    pub starts: usize,
    /// Multipliers on the anchors for the deterministic starts.
    pub lattice: Vec<f64>,
    /// Standard deviation of the log-normal jitter on the remaining starts.
    pub jitter: f64,
    pub simplex: SimplexOptions,
    /// Rule used for the reported utility.
    pub quadrature: QuadratureSpec,
    /// Nodes per axis while searching; the optimum is re-evaluated with `quadrature`.
    pub search_nodes: usize,
    pub mode: CostMode,
    /// Search box: `bound_factor` times the `bound_quantile` marginal quantile.
    pub bound_quantile: f64,
    pub bound_factor: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            starts: 12,
            lattice: vec![0.5, 1.0, 2.0, 4.0],
            jitter: 0.5,
            simplex: SimplexOptions { max_evaluations: 4000, ..SimplexOptions::default() },
            quadrature: QuadratureSpec::default(),
            search_nodes: 16,
            mode: CostMode::Published,
            bound_quantile: 0.99,
            bound_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartReport {
    pub index: usize,
    pub initial_region: WarrantyRegion,
    /// `None` when the start itself could not be evaluated.
    pub initial_utility: Option<f64>,
    pub final_region: Option<WarrantyRegion>,
    pub final_utility: Option<f64>,
    pub converged: bool,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub iterations: usize,
    pub evaluations: usize,
    pub restarts: usize,
    /// Final simplex spread in the unconstrained coordinates.
    pub spread: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub pair: PolicyPair,
    pub label: String,
    pub price: f64,
    pub region: WarrantyRegion,
    pub utility: f64,
    pub expected_cost: f64,
    pub benefit: f64,
    pub starts: usize,
    pub best_start_index: usize,
    pub convergence: ConvergenceReport,
    pub start_reports: Vec<StartReport>,
    pub warnings: Vec<String>,
}

/// Maps unconstrained coordinates to a region for one policy pair.
#[derive(Debug, Clone, Copy)]
struct Parametrization {
    t: PolicyKind,
    u: PolicyKind,
}

impl Parametrization {
    fn axis(kind: PolicyKind, z: &[f64]) -> (f64, f64) {
        match kind {
            PolicyKind::Frw => (z[0] * z[0], z[0] * z[0]),
            PolicyKind::Prw => (0.0, z[0] * z[0]),
            PolicyKind::Cw => (z[0] * z[0], z[0] * z[0] + z[1] * z[1]),
        }
    }

    fn axis_inverse(kind: PolicyKind, w1: f64, w2: f64) -> Vec<f64> {
        match kind {
            PolicyKind::Frw => vec![w2.sqrt()],
            PolicyKind::Prw => vec![w2.sqrt()],
            PolicyKind::Cw => vec![w1.sqrt(), (w2 - w1).max(0.0).sqrt()],
        }
    }

    fn region(&self, z: &[f64]) -> WarrantyRegion {
        let nt = self.t.free_variables();
        let (t_w1, t_w2) = Self::axis(self.t, &z[..nt]);
        let (u_w1, u_w2) = Self::axis(self.u, &z[nt..]);
        WarrantyRegion { t_w1, t_w2, u_w1, u_w2 }
    }

    fn coordinates(&self, r: &WarrantyRegion) -> Vec<f64> {
        let mut z = Self::axis_inverse(self.t, r.t_w1, r.t_w2);
        z.extend(Self::axis_inverse(self.u, r.u_w1, r.u_w2));
        z
    }
}

/// Breakpoints whose benefit equals that of an FRW at `w`.
fn lattice_axis(kind: PolicyKind, w: f64) -> (f64, f64) {
    match kind {
        PolicyKind::Frw => (w, w),
        PolicyKind::Prw => (0.0, 2.0 * w),
        PolicyKind::Cw => (0.5 * w, 1.5 * w),
    }
}

fn start_regions(kinds: (PolicyKind, PolicyKind), cfg: &EconomicConfig, options: &OptimizerOptions, seed: u64) -> Vec<WarrantyRegion> {
    let para = Parametrization { t: kinds.0, u: kinds.1 };
    (0..options.starts)
        .map(|i| {
            let c = options.lattice[i % options.lattice.len()];
            let (t_w1, t_w2) = lattice_axis(kinds.0, c * cfg.anchor_t);
            let (u_w1, u_w2) = lattice_axis(kinds.1, c * cfg.anchor_u);
            let base = WarrantyRegion { t_w1, t_w2, u_w1, u_w2 };
            if i < options.lattice.len() {
                return base;
            }
            let mut rng = child_rng(seed, i as u64);
            let z: Vec<f64> = para
                .coordinates(&base)
                .into_iter()
                .map(|zi| {
                    let n: f64 = StandardNormal.sample(&mut rng);
                    // Squared coordinates: half the log-scale jitter on z.
                    zi * (0.5 * options.jitter * n).exp()
                })
                .collect();
            para.region(&z)
        })
        .collect()
}

fn search_bounds(m: &JointModel, options: &OptimizerOptions) -> Result<(f64, f64)> {
    Ok((
        options.bound_factor * weibull_quantile(m.margin_t(), options.bound_quantile)?,
        options.bound_factor * weibull_quantile(m.margin_u(), options.bound_quantile)?,
    ))
}

pub fn optimize_region(
    kinds: (PolicyKind, PolicyKind),
    m: &JointModel,
    cfg: &EconomicConfig,
    options: &OptimizerOptions,
    seed: u64,
) -> Result<OptimizationResult> {
    cfg.validate()?;
    if options.starts == 0 || options.lattice.is_empty() {
        return Err(Error::InvalidParameter("optimizer needs at least one start and one lattice scale".into()));
    }
    let search_spec = QuadratureSpec { nodes_per_axis: options.search_nodes, ..options.quadrature.without_refinement() };
    let search = CostIntegrator::new(*m, search_spec)?;
    let checked = CostIntegrator::new(*m, options.quadrature)?;
    let (t_max, u_max) = search_bounds(m, options)?;
    let para = Parametrization { t: kinds.0, u: kinds.1 };

    let utility_at = |r: &WarrantyRegion| -> Option<f64> {
        if r.t_w2 > t_max || r.u_w2 > u_max {
            return None;
        }
        search.expected_utility(r, cfg, options.mode).ok().filter(|v| v.is_finite())
    };

    let mut reports = Vec::with_capacity(options.starts);
    let mut best: Option<(usize, Vec<f64>, f64, ConvergenceReport)> = None;
    for (index, start) in start_regions(kinds, cfg, options, seed).into_iter().enumerate() {
        let initial_utility = utility_at(&start);
        let mut report = StartReport {
            index,
            initial_region: start,
            initial_utility,
            final_region: None,
            final_utility: None,
            converged: false,
            evaluations: 0,
        };
        if initial_utility.is_some() {
            let outcome = minimize(
                |z| utility_at(&para.region(z)).map_or(f64::INFINITY, |v| -v),
                &para.coordinates(&start),
                &options.simplex,
            );
            report.evaluations = outcome.evaluations;
            report.converged = outcome.converged;
            if outcome.value.is_finite() {
                report.final_region = Some(para.region(&outcome.x));
                report.final_utility = Some(-outcome.value);
                let conv = ConvergenceReport {
                    iterations: outcome.iterations,
                    evaluations: outcome.evaluations,
                    restarts: outcome.restarts,
                    spread: outcome.spread,
                    converged: outcome.converged,
                };
                if best.as_ref().map_or(true, |b| outcome.value < b.2) {
                    best = Some((index, outcome.x, outcome.value, conv));
                }
            }
        }
        reports.push(report);
    }

    let Some((best_start_index, z, _, convergence)) = best else {
        let detail: Vec<String> = reports
            .iter()
            .map(|r| format!("start {} at {:?}: not evaluable", r.index, r.initial_region.as_array()))
            .collect();
        return Err(Error::NonConvergence {
            message: format!("every start failed for {}: {}", pair_label(kinds), detail.join("; ")),
            best_point: Vec::new(),
            best_value: f64::NAN,
        });
    };

    let region = para.region(&z);
    region.validate()?;
    let expected_cost = checked.expected_cost(&region, cfg, options.mode)?;
    let gain = benefit(&region, cfg);

    let mut warnings = Vec::new();
    if region.t_w2 >= 0.999 * t_max || region.u_w2 >= 0.999 * u_max {
        warnings.push(format!(
            "optimum lies on the search boundary (t <= {t_max:.4}, u <= {u_max:.4})"
        ));
    }
    if !convergence.converged {
        warnings.push("best start stopped on the evaluation budget before converging".into());
    }

    Ok(OptimizationResult {
        pair: PolicyPair::from_region(kinds, &region)?,
        label: pair_label(kinds),
        price: cfg.price,
        region,
        utility: gain - expected_cost,
        expected_cost,
        benefit: gain,
        starts: options.starts,
        best_start_index,
        convergence,
        start_reports: reports,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub kinds: (PolicyKind, PolicyKind),
    pub label: String,
    pub result: std::result::Result<OptimizationResult, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTable {
    pub price: f64,
    pub rows: Vec<TableRow>,
    /// Label of the pair with the highest utility among the successful rows.
    pub best: Option<String>,
    pub worst: Option<String>,
}

impl PolicyTable {
    pub fn row(&self, kinds: (PolicyKind, PolicyKind)) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.kinds == kinds)
    }

    /// CSV with columns `policy,t_w1,t_w2,u_w1,u_w2,utility`; failed rows leave
    /// the numeric fields empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("policy,t_w1,t_w2,u_w1,u_w2,utility\n");
        for row in &self.rows {
            match &row.result {
                Ok(r) => out.push_str(&format!(
                    "{},{:.4},{:.4},{:.4},{:.4},{:.4}\n",
                    row.label, r.region.t_w1, r.region.t_w2, r.region.u_w1, r.region.u_w2, r.utility
                )),
                Err(_) => out.push_str(&format!("{},,,,,\n", row.label)),
            }
        }
        out
    }
}

/// All nine pairs for each price. Cell `(price i, pair j)` uses seed
/// `split_seed(seed, 9 i + j)`, so rows do not depend on each other.
pub fn run_policy_table(
    m: &JointModel,
    template: &EconomicConfig,
    prices: &[f64],
    options: &OptimizerOptions,
    seed: u64,
) -> Vec<PolicyTable> {
    prices
        .iter()
        .enumerate()
        .map(|(i, &price)| {
            let cfg = template.with_price(price);
            let rows: Vec<TableRow> = TABLE_ORDER
                .iter()
                .enumerate()
                .map(|(j, &kinds)| TableRow {
                    kinds,
                    label: pair_label(kinds),
                    result: optimize_region(
                        kinds,
                        m,
                        &cfg,
                        options,
                        crate::rng::split_seed(seed, (9 * i + j) as u64),
                    )
                    .map_err(|e| e.to_string()),
                })
                .collect();
            let ok = || rows.iter().filter_map(|r| r.result.as_ref().ok().map(|o| (&r.label, o.utility)));
            let best = ok().max_by(|a, b| a.1.total_cmp(&b.1)).map(|(l, _)| l.clone());
            let worst = ok().min_by(|a, b| a.1.total_cmp(&b.1)).map(|(l, _)| l.clone());
            PolicyTable { price, rows, best, worst }
        })
        .collect()
}
