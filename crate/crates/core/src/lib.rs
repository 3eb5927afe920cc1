//! Bivariate (age, usage) lifetime modeling with a Gumbel copula over Weibull
//! margins, and optimal two-dimensional warranty regions under free-replacement,
//! pro-rata and combination policies.

pub mod benefit;
pub mod copula;
pub mod data;
pub mod error;
pub mod gof;
pub mod kendall;
pub mod marginal;
pub mod optimizer;
pub mod policy;
pub mod quadrature;
pub mod rng;
pub mod simplex;
pub mod utility;

pub use benefit::{benefit, calibrate_rate, combined_retention, retention_ratio, EconomicConfig, EconomicSettings};
pub use copula::{
    fit_joint_mle, gumbel_copula_cdf, joint_cdf, joint_density, joint_loglik, joint_reliability, sample_copula,
    sample_joint, JointFit, JointFitOptions, JointModel,
};
pub use data::{Dataset, FailureRecord};
pub use error::{Error, Result};
pub use gof::{ad_pvalue, ad_pvalue_with, anderson_darling_stat, kaplan_meier, AdTest, NullHypothesis, StepFunction};
pub use marginal::{fit_weibull_mle, weibull_cdf, weibull_pdf, weibull_quantile, weibull_survival, WeibullFit, WeibullParams};
pub use optimizer::{optimize_region, run_policy_table, OptimizationResult, OptimizerOptions, PolicyTable};
pub use policy::{cost_1d, cost_2d, AxisPolicy, PolicyKind, PolicyPair, WarrantyRegion, TABLE_ORDER};
pub use utility::{expected_utility, expected_warranty_cost, subregion_integrals, CostIntegrator, CostMode, QuadratureSpec};
