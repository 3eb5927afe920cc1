//! Goodness of fit for the Weibull marginals: Kaplan–Meier curves and
//! Anderson–Darling tests.

use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginal::{fit_weibull_mle, WeibullParams};
use crate::rng::child_rng;

/// Right-continuous nonincreasing step function, equal to 1 before the first breakpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.breakpoints.partition_point(|&b| b <= x) {
            0 => 1.0,
            i => self.values[i - 1],
        }
    }
}

/// Product-limit reliability estimate for a complete (uncensored) sample.
pub fn kaplan_meier(data: &[f64]) -> Result<StepFunction> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(&bad) = data.iter().find(|x| !x.is_finite()) {
        return Err(crate::error::domain("observation", bad));
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);

    let n = sorted.len();
    let mut breakpoints = Vec::new();
    let mut values = Vec::new();
    let mut surv = 1.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && sorted[j] == sorted[i] {
            j += 1;
        }
        let at_risk = (n - i) as f64;
        let deaths = (j - i) as f64;
        surv *= 1.0 - deaths / at_risk;
        breakpoints.push(sorted[i]);
        values.push(surv);
        i = j;
    }
    Ok(StepFunction { breakpoints, values })
}

/// `A² = −n − (1/n) Σ (2i − 1) [ln z_i + ln(1 − z_{n+1−i})]` for sorted probabilities.
pub fn ad_statistic_from_probabilities(z: &[f64]) -> Result<f64> {
    let mut sorted = z.to_vec();
    sorted.sort_by(f64::total_cmp);
    let logs: Vec<(f64, f64)> = sorted.iter().map(|&p| (p.ln(), (-p).ln_1p())).collect();
    statistic_from_logs(&logs)
}

fn statistic_from_logs(logs: &[(f64, f64)]) -> Result<f64> {
    let n = logs.len();
    if n < 3 {
        return Err(Error::InvalidParameter(format!("Anderson-Darling needs n >= 3, got {n}")));
    }
    if logs.iter().any(|(lz, l1z)| !lz.is_finite() || !l1z.is_finite()) {
        return Err(Error::Fit("a fitted cdf value is exactly 0 or 1; the fit is degenerate".into()));
    }
    let mut acc = 0.0;
    for i in 0..n {
        acc += (2 * i + 1) as f64 * (logs[i].0 + logs[n - 1 - i].1);
    }
    Ok(-(n as f64) - acc / n as f64)
}

/// A² of `data` against a fully specified Weibull.
///
/// `ln z` and `ln(1 − z)` come straight from the cumulative hazard, so far
/// tails keep their information instead of rounding `z` to 1.
pub fn anderson_darling_stat(data: &[f64], p: &WeibullParams) -> Result<f64> {
    let mut sorted = data.to_vec();
    if let Some(&bad) = sorted.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(crate::error::domain("observation", bad));
    }
    sorted.sort_by(f64::total_cmp);
    let logs: Vec<(f64, f64)> = sorted
        .iter()
        .map(|&x| {
            let h = p.cum_hazard(x);
            ((-(-h).exp_m1()).ln(), -h)
        })
        .collect();
    statistic_from_logs(&logs)
}

/// Null distribution used to calibrate the bootstrap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NullHypothesis {
    /// Parameters re-estimated on every replicate (the fitted-parameter null).
    #[default]
    Composite,
    /// Parameters held at the fitted values, as if they had been known in advance.
    Simple,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdTest {
    pub statistic: f64,
    pub p_value: f64,
    pub params: WeibullParams,
    pub null: NullHypothesis,
    pub replicates: usize,
    /// Replicates skipped because their refit failed.
    pub failed_replicates: usize,
}

/// Bootstrap p-value `(1 + #{A²_b ≥ A²_obs}) / (B_used + 1)`.
pub fn bootstrap_p_value(observed: f64, replicates: &[f64]) -> f64 {
    let exceed = replicates.iter().filter(|&&a| a >= observed).count();
    (1 + exceed) as f64 / (replicates.len() + 1) as f64
}

/// Parametric-bootstrap replicate statistics for samples of size `n` from `params`.
///
/// Replicate `b` draws from `child_rng(seed, b)`, so the result does not depend
/// on evaluation order. Returns the statistics and the number of skipped replicates.
pub fn bootstrap_statistics(
    params: &WeibullParams,
    n: usize,
    b: usize,
    seed: u64,
    null: NullHypothesis,
) -> Result<(Vec<f64>, usize)> {
    let mut stats = Vec::with_capacity(b);
    let mut failed = 0usize;
    let mut sample = vec![0.0; n];
    for rep in 0..b {
        let mut rng = child_rng(seed, rep as u64);
        for x in sample.iter_mut() {
            let e: f64 = Exp1.sample(&mut rng);
            *x = params.scale() * e.powf(1.0 / params.shape());
        }
        let stat = match null {
            NullHypothesis::Simple => anderson_darling_stat(&sample, params),
            NullHypothesis::Composite => {
                fit_weibull_mle(&sample).and_then(|fit| anderson_darling_stat(&sample, &fit.params))
            }
        };
        match stat {
            Ok(a) => stats.push(a),
            Err(_) => failed += 1,
        }
    }
    if failed * 100 > b {
        return Err(Error::Fit(format!("{failed} of {b} bootstrap replicates failed (limit 1%)")));
    }
    Ok((stats, failed))
}

/// Anderson–Darling test of a Weibull fit with a parametric-bootstrap p-value
/// under the composite null (refit on every replicate).
pub fn ad_pvalue(data: &[f64], b: usize, seed: u64) -> Result<AdTest> {
    ad_pvalue_with(data, b, seed, NullHypothesis::Composite)
}

pub fn ad_pvalue_with(data: &[f64], b: usize, seed: u64, null: NullHypothesis) -> Result<AdTest> {
    if b < 200 {
        return Err(Error::InvalidParameter(format!("bootstrap needs B >= 200, got {b}")));
    }
    let params = fit_weibull_mle(data)?.params;
    let statistic = anderson_darling_stat(data, &params)?;
    let (reps, failed) = bootstrap_statistics(&params, data.len(), b, seed, null)?;
    Ok(AdTest {
        statistic,
        p_value: bootstrap_p_value(statistic, &reps),
        params,
        null,
        replicates: reps.len(),
        failed_replicates: failed,
    })
}

/// Upper-tail probability of A² for a fully specified null with sample size
/// `n` (Marsaglia & Marsaglia's asymptotic series plus finite-n correction).
pub fn ad_simple_null_pvalue(n: usize, a2: f64) -> f64 {
    1.0 - ad_cdf(n, a2)
}

fn ad_cdf(n: usize, z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    let x = ad_inf(z);
    (x + ad_errfix(n as f64, x)).clamp(0.0, 1.0)
}

fn ad_inf(z: f64) -> f64 {
    if z < 2.0 {
        (-1.2337141 / z).exp() / z.sqrt()
            * (2.00012 + (0.247105 - (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * z) * z) * z) * z) * z)
    } else {
        (-(1.0776 - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * z) * z) * z) * z) * z).exp()).exp()
    }
}

fn ad_errfix(n: f64, x: f64) -> f64 {
    if x > 0.8 {
        return (-130.2137 + (745.2337 - (1705.091 - (1950.646 - (1116.360 - 255.7844 * x) * x) * x) * x) * x) / n;
    }
    let c = 0.01265 + 0.1757 / n;
    if x < c {
        let t = x / c;
        let t = t.sqrt() * (1.0 - t) * (49.0 * t - 102.0);
        return t * (0.0037 / (n * n) + 0.00078 / n + 0.00006) / n;
    }
    let t = (x - c) / (0.8 - c);
    let t = -0.00022633 + (6.54034 - (14.6538 - (14.458 - (8.259 - 1.91864 * t) * t) * t) * t) * t;
    t * (0.04213 / n + 0.01365 / (n * n)) / n
}
