//! Adaptive inference on bandit data.
//!
//! Pull counts under `UCB1` concentrate around their deterministic targets,
//! which makes the plain sample mean behave as if the data were i.i.d.: the
//! statistic `sqrt(n_{a;T}/sigma^2) * (mu_hat_a - mu_a)` is approximately
//! standard normal, and the usual z-intervals cover at their nominal level.
//! This module builds those intervals, estimates the noise scale, and
//! measures the normal approximation by the exact empirical Kolmogorov
//! distance.

use rayon::prelude::*;

use crate::bandit::{simulate_ucb1, BanditInstance, Trajectory, UcbConfig};
use crate::montecarlo::McConfig;
use crate::{normal, rng, Error, Result};

/// A two-sided confidence interval for one arm's mean reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub arm: usize,
    pub lower: f64,
    pub upper: f64,
    /// Confidence level `1 - alpha`.
    pub level: f64,
}

impl ConfidenceInterval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "alpha must be in (0,1), got {alpha}"
        )));
    }
    Ok(())
}

fn interval(traj: &Trajectory, sigma: f64, arm: usize, alpha: f64) -> Result<ConfidenceInterval> {
    let n = traj.final_counts()[arm];
    if n == 0 {
        return Err(Error::Domain(format!("arm {arm} was never pulled")));
    }
    let z = normal::inverse_cdf(1.0 - alpha / 2.0);
    let half = z * sigma / (n as f64).sqrt();
    let center = traj.means()[arm];
    Ok(ConfidenceInterval {
        arm,
        lower: center - half,
        upper: center + half,
        level: 1.0 - alpha,
    })
}

/// Known-sigma z-interval `mu_hat_a +/- z_{alpha/2} * sigma / sqrt(n_{a;T})`.
///
/// To use an estimated noise scale instead, pass `sigma_hat(traj)` as
/// `sigma`.
pub fn ci_mean(
    traj: &Trajectory,
    sigma: f64,
    arm: usize,
    alpha: f64,
) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!(
            "ci_mean requires sigma > 0, got {sigma}"
        )));
    }
    if arm >= traj.k() {
        return Err(Error::DimensionMismatch(format!("arm {arm} out of range")));
    }
    interval(traj, sigma, arm, alpha)
}

/// Pooled noise-scale estimator: the square root of the average over arms of
/// each arm's mean squared deviation from its empirical mean.
pub fn sigma_hat(traj: &Trajectory) -> Result<f64> {
    let counts = traj.final_counts();
    if counts.iter().any(|n| *n == 0) {
        return Err(Error::Domain(
            "every arm must be pulled at least once".into(),
        ));
    }
    let k = traj.k();
    let mut sq = vec![0.0f64; k];
    for (t, r) in traj.rewards().iter().enumerate() {
        let a = traj.actions()[t];
        let d = r - traj.means()[a];
        sq[a] += d * d;
    }
    let avg: f64 = sq
        .iter()
        .zip(&counts)
        .map(|(s, n)| s / *n as f64)
        .sum::<f64>()
        / k as f64;
    Ok(avg.sqrt())
}

/// Exact Kolmogorov distance between the empirical CDF of `samples` and the
/// standard normal CDF, evaluated at the jump points of the empirical CDF.
pub fn kolmogorov_distance(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Domain("empty sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN samples"));
    let n = sorted.len() as f64;
    let mut dist: f64 = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let phi = normal::cdf(*x);
        let above = ((i + 1) as f64 / n - phi).abs();
        let below = (i as f64 / n - phi).abs();
        dist = dist.max(above.max(below));
    }
    Ok(dist)
}

/// The CLT statistic of one arm: `sqrt(n_{a;T} / sigma^2) * (mu_hat - mu_a)`.
pub fn clt_statistic_mean(traj: &Trajectory, instance: &BanditInstance, arm: usize) -> Result<f64> {
    if !(instance.sigma() > 0.0) {
        return Err(Error::Domain("CLT statistic requires sigma > 0".into()));
    }
    if arm >= traj.k() || traj.k() != instance.k() {
        return Err(Error::DimensionMismatch("arm/instance mismatch".into()));
    }
    let n = traj.final_counts()[arm] as f64;
    Ok((n / (instance.sigma() * instance.sigma())).sqrt()
        * (traj.means()[arm] - instance.means()[arm]))
}

/// Empirical coverage of `ci_mean` at one (arm, nominal level) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageRow {
    pub arm: usize,
    pub alpha: f64,
    /// Fraction of replicates whose interval contained the true mean.
    pub coverage: f64,
    /// Binomial standard error.
    pub se: f64,
}

/// Coverage study over replicated `UCB1` runs.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub reps: usize,
    pub rows: Vec<CoverageRow>,
}

/// Estimates interval coverage per arm and nominal level over B replicates,
/// using the known noise scale.
///
/// Admits `sigma = 0` (intervals degenerate to the exact point `mu_hat`);
/// negative `sigma` is rejected when the instance is built.
pub fn coverage_mc(
    instance: &BanditInstance,
    config: &UcbConfig,
    mc: &McConfig,
    alphas: &[f64],
) -> Result<CoverageReport> {
    coverage_mc_with(instance, config, mc, alphas, false)
}

/// [`coverage_mc`] with a switch to substitute the pooled estimate
/// [`sigma_hat`] for the known noise scale in every interval.
pub fn coverage_mc_with(
    instance: &BanditInstance,
    config: &UcbConfig,
    mc: &McConfig,
    alphas: &[f64],
    estimate_sigma: bool,
) -> Result<CoverageReport> {
    if alphas.is_empty() {
        return Err(Error::InvalidConfig("need at least one alpha".into()));
    }
    for &a in alphas {
        check_alpha(a)?;
    }
    let hits: Vec<Vec<bool>> = crate::montecarlo::with_pool(mc.workers, || {
        (0..mc.reps)
            .into_par_iter()
            .map(|r| {
                let mut cfg = config.clone();
                cfg.seed = rng::replicate_seed(mc.base_seed, r as u64);
                let traj = simulate_ucb1(instance, &cfg)?;
                let scale = if estimate_sigma {
                    sigma_hat(&traj)?
                } else {
                    instance.sigma()
                };
                let mut row = Vec::with_capacity(instance.k() * alphas.len());
                for arm in 0..instance.k() {
                    for &alpha in alphas {
                        let ci = interval(&traj, scale, arm, alpha)?;
                        row.push(ci.contains(instance.means()[arm]));
                    }
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let b = mc.reps as f64;
    let mut rows = Vec::with_capacity(instance.k() * alphas.len());
    for arm in 0..instance.k() {
        for (j, &alpha) in alphas.iter().enumerate() {
            let idx = arm * alphas.len() + j;
            let count = hits.iter().filter(|h| h[idx]).count() as f64;
            let p = count / b;
            rows.push(CoverageRow {
                arm,
                alpha,
                coverage: p,
                se: (p * (1.0 - p) / b).sqrt(),
            });
        }
    }
    Ok(CoverageReport {
        reps: mc.reps,
        rows,
    })
}

/// Collects the per-arm CLT statistic across B replicates: element `a` holds
/// one statistic per replicate for arm `a`.
pub fn clt_mc(
    instance: &BanditInstance,
    config: &UcbConfig,
    mc: &McConfig,
) -> Result<Vec<Vec<f64>>> {
    if !(instance.sigma() > 0.0) {
        return Err(Error::Domain("CLT study requires sigma > 0".into()));
    }
    let stats: Vec<Vec<f64>> = crate::montecarlo::with_pool(mc.workers, || {
        (0..mc.reps)
            .into_par_iter()
            .map(|r| {
                let mut cfg = config.clone();
                cfg.seed = rng::replicate_seed(mc.base_seed, r as u64);
                let traj = simulate_ucb1(instance, &cfg)?;
                (0..instance.k())
                    .map(|arm| clt_statistic_mean(&traj, instance, arm))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok((0..instance.k())
        .map(|arm| stats.iter().map(|s| s[arm]).collect())
        .collect())
}
