//! Reproducible parallel Monte-Carlo harness.
//!
//! Replicate `r` of a run with base seed `s` always simulates with seed
//! `rng::replicate_seed(s, r)`, replicates are collected in index order, and
//! aggregation uses compensated summation, so every estimate is a pure
//! function of `(instance, config-minus-seed, reps, base_seed)` and does not
//! depend on the worker count or the parallel schedule.

use rayon::prelude::*;

use crate::bandit::{self, compute_w, event_report, simulate_ucb1, BanditInstance, UcbConfig};
use crate::{oracle, rng, Error, Result};

/// Monte-Carlo run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    /// Number of replicates B.
    pub reps: usize,
    /// Base seed; replicate r derives its seed from `(base_seed, r)`.
    pub base_seed: u64,
    /// Worker threads; `None` uses the global thread pool.
    pub workers: Option<usize>,
}

impl McConfig {
    pub fn new(reps: usize, base_seed: u64) -> Self {
        Self {
            reps,
            base_seed,
            workers: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidConfig("need at least one replicate".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidConfig("worker count must be >= 1".into()));
        }
        Ok(())
    }
}

/// A Monte-Carlo mean with its standard error (sample sd / sqrt(B)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

/// Outcome counts of the comparison-sandwich audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SandwichCounts {
    /// Replicates where at least one event-based bound applied.
    pub events_held: usize,
    /// Event replicates on which every applicable inequality held.
    pub sandwich_held: usize,
    /// Replicates with no detectable event (nothing to check).
    pub events_not_detected: usize,
}

/// A sandwich inequality that failed, with everything needed to replay it.
#[derive(Debug, Clone, PartialEq)]
pub struct SandwichViolation {
    pub replicate: usize,
    pub seed: u64,
    pub arm: usize,
    pub detail: String,
}

/// Aggregated Monte-Carlo estimates over B replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub reps: usize,
    pub mean_pseudo_regret: MeanSe,
    pub mean_vanilla_regret: MeanSe,
    /// Per-arm mean pull counts; the means sum to T.
    pub mean_counts: Vec<MeanSe>,
    /// Per-arm estimate of `E |n_{a;T} / n_star_a - 1|`; absent when
    /// `sigma = 0` (the fixed point needs noise).
    pub ratio_mean_abs_dev: Option<Vec<f64>>,
    /// 5/25/50/75/95% quantiles of the pseudo-regret.
    pub pseudo_quantiles: [f64; 5],
    pub sandwich: SandwichCounts,
}

struct Replicate {
    pseudo: f64,
    vanilla: f64,
    counts: Vec<u64>,
    ratio_dev: Option<Vec<f64>>,
    audit: AuditOutcome,
}

enum AuditOutcome {
    NotApplicable,
    NotDetected,
    Held,
    Violated(Vec<(usize, String)>),
}

/// Numerical slack for the sandwich inequalities; the thresholds are located
/// to 1e-12 relative, so this is far above the solver error and far below 1.
const SANDWICH_SLACK: f64 = 1e-6;

fn run_replicate(
    instance: &BanditInstance,
    base_config: &UcbConfig,
    targets: Option<&[f64]>,
    replicate: usize,
    base_seed: u64,
    audit: bool,
) -> Result<Replicate> {
    let mut config = base_config.clone();
    config.seed = rng::replicate_seed(base_seed, replicate as u64);
    let traj = simulate_ucb1(instance, &config)?;
    let pseudo = bandit::pseudo_regret(instance, &traj)?;
    let vanilla = bandit::vanilla_regret(instance, &traj)?;
    let counts = traj.final_counts();
    let ratio_dev = targets.map(|ns| {
        counts
            .iter()
            .zip(ns)
            .map(|(n, n_star)| (*n as f64 / n_star - 1.0).abs())
            .collect()
    });

    let audit = if !audit {
        AuditOutcome::NotApplicable
    } else {
        let report = event_report(instance, &config, &traj)?;
        let w = &report.w;
        let gamma = config.gamma;
        let mut applicable = false;
        let mut failures = Vec::new();
        if let Some(t_plus) = report.t_plus_threshold {
            applicable = true;
            let at_plus = oracle::arm_targets_at(instance, t_plus, gamma)?;
            for a in 0..instance.k() {
                let bound = at_plus[a] * (1.0 + w[a] / gamma).powi(2) + 1.0;
                if counts[a] as f64 > bound + SANDWICH_SLACK {
                    failures.push((a, format!("upper: n={} > {bound}", counts[a])));
                }
            }
        }
        if report.e0_holds {
            if let Some(t_minus) = report.t_minus_threshold {
                applicable = true;
                let at_minus = oracle::arm_targets_at(instance, t_minus, gamma)?;
                for a in 0..instance.k() {
                    let deflate = (1.0 - w[a] / gamma).max(0.0).powi(2);
                    let bound = at_minus[a] * deflate;
                    if (counts[a] as f64) < bound - SANDWICH_SLACK {
                        failures.push((a, format!("lower: n={} < {bound}", counts[a])));
                    }
                }
            }
        }
        if !applicable {
            AuditOutcome::NotDetected
        } else if failures.is_empty() {
            AuditOutcome::Held
        } else {
            AuditOutcome::Violated(failures)
        }
    };

    Ok(Replicate {
        pseudo,
        vanilla,
        counts,
        ratio_dev,
        audit,
    })
}

pub(crate) fn with_pool<R: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> R + Send,
) -> Result<R> {
    match workers {
        None => Ok(f()),
        Some(n) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(f)),
    }
}

/// Evaluates `f` for replicate indices `0..n` in parallel, collecting results
/// in index order; the parallel schedule cannot affect the output.
pub fn replicate_map<T, F>(workers: Option<usize>, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    with_pool(workers, || (0..n).into_par_iter().map(&f).collect())?
}

fn collect_replicates(
    instance: &BanditInstance,
    config: &UcbConfig,
    mc: &McConfig,
    audit: bool,
) -> Result<Vec<Replicate>> {
    mc.validate()?;
    let targets = if instance.sigma() > 0.0 {
        Some(oracle::arm_targets_at(
            instance,
            config.horizon as f64,
            config.gamma,
        )?)
    } else {
        None
    };
    let audit = audit && instance.sigma() > 0.0;
    with_pool(mc.workers, || {
        (0..mc.reps)
            .into_par_iter()
            .map(|r| run_replicate(instance, config, targets.as_deref(), r, mc.base_seed, audit))
            .collect::<Result<Vec<_>>>()
    })?
}

/// Runs B independent replicates and aggregates them.
pub fn run_mc(instance: &BanditInstance, config: &UcbConfig, mc: &McConfig) -> Result<McSummary> {
    let reps = collect_replicates(instance, config, mc, true)?;
    Ok(summarize(instance, &reps))
}

fn summarize(instance: &BanditInstance, reps: &[Replicate]) -> McSummary {
    let b = reps.len();
    let pseudo: Vec<f64> = reps.iter().map(|r| r.pseudo).collect();
    let vanilla: Vec<f64> = reps.iter().map(|r| r.vanilla).collect();
    let mean_counts = (0..instance.k())
        .map(|a| mean_se(reps.iter().map(|r| r.counts[a] as f64)))
        .collect();
    let ratio_mean_abs_dev = reps[0].ratio_dev.as_ref().map(|_| {
        (0..instance.k())
            .map(|a| mean_se(reps.iter().map(|r| r.ratio_dev.as_ref().unwrap()[a])).mean)
            .collect()
    });

    let mut sorted = pseudo.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pseudo_quantiles = [0.05, 0.25, 0.50, 0.75, 0.95].map(|p| quantile(&sorted, p));

    let mut sandwich = SandwichCounts::default();
    for r in reps {
        match &r.audit {
            AuditOutcome::NotApplicable => {}
            AuditOutcome::NotDetected => sandwich.events_not_detected += 1,
            AuditOutcome::Held => {
                sandwich.events_held += 1;
                sandwich.sandwich_held += 1;
            }
            AuditOutcome::Violated(_) => sandwich.events_held += 1,
        }
    }

    McSummary {
        reps: b,
        mean_pseudo_regret: mean_se(pseudo.iter().copied()),
        mean_vanilla_regret: mean_se(vanilla.iter().copied()),
        mean_counts,
        ratio_mean_abs_dev,
        pseudo_quantiles,
        sandwich,
    }
}

/// Full sandwich audit: like [`run_mc`] but returning each violation with its
/// replicate seed for replay. Requires `sigma > 0`.
pub struct AuditReport {
    pub counts: SandwichCounts,
    pub violations: Vec<SandwichViolation>,
}

pub fn sandwich_audit(
    instance: &BanditInstance,
    config: &UcbConfig,
    mc: &McConfig,
) -> Result<AuditReport> {
    if !(instance.sigma() > 0.0) {
        return Err(Error::Domain("sandwich audit requires sigma > 0".into()));
    }
    let reps = collect_replicates(instance, config, mc, true)?;
    let mut counts = SandwichCounts::default();
    let mut violations = Vec::new();
    for (r, rec) in reps.iter().enumerate() {
        match &rec.audit {
            AuditOutcome::NotApplicable => {}
            AuditOutcome::NotDetected => counts.events_not_detected += 1,
            AuditOutcome::Held => {
                counts.events_held += 1;
                counts.sandwich_held += 1;
            }
            AuditOutcome::Violated(fails) => {
                counts.events_held += 1;
                for (arm, detail) in fails {
                    violations.push(SandwichViolation {
                        replicate: r,
                        seed: rng::replicate_seed(mc.base_seed, r as u64),
                        arm: *arm,
                        detail: detail.clone(),
                    });
                }
            }
        }
    }
    Ok(AuditReport { counts, violations })
}

/// One row of a gap sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub delta: f64,
    pub reg_mc_mean: f64,
    pub reg_mc_se: f64,
    pub reg_star: f64,
    pub reg_lr: f64,
    pub err_theta: f64,
}

/// Sweeps the sub-optimality gap: for each delta, runs `UCB1` on the
/// instance with one optimal arm and `K - 1` arms at that gap and tabulates
/// the Monte-Carlo regret against the theoretical and Lai-Robbins values.
///
/// Row `i` uses base seed `replicate_seed(mc.base_seed, i)` so rows are
/// independent; everything stays reproducible from `mc.base_seed`.
pub fn regret_sweep(
    k: usize,
    sigma: f64,
    horizon: usize,
    gamma: f64,
    delta_grid: &[f64],
    mc: &McConfig,
) -> Result<Vec<SweepRow>> {
    if delta_grid.is_empty() {
        return Err(Error::InvalidConfig("empty delta grid".into()));
    }
    if !(sigma > 0.0) {
        return Err(Error::Domain("regret sweep requires sigma > 0".into()));
    }
    let t = horizon as f64;
    delta_grid
        .iter()
        .enumerate()
        .map(|(i, &delta)| {
            if !(delta >= 0.0) {
                return Err(Error::InvalidConfig(format!("negative gap {delta}")));
            }
            let mut gaps = vec![delta; k];
            gaps[0] = 0.0;
            let instance = BanditInstance::from_gaps(&gaps, sigma)?;
            let row_mc = McConfig {
                reps: mc.reps,
                base_seed: rng::replicate_seed(mc.base_seed, i as u64),
                workers: mc.workers,
            };
            let config = UcbConfig::new(horizon, gamma, 0);
            let summary = run_mc(&instance, &config, &row_mc)?;
            let sol = oracle::oracle_solution(&instance, t, gamma)?;
            Ok(SweepRow {
                delta,
                reg_mc_mean: summary.mean_pseudo_regret.mean,
                reg_mc_se: summary.mean_pseudo_regret.se,
                reg_star: sol.reg_star,
                reg_lr: oracle::lai_robbins_regret(&instance, t)?,
                err_theta: oracle::error_budget(&instance, t, gamma)?.err_theta,
            })
        })
        .collect()
}

/// One row of the boundary-crossing table.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossingRow {
    pub x: f64,
    /// Estimated probability that `max_t t^(-1/2) sum_{s<=t} xi_s > x`.
    pub estimate: f64,
    /// Binomial standard error.
    pub se: f64,
    /// `estimate / (ln T * x * exp(-x^2/2))`, the calibration ratio against
    /// the crossing bound (meaningless at T = 1 where ln T = 0).
    pub bound_ratio: f64,
}

/// Monte-Carlo estimate of the one-sided boundary-crossing probability of the
/// normalized Gaussian partial-sum maximum, over a grid of levels `x >= 1`.
pub fn boundary_crossing_mc(
    horizon: usize,
    x_grid: &[f64],
    mc: &McConfig,
) -> Result<Vec<CrossingRow>> {
    mc.validate()?;
    if horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be >= 1".into()));
    }
    if x_grid.is_empty() || x_grid.iter().any(|x| !(*x >= 1.0)) {
        return Err(Error::InvalidConfig("x grid entries must be >= 1".into()));
    }
    let maxima: Vec<f64> = with_pool(mc.workers, || {
        (0..mc.reps)
            .into_par_iter()
            .map(|r| {
                use rand::Rng;
                let mut stream = rng::stream(rng::replicate_seed(mc.base_seed, r as u64), 0);
                let mut sum = 0.0;
                let mut max = f64::NEG_INFINITY;
                for t in 1..=horizon {
                    sum += stream.sample::<f64, _>(rand_distr::StandardNormal);
                    max = max.max(sum / (t as f64).sqrt());
                }
                max
            })
            .collect()
    })?;
    let b = mc.reps as f64;
    let log_t = (horizon as f64).ln();
    Ok(x_grid
        .iter()
        .map(|&x| {
            let hits = maxima.iter().filter(|m| **m > x).count() as f64;
            let p = hits / b;
            CrossingRow {
                x,
                estimate: p,
                se: (p * (1.0 - p) / b).sqrt(),
                bound_ratio: p / (log_t * x * (-0.5 * x * x).exp()),
            }
        })
        .collect())
}

/// Fraction of replicates on which the baseline event `E_0` holds; used for
/// reporting how detection responds to the exploration rate.
pub fn e0_frequency(instance: &BanditInstance, config: &UcbConfig, mc: &McConfig) -> Result<f64> {
    mc.validate()?;
    if !(instance.sigma() > 0.0) {
        return Err(Error::Domain("E_0 requires sigma > 0".into()));
    }
    let hits = with_pool(mc.workers, || {
        (0..mc.reps)
            .into_par_iter()
            .map(|r| {
                let mut cfg = config.clone();
                cfg.seed = rng::replicate_seed(mc.base_seed, r as u64);
                let traj = simulate_ucb1(instance, &cfg)?;
                let w = compute_w(&traj);
                let counts = traj.final_counts();
                let gaps = instance.gaps();
                let e0 = (0..instance.k())
                    .map(|a| {
                        (cfg.gamma - w[a]) / (counts[a] as f64).sqrt() - gaps[a] / instance.sigma()
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
                    > 0.0;
                Ok(usize::from(e0))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(hits.iter().sum::<usize>() as f64 / mc.reps as f64)
}

/// Compensated (Kahan) accumulator.
#[derive(Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

fn mean_se(values: impl Iterator<Item = f64> + Clone) -> MeanSe {
    let mut n = 0usize;
    let mut acc = Kahan::default();
    for v in values.clone() {
        acc.add(v);
        n += 1;
    }
    let mean = acc.sum / n as f64;
    if n < 2 {
        return MeanSe { mean, se: 0.0 };
    }
    let mut sq = Kahan::default();
    for v in values {
        sq.add((v - mean) * (v - mean));
    }
    let var = sq.sum / (n - 1) as f64;
    MeanSe {
        mean,
        se: (var / n as f64).sqrt(),
    }
}

/// Linear-interpolation quantile of a sorted sample.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_instance_has_zero_se() {
        let instance = BanditInstance::new(vec![0.0, -1.0], 0.0).unwrap();
        let config = UcbConfig::new(10, 2.0, 0);
        let mc = McConfig::new(32, 9);
        let s = run_mc(&instance, &config, &mc).unwrap();
        assert_eq!(s.mean_pseudo_regret.mean, 1.0);
        assert_eq!(s.mean_pseudo_regret.se, 0.0);
        assert_eq!(s.pseudo_quantiles, [1.0; 5]);
        assert!(s.ratio_mean_abs_dev.is_none());
        assert_eq!(s.sandwich, SandwichCounts::default());
    }

    #[test]
    fn summary_counts_sum_to_horizon() {
        let instance = BanditInstance::new(vec![0.2, 0.0, -0.2], 0.3).unwrap();
        let config = UcbConfig::new(120, 3.0, 0);
        let mc = McConfig::new(64, 4);
        let s = run_mc(&instance, &config, &mc).unwrap();
        let total: f64 = s.mean_counts.iter().map(|m| m.mean).sum();
        assert!((total - 120.0).abs() < 1e-9);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let instance = BanditInstance::new(vec![0.1, 0.0], 0.5).unwrap();
        let config = UcbConfig::new(150, 2.5, 0);
        let base = McConfig {
            reps: 40,
            base_seed: 123,
            workers: Some(1),
        };
        let s1 = run_mc(&instance, &config, &base).unwrap();
        let s4 = run_mc(
            &instance,
            &config,
            &McConfig {
                workers: Some(4),
                ..base.clone()
            },
        )
        .unwrap();
        let auto = run_mc(
            &instance,
            &config,
            &McConfig {
                workers: None,
                ..base
            },
        )
        .unwrap();
        assert_eq!(s1, s4);
        assert_eq!(s1, auto);
    }

    #[test]
    fn sandwich_audit_clean_on_small_run() {
        let instance = BanditInstance::new(vec![0.0, -0.1], 0.1).unwrap();
        let t = 500;
        let config = UcbConfig::new(t, (2.0 * (t as f64).ln()).sqrt(), 0);
        let mc = McConfig::new(50, 77);
        let audit = sandwich_audit(&instance, &config, &mc).unwrap();
        assert!(audit.violations.is_empty(), "{:?}", audit.violations);
        assert_eq!(
            audit.counts.events_held + audit.counts.events_not_detected,
            50
        );
        assert_eq!(audit.counts.sandwich_held, audit.counts.events_held);
    }

    #[test]
    fn audit_rejects_sigma_zero() {
        let instance = BanditInstance::new(vec![0.0, -1.0], 0.0).unwrap();
        let config = UcbConfig::new(10, 2.0, 0);
        assert!(sandwich_audit(&instance, &config, &McConfig::new(4, 0)).is_err());
    }

    #[test]
    fn sweep_zero_gap_row_is_exactly_zero() {
        let mc = McConfig::new(16, 5);
        let rows = regret_sweep(2, 0.1, 60, 3.0, &[0.0, 0.1], &mc).unwrap();
        assert_eq!(rows[0].reg_star, 0.0);
        assert_eq!(rows[0].reg_mc_mean, 0.0);
        assert_eq!(rows[0].reg_lr, 0.0);
        assert!(rows[1].reg_star > 0.0);
    }

    #[test]
    fn lai_robbins_column_decreases_in_the_gap() {
        let mc = McConfig::new(4, 5);
        let rows = regret_sweep(2, 0.1, 100, 3.5, &[0.05, 0.1, 0.2, 0.4], &mc).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].reg_lr < w[0].reg_lr);
        }
    }

    #[test]
    fn crossing_single_round_matches_gaussian_tail() {
        let mc = McConfig::new(100_000, 11);
        let rows = boundary_crossing_mc(1, &[1.0], &mc).unwrap();
        let expected = 1.0 - crate::normal::cdf(1.0); // 0.15866
        assert!(
            (rows[0].estimate - expected).abs() <= 3.0 * rows[0].se,
            "estimate {} vs {expected} (se {})",
            rows[0].estimate,
            rows[0].se
        );
    }

    #[test]
    fn crossing_estimates_decrease_in_x() {
        let mc = McConfig::new(20_000, 3);
        let rows = boundary_crossing_mc(100, &[1.0, 1.5, 2.0, 3.0], &mc).unwrap();
        for w in rows.windows(2) {
            let slack = 2.0 * (w[0].se + w[1].se);
            assert!(w[1].estimate <= w[0].estimate + slack);
        }
    }

    #[test]
    fn crossing_validates_inputs() {
        let mc = McConfig::new(10, 0);
        assert!(boundary_crossing_mc(10, &[], &mc).is_err());
        assert!(boundary_crossing_mc(10, &[0.5], &mc).is_err());
        assert!(boundary_crossing_mc(0, &[1.0], &mc).is_err());
    }

    #[test]
    fn e0_frequency_trend_with_gamma_is_reported() {
        let instance = BanditInstance::new(vec![0.0, -0.1], 0.1).unwrap();
        let t = 300;
        let gamma = (2.0 * (t as f64).ln()).sqrt();
        let mc = McConfig::new(200, 8);
        let lo = e0_frequency(&instance, &UcbConfig::new(t, gamma, 0), &mc).unwrap();
        let hi = e0_frequency(&instance, &UcbConfig::new(t, 2.0 * gamma, 0), &mc).unwrap();
        // Trend reported, not asserted: doubling gamma should not reduce
        // detection, but both frequencies are legitimate outputs either way.
        println!("E_0 frequency: gamma={gamma:.3} -> {lo:.3}, doubled -> {hi:.3}");
        assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
    }
}
