//! Gaussian bandit instances and the `UCB1` policy loop.
//!
//! A [`BanditInstance`] is a set of K arms with mean rewards `mu_a` and a
//! common noise scale `sigma`; pulling arm `a` at round `t` yields
//! `R_t = mu_a + sigma * xi_t` with `xi_t` standard normal. The policy pulls
//! every arm once and then maximizes the optimistic index
//!
//! ```text
//! mu_hat[a] + sigma * gamma / sqrt(n[a])
//! ```
//!
//! where `gamma` is the exploration rate. [`Trajectory`] records the complete
//! run: actions, rewards, the running count table, and the per-arm noise
//! sequence, which is enough to recheck the policy decision at every round and
//! to evaluate the trajectory-level statistics ([`compute_w`],
//! [`event_report`]) used by the comparison-sandwich audit.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::{oracle, rng, Error, Result};

/// A K-armed Gaussian bandit instance.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditInstance {
    mu: Vec<f64>,
    sigma: f64,
}

impl BanditInstance {
    /// Builds an instance from mean rewards and a noise scale.
    ///
    /// Requires at least one arm, finite means, and `sigma >= 0`.
    pub fn new(mu: Vec<f64>, sigma: f64) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::InvalidInstance("need at least one arm".into()));
        }
        if let Some(bad) = mu.iter().find(|m| !m.is_finite()) {
            return Err(Error::InvalidInstance(format!("non-finite mean {bad}")));
        }
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidInstance(format!(
                "noise scale must be finite and nonnegative, got {sigma}"
            )));
        }
        Ok(Self { mu, sigma })
    }

    /// Builds the instance with one optimal arm at mean 0 and the given gaps:
    /// arm `a` has mean `-gaps[a]`. All gaps must be nonnegative.
    pub fn from_gaps(gaps: &[f64], sigma: f64) -> Result<Self> {
        if gaps.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(Error::InvalidInstance(
                "gaps must be finite and >= 0".into(),
            ));
        }
        Self::new(gaps.iter().map(|g| 0.0 - g).collect(), sigma)
    }

    /// Number of arms K.
    pub fn k(&self) -> usize {
        self.mu.len()
    }

    /// Mean rewards.
    pub fn means(&self) -> &[f64] {
        &self.mu
    }

    /// Noise scale sigma.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Best mean reward.
    pub fn mu_star(&self) -> f64 {
        self.mu.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Sub-optimality gaps `mu_star - mu_a` (zero for optimal arms).
    pub fn gaps(&self) -> Vec<f64> {
        let star = self.mu_star();
        self.mu.iter().map(|m| star - m).collect()
    }

    /// Number of optimal arms (gap exactly zero); always >= 1.
    pub fn n_optimal(&self) -> usize {
        let star = self.mu_star();
        self.mu.iter().filter(|m| **m == star).count()
    }
}

/// Tie-breaking rule for the argmax over arm indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    /// Deterministic: the smallest arm index among the maximizers.
    #[default]
    LowestIndex,
    /// Uniform over the maximizers, from a tie-break stream derived from the
    /// run seed (separate from the reward stream, so the reward noise
    /// sequence is identical under either rule).
    Random,
}

/// Configuration of one `UCB1` run.
#[derive(Debug, Clone, PartialEq)]
pub struct UcbConfig {
    /// Horizon T (total number of pulls).
    pub horizon: usize,
    /// Exploration rate gamma; the canonical choice is `sqrt(2 ln T)`.
    pub gamma: f64,
    /// Seed for the reward-noise and tie-break streams.
    pub seed: u64,
    /// Tie-breaking rule.
    pub tie_break: TieBreak,
}

impl UcbConfig {
    pub fn new(horizon: usize, gamma: f64, seed: u64) -> Self {
        Self {
            horizon,
            gamma,
            seed,
            tie_break: TieBreak::LowestIndex,
        }
    }

    fn validate(&self, instance: &BanditInstance) -> Result<()> {
        if self.horizon < instance.k() {
            return Err(Error::InvalidConfig(format!(
                "horizon {} is smaller than the number of arms {} (initialization pulls each arm once)",
                self.horizon,
                instance.k()
            )));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "exploration rate must be positive and finite, got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Complete record of one `UCB1` run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    actions: Vec<usize>,
    rewards: Vec<f64>,
    counts: Vec<Vec<u64>>,
    means: Vec<f64>,
    noise: Vec<Vec<f64>>,
}

impl Trajectory {
    /// Number of arms.
    pub fn k(&self) -> usize {
        self.counts.len()
    }

    /// Horizon T.
    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    /// Arm pulled at each round (0-based arm indices, round order).
    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    /// Reward received at each round.
    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// Pull count of `arm` after round `t` (column 0 is all zeros).
    pub fn count_at(&self, arm: usize, t: usize) -> u64 {
        self.counts[arm][t]
    }

    /// Final pull counts `n_{a;T}`.
    pub fn final_counts(&self) -> Vec<u64> {
        self.counts.iter().map(|c| c[self.horizon()]).collect()
    }

    /// Final empirical means `mu_hat_{a;T}`.
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Standardized noises consumed by `arm`, in pull order.
    pub fn noise_record(&self, arm: usize) -> &[f64] {
        &self.noise[arm]
    }
}

/// Runs `UCB1` on `instance`; rewards are drawn from a ChaCha stream seeded
/// by `config.seed`, one standard normal per round, attributed to the pulled
/// arm.
pub fn simulate_ucb1(instance: &BanditInstance, config: &UcbConfig) -> Result<Trajectory> {
    let mut reward_stream = rng::stream(config.seed, 0);
    simulate_ucb1_with_noise(instance, config, move || {
        reward_stream.sample(StandardNormal)
    })
}

/// Runs `UCB1` with an injected noise stream (`next_noise` is called exactly
/// once per round). Used for diagnostics such as zero-noise runs; the
/// tie-break stream is still derived from `config.seed`.
pub fn simulate_ucb1_with_noise<F>(
    instance: &BanditInstance,
    config: &UcbConfig,
    mut next_noise: F,
) -> Result<Trajectory>
where
    F: FnMut() -> f64,
{
    config.validate(instance)?;
    let k = instance.k();
    let t_max = config.horizon;
    let sigma = instance.sigma();

    let mut tie_stream = rng::stream(config.seed, 1);
    let mut actions = Vec::with_capacity(t_max);
    let mut rewards = Vec::with_capacity(t_max);
    let mut counts: Vec<Vec<u64>> = vec![Vec::with_capacity(t_max + 1); k];
    for c in counts.iter_mut() {
        c.push(0);
    }
    let mut noise: Vec<Vec<f64>> = vec![Vec::new(); k];
    let mut sums = vec![0.0f64; k];
    let mut pulls = vec![0u64; k];

    for t in 1..=t_max {
        let arm = if t <= k {
            t - 1
        } else {
            choose_arm(instance, config, &sums, &pulls, &mut tie_stream)
        };
        let xi = next_noise();
        let reward = instance.means()[arm] + sigma * xi;
        actions.push(arm);
        rewards.push(reward);
        noise[arm].push(xi);
        sums[arm] += reward;
        pulls[arm] += 1;
        for (a, c) in counts.iter_mut().enumerate() {
            c.push(pulls[a]);
        }
    }

    let means = sums
        .iter()
        .zip(&pulls)
        .map(|(s, n)| s / *n as f64)
        .collect();
    Ok(Trajectory {
        actions,
        rewards,
        counts,
        means,
        noise,
    })
}

/// The optimistic index of an arm given its running sum and pull count.
pub fn ucb_index(sum: f64, pulls: u64, sigma: f64, gamma: f64) -> f64 {
    sum / pulls as f64 + sigma * gamma / (pulls as f64).sqrt()
}

fn choose_arm(
    instance: &BanditInstance,
    config: &UcbConfig,
    sums: &[f64],
    pulls: &[u64],
    tie_stream: &mut ChaCha12Rng,
) -> usize {
    let sigma = instance.sigma();
    let index = |a: usize| ucb_index(sums[a], pulls[a], sigma, config.gamma);
    let mut best = 0usize;
    let mut best_val = index(0);
    for a in 1..instance.k() {
        let v = index(a);
        if v > best_val {
            best = a;
            best_val = v;
        }
    }
    match config.tie_break {
        TieBreak::LowestIndex => best,
        TieBreak::Random => {
            let ties: Vec<usize> = (0..instance.k())
                .filter(|&a| index(a) == best_val)
                .collect();
            if ties.len() == 1 {
                best
            } else {
                ties[tie_stream.random_range(0..ties.len())]
            }
        }
    }
}

/// Pseudo-regret: `sum over suboptimal arms of gap_a * n_{a;T}`.
pub fn pseudo_regret(instance: &BanditInstance, traj: &Trajectory) -> Result<f64> {
    check_match(instance, traj)?;
    let counts = traj.final_counts();
    Ok(instance
        .gaps()
        .iter()
        .zip(&counts)
        .filter(|(g, _)| **g > 0.0)
        .map(|(g, n)| g * *n as f64)
        .sum())
}

/// Vanilla regret: `sum over rounds of (mu_star - R_t)`; equals the
/// pseudo-regret minus `sigma * sum of xi_t`.
pub fn vanilla_regret(instance: &BanditInstance, traj: &Trajectory) -> Result<f64> {
    check_match(instance, traj)?;
    let star = instance.mu_star();
    Ok(traj.rewards().iter().map(|r| star - r).sum())
}

fn check_match(instance: &BanditInstance, traj: &Trajectory) -> Result<()> {
    if instance.k() != traj.k() {
        return Err(Error::DimensionMismatch(format!(
            "instance has {} arms, trajectory has {}",
            instance.k(),
            traj.k()
        )));
    }
    Ok(())
}

/// Per-arm maxima of the normalized noise partial sums:
/// `W_a = max over prefixes t of |sum_{i<=t} xi_{a;i}| / sqrt(t)`, taken over
/// the prefixes that were actually realized (arm a's own noise sequence).
pub fn compute_w(traj: &Trajectory) -> Vec<f64> {
    (0..traj.k())
        .map(|a| {
            let mut sum = 0.0;
            let mut w: f64 = 0.0;
            for (i, xi) in traj.noise_record(a).iter().enumerate() {
                sum += xi;
                w = w.max(sum.abs() / ((i + 1) as f64).sqrt());
            }
            w
        })
        .collect()
}

/// Trajectory-level event report used by the comparison-sandwich audit.
///
/// `t_plus_threshold` is the least `t` at which the inflated-horizon event
/// holds (the deflated pull-target sum exceeds T); `t_minus_threshold` is the
/// greatest `t` at which the deflated-horizon event holds (the inflated sum
/// plus K stays below T). Either may be absent.
#[derive(Debug, Clone, PartialEq)]
pub struct EventReport {
    /// Per-arm `W_a`.
    pub w: Vec<f64>,
    /// Whether some arm has `(gamma - W_a)/sqrt(n_{a;T}) - gap_a/sigma > 0`.
    pub e0_holds: bool,
    /// Least t with `sum_a n_star_{a;t} (1 - W_a/gamma)_+^2 > T`, if any in
    /// the search range.
    pub t_plus_threshold: Option<f64>,
    /// Greatest t with `sum_a n_star_{a;t} (1 + W_a/gamma)^2 + K < T`, if any.
    pub t_minus_threshold: Option<f64>,
}

/// Search cap for the event thresholds, as a multiple of T.
const EVENT_SEARCH_CAP: f64 = 10.0;

/// Evaluates the comparison-sandwich events for one trajectory.
///
/// Requires `sigma > 0` (the events divide by sigma). The thresholds are
/// located by bisection, using that both sums are strictly increasing in `t`.
pub fn event_report(
    instance: &BanditInstance,
    config: &UcbConfig,
    traj: &Trajectory,
) -> Result<EventReport> {
    check_match(instance, traj)?;
    if !(instance.sigma() > 0.0) {
        return Err(Error::Domain("event report requires sigma > 0".into()));
    }
    let w = compute_w(traj);
    let gamma = config.gamma;
    let gaps = instance.gaps();
    let counts = traj.final_counts();
    let t_total = traj.horizon() as f64;
    let k = instance.k() as f64;

    let e0_holds = (0..instance.k())
        .map(|a| (gamma - w[a]) / (counts[a] as f64).sqrt() - gaps[a] / instance.sigma())
        .fold(f64::NEG_INFINITY, f64::max)
        > 0.0;

    let minus_coef: Vec<f64> = w.iter().map(|wa| (1.0 + wa / gamma).powi(2)).collect();
    let plus_coef: Vec<f64> = w
        .iter()
        .map(|wa| {
            let c = 1.0 - wa / gamma;
            if c > 0.0 {
                c * c
            } else {
                0.0
            }
        })
        .collect();

    let weighted_sum = |t: f64, coef: &[f64]| -> f64 {
        let targets =
            oracle::arm_targets_at(instance, t, gamma).expect("sigma and gamma already validated");
        targets.iter().zip(coef).map(|(n, c)| n * c).sum()
    };

    // E_+ needs the deflated sum to exceed T; the sum is <= t, so the
    // threshold lives in [T, cap] when it exists.
    let cap = EVENT_SEARCH_CAP * t_total;
    let t_plus_threshold = if weighted_sum(cap, &plus_coef) > t_total {
        let (mut lo, mut hi) = (t_total, cap);
        debug_assert!(weighted_sum(lo, &plus_coef) <= t_total);
        for _ in 0..200 {
            if hi - lo <= 1e-12 * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if weighted_sum(mid, &plus_coef) > t_total {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    } else {
        None
    };

    // E_- needs the inflated sum plus K to stay below T; it holds near t = 0
    // and fails at t = T, so the threshold lives in (0, T).
    let t_minus_threshold = if k >= t_total {
        None
    } else {
        let mut lo = 0.5 * t_total;
        let mut found = false;
        while lo > 1e-15 * t_total {
            if weighted_sum(lo, &minus_coef) + k < t_total {
                found = true;
                break;
            }
            lo *= 0.5;
        }
        if found {
            let mut hi = t_total;
            for _ in 0..200 {
                if hi - lo <= 1e-12 * hi {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                if weighted_sum(mid, &minus_coef) + k < t_total {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Some(lo)
        } else {
            None
        }
    };

    Ok(EventReport {
        w,
        e0_holds,
        t_plus_threshold,
        t_minus_threshold,
    })
}
