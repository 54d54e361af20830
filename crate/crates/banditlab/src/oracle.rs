//! Noiseless theory layer for `UCB1`.
//!
//! In the continuous-time, zero-noise limit all arms share one optimistic
//! value, which pins down deterministic pull targets: `n_star(t)` solves
//!
//! ```text
//! sum_a n * (1 + sqrt(n) * gap_a / (sigma * gamma))^(-2) = t
//! ```
//!
//! and the per-arm targets are `n_star_a = n_star * (1 + sqrt(n_star) *
//! gap_a / (sigma * gamma))^(-2)`, which sum back to `t`. The left side is
//! strictly increasing in `n`, so the root is unique and lives in
//! `[t/K, t/|A0|]` where `A0` is the set of optimal arms; we bisect on that
//! bracket down to floating-point resolution.
//!
//! From the targets the module derives the theoretical regret
//! `sum_a gap_a * n_star_a`, the curve-shape constant `D_star`, the error
//! budget `err`, the Lai-Robbins asymptote, the worst-case (minimax-style)
//! instance, and a gap-regime classifier.

use crate::{BanditInstance, Error, Result};

/// Error budget of an instance/horizon/exploration-rate triple.
///
/// `err_theta` is the master error term
/// `(sqrt(ln gamma) + sqrt(ln ln T))/gamma + K/T + max_a(gap_a/sigma)^2 / gamma^2`;
/// `vartheta_star = T * exp(-gamma^2/2) / gamma^2` is the heavy-tail term that
/// forces `gamma` to stay at or above `sqrt(2 ln T)`; `eps_tk =
/// sqrt(ln ln T / ln T) + K/T` is the regime-classification error scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBudget {
    pub err_theta: f64,
    pub vartheta_star: f64,
    pub eps_tk: f64,
}

/// Solution of the fixed-point system at one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    /// Common scale `n_star`; equals the pull target of every optimal arm.
    pub n_star: f64,
    /// Per-arm pull targets, summing to the horizon.
    pub n_star_a: Vec<f64>,
    /// Theoretical regret `sum_a gap_a * n_star_a`.
    pub reg_star: f64,
    /// Weighted 3/2-moment `T^-1 sum_a (n_star_a/n_star)^(1/2) n_star_a`,
    /// always in `[(|A0|/K)^(1/3), 1]`.
    pub d_star: f64,
    /// Noiseless optimistic value `mu_star + sigma * gamma / sqrt(n_star)`.
    pub mu_plus: f64,
    /// Error budget; `None` when `gamma < e` or the horizon is too small for
    /// the iterated logarithm (budget evaluation needs `gamma >= e`, T > e).
    pub budget: Option<ErrorBudget>,
}

fn check_domain(instance: &BanditInstance, t: f64, gamma: f64) -> Result<()> {
    if !(instance.sigma() > 0.0) {
        return Err(Error::Domain("fixed point requires sigma > 0".into()));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Domain(format!(
            "exploration rate must be positive, got {gamma}"
        )));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("horizon must be positive, got {t}")));
    }
    Ok(())
}

/// Solves the fixed-point equation at horizon `t` (a positive real; the
/// growth curve evaluates it at non-integer times too).
pub fn solve_n_star(instance: &BanditInstance, t: f64, gamma: f64) -> Result<f64> {
    check_domain(instance, t, gamma)?;
    let scaled: Vec<f64> = instance
        .gaps()
        .iter()
        .map(|g| g / (instance.sigma() * gamma))
        .collect();
    let total = |n: f64| -> f64 {
        let root = n.sqrt();
        scaled
            .iter()
            .map(|c| n / ((1.0 + root * c) * (1.0 + root * c)))
            .sum()
    };

    let mut lo = t / instance.k() as f64;
    let mut hi = t / instance.n_optimal() as f64;
    if lo == hi {
        // All arms optimal: the system collapses to K * n = t.
        return Ok(lo);
    }
    debug_assert!(total(lo) <= t && total(hi) >= t);
    // Bisect to floating-point resolution; the bracket is at most one binade
    // wide so this takes ~55 halvings.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid) < t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Per-arm pull targets `n_star_a` at horizon `t`.
pub fn arm_targets_at(instance: &BanditInstance, t: f64, gamma: f64) -> Result<Vec<f64>> {
    let n = solve_n_star(instance, t, gamma)?;
    let root = n.sqrt();
    let denom = instance.sigma() * gamma;
    Ok(instance
        .gaps()
        .iter()
        .map(|g| {
            let f = 1.0 + root * g / denom;
            n / (f * f)
        })
        .collect())
}

/// Error budget for the triple `(instance, t, gamma)`.
///
/// Requires `gamma >= e` (so `sqrt(ln gamma)` is safely defined in the
/// regime the theory covers) and `t > e` for the iterated logarithm.
pub fn error_budget(instance: &BanditInstance, t: f64, gamma: f64) -> Result<ErrorBudget> {
    check_domain(instance, t, gamma)?;
    if gamma < std::f64::consts::E {
        return Err(Error::Domain(format!(
            "error budget requires gamma >= e, got {gamma}"
        )));
    }
    if t.ln() <= 1.0 {
        return Err(Error::Domain(format!(
            "error budget requires horizon > e, got {t}"
        )));
    }
    let k = instance.k() as f64;
    let max_scaled_gap = instance
        .gaps()
        .iter()
        .map(|g| g / instance.sigma())
        .fold(0.0f64, f64::max);
    let err_theta = (gamma.ln().sqrt() + t.ln().ln().sqrt()) / gamma
        + k / t
        + max_scaled_gap.powi(2) / (gamma * gamma);
    let vartheta_star = t * (-0.5 * gamma * gamma).exp() / (gamma * gamma);
    let eps_tk = (t.ln().ln() / t.ln()).sqrt() + k / t;
    Ok(ErrorBudget {
        err_theta,
        vartheta_star,
        eps_tk,
    })
}

/// Full fixed-point solution at horizon `t`.
pub fn oracle_solution(instance: &BanditInstance, t: f64, gamma: f64) -> Result<OracleSolution> {
    let n_star = solve_n_star(instance, t, gamma)?;
    let root = n_star.sqrt();
    let denom = instance.sigma() * gamma;
    let gaps = instance.gaps();
    let n_star_a: Vec<f64> = gaps
        .iter()
        .map(|g| {
            let f = 1.0 + root * g / denom;
            n_star / (f * f)
        })
        .collect();
    let reg_star = gaps.iter().zip(&n_star_a).map(|(g, n)| g * n).sum();
    let d_star = n_star_a
        .iter()
        .map(|na| (na / n_star).sqrt() * na)
        .sum::<f64>()
        / t;
    let mu_plus = instance.mu_star() + instance.sigma() * gamma / root;
    let budget = error_budget(instance, t, gamma).ok();
    Ok(OracleSolution {
        n_star,
        n_star_a,
        reg_star,
        d_star,
        mu_plus,
        budget,
    })
}

/// Evaluates the growth curve on a grid of horizons.
///
/// The grid must be sorted ascending with positive entries. Each point is an
/// independent re-solve of the fixed point, so results do not depend on the
/// rest of the grid.
pub fn growth_curve(
    instance: &BanditInstance,
    gamma: f64,
    t_grid: &[f64],
) -> Result<Vec<OracleSolution>> {
    if t_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("t grid must be strictly ascending".into()));
    }
    t_grid
        .iter()
        .map(|&t| oracle_solution(instance, t, gamma))
        .collect()
}

/// Lai-Robbins asymptotic regret `2 ln T * sum over suboptimal arms of
/// sigma^2 / gap_a`; zero when every arm is optimal.
pub fn lai_robbins_regret(instance: &BanditInstance, t: f64) -> Result<f64> {
    if !(t >= 2.0) {
        return Err(Error::Domain(format!(
            "Lai-Robbins regret needs T >= 2, got {t}"
        )));
    }
    let s2 = instance.sigma() * instance.sigma();
    Ok(2.0
        * t.ln()
        * instance
            .gaps()
            .iter()
            .filter(|g| **g > 0.0)
            .map(|g| s2 / g)
            .sum::<f64>())
}

/// The worst-case instance for the maximal-regret lower bound: one optimal
/// arm and `K - 1` arms at gap `sigma * sqrt(2 ln T / (T/K))`.
pub fn minimax_instance(k: usize, t: f64, sigma: f64) -> Result<BanditInstance> {
    if k < 2 {
        return Err(Error::Domain(format!(
            "minimax instance needs K >= 2, got {k}"
        )));
    }
    if !(t >= k as f64) {
        return Err(Error::Domain(format!(
            "minimax instance needs T >= K, got T={t}, K={k}"
        )));
    }
    let gap = sigma * (2.0 * t.ln() / (t / k as f64)).sqrt();
    let mut gaps = vec![gap; k];
    gaps[0] = 0.0;
    BanditInstance::from_gaps(&gaps, sigma)
}

/// Where an instance sits relative to the gap scale at which the Lai-Robbins
/// formula is sharp.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Smallest scaled gap is at least `L * sqrt(K ln T / T)`: the
    /// Lai-Robbins formula tracks the true regret.
    LrAccurate,
    /// Some suboptimal gap sits below the threshold: the formula can be
    /// arbitrarily loose.
    LrLoose,
    /// No suboptimal arm at all.
    OutOfClass,
}

/// Classifies the instance against the threshold `L * sqrt(K ln T / T)`.
pub fn classify_regime(instance: &BanditInstance, t: f64, l: f64) -> Regime {
    let min_scaled = instance
        .gaps()
        .iter()
        .filter(|g| **g > 0.0)
        .map(|g| g / instance.sigma())
        .fold(f64::INFINITY, f64::min);
    if min_scaled.is_infinite() {
        return Regime::OutOfClass;
    }
    let threshold = l * (instance.k() as f64 * t.ln() / t).sqrt();
    if min_scaled >= threshold {
        Regime::LrAccurate
    } else {
        Regime::LrLoose
    }
}
