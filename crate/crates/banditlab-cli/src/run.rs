//! Command implementations: each resolves to a [`RunSpec`], computes its
//! table, and optionally prepares plot series.

use banditlab::bandit::{compute_w, pseudo_regret, simulate_ucb1, vanilla_regret};
use banditlab::inference::{clt_mc, coverage_mc_with, kolmogorov_distance};
use banditlab::linear::{
    clt_statistic, clt_statistic_from_noise, ridge, simulate_linear, LinearModel,
};
use banditlab::montecarlo::{
    boundary_crossing_mc, regret_sweep, replicate_map, sandwich_audit, McConfig,
};
use banditlab::{oracle, rng, BanditInstance, UcbConfig};
use nalgebra::{DMatrix, DVector};

use crate::plot::Series;
use crate::{RunSpec, Table};

type Result<T> = std::result::Result<T, banditlab::Error>;

/// Result of one command: the resolved spec, its table, optional plot
/// series with axis labels, and the process exit code (1 after a failed
/// audit, 0 otherwise).
pub struct Outcome {
    pub spec: RunSpec,
    pub table: Table,
    pub plot: Option<(Vec<Series>, String, String)>,
    pub exit: i32,
}

/// The canonical exploration rate `sqrt(2 ln T)`.
pub fn canonical_gamma(horizon: usize) -> f64 {
    (2.0 * (horizon as f64).ln()).sqrt()
}

/// Gap-sweep preset: two arms, `sigma = 0.1`, `T = 3000`, canonical
/// exploration rate, gaps `0.01..=0.25` in steps of `0.01`, 1000 replicates.
pub fn fig_sweep_preset() -> (usize, f64, usize, f64, Vec<f64>, usize) {
    let horizon = 3000;
    let deltas = (1..=25).map(|i| i as f64 * 0.01).collect();
    (2, 0.1, horizon, canonical_gamma(horizon), deltas, 1000)
}

/// Coverage/CLT preset: `T = 10000`, means `(1, 1 - sqrt(ln T / T))`,
/// `sigma = 0.1`, 1000 replicates.
///
/// The default exploration rate is `sqrt(6 ln T)`; `literal_gamma` switches
/// to `sqrt(6 ln T / T)`, which is so small that the policy degenerates to
/// near-greedy — exposed for comparison only.
pub fn fig_coverage_preset(literal_gamma: bool) -> (Vec<f64>, f64, usize, f64, usize) {
    let horizon = 10_000usize;
    let t = horizon as f64;
    let mu = vec![1.0, 1.0 - (t.ln() / t).sqrt()];
    let gamma = if literal_gamma {
        (6.0 * t.ln() / t).sqrt()
    } else {
        (6.0 * t.ln()).sqrt()
    };
    (mu, 0.1, horizon, gamma, 1000)
}

/// Default nominal miscoverage levels for coverage studies.
pub fn default_alphas() -> Vec<f64> {
    vec![0.01, 0.02, 0.05, 0.10, 0.15, 0.20, 0.30, 0.40, 0.50]
}

/// Built-in rank-3 decision set with five arms: the three coordinate
/// directions plus two oblique unit vectors.
pub fn preset_decision_set() -> (DMatrix<f64>, DVector<f64>) {
    let s2 = 0.5f64.sqrt();
    let s3 = (1.0f64 / 3.0).sqrt();
    let z = DMatrix::from_row_slice(
        5,
        3,
        &[
            1.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, //
            0.0, 0.0, 1.0, //
            s2, s2, 0.0, //
            s3, s3, s3,
        ],
    );
    let beta = DVector::from_column_slice(&[0.02, 0.01, 0.005]);
    (z, beta)
}

/// Default projection direction for the linear CLT statistic (unit norm).
pub fn preset_direction() -> DVector<f64> {
    DVector::from_column_slice(&[0.6, -0.64, 0.48])
}

pub fn solve(mu: Vec<f64>, sigma: f64, horizon: usize, gamma: f64) -> Result<Outcome> {
    let instance = BanditInstance::new(mu.clone(), sigma)?;
    let sol = oracle::oracle_solution(&instance, horizon as f64, gamma)?;
    let gaps = instance.gaps();
    let mut table = Table::new(&[
        "arm",
        "delta",
        "n_star_a",
        "n_star",
        "reg_star",
        "d_star",
        "mu_plus",
        "err_theta",
        "vartheta_star",
        "eps_tk",
    ]);
    let (err, vth, eps) = match &sol.budget {
        Some(b) => (b.err_theta, b.vartheta_star, b.eps_tk),
        None => (f64::NAN, f64::NAN, f64::NAN),
    };
    for a in 0..instance.k() {
        table.push(vec![
            (a + 1) as f64,
            gaps[a],
            sol.n_star_a[a],
            sol.n_star,
            sol.reg_star,
            sol.d_star,
            sol.mu_plus,
            err,
            vth,
            eps,
        ]);
    }
    Ok(Outcome {
        spec: RunSpec::Solve {
            mu,
            sigma,
            horizon,
            gamma,
        },
        table,
        plot: None,
        exit: 0,
    })
}

pub fn simulate(
    mu: Vec<f64>,
    sigma: f64,
    horizon: usize,
    gamma: f64,
    seed: u64,
) -> Result<Outcome> {
    let instance = BanditInstance::new(mu.clone(), sigma)?;
    let config = UcbConfig::new(horizon, gamma, seed);
    let traj = simulate_ucb1(&instance, &config)?;
    let w = compute_w(&traj);
    let pseudo = pseudo_regret(&instance, &traj)?;
    let vanilla = vanilla_regret(&instance, &traj)?;
    let counts = traj.final_counts();
    let mut table = Table::new(&[
        "arm",
        "pulls",
        "mu_hat",
        "w",
        "pseudo_regret",
        "vanilla_regret",
    ]);
    for a in 0..instance.k() {
        table.push(vec![
            (a + 1) as f64,
            counts[a] as f64,
            traj.means()[a],
            w[a],
            pseudo,
            vanilla,
        ]);
    }
    Ok(Outcome {
        spec: RunSpec::Simulate {
            mu,
            sigma,
            horizon,
            gamma,
            seed,
        },
        table,
        plot: None,
        exit: 0,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn sweep(
    k: usize,
    sigma: f64,
    horizon: usize,
    gamma: f64,
    deltas: Vec<f64>,
    reps: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<Outcome> {
    let mc = McConfig {
        reps,
        base_seed: seed,
        workers,
    };
    let rows = regret_sweep(k, sigma, horizon, gamma, &deltas, &mc)?;
    let mut table = Table::new(&[
        "delta",
        "reg_mc_mean",
        "reg_mc_se",
        "reg_star",
        "reg_lr",
        "err_theta",
    ]);
    for r in &rows {
        table.push(vec![
            r.delta,
            r.reg_mc_mean,
            r.reg_mc_se,
            r.reg_star,
            r.reg_lr,
            r.err_theta,
        ]);
    }
    let plot = vec![
        Series::new(
            "MC regret",
            rows.iter().map(|r| (r.delta, r.reg_mc_mean)).collect(),
        ),
        Series::new(
            "theoretical",
            rows.iter().map(|r| (r.delta, r.reg_star)).collect(),
        ),
        Series::new(
            "Lai-Robbins",
            rows.iter().map(|r| (r.delta, r.reg_lr)).collect(),
        ),
    ];
    Ok(Outcome {
        spec: RunSpec::Sweep {
            k,
            sigma,
            horizon,
            gamma,
            deltas,
            reps,
            seed,
            workers,
        },
        table,
        plot: Some((plot, "gap".into(), "regret".into())),
        exit: 0,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn coverage(
    mu: Vec<f64>,
    sigma: f64,
    horizon: usize,
    gamma: f64,
    alphas: Vec<f64>,
    estimate_sigma: bool,
    reps: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<Outcome> {
    let instance = BanditInstance::new(mu.clone(), sigma)?;
    let config = UcbConfig::new(horizon, gamma, 0);
    let mc = McConfig {
        reps,
        base_seed: seed,
        workers,
    };
    let report = coverage_mc_with(&instance, &config, &mc, &alphas, estimate_sigma)?;
    let mut table = Table::new(&["arm", "alpha", "coverage", "se"]);
    for row in &report.rows {
        table.push(vec![(row.arm + 1) as f64, row.alpha, row.coverage, row.se]);
    }
    let mut series: Vec<Series> = (0..instance.k())
        .map(|a| {
            Series::new(
                &format!("arm {}", a + 1),
                report
                    .rows
                    .iter()
                    .filter(|r| r.arm == a)
                    .map(|r| (1.0 - r.alpha, r.coverage))
                    .collect(),
            )
        })
        .collect();
    series.push(Series::new(
        "nominal",
        alphas.iter().map(|a| (1.0 - a, 1.0 - a)).collect(),
    ));
    Ok(Outcome {
        spec: RunSpec::Coverage {
            mu,
            sigma,
            horizon,
            gamma,
            alphas,
            estimate_sigma,
            reps,
            seed,
            workers,
        },
        table,
        plot: Some((series, "nominal level".into(), "coverage".into())),
        exit: 0,
    })
}

pub fn clt(
    mu: Vec<f64>,
    sigma: f64,
    horizon: usize,
    gamma: f64,
    reps: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<Outcome> {
    let instance = BanditInstance::new(mu.clone(), sigma)?;
    let config = UcbConfig::new(horizon, gamma, 0);
    let mc = McConfig {
        reps,
        base_seed: seed,
        workers,
    };
    let samples = clt_mc(&instance, &config, &mc)?;
    let columns: Vec<String> = std::iter::once("replicate".to_string())
        .chain((0..instance.k()).map(|a| format!("stat_arm{}", a + 1)))
        .collect();
    let mut table = Table {
        columns,
        rows: Vec::new(),
    };
    for r in 0..reps {
        let mut row = Vec::with_capacity(instance.k() + 1);
        row.push(r as f64);
        for arm_samples in &samples {
            row.push(arm_samples[r]);
        }
        table.rows.push(row);
    }
    for (a, arm_samples) in samples.iter().enumerate() {
        eprintln!(
            "arm {}: Kolmogorov distance to N(0,1) = {:.4}",
            a + 1,
            kolmogorov_distance(arm_samples).expect("nonempty samples")
        );
    }
    Ok(Outcome {
        spec: RunSpec::Clt {
            mu,
            sigma,
            horizon,
            gamma,
            reps,
            seed,
            workers,
        },
        table,
        plot: None,
        exit: 0,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn linear(
    sigma: f64,
    horizon: usize,
    gamma: f64,
    lambda: f64,
    reps: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<Outcome> {
    let (z, beta) = preset_decision_set();
    let model = LinearModel::new(z.clone(), beta.clone(), sigma)?;
    let w = preset_direction();
    let lambdas = [0.0, lambda, 1.0];
    let rows = replicate_map(workers, reps, |r| {
        let config = UcbConfig::new(horizon, gamma, rng::replicate_seed(seed, r as u64));
        let (_, artifacts) = simulate_linear(&model, &config)?;
        let stat = clt_statistic_from_noise(&artifacts, model.beta_star(), &w, sigma)?;
        let mut lambda_dev: f64 = 0.0;
        for &l in &lambdas {
            let beta_hat = ridge(&artifacts.x, &artifacts.y, l)?;
            let literal = clt_statistic(&artifacts, &beta_hat, model.beta_star(), l, &w, sigma)?;
            lambda_dev = lambda_dev.max((literal - stat).abs());
        }
        let pop = artifacts.population.as_ref().expect("sigma > 0");
        let diff = &artifacts.s_t - &pop.s_star;
        let op = diff.symmetric_eigen().eigenvalues.abs().max();
        let op_star = pop.s_star.clone().symmetric_eigen().eigenvalues.abs().max();
        Ok(vec![r as f64, stat, lambda_dev, op / op_star])
    })?;
    let mut table = Table::new(&["replicate", "statistic", "lambda_dev", "s_t_rel_dev"]);
    for row in rows {
        table.push(row);
    }
    Ok(Outcome {
        spec: RunSpec::Linear {
            decision_set: (0..z.nrows())
                .map(|i| z.row(i).iter().copied().collect())
                .collect(),
            beta_star: beta.iter().copied().collect(),
            sigma,
            horizon,
            gamma,
            lambda,
            direction: w.iter().copied().collect(),
            reps,
            seed,
            workers,
        },
        table,
        plot: None,
        exit: 0,
    })
}

pub fn audit(
    mu: Vec<f64>,
    sigma: f64,
    horizon: usize,
    gamma: f64,
    reps: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<Outcome> {
    let instance = BanditInstance::new(mu.clone(), sigma)?;
    let config = UcbConfig::new(horizon, gamma, 0);
    let mc = McConfig {
        reps,
        base_seed: seed,
        workers,
    };
    let report = sandwich_audit(&instance, &config, &mc)?;
    let mut table = Table::new(&[
        "reps",
        "events_held",
        "sandwich_held",
        "events_not_detected",
        "violations",
    ]);
    table.push(vec![
        reps as f64,
        report.counts.events_held as f64,
        report.counts.sandwich_held as f64,
        report.counts.events_not_detected as f64,
        report.violations.len() as f64,
    ]);
    for v in &report.violations {
        eprintln!(
            "sandwich violation: replicate {} (seed {:#x}) arm {}: {}",
            v.replicate, v.seed, v.arm, v.detail
        );
    }
    let exit = if report.violations.is_empty() { 0 } else { 1 };
    Ok(Outcome {
        spec: RunSpec::Audit {
            mu,
            sigma,
            horizon,
            gamma,
            reps,
            seed,
            workers,
        },
        table,
        plot: None,
        exit,
    })
}

pub fn crossing(
    horizon: usize,
    x_grid: Vec<f64>,
    reps: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<Outcome> {
    let mc = McConfig {
        reps,
        base_seed: seed,
        workers,
    };
    let rows = boundary_crossing_mc(horizon, &x_grid, &mc)?;
    let mut table = Table::new(&["x", "estimate", "se", "bound_ratio"]);
    for r in &rows {
        table.push(vec![r.x, r.estimate, r.se, r.bound_ratio]);
    }
    Ok(Outcome {
        spec: RunSpec::Crossing {
            horizon,
            x_grid,
            reps,
            seed,
            workers,
        },
        table,
        plot: None,
        exit: 0,
    })
}
