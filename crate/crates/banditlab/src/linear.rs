//! Bandits with structured mean rewards.
//!
//! The covariates live in a finite decision set `{z_1, ..., z_K} in R^d` and
//! responses follow `y_t = <x_t, beta_star> + sigma * xi_t`, where round t
//! selects `x_t = z_{A_t}` by running plain `UCB1` on the induced arm means
//! `<z_a, beta_star>`. After the run, `beta_star` is estimated by Ridge
//! regression, and the normalized estimator admits a CLT against the realized
//! sample covariance `S_T = X^T X / T`:
//!
//! ```text
//! sqrt(T/sigma^2) * <w, S_T^(-1/2) (S_T + lambda I)(beta_hat_lambda
//!                     - (S_T + lambda I)^(-1) S_T beta_star)>  ~  N(0,1)
//! ```
//!
//! for any unit vector `w`. By the definition of the Ridge estimator the
//! inner expression collapses to `X^T (Y - X beta_star) / T` independently of
//! `lambda`; [`clt_statistic`] evaluates the literal formula (so the
//! cancellation can be verified numerically) and [`clt_statistic_from_noise`]
//! evaluates the collapsed form (which is exactly zero for noiseless
//! responses).

use nalgebra::{DMatrix, DVector};

use crate::bandit::{simulate_ucb1_with_noise, BanditInstance, Trajectory, UcbConfig};
use crate::oracle::{self, ErrorBudget};
use crate::{rng, Error, Result};

/// Relative eigenvalue floor below which a covariance is treated as singular.
const EIGEN_FLOOR: f64 = 1e-12;

/// A finite decision set with a latent coefficient vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    z: DMatrix<f64>,
    beta_star: DVector<f64>,
    sigma: f64,
}

impl LinearModel {
    /// Builds a model from the K x d decision matrix (rows are the arms'
    /// covariates), the coefficient vector, and the noise scale.
    ///
    /// The rows must span `R^d`, checked through the singular values of `z`;
    /// `sigma = 0` is admitted for noiseless diagnostics.
    pub fn new(z: DMatrix<f64>, beta_star: DVector<f64>, sigma: f64) -> Result<Self> {
        if z.nrows() == 0 || z.ncols() == 0 {
            return Err(Error::InvalidInstance(
                "decision set must be nonempty".into(),
            ));
        }
        if z.ncols() != beta_star.len() {
            return Err(Error::DimensionMismatch(format!(
                "decision set has dimension {}, coefficients have {}",
                z.ncols(),
                beta_star.len()
            )));
        }
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidInstance(format!(
                "noise scale must be finite and nonnegative, got {sigma}"
            )));
        }
        let svals = z.clone().singular_values();
        let (max, min) = (svals.max(), svals.min());
        if z.nrows() < z.ncols() || min <= 1e-10 * max {
            return Err(Error::InvalidInstance(format!(
                "decision set does not span R^{} (singular values {min:.3e}..{max:.3e})",
                z.ncols()
            )));
        }
        Ok(Self {
            z,
            beta_star,
            sigma,
        })
    }

    pub fn k(&self) -> usize {
        self.z.nrows()
    }

    pub fn d(&self) -> usize {
        self.z.ncols()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn decision_set(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn beta_star(&self) -> &DVector<f64> {
        &self.beta_star
    }

    /// Induced arm means `<z_a, beta_star>`.
    pub fn arm_means(&self) -> Vec<f64> {
        (0..self.k())
            .map(|a| row_dot(&self.z, a, &self.beta_star))
            .collect()
    }

    /// Induced sub-optimality gaps.
    pub fn gaps(&self) -> Vec<f64> {
        let means = self.arm_means();
        let star = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        means.iter().map(|m| star - m).collect()
    }

    /// The plain bandit instance this model induces.
    pub fn to_instance(&self) -> Result<BanditInstance> {
        BanditInstance::new(self.arm_means(), self.sigma)
    }
}

/// Row-vector dot product with a fixed left-to-right accumulation order.
///
/// Both the induced arm means and the residual `Y - X beta_star` go through
/// this one function, so a noiseless run reproduces its responses bit for bit.
fn row_dot(m: &DMatrix<f64>, row: usize, v: &DVector<f64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        acc += m[(row, j)] * v[j];
    }
    acc
}

/// Population quantities induced by the fixed point under the linear gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationQuantities {
    /// `S_star = T^-1 sum_a n_star_a z_a z_a^T`.
    pub s_star: DMatrix<f64>,
    /// `z_K = T^-1 sum_a n_star_a ||z_a||^2`; equals `trace(S_star)`.
    pub z_k: f64,
    /// Smallest eigenvalue of `S_star`.
    pub sigma_star: f64,
    /// Error budget under the linear gaps (`None` when gamma < e).
    pub budget: Option<ErrorBudget>,
}

/// Assembles the population covariance, its trace weight, and its smallest
/// eigenvalue from the fixed-point pull targets. Requires `sigma > 0`.
pub fn population_quantities(
    model: &LinearModel,
    horizon: f64,
    gamma: f64,
) -> Result<PopulationQuantities> {
    let instance = model.to_instance()?;
    let targets = oracle::arm_targets_at(&instance, horizon, gamma)?;
    let d = model.d();
    let mut s_star = DMatrix::zeros(d, d);
    let mut z_k = 0.0;
    for a in 0..model.k() {
        let za = model.z.row(a).transpose();
        s_star += (targets[a] / horizon) * (&za * za.transpose());
        z_k += targets[a] / horizon * za.norm_squared();
    }
    let eigen = s_star.clone().symmetric_eigen();
    let sigma_star = eigen.eigenvalues.min();
    let budget = oracle::error_budget(&instance, horizon, gamma).ok();
    Ok(PopulationQuantities {
        s_star,
        z_k,
        sigma_star,
        budget,
    })
}

/// Design-side record of one linear run.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRunArtifacts {
    /// Realized design: row t is the covariate of the arm pulled at round t.
    pub x: DMatrix<f64>,
    /// Responses.
    pub y: DVector<f64>,
    /// Sample covariance `X^T X / T`.
    pub s_t: DMatrix<f64>,
    /// Fixed-point population quantities; `None` when `sigma = 0`.
    pub population: Option<PopulationQuantities>,
}

/// Runs `UCB1` on the induced arm means and materializes the design record.
pub fn simulate_linear(
    model: &LinearModel,
    config: &UcbConfig,
) -> Result<(Trajectory, LinearRunArtifacts)> {
    let mut stream = rng::stream(config.seed, 0);
    simulate_linear_with_noise(model, config, move || {
        use rand::Rng;
        stream.sample(rand_distr::StandardNormal)
    })
}

/// [`simulate_linear`] with an injected noise stream (one call per round).
pub fn simulate_linear_with_noise<F>(
    model: &LinearModel,
    config: &UcbConfig,
    next_noise: F,
) -> Result<(Trajectory, LinearRunArtifacts)>
where
    F: FnMut() -> f64,
{
    let instance = model.to_instance()?;
    let traj = simulate_ucb1_with_noise(&instance, config, next_noise)?;
    let t = traj.horizon();
    let d = model.d();

    let mut x = DMatrix::zeros(t, d);
    for (row, &arm) in traj.actions().iter().enumerate() {
        x.row_mut(row).copy_from(&model.z.row(arm));
    }
    let y = DVector::from_column_slice(traj.rewards());
    let s_t = x.transpose() * &x / t as f64;
    let population = if model.sigma > 0.0 {
        Some(population_quantities(model, t as f64, config.gamma)?)
    } else {
        None
    };
    Ok((
        traj,
        LinearRunArtifacts {
            x,
            y,
            s_t,
            population,
        },
    ))
}

/// Ridge estimator `beta_hat = (S_T + lambda I)^(-1) X^T Y / T`, computed by
/// a symmetric positive-definite solve.
///
/// `lambda = 0` requires `S_T` to be numerically invertible and reports the
/// offending smallest eigenvalue otherwise.
pub fn ridge(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    if x.nrows() != y.len() || x.nrows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "design is {}x{}, response has length {}",
            x.nrows(),
            x.ncols(),
            y.len()
        )));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    let t = x.nrows() as f64;
    let s_t = x.transpose() * x / t;
    check_floor(&s_t, lambda)?;
    let m = &s_t + DMatrix::identity(x.ncols(), x.ncols()) * lambda;
    let rhs = x.transpose() * y / t;
    let chol = m.cholesky().ok_or_else(|| singular_error(&s_t))?;
    Ok(chol.solve(&rhs))
}

fn check_floor(s: &DMatrix<f64>, lambda: f64) -> Result<()> {
    if lambda > 0.0 {
        return Ok(());
    }
    let eigen = s.clone().symmetric_eigen();
    let (max, min) = (eigen.eigenvalues.max(), eigen.eigenvalues.min());
    if min <= EIGEN_FLOOR * max {
        return Err(Error::SingularCovariance {
            lambda_min: min,
            lambda_max: max,
        });
    }
    Ok(())
}

fn singular_error(s: &DMatrix<f64>) -> Error {
    let eigen = s.clone().symmetric_eigen();
    Error::SingularCovariance {
        lambda_min: eigen.eigenvalues.min(),
        lambda_max: eigen.eigenvalues.max(),
    }
}

/// `S^(-1/2)` of a symmetric positive-definite matrix via its
/// eigendecomposition, rejecting matrices whose smallest eigenvalue sits
/// below the relative floor.
fn inv_sqrt_spd(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eigen = s.clone().symmetric_eigen();
    let (max, min) = (eigen.eigenvalues.max(), eigen.eigenvalues.min());
    if min <= EIGEN_FLOOR * max {
        return Err(Error::SingularCovariance {
            lambda_min: min,
            lambda_max: max,
        });
    }
    let scaled = DMatrix::from_diagonal(&eigen.eigenvalues.map(|l| 1.0 / l.sqrt()));
    Ok(&eigen.eigenvectors * scaled * eigen.eigenvectors.transpose())
}

fn check_unit(w: &DVector<f64>) -> Result<()> {
    if (w.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::Domain(format!(
            "w must be a unit vector, |w| = {}",
            w.norm()
        )));
    }
    Ok(())
}

/// The normalized Ridge CLT statistic, evaluated literally:
/// `sqrt(T/sigma^2) * <w, S_T^(-1/2) ((S_T + lambda I) beta_hat - S_T beta_star)>`.
///
/// The value is independent of `(beta_hat, lambda)` as long as `beta_hat` is
/// the Ridge estimate at `lambda` — the lambda terms cancel algebraically —
/// so evaluating at several lambdas is a numerical check of the pipeline.
pub fn clt_statistic(
    artifacts: &LinearRunArtifacts,
    beta_hat: &DVector<f64>,
    beta_star: &DVector<f64>,
    lambda: f64,
    w: &DVector<f64>,
    sigma: f64,
) -> Result<f64> {
    check_unit(w)?;
    if !(sigma > 0.0) {
        return Err(Error::Domain("statistic requires sigma > 0".into()));
    }
    let d = artifacts.s_t.nrows();
    let inv_sqrt = inv_sqrt_spd(&artifacts.s_t)?;
    let m = &artifacts.s_t + DMatrix::identity(d, d) * lambda;
    let u = m * beta_hat - &artifacts.s_t * beta_star;
    let t = artifacts.x.nrows() as f64;
    Ok((t / (sigma * sigma)).sqrt() * (w.transpose() * inv_sqrt * u)[(0, 0)])
}

/// The same statistic through its collapsed form
/// `sqrt(T/sigma^2) * <w, S_T^(-1/2) X^T (Y - X beta_star) / T>`,
/// which touches only the realized noise: it is exactly zero when the
/// responses are noiseless, and agrees with [`clt_statistic`] up to solver
/// rounding for every lambda.
pub fn clt_statistic_from_noise(
    artifacts: &LinearRunArtifacts,
    beta_star: &DVector<f64>,
    w: &DVector<f64>,
    sigma: f64,
) -> Result<f64> {
    check_unit(w)?;
    if !(sigma > 0.0) {
        return Err(Error::Domain("statistic requires sigma > 0".into()));
    }
    let inv_sqrt = inv_sqrt_spd(&artifacts.s_t)?;
    let t = artifacts.x.nrows();
    let mut residual = DVector::zeros(t);
    for row in 0..t {
        residual[row] = artifacts.y[row] - row_dot(&artifacts.x, row, beta_star);
    }
    let u = artifacts.x.transpose() * residual / t as f64;
    Ok((t as f64 / (sigma * sigma)).sqrt() * (w.transpose() * inv_sqrt * u)[(0, 0)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::simulate_ucb1;

    fn preset_model(sigma: f64) -> LinearModel {
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
        LinearModel::new(z, beta, sigma).unwrap()
    }

    #[test]
    fn identity_decision_set_reduces_to_plain_bandit() {
        let z = DMatrix::identity(3, 3);
        let beta = DVector::from_column_slice(&[0.5, 0.2, -0.1]);
        let model = LinearModel::new(z, beta, 0.3).unwrap();
        let config = UcbConfig::new(150, 2.5, 314);
        let (linear_traj, _) = simulate_linear(&model, &config).unwrap();
        let plain = BanditInstance::new(vec![0.5, 0.2, -0.1], 0.3).unwrap();
        let plain_traj = simulate_ucb1(&plain, &config).unwrap();
        assert_eq!(linear_traj, plain_traj);
    }

    #[test]
    fn rank_deficient_decision_set_is_rejected() {
        let z = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 0.0, -1.0, 0.0]);
        let beta = DVector::from_column_slice(&[1.0, 1.0]);
        assert!(matches!(
            LinearModel::new(z, beta, 0.1),
            Err(Error::InvalidInstance(_))
        ));
    }

    #[test]
    fn design_has_full_rank_after_initialization() {
        let model = preset_model(0.0);
        let config = UcbConfig::new(40, 2.0, 9);
        let (_, artifacts) = simulate_linear(&model, &config).unwrap();
        assert!(artifacts.population.is_none());
        let eigen = artifacts.s_t.symmetric_eigen();
        assert!(eigen.eigenvalues.min() > 1e-6);
    }

    #[test]
    fn trace_identity_for_population_covariance() {
        let model = preset_model(0.1);
        let pop = population_quantities(&model, 500.0, 3.0).unwrap();
        assert!((pop.z_k - pop.s_star.trace()).abs() < 1e-10);
        assert!(pop.sigma_star <= pop.z_k / 3.0 + 1e-12);
        assert!(pop.sigma_star > 0.0);
        // Budget present for gamma >= e.
        assert!(pop.budget.is_some());
    }

    #[test]
    fn population_covariance_for_orthonormal_all_optimal_set() {
        let z = DMatrix::identity(3, 3);
        let beta = DVector::zeros(3);
        let model = LinearModel::new(z, beta, 0.2).unwrap();
        let pop = population_quantities(&model, 900.0, 3.0).unwrap();
        let expect = DMatrix::identity(3, 3) / 3.0;
        assert!((&pop.s_star - expect).norm() < 1e-12);
    }

    #[test]
    fn ridge_interpolates_noiseless_data() {
        let model = preset_model(0.0);
        let config = UcbConfig::new(60, 2.0, 3);
        let (_, artifacts) = simulate_linear(&model, &config).unwrap();
        let beta = ridge(&artifacts.x, &artifacts.y, 0.0).unwrap();
        assert!((beta - model.beta_star()).norm() < 1e-9);
    }

    #[test]
    fn ridge_shrinks_to_zero_for_huge_lambda() {
        let model = preset_model(0.1);
        let config = UcbConfig::new(80, 2.0, 4);
        let (_, artifacts) = simulate_linear(&model, &config).unwrap();
        let free = ridge(&artifacts.x, &artifacts.y, 0.0).unwrap();
        let crushed = ridge(&artifacts.x, &artifacts.y, 1e9).unwrap();
        assert!(crushed.norm() <= 1e-6 * free.norm());
    }

    #[test]
    fn ridge_matches_qr_route() {
        let model = preset_model(0.1);
        let config = UcbConfig::new(50, 2.0, 6);
        let (_, artifacts) = simulate_linear(&model, &config).unwrap();
        for &lambda in &[0.0, 0.05, 1.0] {
            let fast = ridge(&artifacts.x, &artifacts.y, lambda).unwrap();
            // QR of the augmented system [X; sqrt(T lambda) I] b ~ [Y; 0].
            let (t, d) = (artifacts.x.nrows(), artifacts.x.ncols());
            let mut aug = DMatrix::zeros(t + d, d);
            aug.view_mut((0, 0), (t, d)).copy_from(&artifacts.x);
            for j in 0..d {
                aug[(t + j, j)] = (t as f64 * lambda).sqrt();
            }
            let mut rhs = DVector::zeros(t + d);
            rhs.rows_mut(0, t).copy_from(&artifacts.y);
            let qr = aug.qr();
            let qty = qr.q().transpose() * rhs;
            let beta_qr = qr
                .r()
                .solve_upper_triangular(&qty)
                .expect("R is invertible for a full-rank design");
            assert!(
                (&fast - &beta_qr).norm() < 1e-9,
                "lambda={lambda}: |diff| = {}",
                (&fast - &beta_qr).norm()
            );
        }
    }

    #[test]
    fn singular_design_reports_lambda_min() {
        // Two identical covariates only: X^T X is rank one.
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        let y = DVector::from_column_slice(&[1.0, 1.0, 1.0, 1.0]);
        match ridge(&x, &y, 0.0) {
            Err(Error::SingularCovariance { lambda_min, .. }) => {
                assert!(lambda_min.abs() < 1e-10);
            }
            other => panic!("expected singularity error, got {other:?}"),
        }
        assert!(ridge(&x, &y, 0.5).is_ok());
    }

    #[test]
    fn statistic_is_lambda_invariant_and_matches_noise_route() {
        let model = preset_model(0.1);
        let config = UcbConfig::new(400, (2.0 * 400f64.ln()).sqrt(), 8);
        let (_, artifacts) = simulate_linear(&model, &config).unwrap();
        let w = DVector::from_column_slice(&[0.6, -0.64, 0.48]);
        let base = clt_statistic_from_noise(&artifacts, model.beta_star(), &w, 0.1).unwrap();
        for &lambda in &[0.0, 0.1, 1.0] {
            let beta_hat = ridge(&artifacts.x, &artifacts.y, lambda).unwrap();
            let stat =
                clt_statistic(&artifacts, &beta_hat, model.beta_star(), lambda, &w, 0.1).unwrap();
            assert!(
                (stat - base).abs() < 1e-9,
                "lambda={lambda}: {stat} vs {base}"
            );
        }
    }

    #[test]
    fn noiseless_responses_give_exactly_zero_statistic() {
        let model = preset_model(0.1);
        let config = UcbConfig::new(200, 3.0, 5);
        let (_, artifacts) = simulate_linear_with_noise(&model, &config, || 0.0).unwrap();
        for w in [
            DVector::from_column_slice(&[1.0, 0.0, 0.0]),
            DVector::from_column_slice(&[0.6, -0.64, 0.48]),
        ] {
            let stat = clt_statistic_from_noise(&artifacts, model.beta_star(), &w, 0.1).unwrap();
            assert_eq!(stat, 0.0);
            // The literal route agrees up to solver rounding.
            for &lambda in &[0.0, 0.5] {
                let beta_hat = ridge(&artifacts.x, &artifacts.y, lambda).unwrap();
                let literal =
                    clt_statistic(&artifacts, &beta_hat, model.beta_star(), lambda, &w, 0.1)
                        .unwrap();
                assert!(literal.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn statistic_rejects_non_unit_direction() {
        let model = preset_model(0.1);
        let config = UcbConfig::new(50, 2.0, 2);
        let (_, artifacts) = simulate_linear(&model, &config).unwrap();
        let w = DVector::from_column_slice(&[1.0, 1.0, 0.0]);
        assert!(clt_statistic_from_noise(&artifacts, model.beta_star(), &w, 0.1).is_err());
    }
}
