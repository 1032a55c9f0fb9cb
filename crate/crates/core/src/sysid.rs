//! Least-squares identification of `(A, B)`, the certainty-equivalent
//! (nominal) controller, and parametric-bootstrap error estimates.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lds::{seeded_rng, EpisodeBudget, LinearSystem, LqrInstance, Policy, Trajectory};
use crate::linalg::{self, Matrix};
use crate::riccati::{self, RiccatiSolution};

#[derive(Clone, Debug, PartialEq)]
pub struct ModelEstimate {
    pub a_hat: Matrix,
    pub b_hat: Matrix,
    /// Covariance of the one-step residuals, normalized by the residual
    /// degrees of freedom `n - (d + p)` (or `n` when that is not positive).
    pub residual_cov: Matrix,
    pub n_transitions: usize,
}

impl ModelEstimate {
    pub fn state_dim(&self) -> usize {
        self.a_hat.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b_hat.ncols()
    }

    /// The estimate as a simulatable system with the residual covariance as noise.
    pub fn as_system(&self) -> Result<LinearSystem> {
        LinearSystem::new(
            self.a_hat.clone(),
            self.b_hat.clone(),
            linalg::symmetrize(&self.residual_cov),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UncertaintyEstimate {
    pub eps_a: f64,
    pub eps_b: f64,
    pub confidence: f64,
    pub n_boot: usize,
}

/// Relative singular-value threshold below which regressors count as rank deficient.
const RANK_TOL: f64 = 1e-12;

/// Minimizes `Σ ‖x_{t+1} - A x_t - B u_t‖² + ridge (‖A‖_F² + ‖B‖_F²)` jointly over
/// every transition of every trajectory.
pub fn least_squares_identify(trajectories: &[Trajectory], ridge: f64) -> Result<ModelEstimate> {
    if !(ridge >= 0.0) {
        return Err(Error::Contract(format!("ridge must be nonnegative, got {ridge}")));
    }
    let first = trajectories
        .iter()
        .find(|t| t.horizon() > 0)
        .ok_or_else(|| Error::InsufficientExcitation("no transitions to fit".into()))?;
    let d = first.states[0].len();
    let p = first.inputs[0].len();
    let n: usize = trajectories.iter().map(Trajectory::horizon).sum();
    let cols = d + p;
    let extra = if ridge > 0.0 { cols } else { 0 };

    let mut z = Matrix::zeros(n + extra, cols);
    let mut y = Matrix::zeros(n + extra, d);
    let mut row = 0;
    for traj in trajectories {
        for (x, u, x_next) in traj.transitions() {
            if x.len() != d || u.len() != p || x_next.len() != d {
                return Err(Error::Dimension("trajectories disagree on dimensions".into()));
            }
            z.view_mut((row, 0), (1, d)).copy_from(&x.transpose());
            z.view_mut((row, d), (1, p)).copy_from(&u.transpose());
            y.view_mut((row, 0), (1, d)).copy_from(&x_next.transpose());
            row += 1;
        }
    }
    for i in 0..extra {
        z[(n + i, i)] = ridge.sqrt();
    }

    let svd = z.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if n + extra < cols || !(smax > 0.0) || smin <= RANK_TOL * smax {
        return Err(Error::InsufficientExcitation(format!(
            "regressor matrix has rank below {cols} ({n} transitions)"
        )));
    }
    let theta = svd
        .solve(&y, 0.0)
        .map_err(|e| Error::InsufficientExcitation(e.to_string()))?;
    // theta is (d+p) x d; rows 0..d hold Aᵀ, rows d.. hold Bᵀ
    let a_hat = theta.rows(0, d).transpose();
    let b_hat = theta.rows(d, p).transpose();

    let resid = y.rows(0, n) - z.rows(0, n) * &theta;
    let dof = if n > cols { n - cols } else { n };
    let residual_cov = linalg::symmetrize(&(resid.transpose() * &resid / dof as f64));

    Ok(ModelEstimate {
        a_hat,
        b_hat,
        residual_cov,
        n_transitions: n,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct NominalOutcome {
    pub estimate: ModelEstimate,
    pub solution: RiccatiSolution,
}

impl NominalOutcome {
    pub fn gain(&self) -> &Matrix {
        &self.solution.gain
    }
}

/// `n_episodes` oracle episodes under i.i.d. Gaussian inputs of standard deviation `excitation_std`.
pub fn collect_excitation<R: Rng + ?Sized>(
    budget: &mut EpisodeBudget,
    instance: &LqrInstance,
    n_episodes: usize,
    excitation_std: f64,
    rng: &mut R,
) -> Result<Vec<Trajectory>> {
    let probe = Policy::gaussian(
        Matrix::zeros(instance.input_dim(), instance.state_dim()),
        excitation_std,
    )?;
    (0..n_episodes)
        .map(|_| budget.query(instance, &probe, instance.episode_len, rng))
        .collect()
}

/// Collects `n_episodes` episodes of i.i.d. Gaussian excitation, fits the
/// model and solves the Riccati equation for the estimate with the true cost.
pub fn nominal_pipeline<R: Rng + ?Sized>(
    budget: &mut EpisodeBudget,
    instance: &LqrInstance,
    n_episodes: usize,
    excitation_std: f64,
    rng: &mut R,
) -> Result<NominalOutcome> {
    if n_episodes == 0 {
        return Err(Error::Contract("n_episodes must be at least 1".into()));
    }
    let data = collect_excitation(budget, instance, n_episodes, excitation_std, rng)?;
    let estimate = least_squares_identify(&data, 0.0)?;
    let model = LinearSystem::noiseless(estimate.a_hat.clone(), estimate.b_hat.clone())?;
    let solution = riccati::dare_solve(&model, &instance.cost)?;
    Ok(NominalOutcome { estimate, solution })
}

/// Parametric bootstrap: resimulate every trajectory from the fitted model with
/// the recorded inputs and fresh residual noise, refit, and report the
/// `confidence` quantile of the operator-norm deviations.
pub fn bootstrap_uncertainty<R: Rng + ?Sized>(
    estimate: &ModelEstimate,
    trajectories: &[Trajectory],
    n_boot: usize,
    confidence: f64,
    rng: &mut R,
) -> Result<UncertaintyEstimate> {
    if n_boot < 2 {
        return Err(Error::Contract("n_boot must be at least 2".into()));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Contract(format!("confidence must lie in (0, 1), got {confidence}")));
    }
    let model = estimate.as_system()?;
    // per-replicate streams drawn up front so results do not depend on scheduling
    let seeds: Vec<u64> = (0..n_boot).map(|_| rng.random()).collect();
    let deviations: Vec<(f64, f64)> = seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = seeded_rng(seed);
            let synthetic: Vec<Trajectory> = trajectories
                .iter()
                .map(|traj| resimulate(&model, traj, &mut rng))
                .collect::<Result<_>>()?;
            let refit = least_squares_identify(&synthetic, 0.0)?;
            Ok((
                linalg::op_norm(&(&refit.a_hat - &estimate.a_hat)),
                linalg::op_norm(&(&refit.b_hat - &estimate.b_hat)),
            ))
        })
        .collect::<Result<_>>()?;

    let (mut da, mut db): (Vec<f64>, Vec<f64>) = deviations.into_iter().unzip();
    Ok(UncertaintyEstimate {
        eps_a: upper_quantile(&mut da, confidence),
        eps_b: upper_quantile(&mut db, confidence),
        confidence,
        n_boot,
    })
}

fn resimulate<R: Rng + ?Sized>(model: &LinearSystem, traj: &Trajectory, rng: &mut R) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(traj.states.len());
    let mut x = traj.states[0].clone();
    for u in &traj.inputs {
        let next = model.step(&x, u, rng)?;
        states.push(std::mem::replace(&mut x, next));
    }
    states.push(x);
    Trajectory::new(states, traj.inputs.clone(), vec![0.0; traj.inputs.len()])
}

/// Order statistic `ceil(q n)` (1-based) of the sample.
pub(crate) fn upper_quantile(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    values[rank - 1]
}
