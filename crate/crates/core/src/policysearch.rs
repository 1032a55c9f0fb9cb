//! Direct policy search over static linear gains: REINFORCE with a running
//! baseline and an Adam-style step, two-point random search with optional
//! state whitening, and the score-function gradient-norm diagnostic.
//!
//! Gains are searched as `theta = vec(K)` in row-major order, with the policy
//! `u = -K x`. Rewards are negated episode costs.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::lds::{standard_normal_vector, trajectory_cost, EpisodeBudget, LqrInstance, Policy, Trajectory};
use crate::linalg::{self, Matrix, Vector};
use crate::riccati;

pub fn gain_to_theta(k: &Matrix) -> Vector {
    Vector::from_iterator(k.len(), k.transpose().iter().copied())
}

pub fn theta_to_gain(theta: &Vector, input_dim: usize, state_dim: usize) -> Result<Matrix> {
    if theta.len() != input_dim * state_dim {
        return Err(Error::Dimension(format!(
            "theta has length {}, expected {input_dim}x{state_dim}",
            theta.len()
        )));
    }
    Ok(Matrix::from_row_slice(input_dim, state_dim, theta.as_slice()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchParams {
    pub theta: Vector,
    pub sigma: f64,
    pub step: f64,
    pub directions: usize,
}

impl SearchParams {
    pub fn new(theta: Vector, sigma: f64, step: f64, directions: usize) -> Result<Self> {
        if !(sigma > 0.0) || !(step > 0.0) || directions == 0 {
            return Err(Error::Contract("sigma and step must be positive, directions at least 1".into()));
        }
        Ok(Self {
            theta,
            sigma,
            step,
            directions,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps_reg: f64,
}

impl Default for MomentParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps_reg: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentState {
    pub m1: Vector,
    pub m2: Vector,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_reg: f64,
    pub t: u32,
}

impl MomentState {
    pub fn new(n: usize, params: MomentParams) -> Result<Self> {
        let in_range = |b: f64| (0.0..1.0).contains(&b);
        if !in_range(params.beta1) || !in_range(params.beta2) || !(params.eps_reg > 0.0) {
            return Err(Error::Contract("betas must lie in [0, 1) and eps_reg be positive".into()));
        }
        Ok(Self {
            m1: Vector::zeros(n),
            m2: Vector::zeros(n),
            beta1: params.beta1,
            beta2: params.beta2,
            eps_reg: params.eps_reg,
            t: 0,
        })
    }
}

/// Adam moment update; returns the bias-corrected direction `m̂1 / (√m̂2 + eps)`.
pub fn adaptive_step(state: &mut MomentState, grad: &Vector) -> Result<Vector> {
    linalg::check_len("gradient", grad, state.m1.len())?;
    state.t += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    state.m1 = &state.m1 * b1 + grad * (1.0 - b1);
    state.m2 = &state.m2 * b2 + grad.component_mul(grad) * (1.0 - b2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    Ok(state
        .m1
        .zip_map(&state.m2, |m1, m2| (m1 / c1) / ((m2 / c2).sqrt() + state.eps_reg)))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BaselineState {
    pub history: Vec<f64>,
    pub current: f64,
}

impl BaselineState {
    pub fn push(&mut self, mean_return: f64) {
        self.history.push(mean_return);
        self.current = self.history.iter().sum::<f64>() / self.history.len() as f64;
    }
}

/// Streaming per-coordinate mean and population variance.
#[derive(Clone, Debug, PartialEq)]
pub struct WhitenState {
    pub mean: Vector,
    pub cov_diag: Vector,
    pub count: u64,
    pub eps_reg: f64,
}

impl WhitenState {
    pub fn new(dim: usize, eps_reg: f64) -> Self {
        Self {
            mean: Vector::zeros(dim),
            cov_diag: Vector::zeros(dim),
            count: 0,
            eps_reg,
        }
    }

    pub fn update(&mut self, x: &Vector) {
        self.count += 1;
        let n = self.count as f64;
        let delta = x - &self.mean;
        self.mean += &delta / n;
        let delta2 = x - &self.mean;
        // running population variance: ((n-1) var + δ δ₂) / n
        self.cov_diag = (&self.cov_diag * (n - 1.0) + delta.component_mul(&delta2)) / n;
        self.cov_diag.apply(|v| *v = v.max(0.0));
    }

    pub fn scales(&self) -> Vector {
        self.cov_diag.map(|v| 1.0 / (v + self.eps_reg).sqrt())
    }

    pub fn standardize(&self, x: &Vector) -> Vector {
        (x - &self.mean).component_mul(&self.scales())
    }
}

/// Updates the statistics with `x`, then returns `(x - mean) / √(var + eps)`.
pub fn whiten(state: &mut WhitenState, x: &Vector) -> Vector {
    state.update(x);
    state.standardize(x)
}

/// `∇_ϑ log N(z; ϑ, σ²I) = (z - ϑ) / σ²`.
pub fn score_gradient(z: &Vector, theta: &Vector, sigma: f64) -> Vector {
    (z - theta) / (sigma * sigma)
}

/// `(R - b) Σ_t -(u_t + K x_t) x_tᵀ / σ_u²` for a Gaussian-linear policy.
pub fn reinforce_trajectory_gradient(
    traj: &Trajectory,
    gain: &Matrix,
    exploration_std: f64,
    return_value: f64,
    baseline: f64,
) -> Matrix {
    let mut score = Matrix::zeros(gain.nrows(), gain.ncols());
    for (x, u) in traj.states.iter().zip(&traj.inputs) {
        let residual = u + gain * x;
        score.ger(-1.0, &residual, x, 1.0);
    }
    score * ((return_value - baseline) / (exploration_std * exploration_std))
}

/// `(R(ϑ+σε) - R(ϑ-σε)) / (2σ) · ε`.
pub fn rs_two_point<F: FnMut(&Vector) -> f64>(evaluate: &mut F, theta: &Vector, sigma: f64, epsilon: &Vector) -> Vector {
    let plus = evaluate(&(theta + epsilon * sigma));
    let minus = evaluate(&(theta - epsilon * sigma));
    epsilon * ((plus - minus) / (2.0 * sigma))
}

/// Mean of `m` two-point estimates along independent Gaussian directions.
pub fn rs_multi<F: FnMut(&Vector) -> f64, R: Rng + ?Sized>(
    evaluate: &mut F,
    theta: &Vector,
    sigma: f64,
    m: usize,
    rng: &mut R,
) -> Vector {
    assert!(m >= 1, "rs_multi needs at least one direction");
    let mut acc = Vector::zeros(theta.len());
    for _ in 0..m {
        let eps = standard_normal_vector(theta.len(), rng);
        acc += rs_two_point(evaluate, theta, sigma, &eps);
    }
    acc / m as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub samples: usize,
    /// Average cost of the deterministic gain, `inf` when not stabilizing.
    pub cost: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Debug)]
pub struct SearchTrace {
    pub points: Vec<TracePoint>,
    pub gain: Matrix,
    /// Set once an update produced non-finite parameters; later updates are skipped.
    pub failure: Option<String>,
}

impl SearchTrace {
    pub fn final_gain(&self) -> Option<&Matrix> {
        if self.failure.is_some() {
            None
        } else {
            Some(&self.gain)
        }
    }
}

fn evaluate_gain(instance: &LqrInstance, gain: &Matrix) -> f64 {
    riccati::closed_loop_average_cost(&instance.system, &instance.cost, gain).unwrap_or(f64::INFINITY)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReinforceConfig {
    pub exploration_std: f64,
    pub step: f64,
    pub batch_size: usize,
    pub baseline: bool,
    /// Adam step when set, plain gradient step otherwise.
    pub moments: Option<MomentParams>,
}

impl Default for ReinforceConfig {
    fn default() -> Self {
        Self {
            exploration_std: 0.3,
            step: 0.01,
            batch_size: 1,
            baseline: true,
            moments: Some(MomentParams::default()),
        }
    }
}

/// REINFORCE ascent on the negated episode cost. Each iteration charges
/// `batch_size · L` samples.
pub fn reinforce_train<R: Rng + ?Sized>(
    budget: &mut EpisodeBudget,
    instance: &LqrInstance,
    config: &ReinforceConfig,
    initial_gain: &Matrix,
    n_iters: usize,
    rng: &mut R,
) -> Result<SearchTrace> {
    let (d, p) = (instance.state_dim(), instance.input_dim());
    linalg::check_shape("K0", initial_gain, p, d)?;
    if config.batch_size == 0 || !(config.step >= 0.0) || !(config.exploration_std > 0.0) {
        return Err(Error::Contract(
            "batch_size must be positive, step nonnegative and exploration_std positive".into(),
        ));
    }
    let mut moments = config.moments.map(|mp| MomentState::new(p * d, mp)).transpose()?;
    let mut baseline = BaselineState::default();
    let mut gain = initial_gain.clone();
    let mut trace = SearchTrace {
        points: Vec::with_capacity(n_iters),
        gain: gain.clone(),
        failure: None,
    };
    for _ in 0..n_iters {
        let policy = Policy::gaussian(gain.clone(), config.exploration_std)?;
        let b = if config.baseline { baseline.current } else { 0.0 };
        let mut grad = Matrix::zeros(p, d);
        let mut mean_return = 0.0;
        for _ in 0..config.batch_size {
            let traj = budget.query(instance, &policy, instance.episode_len, rng)?;
            let ret = -trajectory_cost(&traj, &instance.cost)?;
            grad += reinforce_trajectory_gradient(&traj, &gain, config.exploration_std, ret, b);
            mean_return += ret;
        }
        grad /= config.batch_size as f64;
        mean_return /= config.batch_size as f64;
        baseline.push(mean_return);

        let g = gain_to_theta(&grad);
        if trace.failure.is_none() {
            let direction = match moments.as_mut() {
                Some(state) => adaptive_step(state, &g)?,
                None => g.clone(),
            };
            let next = &gain + theta_to_gain(&(direction * config.step), p, d)?;
            if next.iter().all(|v| v.is_finite()) {
                gain = next;
            } else {
                trace.failure = Some("REINFORCE iterate became non-finite".into());
            }
        }
        trace.points.push(TracePoint {
            samples: budget.samples_used(),
            cost: if trace.failure.is_some() { f64::INFINITY } else { evaluate_gain(instance, &gain) },
            grad_norm: g.norm(),
        });
    }
    trace.gain = gain;
    Ok(trace)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomSearchConfig {
    pub sigma: f64,
    pub step: f64,
    pub directions: usize,
    pub whitening: bool,
    /// Divide the averaged estimate by the standard deviation of the 2m rewards.
    pub reward_scaling: bool,
}

impl Default for RandomSearchConfig {
    fn default() -> Self {
        Self {
            sigma: 0.1,
            step: 0.01,
            directions: 2,
            whitening: false,
            reward_scaling: true,
        }
    }
}

fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Two-point random search on the negated episode cost of deterministic gains.
/// Each iteration charges `2 · directions · L` samples.
///
/// With whitening, the searched gain acts on standardized states. The scales are
/// frozen within an iteration, so every rollout uses the static gain
/// `K · diag(1/√(var + eps))`; the mean shift is not applied, which keeps the
/// controller linear.
pub fn random_search_train<R: Rng + ?Sized>(
    budget: &mut EpisodeBudget,
    instance: &LqrInstance,
    config: &RandomSearchConfig,
    initial_gain: &Matrix,
    n_iters: usize,
    rng: &mut R,
) -> Result<SearchTrace> {
    let (d, p) = (instance.state_dim(), instance.input_dim());
    linalg::check_shape("K0", initial_gain, p, d)?;
    let params = SearchParams::new(gain_to_theta(initial_gain), config.sigma, config.step, config.directions)?;
    let mut theta = params.theta.clone();
    let mut stats = WhitenState::new(d, 1e-8);
    let effective = |theta: &Vector, stats: &WhitenState| -> Result<Matrix> {
        let k = theta_to_gain(theta, p, d)?;
        Ok(if config.whitening && stats.count > 0 {
            k * Matrix::from_diagonal(&stats.scales())
        } else {
            k
        })
    };
    let mut trace = SearchTrace {
        points: Vec::with_capacity(n_iters),
        gain: effective(&theta, &stats)?,
        failure: None,
    };
    for _ in 0..n_iters {
        let frozen = stats.clone();
        let directions: Vec<Vector> = (0..params.directions)
            .map(|_| standard_normal_vector(theta.len(), rng))
            .collect();
        let mut rewards = Vec::with_capacity(2 * params.directions);
        let mut observed = Vec::new();
        let mut error = None;
        let mut evaluate = |candidate: &Vector| -> f64 {
            let run = effective(candidate, &frozen).and_then(|k| {
                let traj = budget.query(instance, &Policy::LinearGain(k), instance.episode_len, rng)?;
                let cost = trajectory_cost(&traj, &instance.cost)?;
                if config.whitening {
                    observed.extend(traj.states);
                }
                Ok(-cost)
            });
            match run {
                Ok(r) => {
                    rewards.push(r);
                    r
                }
                Err(e) => {
                    error.get_or_insert(e);
                    f64::NAN
                }
            }
        };
        let sum = directions
            .iter()
            .fold(Vector::zeros(theta.len()), |acc, eps| acc + rs_two_point(&mut evaluate, &theta, params.sigma, eps));
        if let Some(e) = error {
            return Err(e);
        }
        let mut g = sum / params.directions as f64;
        if config.reward_scaling {
            let sd = std_dev(&rewards);
            if sd > 0.0 {
                g /= sd;
            }
        }
        for x in &observed {
            stats.update(x);
        }
        let finite = g.iter().all(|v| v.is_finite());
        if trace.failure.is_none() && finite {
            theta += &g * params.step;
        }
        let gain = effective(&theta, &stats)?;
        if trace.failure.is_none() && !gain.iter().all(|v| v.is_finite()) {
            trace.failure = Some("random-search iterate became non-finite".into());
        }
        trace.points.push(TracePoint {
            samples: budget.samples_used(),
            cost: if trace.failure.is_some() { f64::INFINITY } else { evaluate_gain(instance, &gain) },
            grad_norm: if finite { g.norm() } else { f64::NAN },
        });
        trace.gain = gain;
    }
    Ok(trace)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub mean: f64,
    pub stderr: f64,
}

impl MonteCarloSummary {
    fn from_moments(sum: f64, sum_sq: f64, n: usize) -> Self {
        let nf = n as f64;
        let mean = sum / nf;
        let var = if n > 1 {
            ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
        } else {
            0.0
        };
        Self {
            mean,
            stderr: (var / nf).sqrt(),
        }
    }

    /// `|mean - target| <= k · stderr`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreGradientEstimate {
    pub mean: Vector,
    pub stderr: Vector,
    pub reward: MonteCarloSummary,
}

/// Monte-Carlo mean of `(R(z) - b) ∇_ϑ log p(z; ϑ)` with `z ~ N(ϑ, σ²I)`.
pub fn score_function_estimate<F: Fn(&Vector) -> f64, R: Rng + ?Sized>(
    reward: F,
    theta: &Vector,
    sigma: f64,
    baseline: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<ScoreGradientEstimate> {
    if n_samples == 0 || !(sigma > 0.0) {
        return Err(Error::Contract("n_samples must be positive and sigma positive".into()));
    }
    let dim = theta.len();
    let (mut sum, mut sum_sq) = (Vector::zeros(dim), Vector::zeros(dim));
    let (mut r_sum, mut r_sq) = (0.0, 0.0);
    for _ in 0..n_samples {
        let z = theta + standard_normal_vector(dim, rng) * sigma;
        let r = reward(&z);
        let g = score_gradient(&z, theta, sigma) * (r - baseline);
        sum_sq += g.component_mul(&g);
        sum += g;
        r_sum += r;
        r_sq += r * r;
    }
    let per_coord: Vec<MonteCarloSummary> = (0..dim)
        .map(|i| MonteCarloSummary::from_moments(sum[i], sum_sq[i], n_samples))
        .collect();
    Ok(ScoreGradientEstimate {
        mean: Vector::from_iterator(dim, per_coord.iter().map(|s| s.mean)),
        stderr: Vector::from_iterator(dim, per_coord.iter().map(|s| s.stderr)),
        reward: MonteCarloSummary::from_moments(r_sum, r_sq, n_samples),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientNormDiag {
    pub dim: usize,
    pub grad_norm: MonteCarloSummary,
    pub reward: MonteCarloSummary,
}

/// Score-function gradient norms for `R(u) = ‖u‖²` under `N(ϑ₀, σ²I)` sampling.
pub fn gradient_variance_diag<R: Rng + ?Sized>(
    sigma: f64,
    theta0: &Vector,
    n_samples: usize,
    rng: &mut R,
) -> Result<GradientNormDiag> {
    if n_samples == 0 || !(sigma > 0.0) {
        return Err(Error::Contract("n_samples must be positive and sigma positive".into()));
    }
    let dim = theta0.len();
    let (mut g_sum, mut g_sq, mut r_sum, mut r_sq) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..n_samples {
        let z = theta0 + standard_normal_vector(dim, rng) * sigma;
        let r = z.norm_squared();
        let norm = r * score_gradient(&z, theta0, sigma).norm();
        g_sum += norm;
        g_sq += norm * norm;
        r_sum += r;
        r_sq += r * r;
    }
    Ok(GradientNormDiag {
        dim,
        grad_norm: MonteCarloSummary::from_moments(g_sum, g_sq, n_samples),
        reward: MonteCarloSummary::from_moments(r_sum, r_sq, n_samples),
    })
}

/// `E‖ω‖³` for `ω ~ N(0, I_d)`: `2^{3/2} Γ((d+3)/2) / Γ(d/2)`.
pub fn chi_third_moment(d: usize) -> f64 {
    let d = d as f64;
    2f64.powf(1.5) * (ln_gamma((d + 3.0) / 2.0) - ln_gamma(d / 2.0)).exp()
}
