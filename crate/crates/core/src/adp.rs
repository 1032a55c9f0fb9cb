//! Approximate dynamic programming on quadratic Q-functions: evaluation,
//! greedy extraction, Q-learning, LSTDQ and least-squares policy iteration.
//!
//! A [`QuadraticQ`] represents `q(x, u) = [x; u]ᵀ W [x; u] + offset`. Learned
//! Q-functions are fitted to the crate's ½-scaled stage costs, so the learned
//! `W` for a problem is half of the unscaled form built by [`QuadraticQ::from_lqr`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lds::{standard_normal_vector, Controller, EpisodeBudget, LinearSystem, LqrInstance, Policy, QuadraticCost};
use crate::linalg::{self, Matrix, Vector};

#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticQ {
    w: Matrix,
    offset: f64,
    state_dim: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticValue {
    pub p: Matrix,
    pub offset: f64,
}

impl QuadraticValue {
    pub fn eval(&self, x: &Vector) -> f64 {
        x.dot(&(&self.p * x)) + self.offset
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub x: Vector,
    pub u: Vector,
    pub cost: f64,
    pub x_next: Vector,
}

impl QuadraticQ {
    pub fn new(w: Matrix, offset: f64, state_dim: usize) -> Result<Self> {
        if !w.is_square() || state_dim > w.nrows() {
            return Err(Error::Dimension(format!(
                "W is {}x{}, cannot split at state dimension {state_dim}",
                w.nrows(),
                w.ncols()
            )));
        }
        if !linalg::is_symmetric(&w, 1e-12) {
            return Err(Error::Contract("W must be symmetric".into()));
        }
        Ok(Self {
            w: linalg::symmetrize(&w),
            offset,
            state_dim,
        })
    }

    /// The exact discounted Q-function of the problem for value matrix `m`:
    /// `xᵀQx + uᵀRu + γ (Ax+Bu)ᵀ M (Ax+Bu) + offset`.
    pub fn from_lqr(system: &LinearSystem, cost: &QuadraticCost, m: &Matrix, gamma: f64, offset: f64) -> Result<Self> {
        let d = system.state_dim();
        let p = system.input_dim();
        let ab = {
            let mut ab = Matrix::zeros(d, d + p);
            ab.view_mut((0, 0), (d, d)).copy_from(system.a());
            ab.view_mut((0, d), (d, p)).copy_from(system.b());
            ab
        };
        let mut w = ab.transpose() * m * &ab * gamma;
        let mut stage = w.view_mut((0, 0), (d, d));
        stage += cost.q();
        let mut stage = w.view_mut((d, d), (p, p));
        stage += cost.r();
        Self::new(linalg::symmetrize(&w), offset, d)
    }

    /// Stage cost only, scaled by ½ to match the crate's cost convention.
    pub fn stage_only(cost: &QuadraticCost) -> Self {
        let d = cost.state_dim();
        let p = cost.input_dim();
        let mut w = Matrix::zeros(d + p, d + p);
        w.view_mut((0, 0), (d, d)).copy_from(&(cost.q() * 0.5));
        w.view_mut((d, d), (p, p)).copy_from(&(cost.r() * 0.5));
        Self {
            w,
            offset: 0.0,
            state_dim: d,
        }
    }

    pub fn w(&self) -> &Matrix {
        &self.w
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn input_dim(&self) -> usize {
        self.w.nrows() - self.state_dim
    }

    pub fn w_xx(&self) -> Matrix {
        self.w.view((0, 0), (self.state_dim, self.state_dim)).into_owned()
    }

    pub fn w_ux(&self) -> Matrix {
        let p = self.input_dim();
        self.w.view((self.state_dim, 0), (p, self.state_dim)).into_owned()
    }

    pub fn w_uu(&self) -> Matrix {
        let p = self.input_dim();
        self.w.view((self.state_dim, self.state_dim), (p, p)).into_owned()
    }

    /// Parameter vector `[svec(W); offset]` dual to [`quadratic_features`].
    pub fn params(&self) -> Vector {
        let mut v = svec(&self.w);
        let n = v.len();
        v = v.insert_row(n, self.offset);
        v
    }

    pub fn from_params(params: &Vector, state_dim: usize) -> Result<Self> {
        let nf = params.len();
        let n = feature_side(nf).ok_or_else(|| Error::Dimension(format!("{nf} is not a quadratic feature count")))?;
        let w = smat(&params.rows(0, nf - 1).into_owned(), n);
        Self::new(w, params[nf - 1], state_dim)
    }
}

fn joined(x: &Vector, u: &Vector) -> Vector {
    let mut z = Vector::zeros(x.len() + u.len());
    z.rows_mut(0, x.len()).copy_from(x);
    z.rows_mut(x.len(), u.len()).copy_from(u);
    z
}

/// Number of features for a joined vector of length `n`: monomials plus a constant.
pub fn feature_count(n: usize) -> usize {
    n * (n + 1) / 2 + 1
}

fn feature_side(nf: usize) -> Option<usize> {
    (0..=nf).find(|&n| feature_count(n) == nf)
}

/// Monomials `z_i z_j` for `i <= j` (row-major) followed by a constant 1.
pub fn quadratic_features(z: &Vector) -> Vector {
    let n = z.len();
    let mut f = Vector::zeros(feature_count(n));
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            f[k] = z[i] * z[j];
            k += 1;
        }
    }
    f[k] = 1.0;
    f
}

/// Symmetric matrix to monomial weights: diagonal entries once, off-diagonal doubled.
fn svec(w: &Matrix) -> Vector {
    let n = w.nrows();
    let mut v = Vector::zeros(n * (n + 1) / 2);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            v[k] = if i == j { w[(i, i)] } else { w[(i, j)] + w[(j, i)] };
            k += 1;
        }
    }
    v
}

fn smat(v: &Vector, n: usize) -> Matrix {
    let mut w = Matrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            if i == j {
                w[(i, i)] = v[k];
            } else {
                w[(i, j)] = 0.5 * v[k];
                w[(j, i)] = 0.5 * v[k];
            }
            k += 1;
        }
    }
    w
}

/// `[x; u]ᵀ W [x; u] + offset`.
pub fn q_eval(q: &QuadraticQ, x: &Vector, u: &Vector) -> Result<f64> {
    linalg::check_len("x", x, q.state_dim())?;
    linalg::check_len("u", u, q.input_dim())?;
    let z = joined(x, u);
    Ok(z.dot(&(&q.w * &z)) + q.offset)
}

/// `K = W_uu⁻¹ W_ux`, so that `u = -K x` minimizes `q(x, ·)`.
pub fn greedy_gain(q: &QuadraticQ) -> Result<Matrix> {
    let w_uu = q.w_uu();
    if w_uu.iter().any(|v| !v.is_finite()) || q.w_ux().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonExtractablePolicy("W has non-finite entries".into()));
    }
    let chol = linalg::symmetrize(&w_uu)
        .cholesky()
        .ok_or_else(|| Error::NonExtractablePolicy("W_uu is not positive definite".into()))?;
    Ok(chol.solve(&q.w_ux()))
}

/// Partial minimization over `u`: `P = W_xx - W_xu W_uu⁻¹ W_ux`.
pub fn value_from_q(q: &QuadraticQ) -> Result<QuadraticValue> {
    let k = greedy_gain(q)?;
    let p = q.w_xx() - q.w_ux().transpose() * k;
    Ok(QuadraticValue {
        p: linalg::symmetrize(&p),
        offset: q.offset,
    })
}

/// Normalized least-mean-squares step toward the Q-learning target
/// `c + γ min_u' q(x', u')`. At the sampled pair the updated function equals
/// `(1 - η) q(x, u) + η · target`.
pub fn q_learning_step(q: &QuadraticQ, transition: &Transition, eta: f64, gamma: f64) -> Result<QuadraticQ> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Contract(format!("eta must lie in [0, 1], got {eta}")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Contract(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    let value = value_from_q(q)?;
    let target = transition.cost + gamma * value.eval(&transition.x_next);
    let features = quadratic_features(&joined(&transition.x, &transition.u));
    let mut params = q.params();
    let err = params.dot(&features) - target;
    let norm2 = features.norm_squared();
    params -= features * (eta * err / norm2);
    let n = q.w.nrows();
    let w = linalg::symmetrize(&smat(&params.rows(0, params.len() - 1).into_owned(), n));
    Ok(QuadraticQ {
        w,
        offset: params[params.len() - 1],
        state_dim: q.state_dim,
    })
}

/// Sufficient statistics for LSTDQ. Everything that depends on the evaluated
/// policy enters through a linear map on the next-state features, so the
/// statistics are accumulated once and re-solved for any gain.
#[derive(Clone, Debug)]
pub struct LstdqStats {
    state_dim: usize,
    input_dim: usize,
    /// Σ φ(z) φ(z)ᵀ
    phi_phi: Matrix,
    /// Σ φ(z) ψ(x')ᵀ, ψ the quadratic features of the next state alone
    phi_psi: Matrix,
    /// Σ φ(z) c
    phi_cost: Vector,
    count: usize,
}

impl LstdqStats {
    pub fn new(state_dim: usize, input_dim: usize) -> Self {
        let nf = feature_count(state_dim + input_dim);
        let nx = feature_count(state_dim);
        Self {
            state_dim,
            input_dim,
            phi_phi: Matrix::zeros(nf, nf),
            phi_psi: Matrix::zeros(nf, nx),
            phi_cost: Vector::zeros(nf),
            count: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn push(&mut self, t: &Transition) -> Result<()> {
        linalg::check_len("x", &t.x, self.state_dim)?;
        linalg::check_len("u", &t.u, self.input_dim)?;
        linalg::check_len("x_next", &t.x_next, self.state_dim)?;
        let phi = quadratic_features(&joined(&t.x, &t.u));
        let psi = quadratic_features(&t.x_next);
        self.phi_phi.ger(1.0, &phi, &phi, 1.0);
        self.phi_psi.ger(1.0, &phi, &psi, 1.0);
        self.phi_cost.axpy(t.cost, &phi, 1.0);
        self.count += 1;
        Ok(())
    }

    /// Matrix of `w ↦ w'` with `w'ᵀψ(x) = wᵀφ(x, -Kx)`.
    fn policy_map(&self, gain: &Matrix) -> Matrix {
        let d = self.state_dim;
        let n = d + self.input_dim;
        let nf = feature_count(n);
        let nx = feature_count(d);
        let mut lift = Matrix::zeros(n, d);
        lift.view_mut((0, 0), (d, d)).fill_with_identity();
        lift.view_mut((d, 0), (self.input_dim, d)).copy_from(&(-gain));
        let mut map = Matrix::zeros(nx, nf);
        for k in 0..nf - 1 {
            let mut e = Vector::zeros(nf - 1);
            e[k] = 1.0;
            let reduced = lift.transpose() * smat(&e, n) * &lift;
            map.view_mut((0, k), (nx - 1, 1)).copy_from(&svec(&reduced));
        }
        map[(nx - 1, nf - 1)] = 1.0;
        map
    }

    /// Solves `(Σ φ (φ - γ φ'_K)ᵀ + ridge I) w = Σ φ c` for the policy `u = -K x`.
    pub fn solve(&self, gain: &Matrix, gamma: f64, ridge: f64) -> Result<QuadraticQ> {
        linalg::check_shape("K", gain, self.input_dim, self.state_dim)?;
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::Contract(format!("gamma must lie in [0, 1), got {gamma}")));
        }
        if !(ridge >= 0.0) {
            return Err(Error::Contract("ridge must be nonnegative".into()));
        }
        let nf = self.phi_phi.nrows();
        let mut system = &self.phi_phi - &self.phi_psi * self.policy_map(gain) * gamma;
        for i in 0..nf {
            system[(i, i)] += ridge;
        }
        let params = solve_checked(system, &self.phi_cost)?;
        QuadraticQ::from_params(&params, self.state_dim)
    }
}

fn solve_checked(system: Matrix, rhs: &Vector) -> Result<Vector> {
    if system.iter().any(|v| !v.is_finite()) || rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::InsufficientData("non-finite LSTDQ statistics".into()));
    }
    let svd = system.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin <= 1e-13 * smax {
        return Err(Error::InsufficientData(format!(
            "LSTDQ system is singular (condition {:e})",
            smax / smin
        )));
    }
    svd.solve(rhs, 0.0)
        .map_err(|e| Error::InsufficientData(e.to_string()))
}

/// Least-squares temporal-difference evaluation of `u = -K x` on quadratic features.
pub fn lstdq(data: &[Transition], gain: &Matrix, gamma: f64, ridge: f64) -> Result<QuadraticQ> {
    let first = data
        .first()
        .ok_or_else(|| Error::InsufficientData("no transitions".into()))?;
    let mut stats = LstdqStats::new(first.x.len(), first.u.len());
    for t in data {
        stats.push(t)?;
    }
    stats.solve(gain, gamma, ridge)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LspiConfig {
    pub gamma: f64,
    pub n_iters: usize,
    pub samples_per_iter: usize,
    pub exploration_std: f64,
    /// Evaluate/improve passes over the accumulated data per round.
    pub improvement_sweeps: usize,
    pub ridge: f64,
}

impl Default for LspiConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            n_iters: 10,
            samples_per_iter: 10,
            exploration_std: 1.0,
            improvement_sweeps: 20,
            ridge: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LspiOutcome {
    /// `K_0` followed by the gain after every completed round.
    pub gains: Vec<Matrix>,
    pub q_functions: Vec<QuadraticQ>,
    /// First round whose improvement step failed, with the reason.
    pub failure: Option<(usize, String)>,
}

impl LspiOutcome {
    pub fn final_gain(&self) -> Option<&Matrix> {
        if self.failure.is_some() {
            None
        } else {
            self.gains.last()
        }
    }
}

/// Charges exactly `n` samples, splitting into episodes of at most `L` steps.
pub(crate) fn collect_transitions<R: Rng + ?Sized>(
    budget: &mut EpisodeBudget,
    instance: &LqrInstance,
    policy: &Policy,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Transition>> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let horizon = instance.episode_len.min(n - out.len());
        let traj = budget.query(instance, policy, horizon, rng)?;
        for (t, (x, u, x_next)) in traj.transitions().enumerate() {
            out.push(Transition {
                x: x.clone(),
                u: u.clone(),
                cost: traj.stage_costs[t],
                x_next: x_next.clone(),
            });
        }
    }
    Ok(out)
}

/// Least-squares policy iteration with data reuse across rounds.
///
/// A failed improvement marks the run as failed, but data collection continues
/// with the last valid gain so the oracle is always charged
/// `n_iters * samples_per_iter`.
pub fn lspi<R: Rng + ?Sized>(
    budget: &mut EpisodeBudget,
    instance: &LqrInstance,
    config: &LspiConfig,
    initial_gain: &Matrix,
    rng: &mut R,
) -> Result<LspiOutcome> {
    let d = instance.state_dim();
    let p = instance.input_dim();
    linalg::check_shape("K0", initial_gain, p, d)?;
    if !(config.gamma > 0.0 && config.gamma < 1.0) {
        return Err(Error::Contract(format!("gamma must lie in (0, 1), got {}", config.gamma)));
    }
    if config.samples_per_iter == 0 || config.improvement_sweeps == 0 {
        return Err(Error::Contract("samples_per_iter and improvement_sweeps must be positive".into()));
    }
    let mut stats = LstdqStats::new(d, p);
    let mut gain = initial_gain.clone();
    let mut outcome = LspiOutcome {
        gains: vec![gain.clone()],
        q_functions: Vec::new(),
        failure: None,
    };
    for round in 0..config.n_iters {
        let behaviour = Policy::gaussian(gain.clone(), config.exploration_std)?;
        let batch = collect_transitions(budget, instance, &behaviour, config.samples_per_iter, rng)?;
        for t in &batch {
            stats.push(t)?;
        }
        if outcome.failure.is_some() {
            continue;
        }
        match improve(&stats, &gain, config) {
            Ok((q, next)) => {
                gain = next;
                outcome.gains.push(gain.clone());
                outcome.q_functions.push(q);
            }
            Err(e) => outcome.failure = Some((round, e.to_string())),
        }
    }
    Ok(outcome)
}

/// One LSPI round: evaluate the current gain and improve greedily, then
/// repeat on the same data. Only the first evaluation may fail the round; a
/// later sweep that cannot be evaluated or extracted ends refinement early.
fn improve(stats: &LstdqStats, gain: &Matrix, config: &LspiConfig) -> Result<(QuadraticQ, Matrix)> {
    let mut q = stats.solve(gain, config.gamma, config.ridge)?;
    let mut current = greedy_gain(&q)?;
    let mut moved = (&current - gain).amax();
    for _ in 1..config.improvement_sweeps {
        if moved <= 1e-12 * (1.0 + current.amax()) {
            break;
        }
        let Ok(next_q) = stats.solve(&current, config.gamma, config.ridge) else { break };
        let Ok(next) = greedy_gain(&next_q) else { break };
        moved = (&next - &current).amax();
        q = next_q;
        current = next;
    }
    Ok((q, current))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QLearningConfig {
    pub gamma: f64,
    pub eta: f64,
    /// Probability of replacing the greedy action by a random one.
    pub epsilon: f64,
    pub exploration_std: f64,
}

impl Default for QLearningConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            eta: 0.5,
            epsilon: 0.3,
            exploration_std: 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct QLearningOutcome {
    pub q: QuadraticQ,
    pub steps: usize,
    pub failure: Option<String>,
}

impl QLearningOutcome {
    pub fn final_gain(&self) -> Option<Matrix> {
        if self.failure.is_some() {
            return None;
        }
        greedy_gain(&self.q).ok()
    }
}

struct QLearner<'a> {
    q: QuadraticQ,
    gain: Option<Matrix>,
    config: &'a QLearningConfig,
    failure: Option<String>,
}

impl QLearner<'_> {
    fn refresh_gain(&mut self) {
        match greedy_gain(&self.q) {
            Ok(k) => self.gain = Some(k),
            Err(e) => {
                self.gain = None;
                self.failure.get_or_insert(e.to_string());
            }
        }
    }
}

impl Controller for QLearner<'_> {
    fn act<R: Rng + ?Sized>(&mut self, _t: usize, x: &Vector, rng: &mut R) -> Vector {
        let p = self.q.input_dim();
        let explore = rng.random::<f64>() < self.config.epsilon;
        match (&self.gain, explore) {
            (Some(k), false) => -(k * x),
            _ => standard_normal_vector(p, rng) * self.config.exploration_std,
        }
    }

    fn observe(&mut self, x: &Vector, u: &Vector, stage_cost: f64, x_next: &Vector) {
        if self.failure.is_some() {
            return;
        }
        let transition = Transition {
            x: x.clone(),
            u: u.clone(),
            cost: stage_cost,
            x_next: x_next.clone(),
        };
        match q_learning_step(&self.q, &transition, self.config.eta, self.config.gamma) {
            Ok(q) => {
                self.q = q;
                self.refresh_gain();
            }
            Err(e) => self.failure = Some(e.to_string()),
        }
    }
}

/// Online ε-greedy Q-learning for `steps` transitions, starting from the
/// stage-cost Q-function. Episodes restart from `x0` every `L` steps.
pub fn q_learning_train<R: Rng + ?Sized>(
    budget: &mut EpisodeBudget,
    instance: &LqrInstance,
    config: &QLearningConfig,
    steps: usize,
    rng: &mut R,
) -> Result<QLearningOutcome> {
    if !(0.0..=1.0).contains(&config.epsilon) || !(config.exploration_std > 0.0) {
        return Err(Error::Contract("epsilon must lie in [0, 1] and exploration_std be positive".into()));
    }
    let mut learner = QLearner {
        q: QuadraticQ::stage_only(&instance.cost),
        gain: None,
        config,
        failure: None,
    };
    learner.refresh_gain();
    let mut done = 0;
    while done < steps {
        let horizon = instance.episode_len.min(steps - done);
        budget.query_with(instance, &mut learner, horizon, rng)?;
        done += horizon;
    }
    Ok(QLearningOutcome {
        q: learner.q,
        steps: done,
        failure: learner.failure,
    })
}
