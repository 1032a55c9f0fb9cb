//! Linear dynamical systems, quadratic costs, policies and the episodic oracle.
//!
//! Dynamics follow `x_{t+1} = A x_t + B u_t + e_t` with `e_t ~ N(0, Σ)`.
//! Costs are minimized and always carry the factor ½:
//! a stage contributes `½ (xᵀQx + uᵀRu)` and the terminal state `½ xᵀSx`.
//! Linear feedback uses the sign convention `u = -K x`.

use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};

/// Deterministic random stream used for every simulation in the crate.
pub type SimRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

pub(crate) fn standard_normal_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    a: Matrix,
    b: Matrix,
    noise_cov: Matrix,
    noise_factor: Option<Matrix>,
}

impl LinearSystem {
    pub fn new(a: Matrix, b: Matrix, noise_cov: Matrix) -> Result<Self> {
        let d = a.nrows();
        linalg::check_shape("A", &a, d, d)?;
        if b.nrows() != d {
            return Err(Error::Dimension(format!(
                "B has {} rows, expected {d}",
                b.nrows()
            )));
        }
        linalg::check_shape("noise_cov", &noise_cov, d, d)?;
        linalg::check_psd("noise_cov", &noise_cov)?;
        let noise_factor = if noise_cov.iter().all(|&v| v == 0.0) {
            None
        } else {
            Some(linalg::psd_factor(&noise_cov))
        };
        Ok(Self {
            a,
            b,
            noise_cov,
            noise_factor,
        })
    }

    pub fn noiseless(a: Matrix, b: Matrix) -> Result<Self> {
        let d = a.nrows();
        Self::new(a, b, Matrix::zeros(d, d))
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn noise_cov(&self) -> &Matrix {
        &self.noise_cov
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn is_noiseless(&self) -> bool {
        self.noise_factor.is_none()
    }

    /// Same dynamics with a different disturbance covariance.
    pub fn with_noise(&self, noise_cov: Matrix) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), noise_cov)
    }

    /// Closed-loop matrix `A - B K`.
    pub fn closed_loop(&self, gain: &Matrix) -> Result<Matrix> {
        linalg::check_shape("K", gain, self.input_dim(), self.state_dim())?;
        Ok(&self.a - &self.b * gain)
    }

    /// One transition `A x + B u + e`.
    pub fn step<R: Rng + ?Sized>(&self, x: &Vector, u: &Vector, rng: &mut R) -> Result<Vector> {
        linalg::check_len("x", x, self.state_dim())?;
        linalg::check_len("u", u, self.input_dim())?;
        Ok(self.step_unchecked(x, u, rng))
    }

    fn step_unchecked<R: Rng + ?Sized>(&self, x: &Vector, u: &Vector, rng: &mut R) -> Vector {
        let mut next = &self.a * x + &self.b * u;
        if let Some(f) = &self.noise_factor {
            next += f * standard_normal_vector(self.state_dim(), rng);
        }
        next
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticCost {
    q: Matrix,
    r: Matrix,
    s: Matrix,
}

impl QuadraticCost {
    /// `s = None` means a zero terminal cost.
    pub fn new(q: Matrix, r: Matrix, s: Option<Matrix>) -> Result<Self> {
        let d = q.nrows();
        linalg::check_shape("Q", &q, d, d)?;
        let p = r.nrows();
        linalg::check_shape("R", &r, p, p)?;
        let s = s.unwrap_or_else(|| Matrix::zeros(d, d));
        linalg::check_shape("S", &s, d, d)?;
        linalg::check_psd("Q", &q)?;
        linalg::check_psd("S", &s)?;
        linalg::check_pd("R", &r)?;
        Ok(Self { q, r, s })
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn r(&self) -> &Matrix {
        &self.r
    }

    pub fn s(&self) -> &Matrix {
        &self.s
    }

    pub fn state_dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.r.nrows()
    }

    pub fn with_terminal(&self, s: Matrix) -> Result<Self> {
        Self::new(self.q.clone(), self.r.clone(), Some(s))
    }

    /// `½ (xᵀQx + uᵀRu)`.
    pub fn stage(&self, x: &Vector, u: &Vector) -> f64 {
        0.5 * (x.dot(&(&self.q * x)) + u.dot(&(&self.r * u)))
    }

    /// `½ xᵀSx`.
    pub fn terminal(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.s * x))
    }

    pub(crate) fn check_system(&self, system: &LinearSystem) -> Result<()> {
        if self.state_dim() != system.state_dim() || self.input_dim() != system.input_dim() {
            return Err(Error::Dimension(format!(
                "cost is for d={}, p={} but system has d={}, p={}",
                self.state_dim(),
                self.input_dim(),
                system.state_dim(),
                system.input_dim()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LqrInstance {
    pub system: LinearSystem,
    pub cost: QuadraticCost,
    pub x0: Vector,
    pub episode_len: usize,
}

impl LqrInstance {
    pub fn new(
        system: LinearSystem,
        cost: QuadraticCost,
        x0: Vector,
        episode_len: usize,
    ) -> Result<Self> {
        cost.check_system(&system)?;
        linalg::check_len("x0", &x0, system.state_dim())?;
        if episode_len == 0 {
            return Err(Error::Contract("episode_len must be at least 1".into()));
        }
        Ok(Self {
            system,
            cost,
            x0,
            episode_len,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.system.state_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.system.input_dim()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)?;
        file.into_instance()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&InstanceFile::from_instance(self))?)
    }
}

/// On-disk form of an [`LqrInstance`]. Matrices are row-major nested arrays.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct InstanceFile {
    pub A: Vec<Vec<f64>>,
    pub B: Vec<Vec<f64>>,
    pub noise_cov: Vec<Vec<f64>>,
    pub Q: Vec<Vec<f64>>,
    pub R: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub S: Option<Vec<Vec<f64>>>,
    pub x0: Vec<f64>,
    pub episode_len: usize,
}

impl InstanceFile {
    pub fn into_instance(self) -> Result<LqrInstance> {
        let system = LinearSystem::new(
            linalg::from_rows(&self.A)?,
            linalg::from_rows(&self.B)?,
            linalg::from_rows(&self.noise_cov)?,
        )?;
        let s = self.S.as_deref().map(linalg::from_rows).transpose()?;
        let cost = QuadraticCost::new(linalg::from_rows(&self.Q)?, linalg::from_rows(&self.R)?, s)?;
        LqrInstance::new(system, cost, Vector::from_vec(self.x0), self.episode_len)
    }

    pub fn from_instance(inst: &LqrInstance) -> Self {
        Self {
            A: linalg::to_rows(inst.system.a()),
            B: linalg::to_rows(inst.system.b()),
            noise_cov: linalg::to_rows(inst.system.noise_cov()),
            Q: linalg::to_rows(inst.cost.q()),
            R: linalg::to_rows(inst.cost.r()),
            S: Some(linalg::to_rows(inst.cost.s())),
            x0: inst.x0.iter().copied().collect(),
            episode_len: inst.episode_len,
        }
    }
}

/// States `x_0..x_T`, inputs `u_0..u_{T-1}` and the stage costs of each transition.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vector>,
    pub inputs: Vec<Vector>,
    pub stage_costs: Vec<f64>,
}

impl Trajectory {
    pub fn new(states: Vec<Vector>, inputs: Vec<Vector>, stage_costs: Vec<f64>) -> Result<Self> {
        if states.len() != inputs.len() + 1 || stage_costs.len() != inputs.len() {
            return Err(Error::Dimension(format!(
                "trajectory lengths inconsistent: {} states, {} inputs, {} costs",
                states.len(),
                inputs.len(),
                stage_costs.len()
            )));
        }
        Ok(Self {
            states,
            inputs,
            stage_costs,
        })
    }

    pub fn horizon(&self) -> usize {
        self.inputs.len()
    }

    pub fn final_state(&self) -> &Vector {
        self.states.last().expect("trajectory has at least one state")
    }

    /// Iterator over `(x_t, u_t, x_{t+1})`.
    pub fn transitions(&self) -> impl Iterator<Item = (&Vector, &Vector, &Vector)> + '_ {
        self.inputs
            .iter()
            .enumerate()
            .map(move |(t, u)| (&self.states[t], u, &self.states[t + 1]))
    }
}

/// Total cost `Σ ½(xᵀQx + uᵀRu) + ½ x_Tᵀ S x_T`.
pub fn trajectory_cost(traj: &Trajectory, cost: &QuadraticCost) -> Result<f64> {
    let d = cost.state_dim();
    let p = cost.input_dim();
    if traj.states.iter().any(|x| x.len() != d) || traj.inputs.iter().any(|u| u.len() != p) {
        return Err(Error::Dimension("trajectory does not match cost dimensions".into()));
    }
    let running: f64 = traj
        .inputs
        .iter()
        .enumerate()
        .map(|(t, u)| cost.stage(&traj.states[t], u))
        .sum();
    Ok(running + cost.terminal(traj.final_state()))
}

/// Anything that emits an input given the current state.
///
/// `observe` is called after every transition so online learners can update
/// between steps of the same episode.
pub trait Controller {
    fn act<R: Rng + ?Sized>(&mut self, t: usize, x: &Vector, rng: &mut R) -> Vector;

    fn observe(&mut self, _x: &Vector, _u: &Vector, _stage_cost: f64, _x_next: &Vector) {}
}

#[derive(Clone, Debug, PartialEq)]
pub enum Policy {
    LinearGain(Matrix),
    TimeVaryingGains(Vec<Matrix>),
    GaussianLinear { gain: Matrix, exploration_std: f64 },
}

impl Policy {
    pub fn gaussian(gain: Matrix, exploration_std: f64) -> Result<Self> {
        if !(exploration_std > 0.0) {
            return Err(Error::Contract(format!(
                "exploration_std must be positive, got {exploration_std}"
            )));
        }
        Ok(Policy::GaussianLinear {
            gain,
            exploration_std,
        })
    }

    /// Gain applied at step `t` (time-varying gains hold their last entry).
    pub fn gain_at(&self, t: usize) -> &Matrix {
        match self {
            Policy::LinearGain(k) => k,
            Policy::TimeVaryingGains(ks) => &ks[t.min(ks.len() - 1)],
            Policy::GaussianLinear { gain, .. } => gain,
        }
    }

    pub fn check_dims(&self, d: usize, p: usize) -> Result<()> {
        match self {
            Policy::LinearGain(k) => linalg::check_shape("K", k, p, d),
            Policy::TimeVaryingGains(ks) => {
                if ks.is_empty() {
                    return Err(Error::Contract("time-varying policy needs at least one gain".into()));
                }
                ks.iter().try_for_each(|k| linalg::check_shape("K_t", k, p, d))
            }
            Policy::GaussianLinear {
                gain,
                exploration_std,
            } => {
                if !(*exploration_std > 0.0) {
                    return Err(Error::Contract("exploration_std must be positive".into()));
                }
                linalg::check_shape("K", gain, p, d)
            }
        }
    }
}

impl Controller for Policy {
    fn act<R: Rng + ?Sized>(&mut self, t: usize, x: &Vector, rng: &mut R) -> Vector {
        let mean = -(self.gain_at(t) * x);
        match self {
            Policy::GaussianLinear {
                exploration_std, ..
            } => {
                let noise = standard_normal_vector(mean.len(), rng);
                mean + noise * *exploration_std
            }
            _ => mean,
        }
    }
}

/// Simulates `horizon` transitions from `x0` under `policy`.
pub fn rollout<R: Rng + ?Sized>(
    instance: &LqrInstance,
    policy: &Policy,
    horizon: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    policy.check_dims(instance.state_dim(), instance.input_dim())?;
    rollout_with(instance, &mut policy.clone(), horizon, rng)
}

/// [`rollout`] for an arbitrary controller. The controller must emit inputs
/// of the instance's input dimension.
pub fn rollout_with<C: Controller, R: Rng + ?Sized>(
    instance: &LqrInstance,
    controller: &mut C,
    horizon: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(Error::Contract("horizon must be at least 1".into()));
    }
    let mut states = Vec::with_capacity(horizon + 1);
    let mut inputs = Vec::with_capacity(horizon);
    let mut stage_costs = Vec::with_capacity(horizon);
    let mut x = instance.x0.clone();
    for t in 0..horizon {
        let u = controller.act(t, &x, rng);
        linalg::check_len("controller output", &u, instance.input_dim())?;
        let c = instance.cost.stage(&x, &u);
        let next = instance.system.step_unchecked(&x, &u, rng);
        controller.observe(&x, &u, c, &next);
        states.push(std::mem::replace(&mut x, next));
        inputs.push(u);
        stage_costs.push(c);
    }
    states.push(x);
    Ok(Trajectory {
        states,
        inputs,
        stage_costs,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub horizon: usize,
}

/// Sample accounting for the episodic oracle: every episode of horizon `L`
/// costs `L` samples.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EpisodeBudget {
    samples_used: usize,
    log: Vec<EpisodeRecord>,
    cap: Option<usize>,
}

impl EpisodeBudget {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_cap(cap: usize) -> Self {
        Self {
            cap: Some(cap),
            ..Self::default()
        }
    }

    pub fn samples_used(&self) -> usize {
        self.samples_used
    }

    pub fn log(&self) -> &[EpisodeRecord] {
        &self.log
    }

    pub fn cap(&self) -> Option<usize> {
        self.cap
    }

    pub fn remaining(&self) -> Option<usize> {
        self.cap.map(|c| c - self.samples_used)
    }

    fn charge(&mut self, horizon: usize) -> Result<()> {
        if let Some(cap) = self.cap {
            if self.samples_used + horizon > cap {
                return Err(Error::BudgetExhausted {
                    used: self.samples_used,
                    requested: horizon,
                    cap,
                });
            }
        }
        self.samples_used += horizon;
        self.log.push(EpisodeRecord {
            episode: self.log.len(),
            horizon,
        });
        Ok(())
    }

    /// Rolls out `policy` and charges `horizon` samples.
    pub fn query<R: Rng + ?Sized>(
        &mut self,
        instance: &LqrInstance,
        policy: &Policy,
        horizon: usize,
        rng: &mut R,
    ) -> Result<Trajectory> {
        policy.check_dims(instance.state_dim(), instance.input_dim())?;
        self.query_with(instance, &mut policy.clone(), horizon, rng)
    }

    pub fn query_with<C: Controller, R: Rng + ?Sized>(
        &mut self,
        instance: &LqrInstance,
        controller: &mut C,
        horizon: usize,
        rng: &mut R,
    ) -> Result<Trajectory> {
        if horizon == 0 {
            return Err(Error::Contract("horizon must be at least 1".into()));
        }
        self.charge(horizon)?;
        rollout_with(instance, controller, horizon, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, v: &[f64]) -> Matrix {
        Matrix::from_row_slice(rows, cols, v)
    }

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    fn double_integrator() -> LqrInstance {
        let sys = LinearSystem::noiseless(m(2, 2, &[1.0, 1.0, 0.0, 1.0]), m(2, 1, &[0.0, 1.0])).unwrap();
        let cost = QuadraticCost::new(m(2, 2, &[1.0, 0.0, 0.0, 0.0]), m(1, 1, &[1.0]), None).unwrap();
        LqrInstance::new(sys, cost, v(&[-1.0, 0.0]), 10).unwrap()
    }

    #[test]
    fn step_identity_dynamics() {
        let sys = LinearSystem::noiseless(Matrix::identity(2, 2), Matrix::zeros(2, 0)).unwrap();
        let mut rng = seeded_rng(0);
        let next = sys.step(&v(&[1.0, 2.0]), &Vector::zeros(0), &mut rng).unwrap();
        assert_eq!(next, v(&[1.0, 2.0]));
    }

    #[test]
    fn step_double_integrator() {
        let inst = double_integrator();
        let mut rng = seeded_rng(0);
        let next = inst.system.step(&v(&[-1.0, 0.0]), &v(&[1.0]), &mut rng).unwrap();
        assert_eq!(next, v(&[-1.0, 1.0]));
    }

    #[test]
    fn step_scalar() {
        let sys = LinearSystem::noiseless(m(1, 1, &[0.9]), m(1, 1, &[0.5])).unwrap();
        let next = sys.step(&v(&[1.0]), &v(&[1.0]), &mut seeded_rng(0)).unwrap();
        assert!((next[0] - 1.4).abs() < 1e-15);
    }

    #[test]
    fn step_rejects_bad_dims() {
        let inst = double_integrator();
        let err = inst.system.step(&v(&[1.0]), &v(&[1.0]), &mut seeded_rng(0));
        assert!(matches!(err, Err(Error::Dimension(_))));
    }

    #[test]
    fn rollout_zero_gain_stays_put() {
        let inst = double_integrator();
        let traj = rollout(&inst, &Policy::LinearGain(Matrix::zeros(1, 2)), 1, &mut seeded_rng(1)).unwrap();
        assert_eq!(traj.states, vec![v(&[-1.0, 0.0]), v(&[-1.0, 0.0])]);
        assert_eq!(traj.inputs, vec![v(&[0.0])]);
    }

    #[test]
    fn rollout_deadbeat_scalar() {
        let sys = LinearSystem::noiseless(m(1, 1, &[1.0]), m(1, 1, &[1.0])).unwrap();
        let cost = QuadraticCost::new(m(1, 1, &[1.0]), m(1, 1, &[1e-9]), None).unwrap();
        let inst = LqrInstance::new(sys, cost, v(&[1.0]), 2).unwrap();
        let traj = rollout(&inst, &Policy::LinearGain(m(1, 1, &[1.0])), 2, &mut seeded_rng(0)).unwrap();
        assert_eq!(traj.states, vec![v(&[1.0]), v(&[0.0]), v(&[0.0])]);
        assert_eq!(traj.inputs, vec![v(&[-1.0]), v(&[0.0])]);
    }

    #[test]
    fn trajectory_cost_examples() {
        let cost = QuadraticCost::new(m(1, 1, &[1.0]), m(1, 1, &[1.0]), None).unwrap();
        let traj = Trajectory::new(vec![v(&[1.0]), v(&[0.0])], vec![v(&[-1.0])], vec![1.0]).unwrap();
        assert_eq!(trajectory_cost(&traj, &cost).unwrap(), 1.0);

        let zero = Trajectory::new(vec![v(&[0.0]); 3], vec![v(&[0.0]); 2], vec![0.0; 2]).unwrap();
        assert_eq!(trajectory_cost(&zero, &cost).unwrap(), 0.0);

        let inst = double_integrator();
        let traj = rollout(&inst, &Policy::LinearGain(Matrix::zeros(1, 2)), 1, &mut seeded_rng(0)).unwrap();
        assert_eq!(trajectory_cost(&traj, &inst.cost).unwrap(), 0.5);
    }

    #[test]
    fn stage_costs_match_cost_function() {
        let inst = double_integrator();
        let policy = Policy::gaussian(m(1, 2, &[0.3, 0.9]), 0.5).unwrap();
        let traj = rollout(&inst, &policy, 20, &mut seeded_rng(3)).unwrap();
        for (t, c) in traj.stage_costs.iter().enumerate() {
            let expect = inst.cost.stage(&traj.states[t], &traj.inputs[t]);
            assert!((c - expect).abs() <= 1e-10 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn budget_counts_horizons() {
        let inst = double_integrator();
        let policy = Policy::LinearGain(Matrix::zeros(1, 2));
        let mut rng = seeded_rng(0);
        let mut budget = EpisodeBudget::new();
        assert_eq!(budget.samples_used(), 0);
        for _ in 0..3 {
            budget.query(&inst, &policy, 10, &mut rng).unwrap();
        }
        assert_eq!(budget.samples_used(), 30);

        let mut budget = EpisodeBudget::new();
        budget.query(&inst, &policy, 5, &mut rng).unwrap();
        budget.query(&inst, &policy, 7, &mut rng).unwrap();
        assert_eq!(budget.samples_used(), 12);
        assert_eq!(
            budget.log(),
            &[
                EpisodeRecord { episode: 0, horizon: 5 },
                EpisodeRecord { episode: 1, horizon: 7 }
            ]
        );
    }

    #[test]
    fn budget_cap_enforced() {
        let inst = double_integrator();
        let policy = Policy::LinearGain(Matrix::zeros(1, 2));
        let mut budget = EpisodeBudget::with_cap(15);
        let mut rng = seeded_rng(0);
        budget.query(&inst, &policy, 10, &mut rng).unwrap();
        let err = budget.query(&inst, &policy, 10, &mut rng);
        assert!(matches!(err, Err(Error::BudgetExhausted { used: 10, requested: 10, cap: 15 })));
        assert_eq!(budget.samples_used(), 10);
    }

    #[test]
    fn invalid_costs_rejected() {
        assert!(QuadraticCost::new(m(1, 1, &[1.0]), m(1, 1, &[0.0]), None).is_err());
        assert!(QuadraticCost::new(m(1, 1, &[-1.0]), m(1, 1, &[1.0]), None).is_err());
        assert!(LinearSystem::new(m(1, 1, &[1.0]), m(1, 1, &[1.0]), m(1, 1, &[-1.0])).is_err());
        assert!(Policy::gaussian(Matrix::zeros(1, 1), 0.0).is_err());
    }

    #[test]
    fn instance_file_round_trip() {
        let json = r#"{
            "A": [[1.0, 1.0], [0.0, 1.0]],
            "B": [[0.0], [1.0]],
            "noise_cov": [[0.0001, 0.0], [0.0, 0.0001]],
            "Q": [[1.0, 0.0], [0.0, 0.0]],
            "R": [[1.0]],
            "x0": [-1.0, 0.0],
            "episode_len": 10
        }"#;
        let inst = LqrInstance::from_json(json).unwrap();
        // row-major: A[0][1] is the (0, 1) entry
        assert_eq!(inst.system.a()[(0, 1)], 1.0);
        assert_eq!(inst.system.a()[(1, 0)], 0.0);
        assert_eq!(inst.cost.s(), &Matrix::zeros(2, 2));
        let back = LqrInstance::from_json(&inst.to_json().unwrap()).unwrap();
        assert_eq!(back, inst);
    }
}
