//! Exact LQR: finite-horizon Riccati recursion, the discrete algebraic Riccati
//! equation, closed-loop cost evaluation and receding-horizon control.

use crate::error::{Error, Result};
use crate::lds::{LinearSystem, QuadraticCost};
use crate::linalg::{self, Matrix, Vector};

/// Stabilizing solution of `M = Q + AᵀMA - AᵀMB(R + BᵀMB)⁻¹BᵀMA`.
#[derive(Clone, Debug, PartialEq)]
pub struct RiccatiSolution {
    pub value: Matrix,
    pub gain: Matrix,
    /// Frobenius norm of the equation defect at `value`.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteHorizonSolution {
    /// `K_0 .. K_{N-1}`.
    pub gains: Vec<Matrix>,
    /// `M_0 .. M_N`, with `M_N = S`.
    pub value_matrices: Vec<Matrix>,
    /// Noise-induced constants `c_0 .. c_N`, with `c_N = 0`.
    pub offsets: Vec<f64>,
}

impl FiniteHorizonSolution {
    pub fn horizon(&self) -> usize {
        self.gains.len()
    }

    /// Expected cost-to-go from `x` at time `t` under the optimal policy,
    /// in the ½-scaled convention: `½ xᵀM_t x + c_t`.
    pub fn cost_to_go(&self, t: usize, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.value_matrices[t] * x)) + self.offsets[t]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityReport {
    pub spectral_radius: f64,
    pub stable: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DareOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DareOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 1_000_000,
        }
    }
}

fn check_problem(system: &LinearSystem, cost: &QuadraticCost) -> Result<()> {
    cost.check_system(system)
}

/// One application of the Riccati map: returns `(F(M), K(M))`.
fn riccati_step(system: &LinearSystem, cost: &QuadraticCost, m: &Matrix) -> Result<(Matrix, Matrix)> {
    let a = system.a();
    let b = system.b();
    let bt_m = b.transpose() * m;
    let gram = cost.r() + &bt_m * b;
    let gain = linalg::solve_spd(&gram, &(&bt_m * a)).ok_or_else(|| {
        Error::IllPosedCost("R + BᵀMB is not numerically positive definite".into())
    })?;
    let at_m = a.transpose() * m;
    let next = cost.q() + &at_m * a - &at_m * b * &gain;
    Ok((linalg::symmetrize(&next), gain))
}

/// `K = (R + BᵀMB)⁻¹ BᵀMA`.
pub fn gain_from_value(system: &LinearSystem, cost: &QuadraticCost, m: &Matrix) -> Result<Matrix> {
    check_problem(system, cost)?;
    linalg::check_shape("M", m, system.state_dim(), system.state_dim())?;
    let bt_m = system.b().transpose() * m;
    let gram = cost.r() + &bt_m * system.b();
    linalg::solve_spd(&gram, &(&bt_m * system.a())).ok_or_else(|| {
        Error::IllPosedCost("R + BᵀMB is not numerically positive definite".into())
    })
}

/// Backward Riccati recursion over `n` steps starting from the terminal cost `S`.
pub fn finite_horizon_solve(
    system: &LinearSystem,
    cost: &QuadraticCost,
    n: usize,
) -> Result<FiniteHorizonSolution> {
    check_problem(system, cost)?;
    if n == 0 {
        return Err(Error::Contract("horizon must be at least 1".into()));
    }
    let sigma = system.noise_cov();
    let mut value_matrices = vec![cost.s().clone()];
    let mut offsets = vec![0.0];
    let mut gains = Vec::with_capacity(n);
    for _ in 0..n {
        let m_next = value_matrices.last().unwrap();
        let c_next = *offsets.last().unwrap();
        let (m, k) = riccati_step(system, cost, m_next)?;
        offsets.push(c_next + 0.5 * (m_next * sigma).trace());
        value_matrices.push(m);
        gains.push(k);
    }
    value_matrices.reverse();
    offsets.reverse();
    gains.reverse();
    Ok(FiniteHorizonSolution {
        gains,
        value_matrices,
        offsets,
    })
}

pub fn dare_solve(system: &LinearSystem, cost: &QuadraticCost) -> Result<RiccatiSolution> {
    dare_solve_with(system, cost, DareOptions::default())
}

/// Value iteration on the Riccati map from `M = Q`, stopping once
/// `‖F(M) - M‖_F <= tol (1 + ‖M‖_F)` and the resulting gain is stabilizing.
pub fn dare_solve_with(
    system: &LinearSystem,
    cost: &QuadraticCost,
    opts: DareOptions,
) -> Result<RiccatiSolution> {
    check_problem(system, cost)?;
    let mut m = cost.q().clone();
    let mut residual = f64::INFINITY;
    for iter in 0..opts.max_iter {
        let (next, gain) = riccati_step(system, cost, &m)?;
        residual = (&next - &m).norm();
        if !residual.is_finite() {
            return Err(Error::NoStabilizingSolution {
                iterations: iter,
                residual,
            });
        }
        if residual <= opts.tol * (1.0 + m.norm()) {
            let report = stability_report(system, &gain)?;
            if !report.stable {
                return Err(Error::NoStabilizingSolution {
                    iterations: iter,
                    residual,
                });
            }
            return Ok(RiccatiSolution {
                value: m,
                gain,
                residual,
                iterations: iter,
            });
        }
        m = next;
    }
    Err(Error::NoStabilizingSolution {
        iterations: opts.max_iter,
        residual,
    })
}

/// Spectral radius of `A - BK`; the boundary `ρ = 1` counts as unstable.
pub fn stability_report(system: &LinearSystem, gain: &Matrix) -> Result<StabilityReport> {
    let closed = system.closed_loop(gain)?;
    let spectral_radius = linalg::spectral_radius(&closed);
    Ok(StabilityReport {
        spectral_radius,
        stable: spectral_radius < 1.0,
    })
}

/// Steady-state average stage cost `½ tr((Q + KᵀRK) X)` where
/// `X = (A-BK) X (A-BK)ᵀ + Σ`.
pub fn closed_loop_average_cost(system: &LinearSystem, cost: &QuadraticCost, gain: &Matrix) -> Result<f64> {
    check_problem(system, cost)?;
    let report = stability_report(system, gain)?;
    if !report.stable {
        return Err(Error::Unstable(report.spectral_radius));
    }
    let closed = system.closed_loop(gain)?;
    let cov = linalg::solve_discrete_lyapunov(&closed, system.noise_cov(), 1e-15)?;
    let weight = cost.q() + gain.transpose() * cost.r() * gain;
    Ok(0.5 * (weight * cov).trace())
}

/// `(J_hat - J_star) / J_star`.
pub fn relative_suboptimality(j_hat: f64, j_star: f64) -> Result<f64> {
    if !(j_star > 0.0) {
        return Err(Error::Contract(format!("J_star must be positive, got {j_star}")));
    }
    Ok((j_hat - j_star) / j_star)
}

/// First action of the `h`-step plan on `model` with terminal value `terminal_value`.
pub fn rhc_action(
    model: &LinearSystem,
    cost: &QuadraticCost,
    terminal_value: &Matrix,
    h: usize,
    x: &Vector,
) -> Result<Vector> {
    linalg::check_len("x", x, model.state_dim())?;
    let planning_cost = cost.with_terminal(terminal_value.clone())?;
    let plan = finite_horizon_solve(model, &planning_cost, h)?;
    Ok(-(&plan.gains[0] * x))
}
