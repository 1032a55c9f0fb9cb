//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Largest eigenvalue magnitude of a square matrix.
pub fn spectral_radius(m: &Matrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    if m.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

pub fn is_symmetric(m: &Matrix, rel_tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax().max(1.0);
    (m - m.transpose()).amax() <= rel_tol * scale
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_eigenvalue(m: &Matrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Validates symmetry (relative 1e-12) and positive semidefiniteness (eigenvalues >= -1e-12).
pub fn check_psd(name: &str, m: &Matrix) -> Result<()> {
    if !is_symmetric(m, 1e-12) {
        return Err(Error::Contract(format!("{name} must be symmetric")));
    }
    let lo = min_eigenvalue(m);
    if lo < -1e-12 * m.amax().max(1.0) {
        return Err(Error::Contract(format!(
            "{name} must be positive semidefinite (smallest eigenvalue {lo:e})"
        )));
    }
    Ok(())
}

pub fn check_pd(name: &str, m: &Matrix) -> Result<()> {
    if !is_symmetric(m, 1e-12) {
        return Err(Error::Contract(format!("{name} must be symmetric")));
    }
    let lo = min_eigenvalue(m);
    if lo <= 0.0 {
        return Err(Error::Contract(format!(
            "{name} must be positive definite (smallest eigenvalue {lo:e})"
        )));
    }
    Ok(())
}

pub fn check_shape(name: &str, m: &Matrix, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::Dimension(format!(
            "{name} is {}x{}, expected {rows}x{cols}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

pub fn check_len(name: &str, v: &Vector, len: usize) -> Result<()> {
    if v.len() != len {
        return Err(Error::Dimension(format!(
            "{name} has length {}, expected {len}",
            v.len()
        )));
    }
    Ok(())
}

/// Matrix square root factor `F` with `F Fᵀ = m` for a symmetric PSD `m`.
/// Negative roundoff eigenvalues are clipped to zero.
pub fn psd_factor(m: &Matrix) -> Matrix {
    let eig = SymmetricEigen::new(symmetrize(m));
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * Matrix::from_diagonal(&roots)
}

/// Operator (spectral) norm.
pub fn op_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Solves `X = A X Aᵀ + W` by squared Smith iteration.
///
/// The iteration is the doubled form of the fixed point `X <- A X Aᵀ + W`;
/// it stops when the neglected tail is below `tol (1 + ‖X‖_F)`.
pub fn solve_discrete_lyapunov(a: &Matrix, w: &Matrix, tol: f64) -> Result<Matrix> {
    let rho = spectral_radius(a);
    if rho >= 1.0 {
        return Err(Error::Unstable(rho));
    }
    let mut x = symmetrize(w);
    let mut ak = a.clone();
    // 2^80 fixed-point steps is far beyond anything representable with rho < 1
    for _ in 0..80 {
        let tail = &ak * &x * ak.transpose();
        let done = tail.norm() <= tol * (1.0 + x.norm());
        x += tail;
        x = symmetrize(&x);
        if done {
            return Ok(x);
        }
        ak = &ak * &ak;
    }
    Err(Error::Unstable(rho))
}

/// Cholesky solve for a symmetric positive definite system.
pub fn solve_spd(m: &Matrix, rhs: &Matrix) -> Option<Matrix> {
    let chol = symmetrize(m).cholesky()?;
    Some(chol.solve(rhs))
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lyapunov_scalar_closed_form() {
        let a = Matrix::from_element(1, 1, 0.5);
        let w = Matrix::from_element(1, 1, 1.0);
        let x = solve_discrete_lyapunov(&a, &w, 1e-15).unwrap();
        assert!((x[(0, 0)] - 1.0 / 0.75).abs() < 1e-12);
    }

    #[test]
    fn lyapunov_matches_plain_fixed_point() {
        let a = Matrix::from_row_slice(2, 2, &[0.9, 0.2, -0.1, 0.7]);
        let w = Matrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0]);
        let fast = solve_discrete_lyapunov(&a, &w, 1e-15).unwrap();
        let mut slow = w.clone();
        for _ in 0..2000 {
            slow = &a * &slow * a.transpose() + &w;
        }
        assert!((fast - slow).amax() < 1e-10);
    }

    #[test]
    fn lyapunov_rejects_unstable() {
        let a = Matrix::identity(2, 2);
        assert!(matches!(
            solve_discrete_lyapunov(&a, &Matrix::identity(2, 2), 1e-12),
            Err(Error::Unstable(_))
        ));
    }

    #[test]
    fn jordan_block_radius_is_one() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!((spectral_radius(&a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn factor_reproduces_covariance() {
        let m = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let f = psd_factor(&m);
        assert!((&f * f.transpose() - &m).amax() < 1e-12);
        assert_eq!(psd_factor(&Matrix::zeros(2, 2)), Matrix::zeros(2, 2));
    }

    #[test]
    fn psd_checks() {
        assert!(check_psd("Q", &Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 0.0]))).is_ok());
        assert!(check_psd("Q", &Matrix::from_diagonal(&Vector::from_vec(vec![1.0, -1.0]))).is_err());
        assert!(check_pd("R", &Matrix::zeros(1, 1)).is_err());
        assert!(check_psd("Q", &Matrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0])).is_err());
    }
}
