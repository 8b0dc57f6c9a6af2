//! Small dense helpers: power iteration for `λ_max(AᵀA)` and symmetric eigensolves.

use nalgebra::SymmetricEigen;

use crate::{Matrix, Vector};

/// Relative tolerance the power iteration is run to.
pub const POWER_TOL: f64 = 1e-8;
const POWER_MAX_ITER: usize = 20_000;

/// Largest eigenvalue of `AᵀA` by power iteration, without forming `AᵀA`.
///
/// The start vector is a fixed deterministic pattern so repeated calls agree bit for bit.
/// Iteration stops once the eigen-residual `‖AᵀAv − ρv‖` falls below `POWER_TOL·ρ`, or the
/// Rayleigh quotient stops moving at the same relative level.
pub fn gram_spectral_radius(a: &Matrix) -> f64 {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return 0.0;
    }
    let mut v = Vector::from_fn(n, |i, _| 1.0 + ((i * 7919 + 13) % 101) as f64 / 101.0);
    v /= v.norm();
    let mut rho = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let w = a.tr_mul(&(a * &v));
        let next = v.dot(&w);
        let wn = w.norm();
        if wn == 0.0 {
            return 0.0;
        }
        let resid = (&w - &v * next).norm();
        let stalled = (next - rho).abs() <= 1e-2 * POWER_TOL * next.abs();
        rho = next;
        v = w / wn;
        if resid <= POWER_TOL * rho || stalled {
            break;
        }
    }
    rho
}

/// Gram matrix `A_Jᵀ A_J` of the columns in `cols`.
pub fn column_gram(a: &Matrix, cols: std::ops::Range<usize>) -> Matrix {
    let sub = a.columns(cols.start, cols.len());
    sub.tr_mul(&sub)
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn sym_extreme_eigenvalues(m: &Matrix) -> (f64, f64) {
    let eig = SymmetricEigen::new(m.clone());
    let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Symmetric eigendecomposition `M = Q diag(λ) Qᵀ`, eigenvalues clamped at zero.
#[derive(Debug, Clone)]
pub struct SpectralGram {
    pub eigenvalues: Vector,
    pub eigenvectors: Matrix,
}

impl SpectralGram {
    pub fn new(gram: &Matrix) -> Self {
        let eig = SymmetricEigen::new(gram.clone());
        Self {
            eigenvalues: eig.eigenvalues.map(|l| l.max(0.0)),
            eigenvectors: eig.eigenvectors,
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(0.0, f64::max)
    }

    /// Solves `(M + shift·I) u = rhs` given `Qᵀ rhs`.
    pub fn shifted_solve_rotated(&self, rotated_rhs: &Vector, shift: f64) -> Vector {
        let scaled = Vector::from_fn(rotated_rhs.len(), |i, _| rotated_rhs[i] / (self.eigenvalues[i] + shift));
        &self.eigenvectors * scaled
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_spectrum() {
        let a = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 2.0]));
        let l = gram_spectral_radius(&a);
        assert!((l - 4.0).abs() < 1e-7, "{l}");
    }

    #[test]
    fn zero_matrix() {
        assert_eq!(gram_spectral_radius(&Matrix::zeros(3, 2)), 0.0);
    }

    #[test]
    fn extreme_eigenvalues() {
        let m = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (lo, hi) = sym_extreme_eigenvalues(&m);
        assert!((lo - 1.0).abs() < 1e-12);
        assert!((hi - 3.0).abs() < 1e-12);
    }

    #[test]
    fn shifted_solve() {
        let m = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let sg = SpectralGram::new(&m);
        let rhs = Vector::from_vec(vec![1.0, -3.0]);
        let u = sg.shifted_solve_rotated(&sg.eigenvectors.tr_mul(&rhs), 0.5);
        let back = (&m + Matrix::identity(2, 2) * 0.5) * &u;
        assert!((back - rhs).norm() < 1e-12);
    }
}
