//! Complex linear-algebra primitives and the two interior-point kernels used
//! by every optimization step: a log-barrier method for concave objectives
//! under linear constraints, and a log-barrier QCQP solver over complex
//! reflection vectors.

mod concave;
mod qcqp;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub use concave::{
    find_interior_point, solve_concave_linconstr, solve_concave_linconstr_with, ConcaveObjective,
    ConcaveProgram, LogAffineObjective, LogAffineTerm,
};
pub use qcqp::{
    minimize_max_violation, solve_qcqp, solve_qcqp_with, ConcaveQuadratic, QcqpConstraint,
    QcqpProgram, QcqpSolution,
};

/// Dense complex vector (reflection vectors, cascaded channels).
pub type CVec = DVector<Complex64>;
/// Dense complex matrix.
pub type CMat = DMatrix<Complex64>;

/// Eigenvalue floor used when checking that assembled quadratic forms are PSD.
pub const PSD_FLOOR: f64 = 1e-10;

/// Interior-point parameters shared by both kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierSettings {
    /// Initial barrier weight.
    pub t0: f64,
    /// Barrier weight multiplier between centering steps.
    pub mu: f64,
    /// Centering stops once half the squared Newton decrement drops below this.
    pub newton_tol: f64,
    /// Total Newton step budget across phase I and all centering steps.
    pub max_newton_steps: usize,
}

impl Default for BarrierSettings {
    fn default() -> Self {
        Self {
            t0: 1.0,
            mu: 10.0,
            newton_tol: 1e-9,
            max_newton_steps: 2000,
        }
    }
}

/// Returns true when every eigenvalue of the Hermitian part of `a` is at
/// least `-PSD_FLOOR`. Non-square input is never PSD.
pub fn eig_floor_check(a: &CMat) -> bool {
    eig_floor_check_with(a, PSD_FLOOR)
}

pub fn eig_floor_check_with(a: &CMat, floor: f64) -> bool {
    if a.nrows() != a.ncols() {
        return false;
    }
    if a.nrows() == 0 {
        return true;
    }
    let herm = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    eig.eigenvalues.iter().all(|&l| l >= -floor)
}

/// Maximum elementwise deviation of `a` from its conjugate transpose.
pub fn hermitian_defect(a: &CMat) -> f64 {
    if a.nrows() != a.ncols() {
        return f64::INFINITY;
    }
    let mut worst = 0.0_f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn identity_is_psd() {
        assert!(eig_floor_check(&CMat::identity(4, 4)));
    }

    #[test]
    fn indefinite_diagonal_fails() {
        let a = CMat::from_diagonal(&CVec::from_vec(vec![c(1.0), c(-1.0)]));
        assert!(!eig_floor_check(&a));
    }

    #[test]
    fn outer_product_sum_is_psd() {
        let w1 = CVec::from_vec(vec![Complex64::new(0.3, -1.2), Complex64::new(2.0, 0.5)]);
        let w2 = CVec::from_vec(vec![Complex64::new(-0.7, 0.1), Complex64::new(0.0, 1.0)]);
        let a = &w1 * w1.adjoint() * c(2.5) + &w2 * w2.adjoint() * c(0.1);
        assert!(hermitian_defect(&a) < 1e-12);
        assert!(eig_floor_check(&a));
    }

    #[test]
    fn non_square_is_rejected() {
        assert!(!eig_floor_check(&CMat::zeros(2, 3)));
    }
}
