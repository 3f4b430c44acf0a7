//! Small dense strictly convex quadratic programs,
//!
//! ```text
//!     minimize    1/2 x' H x + g' x
//!     subject to  A x <= b
//! ```
//!
//! solved by the Goldfarb-Idnani dual active-set method from the `quadprog`
//! crate. The method starts from the unconstrained minimum and adds violated
//! constraints one at a time, so it needs no feasible starting point and
//! detects infeasibility.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("Hessian is not positive definite")]
    NotConvex,
    #[error("constraints are infeasible")]
    Infeasible,
    #[error("dimension mismatch: {0}")]
    Dimension(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Lagrange multiplier of each inequality row (zero when inactive).
    pub multipliers: Vec<f64>,
    /// Constraints added to the active set during the solve.
    pub iterations: usize,
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub(crate) fn cholesky(h: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = h[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(sum > 0.0) {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solves `min 1/2 x'Hx + g'x  s.t.  A x <= b` with `H` (n x n) and `A`
/// (m x n) given row-major.
pub fn solve_qp(h: &[f64], g: &[f64], a: &[f64], b: &[f64]) -> Result<QpSolution, QpError> {
    // quadprog overwrites the Hessian with its factor.
    let mut work = h.to_vec();
    let sol = quadprog::solve_qp(&mut work, g, a, b, 0, false).map_err(|e| match e {
        quadprog::Error::InvalidQSize => QpError::Dimension("H must be n x n"),
        quadprog::Error::InvalidASize => QpError::Dimension("A must be m x n"),
        quadprog::Error::NotPositiveDefinite => QpError::NotConvex,
        _ => QpError::Infeasible,
    })?;
    Ok(QpSolution {
        x: sol.sol,
        objective: sol.obj,
        multipliers: sol.lagr,
        iterations: sol.iter,
    })
}
