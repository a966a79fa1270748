//! Iterating the covariance recursion to its fixed point.

use crate::error::Result;
use crate::linalg::{self, Matrix};
use crate::model::LinearModel;

use super::{covariance_step, FilterVariant};

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub p: Matrix,
    pub v: Matrix,
    pub theta: f64,
    pub l: Matrix,
    pub k: Matrix,
    pub converged: bool,
    pub iterations: usize,
    /// Last `‖P_{t+1} − P_t‖_∞`.
    pub residual: f64,
    /// Last `|θ_{t+1} − θ_t|`.
    pub theta_change: f64,
    /// Spectral radius of `A − K C`.
    pub spectral_radius: f64,
    /// Unmet structural assumptions (reachability of `(A, G)`, observability
    /// of `(A, C)`); advisory only.
    pub warnings: Vec<String>,
}

fn reachability_rank(a: &Matrix, g: &Matrix) -> usize {
    let n = a.nrows();
    let mut blocks = Matrix::zeros(n, g.ncols() * n);
    let mut term = g.clone();
    for i in 0..n {
        blocks.view_mut((0, i * g.ncols()), (n, g.ncols())).copy_from(&term);
        term = a * term;
    }
    linalg::numerical_rank(&blocks)
}

/// Runs the variant's covariance recursion from `p0` until
/// `‖P_{t+1} − P_t‖_∞ < tol` or `max_iters` steps.
pub fn steady_state(
    model: &LinearModel,
    variant: &FilterVariant,
    p0: &Matrix,
    max_iters: usize,
    tol: f64,
) -> Result<SteadyState> {
    variant.check()?;
    let n = model.a.nrows();
    let mut warnings = Vec::new();
    if reachability_rank(&model.a, &model.g) < n {
        warnings.push("(A, G) not reachable".to_string());
    }
    if reachability_rank(&model.a.transpose(), &model.c.transpose()) < n {
        warnings.push("(A, C) not observable".to_string());
    }
    for w in &warnings {
        log::warn!("steady_state: {w}");
    }

    let mut p = linalg::symmetrize(p0);
    let mut step = covariance_step(model, variant, &p)?;
    let mut prev_theta = step.theta;
    let mut residual = f64::INFINITY;
    let mut theta_change = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        residual = linalg::inf_norm(&(&step.p_next - &p));
        p = step.p_next.clone();
        step = covariance_step(model, variant, &p)?;
        theta_change = (step.theta - prev_theta).abs();
        prev_theta = step.theta;
        if residual < tol {
            break;
        }
    }
    let closed = &model.a - &step.k * &model.c;
    Ok(SteadyState {
        spectral_radius: linalg::spectral_radius(&closed),
        converged: residual < tol,
        p: step.p,
        v: step.v,
        theta: step.theta,
        l: step.l,
        k: step.k,
        iterations,
        residual,
        theta_change,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use approx::assert_relative_eq;

    fn scalar_model() -> LinearModel {
        LinearModel::new(
            Matrix::from_element(1, 1, 0.5),
            Matrix::from_element(1, 1, 1.0),
            Matrix::from_element(1, 1, 1.0),
            Matrix::from_row_slice(1, 2, &[0.0, 1.0]),
            Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
        )
        .unwrap()
    }

    #[test]
    fn standard_scalar_fixed_point() {
        // oracle: plain scalar iteration of P = 0.25P − 0.25P²/(P+1) + 1
        let mut p = 1.0f64;
        for _ in 0..10_000 {
            p = 0.25 * p - 0.25 * p * p / (p + 1.0) + 1.0;
        }
        let ss = steady_state(&scalar_model(), &FilterVariant::Standard, &Matrix::from_element(1, 1, 1.0), 1000, 1e-14).unwrap();
        assert!(ss.converged);
        assert_relative_eq!(ss.p[(0, 0)], p, epsilon = 1e-12);
        assert!(ss.spectral_radius < 1.0);
        assert!(ss.warnings.is_empty());
    }

    #[test]
    fn robust_tiny_tolerance_matches_standard() {
        let p0 = Matrix::from_element(1, 1, 1.0);
        let s = steady_state(&scalar_model(), &FilterVariant::Standard, &p0, 1000, 1e-13).unwrap();
        let r = steady_state(&scalar_model(), &FilterVariant::Robust { c: 1e-12 }, &p0, 1000, 1e-13).unwrap();
        assert!(r.converged);
        assert_relative_eq!(s.p, r.p, epsilon = 1e-6);
        assert_relative_eq!(s.k, r.k, epsilon = 1e-6);
    }

    #[test]
    fn unreachable_tolerance() {
        let p0 = Matrix::from_element(1, 1, 1.0);
        let err = steady_state(&scalar_model(), &FilterVariant::Robust { c: 1e12 }, &p0, 100, 1e-12).unwrap_err();
        assert!(matches!(err, Error::ToleranceOutOfRange { .. }));
    }

    #[test]
    fn warns_on_unobservable() {
        let m = LinearModel::new(
            Matrix::identity(2, 2) * 0.5,
            Matrix::from_row_slice(2, 1, &[1.0, 0.0]),
            Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
            Matrix::from_row_slice(1, 3, &[0.0, 0.0, 1.0]),
            Matrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
        )
        .unwrap();
        let ss = steady_state(&m, &FilterVariant::Standard, &Matrix::identity(2, 2), 500, 1e-12).unwrap();
        assert_eq!(ss.warnings, vec!["(A, C) not observable".to_string()]);
    }
}
