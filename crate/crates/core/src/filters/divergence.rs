//! KL divergence between Gaussians, the θ-equation of the robust filter and
//! its bisection solver, and the τ-divergence covariance inflation.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::model::GaussianBelief;

/// Default bisection width, in units of `1/λ_max(P)`.
pub const DEFAULT_BISECTION_EPS: f64 = 1e-9;

/// `D(f̃ ‖ f) = ½[tr(K⁻¹K̃) − d + (m − m̃)ᵀK⁻¹(m − m̃) + ln(det K / det K̃)]`.
pub fn kl_gaussian(tilde: &GaussianBelief, nominal: &GaussianBelief) -> Result<f64> {
    let d = nominal.dim();
    if tilde.dim() != d {
        return Err(Error::Dimension(format!(
            "KL between densities of dimension {} and {d}",
            tilde.dim()
        )));
    }
    let chol = linalg::cholesky(&nominal.cov, "nominal covariance")
        .map_err(|_| Error::Singular("nominal covariance"))?;
    let chol_tilde = linalg::cholesky(&tilde.cov, "least-favorable covariance")
        .map_err(|_| Error::Singular("least-favorable covariance"))?;

    let trace = chol.solve(&tilde.cov).trace();
    let delta = &nominal.mean - &tilde.mean;
    let mahal = delta.dot(&chol.solve(&delta));
    let log_det = |l: &Matrix| 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let ld = log_det(&chol.l()) - log_det(&chol_tilde.l());

    let kl = 0.5 * (trace - d as f64 + mahal + ld);
    if !kl.is_finite() {
        return Err(Error::NonFinite("KL divergence"));
    }
    Ok(kl.max(0.0))
}

/// One eigenvalue's share of γ: `ln(1 − x) + x / (1 − x)` with `x = θλ`.
fn gamma_term(x: f64) -> f64 {
    (-x).ln_1p() + x / (1.0 - x)
}

fn gamma_from_eigs(eigs: &[f64], theta: f64) -> f64 {
    eigs.iter().map(|&l| gamma_term(theta * l)).sum()
}

/// `γ(P, θ) = ln det(I − θP) + tr[(I − θP)⁻¹] − n`, the left-hand side of the
/// θ-equation. Defined for `0 ≤ θ < 1/λ_max(P)`.
pub fn gamma(p: &Matrix, theta: f64) -> Result<f64> {
    let eig = linalg::sym_eigen(p);
    let lmax = eig.eigenvalues.max();
    if eig.eigenvalues.min() <= 0.0 {
        return Err(Error::NotPositiveDefinite("P"));
    }
    if !(theta >= 0.0) || theta * lmax >= 1.0 {
        return Err(Error::ThetaOutOfDomain {
            theta,
            limit: 1.0 / lmax,
        });
    }
    Ok(gamma_from_eigs(eig.eigenvalues.as_slice(), theta))
}

/// Finds the unique `θ ∈ (0, 1/λ_max(P))` with `γ(P, θ) = c` by bisection.
///
/// The bracket is `[0, (1 − ε)/λ_max]` and the loop stops once its width is
/// below `ε/λ_max`, so `ε` is a tolerance on the normalized variable `θλ_max`.
pub fn solve_theta(p: &Matrix, c: f64, eps: f64) -> Result<f64> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {c}"
        )));
    }
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "bisection width must lie in (0, 0.5), got {eps}"
        )));
    }
    let eig = linalg::sym_eigen(p);
    if !(eig.eigenvalues.min() > 0.0) {
        return Err(Error::NotPositiveDefinite("P"));
    }
    let eigs = eig.eigenvalues.as_slice();
    let lmax = eig.eigenvalues.max();

    let mut lo = 0.0;
    let mut hi = (1.0 - eps) / lmax;
    let reachable = gamma_from_eigs(eigs, hi);
    if reachable < c {
        return Err(Error::ToleranceOutOfRange { c, reachable });
    }
    while (hi - lo) * lmax > eps {
        let mid = 0.5 * (lo + hi);
        if gamma_from_eigs(eigs, mid) < c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `V = (P⁻¹ − θI)⁻¹`, computed as the solution of `(I − θP) V = P`.
pub fn inflate(p: &Matrix, theta: f64) -> Result<Matrix> {
    let n = p.nrows();
    let m = Matrix::identity(n, n) - p * theta;
    let v = linalg::spd_solve(&m, p, "I - θP").map_err(|e| match e {
        Error::NotPositiveDefinite(_) => Error::RiskParameterTooLarge { theta },
        other => other,
    })?;
    Ok(linalg::symmetrize(&v))
}

/// τ-divergence (τ = 1) inflation `V = F exp(θ̄ FᵀF) Fᵀ` with `P = F Fᵀ`.
pub fn tau_divergence_v(p: &Matrix, theta_bar: f64) -> Result<Matrix> {
    if !(theta_bar >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "risk parameter must be nonnegative, got {theta_bar}"
        )));
    }
    let f = linalg::cholesky(p, "P")?.l();
    let e = linalg::expm(&((f.transpose() * &f) * theta_bar))?;
    Ok(linalg::symmetrize(&(&f * e * f.transpose())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Vector;
    use approx::assert_relative_eq;

    fn belief(mean: f64, var: f64) -> GaussianBelief {
        GaussianBelief::new(Vector::from_element(1, mean), Matrix::from_element(1, 1, var)).unwrap()
    }

    /// Dense scan of the scalar γ on (0, 1/λ), refined by repeated grid
    /// narrowing, independent of the bisection code path.
    fn scan_root(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let n = 10_000;
        for _ in 0..6 {
            let h = (hi - lo) / n as f64;
            let mut prev = lo;
            for i in 1..=n {
                let x = if i == n { hi } else { lo + i as f64 * h };
                if f(x) >= 0.0 {
                    lo = prev;
                    hi = x;
                    break;
                }
                prev = x;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_gaussian(&belief(0.3, 2.0), &belief(0.3, 2.0)).unwrap(), 0.0);
        let expect = 0.5 * (2.0 - 1.0 - 2f64.ln());
        assert_relative_eq!(kl_gaussian(&belief(0.0, 2.0), &belief(0.0, 1.0)).unwrap(), expect, epsilon = 1e-15);
        assert_relative_eq!(expect, 0.153_426, epsilon = 1e-6);
        assert_relative_eq!(kl_gaussian(&belief(1.0, 1.0), &belief(0.0, 1.0)).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn kl_rejects_singular_nominal() {
        let sing = GaussianBelief::new(Vector::zeros(1), Matrix::zeros(1, 1)).unwrap();
        assert!(matches!(kl_gaussian(&belief(0.0, 1.0), &sing), Err(Error::Singular(_))));
    }

    #[test]
    fn gamma_examples() {
        let p = Matrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        assert_eq!(gamma(&p, 0.0).unwrap(), 0.0);
        let g1 = gamma(&Matrix::from_element(1, 1, 1.0), 0.5).unwrap();
        assert_relative_eq!(g1, 0.5f64.ln() + 2.0 - 1.0, epsilon = 1e-15);
        assert_relative_eq!(g1, 0.306_853, epsilon = 1e-6);
        let g2 = gamma(&Matrix::identity(2, 2), 0.5).unwrap();
        assert_relative_eq!(g2, 0.613_706, epsilon = 1e-6);
    }

    #[test]
    fn gamma_domain() {
        let p = Matrix::from_element(1, 1, 2.0);
        assert!(matches!(gamma(&p, 0.5), Err(Error::ThetaOutOfDomain { .. })));
        assert!(matches!(gamma(&p, -0.1), Err(Error::ThetaOutOfDomain { .. })));
    }

    #[test]
    fn theta_scalar_matches_scan() {
        let scalar = |t: f64| (1.0 - t).ln() + 1.0 / (1.0 - t) - 1.0 - 0.1;
        let oracle = scan_root(scalar, 0.0, 1.0 - 1e-12);
        assert_relative_eq!(oracle, 0.3404, epsilon = 1e-4);
        let theta = solve_theta(&Matrix::from_element(1, 1, 1.0), 0.1, DEFAULT_BISECTION_EPS).unwrap();
        assert_relative_eq!(theta, oracle, epsilon = 1e-8);
    }

    #[test]
    fn theta_scaled_identity_matches_scan() {
        let f = |t: f64| 2.0 * ((1.0 - 2.0 * t).ln() + 1.0 / (1.0 - 2.0 * t) - 1.0) - 0.1;
        let oracle = scan_root(f, 0.0, 0.5 - 1e-12);
        let theta = solve_theta(&(Matrix::identity(2, 2) * 2.0), 0.1, DEFAULT_BISECTION_EPS).unwrap();
        assert_relative_eq!(theta, oracle, epsilon = 1e-8);
    }

    #[test]
    fn theta_tiny_tolerance() {
        let theta = solve_theta(&Matrix::from_element(1, 1, 1.0), 1e-12, DEFAULT_BISECTION_EPS).unwrap();
        assert!(theta <= 1e-5);
    }

    #[test]
    fn theta_out_of_range() {
        let p = Matrix::from_element(1, 1, 1.0);
        assert!(matches!(
            solve_theta(&p, 1e10, 1e-9),
            Err(Error::ToleranceOutOfRange { .. })
        ));
        assert!(solve_theta(&p, 0.0, 1e-9).is_err());
    }

    #[test]
    fn inflate_scalar() {
        let v = inflate(&Matrix::from_element(1, 1, 1.0), 0.5).unwrap();
        assert_relative_eq!(v[(0, 0)], 2.0, epsilon = 1e-15);
        assert!(matches!(
            inflate(&Matrix::from_element(1, 1, 2.0), 0.6),
            Err(Error::RiskParameterTooLarge { .. })
        ));
    }

    #[test]
    fn tau_examples() {
        let p = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        assert_relative_eq!(tau_divergence_v(&p, 0.0).unwrap(), p, epsilon = 1e-15);
        let v = tau_divergence_v(&Matrix::from_element(1, 1, 1.0), 0.1).unwrap();
        assert_relative_eq!(v[(0, 0)], 0.1f64.exp(), epsilon = 1e-14);
        assert_relative_eq!(v[(0, 0)], 1.105_171, epsilon = 1e-6);
        let v = tau_divergence_v(&Matrix::from_element(1, 1, 4.0), 0.1).unwrap();
        assert_relative_eq!(v[(0, 0)], 4.0 * 0.4f64.exp(), epsilon = 1e-13);
        assert_relative_eq!(v[(0, 0)], 5.967_30, epsilon = 1e-5);
        assert!(tau_divergence_v(&Matrix::from_element(1, 1, -1.0), 0.1).is_err());
    }
}
