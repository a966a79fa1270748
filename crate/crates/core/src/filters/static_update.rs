//! Static minimax estimation over a KL ball, and the tolerance heuristic.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::model::{GaussianBelief, LinearModel};

use super::divergence::{inflate, kl_gaussian, solve_theta, DEFAULT_BISECTION_EPS};

/// Nominal Gaussian density of `z = [x; y]`, partitioned conformably.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticJoint {
    pub m_x: Vector,
    pub m_y: Vector,
    pub k_x: Matrix,
    pub k_xy: Matrix,
    pub k_y: Matrix,
}

impl StaticJoint {
    pub fn from_belief(z: &GaussianBelief, n: usize) -> Result<Self> {
        let d = z.dim();
        if n == 0 || n >= d {
            return Err(Error::Dimension(format!("cannot split a {d}-dim density at {n}")));
        }
        let p = d - n;
        Ok(Self {
            m_x: z.mean.rows(0, n).into_owned(),
            m_y: z.mean.rows(n, p).into_owned(),
            k_x: z.cov.view((0, 0), (n, n)).into_owned(),
            k_xy: z.cov.view((0, n), (n, p)).into_owned(),
            k_y: z.cov.view((n, n), (p, p)).into_owned(),
        })
    }

    pub fn to_belief(&self) -> Result<GaussianBelief> {
        assemble(&self.m_x, &self.m_y, &self.k_x, &self.k_xy, &self.k_y)
    }
}

fn assemble(m_x: &Vector, m_y: &Vector, k_x: &Matrix, k_xy: &Matrix, k_y: &Matrix) -> Result<GaussianBelief> {
    let (n, p) = (m_x.len(), m_y.len());
    if k_x.shape() != (n, n) || k_xy.shape() != (n, p) || k_y.shape() != (p, p) {
        return Err(Error::Dimension("joint blocks inconsistent with means".into()));
    }
    let mut mean = Vector::zeros(n + p);
    mean.rows_mut(0, n).copy_from(m_x);
    mean.rows_mut(n, p).copy_from(m_y);
    let mut cov = Matrix::zeros(n + p, n + p);
    cov.view_mut((0, 0), (n, n)).copy_from(k_x);
    cov.view_mut((0, n), (n, p)).copy_from(k_xy);
    cov.view_mut((n, 0), (p, n)).copy_from(&k_xy.transpose());
    cov.view_mut((n, n), (p, p)).copy_from(k_y);
    GaussianBelief::new(mean, linalg::symmetrize(&cov))
}

/// Solution of the static minimax problem.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticRobustSolution {
    /// `K_xy K_y⁻¹`
    pub gain: Matrix,
    /// `m_x − gain · m_y`, so that `g(y) = gain · y + offset`.
    pub offset: Vector,
    /// Nominal posterior covariance `K_x − K_xy K_y⁻¹ K_yx`.
    pub p: Matrix,
    /// Least-favorable posterior covariance `(P⁻¹ − θI)⁻¹`.
    pub v: Matrix,
    pub theta: f64,
    pub nominal: GaussianBelief,
    /// Least-favorable joint: same mean and cross/`y` blocks, `K̃_x = V + K_xy K_y⁻¹ K_yx`.
    pub tilde: GaussianBelief,
}

impl StaticRobustSolution {
    pub fn estimate(&self, y: &Vector) -> Vector {
        &self.gain * y + &self.offset
    }
}

/// Minimax estimator of `x` from `y` over `{f̃ : D(f̃ ‖ f) ≤ c}`.
///
/// `c` is the radius in KL units. Since `D(f̃ ‖ f) = γ(P, θ)/2` for the
/// least-favorable density, θ solves `γ(P, θ) = 2c`.
pub fn static_robust_update(joint: &StaticJoint, c: f64) -> Result<StaticRobustSolution> {
    let nominal = joint.to_belief()?;
    let chol = linalg::cholesky(&joint.k_y, "K_y").map_err(|_| Error::Singular("K_y"))?;
    let gain = chol.solve(&joint.k_xy.transpose()).transpose();
    let offset = &joint.m_x - &gain * &joint.m_y;
    let explained = linalg::symmetrize(&(&gain * joint.k_xy.transpose()));
    let p = linalg::symmetrize(&(&joint.k_x - &explained));

    let (v, theta) = if c == 0.0 {
        (p.clone(), 0.0)
    } else {
        let theta = solve_theta(&p, 2.0 * c, DEFAULT_BISECTION_EPS)?;
        (inflate(&p, theta)?, theta)
    };
    let k_x_tilde = &v + &explained;
    let tilde = assemble(&joint.m_x, &joint.m_y, &k_x_tilde, &joint.k_xy, &joint.k_y)?;
    Ok(StaticRobustSolution {
        gain,
        offset,
        p,
        v,
        theta,
        nominal,
        tilde,
    })
}

/// Conditional density of `z_t = [x_{t+1}; y_t]` given past measurements,
/// under `model`, when the prior is `N(x_pred, p)` and the input is `u`.
pub fn one_step_joint(model: &LinearModel, x_pred: &Vector, p: &Matrix, u: &Vector) -> Result<GaussianBelief> {
    let m_x = &model.a * x_pred + &model.b * u;
    let m_y = &model.c * x_pred;
    let k_x = &model.a * p * model.a.transpose() + model.process_noise();
    let k_xy = &model.a * p * model.c.transpose() + &model.g * model.d.transpose();
    let k_y = &model.c * p * model.c.transpose() + model.innovation_noise();
    assemble(&m_x, &m_y, &linalg::symmetrize(&k_x), &k_xy, &linalg::symmetrize(&k_y))
}

/// Initial guess for the tolerance: the mean of `D(f̃_t ‖ f_t)` over the first
/// `t_max` pairs `(actual, nominal)`.
///
/// The result is in KL units. The filter's `c` enters through `γ(P, θ) = c`,
/// which corresponds to a KL radius of `c/2`.
pub fn suggest_tolerance(pairs: &[(GaussianBelief, GaussianBelief)], t_max: usize) -> Result<f64> {
    let used = &pairs[..t_max.min(pairs.len())];
    if used.is_empty() {
        return Err(Error::InvalidParameter("empty trajectory".into()));
    }
    let total = used
        .iter()
        .map(|(actual, nominal)| kl_gaussian(actual, nominal))
        .sum::<Result<f64>>()?;
    Ok(total / used.len() as f64)
}
