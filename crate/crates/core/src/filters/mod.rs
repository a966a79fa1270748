//! One-step state estimators sharing a Kalman-like recursion.
//!
//! Every variant runs the same predictor/corrector pair
//!
//! ```text
//! x̂_{t|t}   = x̂_{t|t-1} + L_t (y_t − C x̂_{t|t-1})
//! x̂_{t+1|t} = A x̂_{t|t-1} + K_t (y_t − C x̂_{t|t-1}) + B u_t
//! L_t = V_t Cᵀ (C V_t Cᵀ + D Dᵀ)⁻¹,   K_t = A L_t
//! P_{t+1} = A V_t Aᵀ − K_t (C V_t Cᵀ + D Dᵀ) K_tᵀ + G Gᵀ
//! ```
//!
//! and differs only in how the least-favorable covariance `V_t` is obtained
//! from the nominal `P_t`; see [`FilterVariant`].

mod divergence;
mod static_update;
mod steady;

use serde::{Deserialize, Serialize};

pub use divergence::{
    gamma, inflate, kl_gaussian, solve_theta, tau_divergence_v, DEFAULT_BISECTION_EPS,
};
pub use static_update::{one_step_joint, static_robust_update, suggest_tolerance, StaticJoint, StaticRobustSolution};
pub use steady::{steady_state, SteadyState};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::model::LinearModel;

/// How `V_t` is derived from `P_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FilterVariant {
    /// Kalman filter, `V_t = P_t`.
    Standard,
    /// KL-robust filter with tolerance `c`: `V_t = (P_t⁻¹ − θ_t I)⁻¹` where
    /// `θ_t` solves `γ(P_t, θ_t) = c`.
    Robust { c: f64 },
    /// Risk-sensitive filter, `V_t = (P_t⁻¹ − θ̄ I)⁻¹`.
    RiskSensitive { theta_bar: f64 },
    /// τ-divergence variant, `V_t = F exp(θ̄ FᵀF) Fᵀ`, `P_t = F Fᵀ`.
    RiskSensitiveTau { theta_bar: f64 },
}

impl FilterVariant {
    pub fn check(&self) -> Result<()> {
        match *self {
            FilterVariant::Standard => Ok(()),
            FilterVariant::Robust { c } if c >= 0.0 && c.is_finite() => Ok(()),
            FilterVariant::RiskSensitive { theta_bar } | FilterVariant::RiskSensitiveTau { theta_bar }
                if theta_bar >= 0.0 && theta_bar.is_finite() =>
            {
                Ok(())
            }
            other => Err(Error::InvalidParameter(format!("{other:?}: parameter must be nonnegative"))),
        }
    }

    pub fn label(&self) -> String {
        match self {
            FilterVariant::Standard => "standard".into(),
            FilterVariant::Robust { c } => format!("robust(c={c})"),
            FilterVariant::RiskSensitive { theta_bar } => format!("risk_sensitive(theta={theta_bar})"),
            FilterVariant::RiskSensitiveTau { theta_bar } => format!("tau(theta={theta_bar})"),
        }
    }
}

/// Covariance-side quantities of one recursion step. They depend only on
/// `P_t`, never on measurements or inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceStep {
    /// `P_t`
    pub p: Matrix,
    /// `V_t`
    pub v: Matrix,
    /// `θ_t` (0 for the standard filter).
    pub theta: f64,
    /// Innovation covariance `C V_t Cᵀ + D Dᵀ`.
    pub s: Matrix,
    pub l: Matrix,
    pub k: Matrix,
    /// `P_{t+1}`
    pub p_next: Matrix,
}

/// Least-favorable covariance `V` and the θ used to build it.
pub fn least_favorable(p: &Matrix, variant: &FilterVariant, eps: f64) -> Result<(Matrix, f64)> {
    match *variant {
        FilterVariant::Standard => Ok((p.clone(), 0.0)),
        FilterVariant::Robust { c: 0.0 } => Ok((p.clone(), 0.0)),
        FilterVariant::Robust { c } => {
            let theta = solve_theta(p, c, eps)?;
            Ok((inflate(p, theta)?, theta))
        }
        FilterVariant::RiskSensitive { theta_bar } => {
            if theta_bar < 0.0 {
                return Err(Error::InvalidParameter(format!("risk parameter {theta_bar} < 0")));
            }
            Ok((inflate(p, theta_bar)?, theta_bar))
        }
        FilterVariant::RiskSensitiveTau { theta_bar } => Ok((tau_divergence_v(p, theta_bar)?, theta_bar)),
    }
}

/// Advances the covariance recursion by one step.
pub fn covariance_step(model: &LinearModel, variant: &FilterVariant, p: &Matrix) -> Result<CovarianceStep> {
    let (v, theta) = least_favorable(p, variant, DEFAULT_BISECTION_EPS)?;
    if linalg::cholesky(&v, "V").is_err() {
        return Err(Error::NotPositiveDefinite("least-favorable covariance V"));
    }
    let s = linalg::symmetrize(&(&model.c * &v * model.c.transpose() + model.innovation_noise()));
    let chol = linalg::cholesky(&s, "innovation covariance").map_err(|_| Error::Singular("innovation covariance"))?;
    let l = chol.solve(&(&model.c * &v)).transpose();
    let k = &model.a * &l;
    let p_next = &model.a * &v * model.a.transpose() - &k * &s * k.transpose() + model.process_noise();
    let p_next = linalg::symmetrize(&p_next);
    if !linalg::is_finite(&p_next) {
        return Err(Error::NonFinite("P_{t+1}"));
    }
    Ok(CovarianceStep {
        p: p.clone(),
        v,
        theta,
        s,
        l,
        k,
        p_next,
    })
}

/// Filter state between steps.
///
/// `x_pred` and `p` are the prior for the next measurement (`x̂_{t|t-1}`,
/// `P_t`); `v`, `theta`, `l`, `k` are the values used in the most recent
/// step (`V = P`, zero gains before the first step).
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub x_pred: Vector,
    pub p: Matrix,
    pub v: Matrix,
    pub theta: f64,
    pub l: Matrix,
    pub k: Matrix,
    pub t: usize,
}

impl FilterState {
    /// Initial conditions `x̂_{0|-1} = x̄₀`, `P_0 = P̄₀`; `p0` must be positive definite.
    pub fn new(x0: Vector, p0: Matrix, outputs: usize) -> Result<Self> {
        let n = x0.len();
        if p0.nrows() != n || p0.ncols() != n {
            return Err(Error::Dimension(format!("P0 is {}x{}, state has {n} entries", p0.nrows(), p0.ncols())));
        }
        linalg::cholesky(&p0, "P0")?;
        let p0 = linalg::symmetrize(&p0);
        Ok(Self {
            x_pred: x0,
            v: p0.clone(),
            p: p0,
            theta: 0.0,
            l: Matrix::zeros(n, outputs),
            k: Matrix::zeros(n, outputs),
            t: 0,
        })
    }
}

/// Result of the measurement update, before the input is known.
#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    /// `x̂_{t|t}`
    pub x_filt: Vector,
    /// `y_t − C x̂_{t|t-1}`
    pub innovation: Vector,
    pub cov: CovarianceStep,
    x_pred: Vector,
    t: usize,
}

impl Correction {
    /// Time update with the applied input `u_t`.
    pub fn predict(&self, model: &LinearModel, u: &Vector) -> Result<FilterState> {
        if u.len() != model.b.ncols() {
            return Err(Error::Dimension(format!("input has {} entries, expected {}", u.len(), model.b.ncols())));
        }
        let x_pred = &model.a * &self.x_pred + &self.cov.k * &self.innovation + &model.b * u;
        Ok(FilterState {
            x_pred,
            p: self.cov.p_next.clone(),
            v: self.cov.v.clone(),
            theta: self.cov.theta,
            l: self.cov.l.clone(),
            k: self.cov.k.clone(),
            t: self.t + 1,
        })
    }
}

/// Measurement update for any variant.
pub fn measurement_update(
    model: &LinearModel,
    variant: &FilterVariant,
    st: &FilterState,
    y: &Vector,
) -> Result<Correction> {
    if y.len() != model.c.nrows() || st.x_pred.len() != model.a.nrows() {
        return Err(Error::Dimension(format!(
            "measurement of length {} / state of length {} for a model with p={}, n={}",
            y.len(),
            st.x_pred.len(),
            model.c.nrows(),
            model.a.nrows()
        )));
    }
    let cov = covariance_step(model, variant, &st.p)?;
    let innovation = y - &model.c * &st.x_pred;
    let x_filt = &st.x_pred + &cov.l * &innovation;
    Ok(Correction {
        x_filt,
        innovation,
        cov,
        x_pred: st.x_pred.clone(),
        t: st.t,
    })
}

/// Full step (update then predict) for any variant.
pub fn filter_step(
    model: &LinearModel,
    variant: &FilterVariant,
    st: &FilterState,
    y: &Vector,
    u: &Vector,
) -> Result<(Vector, FilterState)> {
    let corr = measurement_update(model, variant, st, y)?;
    let next = corr.predict(model, u)?;
    Ok((corr.x_filt, next))
}

pub fn kalman_step(model: &LinearModel, st: &FilterState, y: &Vector, u: &Vector) -> Result<(Vector, FilterState)> {
    filter_step(model, &FilterVariant::Standard, st, y, u)
}

pub fn robust_step(model: &LinearModel, st: &FilterState, y: &Vector, u: &Vector, c: f64) -> Result<(Vector, FilterState)> {
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {c}")));
    }
    filter_step(model, &FilterVariant::Robust { c }, st, y, u)
}

pub fn risk_sensitive_step(
    model: &LinearModel,
    st: &FilterState,
    y: &Vector,
    u: &Vector,
    theta_bar: f64,
) -> Result<(Vector, FilterState)> {
    filter_step(model, &FilterVariant::RiskSensitive { theta_bar }, st, y, u)
}

/// One row of an exported filter trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub x_pred: Vec<f64>,
    pub p_diag: Vec<f64>,
    pub v_diag: Vec<f64>,
    pub theta: f64,
    pub l_norm: f64,
    pub k_norm: f64,
}

impl TraceRow {
    /// Row for step `t`: the prior `x̂_{t|t-1}` together with the
    /// covariance quantities computed from it.
    pub fn from_correction(st: &FilterState, corr: &Correction) -> Self {
        Self {
            t: st.t,
            x_pred: st.x_pred.iter().copied().collect(),
            p_diag: corr.cov.p.diagonal().iter().copied().collect(),
            v_diag: corr.cov.v.diagonal().iter().copied().collect(),
            theta: corr.cov.theta,
            l_norm: corr.cov.l.norm(),
            k_norm: corr.cov.k.norm(),
        }
    }
}

/// Writes rows as CSV: `t, x_pred_*, p_*, v_*, theta, l_norm, k_norm`.
pub fn write_trace<W: std::io::Write>(rows: &[TraceRow], n: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((0..n).map(|i| format!("x_pred_{i}")));
    header.extend((0..n).map(|i| format!("p_{i}{i}")));
    header.extend((0..n).map(|i| format!("v_{i}{i}")));
    header.extend(["theta", "l_norm", "k_norm"].map(String::from));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.t.to_string()];
        rec.extend(r.x_pred.iter().chain(&r.p_diag).chain(&r.v_diag).map(|v| v.to_string()));
        rec.extend([r.theta, r.l_norm, r.k_norm].map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("filter trace", e))?;
    Ok(())
}
