//! Unconstrained receding-horizon control with a closed-form law, and the
//! closed-loop driver that couples it with any filter variant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{measurement_update, FilterState, FilterVariant};
use crate::linalg::{self, Matrix, Vector};
use crate::model::LinearModel;

/// Layout of the dynamic matrix `Θ` past the control horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaConvention {
    /// Block `(i, j)` is `C A^{i−j} B` for `i ≥ j`, zero otherwise.
    #[default]
    ToeplitzZeroTail,
    /// As above, but the last input block is held for the rest of the
    /// prediction horizon, so the last block column accumulates
    /// `Σ_{k=0}^{i−Hu} C A^k B`.
    HeldInput,
}

/// What the input weight `R` penalizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostForm {
    /// `‖u‖²_R`, the closed form `[I 0 …](ΘᵀQΘ + R)⁻¹ΘᵀQ(r − Ψx̂)`.
    #[default]
    InputMagnitude,
    /// `‖Δu‖²_R` with `Δu_0 = u_0 − u_{t−1}`.
    InputIncrement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcConfig {
    pub hp: usize,
    pub hu: usize,
    /// Output-error weight per prediction step (`p × p`).
    #[serde(with = "linalg::serde_rows")]
    pub q_weight: Matrix,
    /// Input weight per control step (`q × q`).
    #[serde(with = "linalg::serde_rows")]
    pub r_weight: Matrix,
    #[serde(default)]
    pub theta_convention: ThetaConvention,
    #[serde(default)]
    pub cost_form: CostForm,
}

impl MpcConfig {
    /// Scalar weights for a single-input single-output plant.
    pub fn siso(hp: usize, hu: usize, q: f64, r: f64) -> Self {
        Self {
            hp,
            hu,
            q_weight: Matrix::from_element(1, 1, q),
            r_weight: Matrix::from_element(1, 1, r),
            theta_convention: ThetaConvention::default(),
            cost_form: CostForm::default(),
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.hu == 0 || self.hu > self.hp {
            return Err(Error::InvalidParameter(format!(
                "horizons must satisfy 1 <= Hu <= Hp, got Hp={}, Hu={}",
                self.hp, self.hu
            )));
        }
        if !self.q_weight.is_square() || linalg::min_eigenvalue(&self.q_weight) < -1e-12 {
            return Err(Error::NotPositiveDefinite("Q weight must be PSD"));
        }
        if !self.r_weight.is_square() || linalg::cholesky(&self.r_weight, "R weight").is_err() {
            return Err(Error::NotPositiveDefinite("R weight must be PD"));
        }
        Ok(())
    }
}

/// Stacked prediction matrices and the precomputed first-move gains.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorMatrices {
    pub hp: usize,
    pub hu: usize,
    pub cost_form: CostForm,
    /// `[CA; CA²; …; CA^{Hp}]`
    pub psi: Matrix,
    pub theta: Matrix,
    pub q_blk: Matrix,
    pub r_blk: Matrix,
    /// First `q` rows of `H⁻¹ΘᵀQ` (`q × p·Hp`).
    pub reference_gain: Matrix,
    /// `reference_gain · Ψ` (`q × n`).
    pub gain_row: Matrix,
    /// Weight of the previous input in the increment form, zero otherwise.
    pub prev_input_gain: Matrix,
}

impl PredictorMatrices {
    pub fn outputs(&self) -> usize {
        self.psi.nrows() / self.hp
    }

    pub fn inputs(&self) -> usize {
        self.gain_row.nrows()
    }

    pub fn states(&self) -> usize {
        self.psi.ncols()
    }
}

fn block_diag(block: &Matrix, count: usize) -> Matrix {
    let (r, c) = block.shape();
    let mut out = Matrix::zeros(r * count, c * count);
    for i in 0..count {
        out.view_mut((i * r, i * c), (r, c)).copy_from(block);
    }
    out
}

pub fn build_predictor(model: &LinearModel, cfg: &MpcConfig) -> Result<PredictorMatrices> {
    cfg.check()?;
    let (n, q, p) = (model.a.nrows(), model.b.ncols(), model.c.nrows());
    if cfg.q_weight.nrows() != p || cfg.r_weight.nrows() != q {
        return Err(Error::Dimension(format!(
            "weights are {}x{} / {}x{}, model has p={p}, q={q}",
            cfg.q_weight.nrows(),
            cfg.q_weight.ncols(),
            cfg.r_weight.nrows(),
            cfg.r_weight.ncols()
        )));
    }
    let (hp, hu) = (cfg.hp, cfg.hu);

    // markov[k] = C A^k B, ca_pow[k] = C A^{k+1}
    let mut markov = Vec::with_capacity(hp);
    let mut ca_pow = Vec::with_capacity(hp);
    let mut c_ak = model.c.clone();
    for _ in 0..hp {
        markov.push(&c_ak * &model.b);
        c_ak = &c_ak * &model.a;
        ca_pow.push(c_ak.clone());
    }

    let mut psi = Matrix::zeros(p * hp, n);
    for (i, blk) in ca_pow.iter().enumerate() {
        psi.view_mut((i * p, 0), (p, n)).copy_from(blk);
    }

    let mut theta = Matrix::zeros(p * hp, q * hu);
    for i in 0..hp {
        for j in 0..hu.min(i + 1) {
            let blk = if cfg.theta_convention == ThetaConvention::HeldInput && j == hu - 1 {
                markov[..=i - j].iter().fold(Matrix::zeros(p, q), |acc, m| acc + m)
            } else {
                markov[i - j].clone()
            };
            theta.view_mut((i * p, j * q), (p, q)).copy_from(&blk);
        }
    }

    let q_blk = block_diag(&cfg.q_weight, hp);
    let r_blk = block_diag(&cfg.r_weight, hu);
    let tq = theta.transpose() * &q_blk;

    let (hessian, prev_map) = match cfg.cost_form {
        CostForm::InputMagnitude => (&tq * &theta + &r_blk, None),
        CostForm::InputIncrement => {
            let mut diff = Matrix::identity(q * hu, q * hu);
            for k in 1..hu {
                diff.view_mut((k * q, (k - 1) * q), (q, q))
                    .copy_from(&(-Matrix::identity(q, q)));
            }
            let mut first = Matrix::zeros(q * hu, q);
            first.view_mut((0, 0), (q, q)).copy_from(&Matrix::identity(q, q));
            let dtr = diff.transpose() * &r_blk;
            (&tq * &theta + &dtr * &diff, Some(dtr * first))
        }
    };
    let chol = linalg::cholesky(&linalg::symmetrize(&hessian), "MPC Hessian")
        .map_err(|_| Error::Singular("ΘᵀQΘ + R"))?;
    let solved = chol.solve(&tq);
    let reference_gain = solved.rows(0, q).into_owned();
    let gain_row = &reference_gain * &psi;
    let prev_input_gain = match prev_map {
        Some(m) => chol.solve(&m).rows(0, q).into_owned(),
        None => Matrix::zeros(q, q),
    };

    Ok(PredictorMatrices {
        hp,
        hu,
        cost_form: cfg.cost_form,
        psi,
        theta,
        q_blk,
        r_blk,
        reference_gain,
        gain_row,
        prev_input_gain,
    })
}

/// `u_{t|t} = [I 0 …](ΘᵀQΘ + R)⁻¹ΘᵀQ(r_t − Ψ x̂_{t|t})`.
///
/// For [`CostForm::InputIncrement`] the previous input is taken as zero; use
/// [`control_law_with_previous`] to supply it.
pub fn control_law(pm: &PredictorMatrices, x_filt: &Vector, refs: &Vector) -> Result<Vector> {
    control_law_with_previous(pm, x_filt, refs, &Vector::zeros(pm.inputs()))
}

pub fn control_law_with_previous(
    pm: &PredictorMatrices,
    x_filt: &Vector,
    refs: &Vector,
    u_prev: &Vector,
) -> Result<Vector> {
    if x_filt.len() != pm.states() || refs.len() != pm.psi.nrows() || u_prev.len() != pm.inputs() {
        return Err(Error::Dimension(format!(
            "state {} / reference window {} / previous input {} for predictor with n={}, p·Hp={}, q={}",
            x_filt.len(),
            refs.len(),
            u_prev.len(),
            pm.states(),
            pm.psi.nrows(),
            pm.inputs()
        )));
    }
    Ok(&pm.reference_gain * refs - &pm.gain_row * x_filt + &pm.prev_input_gain * u_prev)
}

/// Stacks `[r_{t+1}; …; r_{t+Hp}]`, holding the last value past the end.
pub fn reference_window(refs: &[Vector], t: usize, hp: usize) -> Vector {
    assert!(!refs.is_empty(), "empty reference trajectory");
    let p = refs[0].len();
    let mut out = Vector::zeros(p * hp);
    for k in 0..hp {
        let idx = (t + 1 + k).min(refs.len() - 1);
        out.rows_mut(k * p, p).copy_from(&refs[idx]);
    }
    out
}

/// Something that can be measured and driven, one sample at a time.
pub trait Plant {
    /// Measurement `y_t` of the current state.
    fn output(&mut self) -> Result<Vector>;
    /// Holds `u` for one sample and advances to `t + 1`.
    fn apply(&mut self, u: &Vector) -> Result<()>;
}

/// Signals recorded by [`closed_loop`], one entry per sample.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClosedLoopTrace {
    pub r: Vec<Vector>,
    pub y: Vec<Vector>,
    pub u: Vec<Vector>,
    /// `x̂_{t|t}`
    pub x_filt: Vec<Vector>,
    /// `C x̂_{t|t}`
    pub y_hat: Vec<Vector>,
    pub theta: Vec<f64>,
}

impl ClosedLoopTrace {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// CSV with columns `t_seconds, r, y, u, y_hat, x_hat_*, theta`.
    /// Vector-valued signals get an index suffix when they have more than one entry.
    pub fn write_csv<W: std::io::Write>(&self, dt: f64, out: W) -> Result<()> {
        fn names(base: &str, len: usize) -> Vec<String> {
            if len == 1 {
                vec![base.to_string()]
            } else {
                (0..len).map(|i| format!("{base}_{i}")).collect()
            }
        }
        let first = |v: &Vec<Vector>| v.first().map_or(1, |x| x.len());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t_seconds".to_string()];
        header.extend(names("r", first(&self.r)));
        header.extend(names("y", first(&self.y)));
        header.extend(names("u", first(&self.u)));
        header.extend(names("y_hat", first(&self.y_hat)));
        header.extend((0..first(&self.x_filt)).map(|i| format!("x_hat_{i}")));
        header.push("theta".into());
        w.write_record(&header)?;
        for t in 0..self.len() {
            let mut rec = vec![(t as f64 * dt).to_string()];
            for sig in [&self.r, &self.y, &self.u, &self.y_hat, &self.x_filt] {
                rec.extend(sig[t].iter().map(|v| v.to_string()));
            }
            rec.push(self.theta[t].to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("closed-loop trace", e))?;
        Ok(())
    }
}

/// Runs the receding-horizon loop for `steps` samples.
///
/// Each sample: measure `y_t`; measurement update of the chosen filter;
/// compute `u_{t|t}` from `x̂_{t|t}` and the reference window; apply it to the
/// plant; time update of the filter.
#[allow(clippy::too_many_arguments)]
pub fn closed_loop<P: Plant + ?Sized>(
    plant: &mut P,
    model: &LinearModel,
    pm: &PredictorMatrices,
    variant: &FilterVariant,
    init: FilterState,
    refs: &[Vector],
    steps: usize,
) -> Result<(ClosedLoopTrace, FilterState)> {
    variant.check()?;
    if refs.is_empty() {
        return Err(Error::InvalidParameter("empty reference trajectory".into()));
    }
    let mut st = init;
    let mut trace = ClosedLoopTrace::default();
    let mut u_prev = Vector::zeros(pm.inputs());
    for t in 0..steps {
        let y = plant.output().map_err(|e| e.at_step(t))?;
        let corr = measurement_update(model, variant, &st, &y).map_err(|e| e.at_step(t))?;
        let window = reference_window(refs, t, pm.hp);
        let u = control_law_with_previous(pm, &corr.x_filt, &window, &u_prev).map_err(|e| e.at_step(t))?;
        plant.apply(&u).map_err(|e| e.at_step(t))?;
        st = corr.predict(model, &u).map_err(|e| e.at_step(t))?;

        trace.r.push(refs[t.min(refs.len() - 1)].clone());
        trace.y_hat.push(&model.c * &corr.x_filt);
        trace.x_filt.push(corr.x_filt);
        trace.y.push(y);
        trace.u.push(u.clone());
        trace.theta.push(corr.cov.theta);
        u_prev = u;
    }
    Ok((trace, st))
}
