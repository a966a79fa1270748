#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;
use robust_mpc::linalg::{self, Matrix, Vector};
use robust_mpc::LinearModel;

pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_matrix<R: Rng>(rng: &mut R, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| normal(rng))
}

pub fn random_vector<R: Rng>(rng: &mut R, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| normal(rng))
}

/// `M Mᵀ + floor·I`
pub fn random_spd<R: Rng>(rng: &mut R, n: usize, floor: f64) -> Matrix {
    let m = random_matrix(rng, n, n);
    linalg::symmetrize(&(&m * m.transpose() + Matrix::identity(n, n) * floor))
}

/// Random model with `ρ(A) = radius`, `G = [G_x 0]`, `D = [0 D_y]`.
pub fn random_model<R: Rng>(rng: &mut R, n: usize, q: usize, p: usize, radius: f64) -> LinearModel {
    let mut a = random_matrix(rng, n, n);
    let rho = linalg::spectral_radius(&a).max(1e-3);
    a *= radius / rho;
    let b = random_matrix(rng, n, q);
    let c = random_matrix(rng, p, n);
    let mut g = Matrix::zeros(n, n + p);
    g.view_mut((0, 0), (n, n)).copy_from(&(random_matrix(rng, n, n) * 0.5));
    let mut d = Matrix::zeros(p, n + p);
    let dy = random_matrix(rng, p, p) * 0.2 + Matrix::identity(p, p);
    d.view_mut((0, n), (p, p)).copy_from(&dy);
    LinearModel::new(a, b, c, d, g).unwrap()
}

/// Simulates `steps` samples of the model with unit noise and random inputs.
pub fn simulate_model<R: Rng>(rng: &mut R, model: &LinearModel, steps: usize) -> (Vec<Vector>, Vec<Vector>) {
    let (n, q, m) = (model.a.nrows(), model.b.ncols(), model.g.ncols());
    let mut x = random_vector(rng, n);
    let mut ys = Vec::with_capacity(steps);
    let mut us = Vec::with_capacity(steps);
    for _ in 0..steps {
        let v = random_vector(rng, m);
        let u = random_vector(rng, q);
        ys.push(&model.c * &x + &model.d * &v);
        x = &model.a * &x + &model.b * &u + &model.g * &v;
        us.push(u);
    }
    (ys, us)
}

use robust_mpc::mpc::{CostForm, ThetaConvention};
use robust_mpc::MpcConfig;

/// Receding-horizon cost of the input plan `plan` (`Hu` stacked inputs),
/// evaluated by rolling the model forward rather than through `Θ`.
pub fn rollout_cost(model: &LinearModel, cfg: &MpcConfig, x0: &Vector, refs: &Vector, u_prev: &Vector, plan: &Vector) -> f64 {
    let (q, p) = (model.b.ncols(), model.c.nrows());
    let input = |k: usize| -> Vector {
        if k < cfg.hu {
            plan.rows(k * q, q).into_owned()
        } else {
            match cfg.theta_convention {
                ThetaConvention::ToeplitzZeroTail => Vector::zeros(q),
                ThetaConvention::HeldInput => plan.rows((cfg.hu - 1) * q, q).into_owned(),
            }
        }
    };
    let mut x = x0.clone();
    let mut cost = 0.0;
    for k in 0..cfg.hp {
        x = &model.a * &x + &model.b * input(k);
        let e = refs.rows(k * p, p) - &model.c * &x;
        cost += (e.transpose() * &cfg.q_weight * &e)[(0, 0)];
    }
    let mut prev = u_prev.clone();
    for k in 0..cfg.hu {
        let u = input(k);
        let w = match cfg.cost_form {
            CostForm::InputMagnitude => u.clone(),
            CostForm::InputIncrement => &u - &prev,
        };
        cost += (w.transpose() * &cfg.r_weight * &w)[(0, 0)];
        prev = u;
    }
    cost
}

/// First move of the minimizer of [`rollout_cost`], found by one Newton step
/// from zero with a central-difference gradient and Hessian. Exact up to
/// rounding because the cost is quadratic.
pub fn numeric_first_move(model: &LinearModel, cfg: &MpcConfig, x0: &Vector, refs: &Vector, u_prev: &Vector) -> Vector {
    let q = model.b.ncols();
    let dim = q * cfg.hu;
    let h = 1.0;
    let j = |v: &Vector| rollout_cost(model, cfg, x0, refs, u_prev, v);
    let e = |i: usize| {
        let mut v = Vector::zeros(dim);
        v[i] = h;
        v
    };
    let grad = Vector::from_fn(dim, |i, _| (j(&e(i)) - j(&-e(i))) / (2.0 * h));
    let hess = Matrix::from_fn(dim, dim, |a, b| {
        let (ea, eb) = (e(a), e(b));
        (j(&(&ea + &eb)) - j(&(&ea - &eb)) - j(&(&eb - &ea)) + j(&-(&ea + &eb))) / (4.0 * h * h)
    });
    let step = hess.lu().solve(&-grad).expect("Hessian of a strictly convex quadratic");
    step.rows(0, q).into_owned()
}
