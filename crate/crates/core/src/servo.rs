//! Nonlinear servomechanism: DC motor, gearbox, elastic shaft and load with
//! Coulomb/deadzone friction on both sides.
//!
//! ```text
//! J_l θ̈_l = ρ T_s − β_l θ̇_l − T_fl(θ̇_l)
//! J_m θ̈_m = T_m − T_s − β_m θ̇_m − T_fm(θ̇_m)
//! T_m = K_t I_m,   V = R I_m + L İ_m + K_t θ̇_m
//! T_s = (k_θ/ρ)(θ_m/ρ − θ_l)
//! T_f(ω) = α₀ sgn(ω) + α₁ e^{−α₂|ω|} sgn(ω)
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::model::{zoh_discretize, ContinuousModel, LinearModel};
use crate::mpc::Plant;

/// Physical parameters, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServoParams {
    /// Armature inductance (H); zero makes the current algebraic.
    pub l: f64,
    pub j_m: f64,
    pub beta_m: f64,
    /// Armature resistance (Ω).
    pub r: f64,
    pub k_t: f64,
    pub rho: f64,
    pub k_theta: f64,
    pub j_l: f64,
    pub beta_l: f64,
    /// Load friction `[α₀, α₁, α₂]`.
    pub alpha_l: [f64; 3],
    /// Motor friction `[α₀, α₁, α₂]`.
    pub alpha_m: [f64; 3],
}

impl ServoParams {
    pub fn check(&self) -> Result<()> {
        let positive = [
            ("j_m", self.j_m),
            ("r", self.r),
            ("rho", self.rho),
            ("k_theta", self.k_theta),
            ("j_l", self.j_l),
        ];
        let nonneg = [
            ("l", self.l),
            ("beta_m", self.beta_m),
            ("k_t", self.k_t),
            ("beta_l", self.beta_l),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in nonneg.into_iter().chain(
            self.alpha_l
                .iter()
                .chain(&self.alpha_m)
                .map(|&a| ("friction coefficient", a)),
        ) {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }

    /// Same parameters with both friction triples zeroed.
    pub fn frictionless(mut self) -> Self {
        self.alpha_l = [0.0; 3];
        self.alpha_m = [0.0; 3];
        self
    }
}

/// Nominal values used to build the prediction model.
pub fn default_nominal_params() -> ServoParams {
    ServoParams {
        l: 0.0,
        j_m: 0.5,
        beta_m: 0.1,
        r: 20.0,
        k_t: 10.0,
        rho: 20.0,
        k_theta: 1280.2,
        j_l: 25.0,
        beta_l: 25.0,
        alpha_l: [0.0; 3],
        alpha_m: [0.0; 3],
    }
}

/// Nominal values plus the inductance and friction of the actual plant; the
/// point around which relative errors are applied.
pub fn perturbation_base() -> ServoParams {
    ServoParams {
        l: 0.8,
        alpha_l: [0.5, 10.0, 0.5],
        alpha_m: [0.1, 2.0, 0.5],
        ..default_nominal_params()
    }
}

/// Relative error applied to "reliable" parameters in the reference plant.
pub const EPS_MIN: f64 = 0.05;
/// Relative error applied to the other parameters in the reference plant.
pub const EPS_MAX: f64 = 0.10;

/// The reference "actual" plant: every reliable parameter off by `+EPS_MIN`,
/// the others by `+EPS_MAX`, except the load inertia at `−EPS_MAX`.
pub fn default_real_params() -> ServoParams {
    ServoParams {
        l: 0.8,
        j_m: 0.55,
        beta_m: 0.11,
        r: 21.0,
        k_t: 11.0,
        rho: 21.0,
        k_theta: 1344.21,
        j_l: 22.5,
        beta_l: 27.5,
        alpha_l: [0.5, 10.0, 0.5],
        alpha_m: [0.1, 2.0, 0.5],
    }
}

/// Per-parameter relative errors `δ` (parameter ↦ parameter · (1 + δ)).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RelativeErrors {
    pub r: f64,
    pub rho: f64,
    pub k_theta: f64,
    pub j_m: f64,
    pub beta_m: f64,
    pub k_t: f64,
    pub beta_l: f64,
    pub j_l: f64,
}

impl RelativeErrors {
    /// The signs of the reference plant.
    pub fn reference() -> Self {
        Self {
            r: EPS_MIN,
            rho: EPS_MIN,
            k_theta: EPS_MIN,
            j_m: EPS_MAX,
            beta_m: EPS_MAX,
            k_t: EPS_MAX,
            beta_l: EPS_MAX,
            j_l: -EPS_MAX,
        }
    }
}

pub fn apply_relative_errors(base: &ServoParams, e: &RelativeErrors) -> Result<ServoParams> {
    let out = ServoParams {
        r: base.r * (1.0 + e.r),
        rho: base.rho * (1.0 + e.rho),
        k_theta: base.k_theta * (1.0 + e.k_theta),
        j_m: base.j_m * (1.0 + e.j_m),
        beta_m: base.beta_m * (1.0 + e.beta_m),
        k_t: base.k_t * (1.0 + e.k_t),
        beta_l: base.beta_l * (1.0 + e.beta_l),
        j_l: base.j_l * (1.0 + e.j_l),
        ..*base
    };
    out.check()?;
    Ok(out)
}

/// Half-widths of the uniform relative-error intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    /// For `R`, `ρ`, `k_θ`.
    pub eps_min_range: f64,
    /// For `J_m`, `β_m`, `K_t`, `β_l`.
    pub eps_max_range: f64,
    /// For `J_l`.
    pub j_l_range: f64,
    pub seed: u64,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        Self {
            eps_min_range: 0.10,
            eps_max_range: 0.20,
            j_l_range: 0.80,
            seed: 0,
        }
    }
}

impl PerturbationSpec {
    pub fn check(&self) -> Result<()> {
        for (name, v) in [
            ("eps_min_range", self.eps_min_range),
            ("eps_max_range", self.eps_max_range),
            ("j_l_range", self.j_l_range),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        Ok(())
    }

    pub fn sample(&self) -> RelativeErrors {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut draw = |h: f64| if h == 0.0 { 0.0 } else { rng.random_range(-h..=h) };
        RelativeErrors {
            r: draw(self.eps_min_range),
            rho: draw(self.eps_min_range),
            k_theta: draw(self.eps_min_range),
            j_m: draw(self.eps_max_range),
            beta_m: draw(self.eps_max_range),
            k_t: draw(self.eps_max_range),
            beta_l: draw(self.eps_max_range),
            j_l: draw(self.j_l_range),
        }
    }
}

/// Random plant around `base`; inductance and friction are left untouched.
pub fn perturb_params(base: &ServoParams, spec: &PerturbationSpec) -> Result<ServoParams> {
    spec.check()?;
    apply_relative_errors(base, &spec.sample())
}

/// `sgn` with `sgn(0) = 0`.
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `α₀ sgn(ω) + α₁ e^{−α₂|ω|} sgn(ω)`
pub fn friction_torque(omega: f64, alpha: &[f64; 3]) -> f64 {
    let s = sgn(omega);
    if s == 0.0 {
        return 0.0;
    }
    (alpha[0] + alpha[1] * (-alpha[2] * omega.abs()).exp()) * s
}

/// `[θ_l, ω_l, θ_m, ω_m, I_m]`. With `L = 0` the current is algebraic and
/// `i_m` only records its last value.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlantState {
    pub theta_l: f64,
    pub omega_l: f64,
    pub theta_m: f64,
    pub omega_m: f64,
    pub i_m: f64,
}

impl PlantState {
    fn to_array(self) -> [f64; 5] {
        [self.theta_l, self.omega_l, self.theta_m, self.omega_m, self.i_m]
    }

    fn from_array(a: [f64; 5]) -> Self {
        Self {
            theta_l: a[0],
            omega_l: a[1],
            theta_m: a[2],
            omega_m: a[3],
            i_m: a[4],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Mechanical plus magnetic energy.
    pub fn energy(&self, p: &ServoParams) -> f64 {
        let twist = self.theta_m / p.rho - self.theta_l;
        0.5 * p.j_l * self.omega_l.powi(2)
            + 0.5 * p.j_m * self.omega_m.powi(2)
            + 0.5 * p.k_theta * twist.powi(2)
            + 0.5 * p.l * self.i_m.powi(2)
    }

    /// `[θ_l, ω_l, θ_m, ω_m]`
    pub fn mechanical(&self) -> Vector {
        Vector::from_row_slice(&[self.theta_l, self.omega_l, self.theta_m, self.omega_m])
    }
}

fn armature_current(p: &ServoParams, s: &PlantState, volts: f64) -> f64 {
    if p.l > 0.0 {
        s.i_m
    } else {
        (volts - p.k_t * s.omega_m) / p.r
    }
}

/// Time derivative of the state under armature voltage `volts`.
pub fn dynamics_rhs(p: &ServoParams, s: &PlantState, volts: f64) -> PlantState {
    let t_s = p.k_theta / p.rho * (s.theta_m / p.rho - s.theta_l);
    let i_m = armature_current(p, s, volts);
    let t_m = p.k_t * i_m;
    let load = (p.rho * t_s - p.beta_l * s.omega_l - friction_torque(s.omega_l, &p.alpha_l)) / p.j_l;
    let motor = (t_m - t_s - p.beta_m * s.omega_m - friction_torque(s.omega_m, &p.alpha_m)) / p.j_m;
    let di = if p.l > 0.0 {
        (volts - p.r * s.i_m - p.k_t * s.omega_m) / p.l
    } else {
        0.0
    };
    PlantState {
        theta_l: s.omega_l,
        omega_l: load,
        theta_m: s.omega_m,
        omega_m: motor,
        i_m: di,
    }
}

fn axpy(s: [f64; 5], h: f64, d: [f64; 5]) -> [f64; 5] {
    std::array::from_fn(|i| s[i] + h * d[i])
}

/// Classical RK4 over `t` seconds with `substeps` equal steps, voltage held.
pub fn integrate_step(p: &ServoParams, s: &PlantState, volts: f64, t: f64, substeps: usize) -> Result<PlantState> {
    integrate_observed(p, s, volts, t, substeps, |_| {})
}

/// [`integrate_step`] that also reports the state at every substep boundary.
pub fn integrate_observed(
    p: &ServoParams,
    s: &PlantState,
    volts: f64,
    t: f64,
    substeps: usize,
    mut observe: impl FnMut(&PlantState),
) -> Result<PlantState> {
    if !(t > 0.0) || substeps == 0 {
        return Err(Error::InvalidParameter(format!(
            "integration needs T > 0 and substeps >= 1, got T={t}, substeps={substeps}"
        )));
    }
    let h = t / substeps as f64;
    let f = |x: [f64; 5]| dynamics_rhs(p, &PlantState::from_array(x), volts).to_array();
    let mut x = s.to_array();
    for k in 0..substeps {
        let k1 = f(x);
        let k2 = f(axpy(x, 0.5 * h, k1));
        let k3 = f(axpy(x, 0.5 * h, k2));
        let k4 = f(axpy(x, h, k3));
        x = std::array::from_fn(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        let state = PlantState::from_array(x);
        if !state.is_finite() {
            return Err(Error::Diverged { time: (k + 1) as f64 * h });
        }
        observe(&state);
    }
    let mut out = PlantState::from_array(x);
    if p.l == 0.0 {
        out.i_m = armature_current(p, &out, volts);
    }
    Ok(out)
}

/// `θ_l + noise_std · N(0, 1)`.
pub fn measure<R: Rng + ?Sized>(s: &PlantState, noise_std: f64, rng: &mut R) -> f64 {
    if noise_std == 0.0 {
        return s.theta_l;
    }
    let n: f64 = rng.sample(StandardNormal);
    s.theta_l + noise_std * n
}

/// Noise intensities shared by the prediction model and the simulated plants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Continuous-time intensity of the acceleration disturbances on `ω_l`
    /// and `ω_m`; one sample of length `T` adds `accel_std·√T·N(0,1)` to each.
    pub accel_std: f64,
    /// Standard deviation of the load-angle measurement noise (rad).
    pub meas_std: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            accel_std: 0.01,
            meas_std: 0.01,
        }
    }
}

/// Continuous-time model with friction removed and `L = 0`, state
/// `[θ_l, ω_l, θ_m, ω_m]`, input the armature voltage, output `θ_l`.
///
/// Noise has `m = n + p = 5` channels: `Ḡ = [G_x | 0]`, `D̄ = [0 | σ_y]`.
pub fn continuous_nominal(p: &ServoParams, noise: &NoiseConfig) -> Result<ContinuousModel> {
    p.check()?;
    let (kt, rho) = (p.k_theta, p.rho);
    #[rustfmt::skip]
    let a = Matrix::from_row_slice(4, 4, &[
        0.0, 1.0, 0.0, 0.0,
        -kt / p.j_l, -p.beta_l / p.j_l, kt / (rho * p.j_l), 0.0,
        0.0, 0.0, 0.0, 1.0,
        kt / (rho * p.j_m), 0.0, -kt / (rho * rho * p.j_m), -(p.beta_m + p.k_t * p.k_t / p.r) / p.j_m,
    ]);
    let b = Matrix::from_row_slice(4, 1, &[0.0, 0.0, 0.0, p.k_t / (p.r * p.j_m)]);
    let c = Matrix::from_row_slice(1, 4, &[1.0, 0.0, 0.0, 0.0]);
    let mut g = Matrix::zeros(4, 5);
    g[(1, 1)] = noise.accel_std;
    g[(3, 3)] = noise.accel_std;
    let mut d = Matrix::zeros(1, 5);
    d[(0, 4)] = noise.meas_std;
    ContinuousModel::new(a, b, c, d, g)
}

/// Discretized nominal prediction model.
pub fn nominal_linear_model(p: &ServoParams, noise: &NoiseConfig, t: f64) -> Result<LinearModel> {
    let nominal = ServoParams {
        l: 0.0,
        ..p.frictionless()
    };
    zoh_discretize(&continuous_nominal(&nominal, noise)?, t)
}

/// Nonlinear servomechanism driven by a held voltage each sample.
#[derive(Debug, Clone)]
pub struct ServoPlant {
    pub params: ServoParams,
    pub state: PlantState,
    pub sample_time: f64,
    pub substeps: usize,
    pub noise: NoiseConfig,
    rng: ChaCha8Rng,
    time: f64,
}

impl ServoPlant {
    pub fn new(params: ServoParams, sample_time: f64, substeps: usize, noise: NoiseConfig, seed: u64) -> Result<Self> {
        params.check()?;
        Ok(Self {
            params,
            state: PlantState::default(),
            sample_time,
            substeps,
            noise,
            rng: ChaCha8Rng::seed_from_u64(seed),
            time: 0.0,
        })
    }
}

impl Plant for ServoPlant {
    fn output(&mut self) -> Result<Vector> {
        Ok(Vector::from_element(1, measure(&self.state, self.noise.meas_std, &mut self.rng)))
    }

    fn apply(&mut self, u: &Vector) -> Result<()> {
        let next = integrate_step(&self.params, &self.state, u[0], self.sample_time, self.substeps).map_err(|e| match e {
            Error::Diverged { time } => Error::Diverged { time: self.time + time },
            other => other,
        })?;
        self.state = next;
        if self.noise.accel_std > 0.0 {
            let scale = self.noise.accel_std * self.sample_time.sqrt();
            let wl: f64 = self.rng.sample(StandardNormal);
            let wm: f64 = self.rng.sample(StandardNormal);
            self.state.omega_l += scale * wl;
            self.state.omega_m += scale * wm;
        }
        self.time += self.sample_time;
        Ok(())
    }
}

/// The discrete linear model itself used as a plant, `v_t ~ N(0, I_m)`.
#[derive(Debug, Clone)]
pub struct LinearPlant {
    pub model: LinearModel,
    pub state: Vector,
    rng: ChaCha8Rng,
    noisy: bool,
    pending: Option<Vector>,
}

impl LinearPlant {
    pub fn new(model: LinearModel, x0: Vector, seed: u64, noisy: bool) -> Self {
        Self {
            model,
            state: x0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            noisy,
            pending: None,
        }
    }

    fn noise(&mut self) -> Vector {
        let m = self.model.g.ncols();
        if self.noisy {
            Vector::from_fn(m, |_, _| self.rng.sample(StandardNormal))
        } else {
            Vector::zeros(m)
        }
    }
}

impl Plant for LinearPlant {
    fn output(&mut self) -> Result<Vector> {
        let v = self.noise();
        let y = &self.model.c * &self.state + &self.model.d * &v;
        self.pending = Some(v);
        Ok(y)
    }

    fn apply(&mut self, u: &Vector) -> Result<()> {
        let v = match self.pending.take() {
            Some(v) => v,
            None => self.noise(),
        };
        self.state = &self.model.a * &self.state + &self.model.b * u + &self.model.g * v;
        if !self.state.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("linear plant state"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn friction_examples() {
        let a = [0.5, 10.0, 0.5];
        assert_eq!(friction_torque(0.0, &a), 0.0);
        assert_relative_eq!(friction_torque(0.5, &a), 0.5 + 10.0 * (-0.25f64).exp(), epsilon = 1e-14);
        assert_relative_eq!(friction_torque(0.5, &a), 8.2880, epsilon = 1e-4);
        assert_eq!(friction_torque(-0.5, &a), -friction_torque(0.5, &a));
        assert_relative_eq!(friction_torque(1e3, &a), 0.5, epsilon = 1e-12);
        assert_eq!(sgn(0.0), 0.0);
        assert_eq!(sgn(-0.0), 0.0);
    }

    #[test]
    fn rhs_examples() {
        let p = default_real_params();
        let zero = PlantState::default();
        assert_eq!(dynamics_rhs(&p, &zero, 0.0), PlantState::default());

        let d = dynamics_rhs(&p, &zero, 1.0);
        assert_relative_eq!(d.i_m, 1.25, epsilon = 1e-15);
        assert_eq!(d.omega_l, 0.0);
        assert_eq!(d.omega_m, 0.0);

        let relaxed = PlantState {
            theta_l: 0.3,
            theta_m: 0.3 * p.rho,
            ..Default::default()
        };
        let d = dynamics_rhs(&p, &relaxed, 0.0);
        assert_eq!(d.omega_l, 0.0);
        assert_eq!(d.omega_m, 0.0);
    }

    #[test]
    fn parameter_tables() {
        let n = default_nominal_params();
        assert_eq!((n.l, n.j_m, n.beta_m, n.r, n.k_t), (0.0, 0.5, 0.1, 20.0, 10.0));
        assert_eq!((n.rho, n.k_theta, n.j_l, n.beta_l), (20.0, 1280.2, 25.0, 25.0));
        assert_eq!(n.alpha_l, [0.0; 3]);

        let r = default_real_params();
        let fixed = apply_relative_errors(&perturbation_base(), &RelativeErrors::reference()).unwrap();
        for (a, b) in [
            (r.l, fixed.l),
            (r.j_m, fixed.j_m),
            (r.beta_m, fixed.beta_m),
            (r.r, fixed.r),
            (r.k_t, fixed.k_t),
            (r.rho, fixed.rho),
            (r.k_theta, fixed.k_theta),
            (r.j_l, fixed.j_l),
            (r.beta_l, fixed.beta_l),
        ] {
            assert_relative_eq!(a, b, max_relative = 1e-14);
        }
        assert_eq!(r.alpha_l, fixed.alpha_l);
        assert_eq!(r.alpha_m, fixed.alpha_m);
    }

    #[test]
    fn perturbation_ranges() {
        let base = perturbation_base();
        let zero = PerturbationSpec {
            eps_min_range: 0.0,
            eps_max_range: 0.0,
            j_l_range: 0.0,
            seed: 9,
        };
        assert_eq!(perturb_params(&base, &zero).unwrap(), base);

        for seed in 0..500 {
            let spec = PerturbationSpec { seed, ..Default::default() };
            let p = perturb_params(&base, &spec).unwrap();
            assert!((5.0..=45.0).contains(&p.j_l));
            assert!((18.0..=22.0).contains(&p.r));
            assert_eq!(p.alpha_l, base.alpha_l);
            assert_eq!(p.l, base.l);
            assert_eq!(perturb_params(&base, &spec).unwrap(), p);
        }
        let bad = PerturbationSpec { j_l_range: 1.0, ..Default::default() };
        assert!(perturb_params(&base, &bad).is_err());
    }

    #[test]
    fn perturbed_motor_constant_is_unbiased() {
        let base = perturbation_base();
        let mean = (0..10_000)
            .map(|seed| perturb_params(&base, &PerturbationSpec { seed, ..Default::default() }).unwrap().k_t)
            .sum::<f64>()
            / 10_000.0;
        assert!((mean - base.k_t).abs() < 0.01 * base.k_t);
    }

    #[test]
    fn measurement_noise() {
        let s = PlantState { theta_l: 0.4, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(measure(&s, 0.0, &mut rng), 0.4);

        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..5).map(|_| measure(&s, 0.1, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(11), draw(11));
        assert_ne!(draw(11), draw(12));

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| measure(&s, 0.2, &mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var / 0.04 - 1.0).abs() < 0.03, "variance {var}");
    }

    #[test]
    fn equilibrium_is_preserved() {
        let p = default_real_params();
        let s = integrate_step(&p, &PlantState::default(), 0.0, 3.7, 50).unwrap();
        assert_eq!(s, PlantState::default());
        assert!(integrate_step(&p, &s, 0.0, 0.0, 10).is_err());
        assert!(integrate_step(&p, &s, 0.0, 0.1, 0).is_err());
    }

    #[test]
    fn nominal_model_rows() {
        let p = default_nominal_params();
        let cm = continuous_nominal(&p, &NoiseConfig::default()).unwrap();
        let row = cm.a.row(1);
        assert_relative_eq!(row[0], -p.k_theta / p.j_l);
        assert_relative_eq!(row[1], -p.beta_l / p.j_l);
        assert_relative_eq!(row[2], p.k_theta / (p.rho * p.j_l));
        assert_eq!(row[3], 0.0);
        // integrating plant: one eigenvalue at zero
        let eig = cm.a.complex_eigenvalues();
        assert!(eig.iter().any(|z| z.norm() < 1e-9));

        let dm = nominal_linear_model(&p, &NoiseConfig::default(), 0.1).unwrap();
        assert!(dm.validate().is_empty(), "{:?}", dm.validate());
        assert_eq!(dm.dims().m, 5);
    }

    #[test]
    fn nominal_rows_agree_with_rhs() {
        let p = default_nominal_params();
        let cm = continuous_nominal(&p, &NoiseConfig::default()).unwrap();
        let s = PlantState {
            theta_l: 0.2,
            omega_l: -0.4,
            theta_m: 3.1,
            omega_m: 1.7,
            i_m: 0.0,
        };
        let volts = 2.5;
        let d = dynamics_rhs(&p, &s, volts);
        let lin = &cm.a * s.mechanical() + &cm.b * Vector::from_element(1, volts);
        assert_relative_eq!(lin, Vector::from_row_slice(&[d.theta_l, d.omega_l, d.theta_m, d.omega_m]), epsilon = 1e-12);
    }

    #[test]
    fn linear_plant_uses_one_noise_draw_per_step() {
        let m = nominal_linear_model(&default_nominal_params(), &NoiseConfig::default(), 0.1).unwrap();
        let mut a = LinearPlant::new(m.clone(), Vector::zeros(4), 7, true);
        let mut b = LinearPlant::new(m, Vector::zeros(4), 7, true);
        for _ in 0..10 {
            assert_eq!(a.output().unwrap(), b.output().unwrap());
            a.apply(&Vector::from_element(1, 1.0)).unwrap();
            b.apply(&Vector::from_element(1, 1.0)).unwrap();
        }
        assert_eq!(a.state, b.state);
    }
}
