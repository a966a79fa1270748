//! Scenario harness for the servomechanism comparisons: single closed-loop
//! runs, Monte Carlo campaigns over perturbed plants and horizon sweeps.

mod campaign;
mod export;
mod metrics;

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{FilterState, FilterVariant};
use crate::linalg::{Matrix, Vector};
use crate::model::LinearModel;
use crate::mpc::{build_predictor, closed_loop, ClosedLoopTrace, CostForm, MpcConfig, Plant, ThetaConvention};
use crate::servo::{
    default_nominal_params, default_real_params, nominal_linear_model, LinearPlant, NoiseConfig, PerturbationSpec,
    ServoParams, ServoPlant,
};

pub use campaign::{run_horizons, run_montecarlo, CampaignSummary, ControllerSummary, Failure, HorizonSummary, RunRecord};
pub use export::{
    export_campaign, export_horizons, export_scenario, load_manifest, write_manifest, Manifest, NOT_SETTLED,
};
pub use metrics::{input_energy, mse, quartiles, settling_time, Metrics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// The discretized nominal model is the plant.
    NominalMatch,
    /// Nonlinear plant with the perturbed "real" parameters.
    Mismatch,
    Montecarlo,
    Horizons,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::NominalMatch => "nominal_match",
            ScenarioKind::Mismatch => "mismatch",
            ScenarioKind::Montecarlo => "montecarlo",
            ScenarioKind::Horizons => "horizons",
        }
    }

    /// Simulated time when the config leaves it open.
    pub fn default_duration(&self) -> f64 {
        match self {
            ScenarioKind::NominalMatch => 20.0,
            ScenarioKind::Mismatch => 35.0,
            ScenarioKind::Montecarlo | ScenarioKind::Horizons => 20.0,
        }
    }
}

/// Controller tuning as used by the experiments.
///
/// The weights apply to normalized signals, `θ_l / output_scale` and
/// `V / input_scale`, so the effective per-step weights handed to the
/// controller are `q_weight / output_scale²` and `r_weight / input_scale²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlSettings {
    pub hp: usize,
    pub hu: usize,
    pub q_weight: f64,
    pub r_weight: f64,
    pub output_scale: f64,
    pub input_scale: f64,
    pub cost_form: CostForm,
    pub theta_convention: ThetaConvention,
}

impl Default for ControlSettings {
    fn default() -> Self {
        Self {
            hp: 10,
            hu: 3,
            q_weight: 0.1,
            r_weight: 0.1,
            output_scale: 2.0 * PI,
            input_scale: 440.0,
            cost_form: CostForm::InputIncrement,
            theta_convention: ThetaConvention::ToeplitzZeroTail,
        }
    }
}

impl ControlSettings {
    pub fn mpc_config(&self) -> Result<MpcConfig> {
        if !(self.output_scale > 0.0 && self.input_scale > 0.0) {
            return Err(Error::InvalidParameter("signal scales must be positive".into()));
        }
        let cfg = MpcConfig {
            theta_convention: self.theta_convention,
            cost_form: self.cost_form,
            ..MpcConfig::siso(
                self.hp,
                self.hu,
                self.q_weight / self.output_scale.powi(2),
                self.r_weight / self.input_scale.powi(2),
            )
        };
        cfg.check()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    /// Constant reference for `θ_l` (rad).
    pub reference: f64,
    /// Simulated time (s); `None` picks the scenario default.
    pub duration: Option<f64>,
    pub sample_time: f64,
    /// RK4 substeps per sample for the nonlinear plant.
    pub substeps: usize,
    pub control: ControlSettings,
    /// Noise intensities of the prediction model.
    pub noise: NoiseConfig,
    /// When false the simulated plant is noise free; the filter model keeps `noise`.
    pub plant_noise: bool,
    /// Tolerance of the single R-MPC in scenario runs.
    pub c: f64,
    /// Tolerances of R-MPC1, R-MPC2, … in campaigns.
    pub c_list: Vec<f64>,
    /// RS-MPC risk parameter; derived from a reference R-MPC run when absent.
    pub theta_bar: Option<f64>,
    pub seed: u64,
    pub runs: usize,
    /// Half-widths of the parameter perturbation; its `seed` field is ignored
    /// in favor of per-run seeds derived from `seed`.
    pub perturbation: PerturbationSpec,
    pub horizon_pairs: Vec<(usize, usize)>,
    /// Added to `G Gᵀ` on the diagonal of the initial covariance.
    pub initial_regularization: f64,
    /// End of the MSE scoring window (s).
    pub mse_window: f64,
    /// Relative settling band.
    pub settling_band: f64,
    pub output_dir: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioKind::Mismatch,
            reference: FRAC_PI_2,
            duration: None,
            sample_time: 0.1,
            substeps: 10,
            control: ControlSettings::default(),
            noise: NoiseConfig::default(),
            plant_noise: true,
            c: 0.1,
            c_list: vec![0.1, 0.01, 0.001],
            theta_bar: None,
            seed: 0,
            runs: 50,
            perturbation: PerturbationSpec::default(),
            horizon_pairs: vec![(10, 8), (15, 3)],
            initial_regularization: 1e-6,
            mse_window: 20.0,
            settling_band: 0.05,
            output_dir: None,
        }
    }
}

impl ScenarioConfig {
    pub fn new(scenario: ScenarioKind) -> Self {
        Self {
            scenario,
            ..Self::default()
        }
    }

    pub fn duration(&self) -> f64 {
        self.duration.unwrap_or_else(|| self.scenario.default_duration())
    }

    /// Samples `t = 0, T, …, duration`.
    pub fn steps(&self) -> usize {
        (self.duration() / self.sample_time).round() as usize + 1
    }

    pub fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.duration() > 0.0) {
            return bad(format!("duration must be positive, got {}", self.duration()));
        }
        if !(self.sample_time > 0.0) || self.substeps == 0 {
            return bad("sample time and substeps must be positive".into());
        }
        if self.runs == 0 {
            return bad("run count must be at least 1".into());
        }
        if self.reference == 0.0 || !self.reference.is_finite() {
            return bad("reference must be finite and nonzero".into());
        }
        if !(self.c > 0.0) || self.c_list.iter().any(|c| !(*c > 0.0)) {
            return bad("tolerances must be positive".into());
        }
        if let Some(t) = self.theta_bar {
            FilterVariant::RiskSensitive { theta_bar: t }.check()?;
        }
        if !(self.mse_window > 0.0) || !(self.settling_band > 0.0) || !(self.initial_regularization >= 0.0) {
            return bad("mse window, settling band and regularization must be positive".into());
        }
        for &(hp, hu) in &self.horizon_pairs {
            if hu == 0 || hu > hp {
                return bad(format!("horizon pair {hp}:{hu} violates 1 <= Hu <= Hp"));
            }
        }
        self.perturbation.check()?;
        self.control.mpc_config()?;
        Ok(())
    }

    pub fn nominal_model(&self) -> Result<LinearModel> {
        nominal_linear_model(&default_nominal_params(), &self.noise, self.sample_time)
    }

    /// `x̂_{0|−1} = 0`, `P_0 = G Gᵀ + δ I`.
    pub fn initial_filter(&self, model: &LinearModel) -> Result<FilterState> {
        let n = model.a.nrows();
        let p0 = model.process_noise() + Matrix::identity(n, n) * self.initial_regularization;
        FilterState::new(Vector::zeros(n), p0, model.c.nrows())
    }

    fn noise_for_plant(&self) -> NoiseConfig {
        if self.plant_noise {
            self.noise
        } else {
            NoiseConfig {
                accel_std: 0.0,
                meas_std: 0.0,
            }
        }
    }
}

/// One controller of a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Controller {
    pub name: String,
    pub variant: FilterVariant,
}

impl Controller {
    pub fn new(name: impl Into<String>, variant: FilterVariant) -> Self {
        Self {
            name: name.into(),
            variant,
        }
    }
}

/// Outcome of one controller on one plant.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerRun {
    pub controller: Controller,
    pub seed: u64,
    pub outcome: std::result::Result<(ClosedLoopTrace, Metrics), String>,
}

impl ControllerRun {
    pub fn metrics(&self) -> Option<&Metrics> {
        self.outcome.as_ref().ok().map(|(_, m)| m)
    }

    pub fn trace(&self) -> Option<&ClosedLoopTrace> {
        self.outcome.as_ref().ok().map(|(t, _)| t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub config: ScenarioConfig,
    /// The risk parameter RS-MPC ran with.
    pub theta_bar: f64,
    pub runs: Vec<ControllerRun>,
}

impl ScenarioResult {
    pub fn get(&self, name: &str) -> Option<&ControllerRun> {
        self.runs.iter().find(|r| r.controller.name == name)
    }
}

/// Which plant a closed-loop run drives.
#[derive(Debug, Clone, PartialEq)]
pub enum PlantKind {
    Linear,
    Servo(ServoParams),
}

/// Runs one controller against a freshly seeded plant and scores it.
pub fn simulate(
    cfg: &ScenarioConfig,
    model: &LinearModel,
    control: &ControlSettings,
    plant: &PlantKind,
    variant: &FilterVariant,
    seed: u64,
) -> Result<(ClosedLoopTrace, Metrics)> {
    let pm = build_predictor(model, &control.mpc_config()?)?;
    let mut plant: Box<dyn Plant> = match plant {
        PlantKind::Linear => Box::new(LinearPlant::new(
            model.clone(),
            Vector::zeros(model.a.nrows()),
            seed,
            cfg.plant_noise,
        )),
        PlantKind::Servo(params) => Box::new(ServoPlant::new(
            *params,
            cfg.sample_time,
            cfg.substeps,
            cfg.noise_for_plant(),
            seed,
        )?),
    };
    let refs = [Vector::from_element(1, cfg.reference)];
    let (trace, _) = closed_loop(plant.as_mut(), model, &pm, variant, cfg.initial_filter(model)?, &refs, cfg.steps())?;
    let metrics = score(cfg, &trace)?;
    Ok((trace, metrics))
}

fn score(cfg: &ScenarioConfig, trace: &ClosedLoopTrace) -> Result<Metrics> {
    let y: Vec<f64> = trace.y.iter().map(|v| v[0]).collect();
    let r: Vec<f64> = trace.r.iter().map(|v| v[0]).collect();
    let u: Vec<f64> = trace.u.iter().map(|v| v[0]).collect();
    Ok(Metrics {
        mse: mse(&y, &r, cfg.sample_time, cfg.mse_window)?,
        settling_time: settling_time(&y, cfg.reference, cfg.settling_band, cfg.sample_time)?,
        input_energy: input_energy(&u, cfg.sample_time),
    })
}

/// Risk parameter for RS-MPC: the `θ_t` an R-MPC with tolerance `c` reaches
/// at the end of a mismatch-length run on the nominal-parameter servo.
pub fn derive_theta_bar(cfg: &ScenarioConfig, c: f64) -> Result<f64> {
    let model = cfg.nominal_model()?;
    let probe = ScenarioConfig {
        scenario: ScenarioKind::Mismatch,
        duration: Some(ScenarioKind::Mismatch.default_duration()),
        ..cfg.clone()
    };
    let plant = PlantKind::Servo(default_nominal_params());
    let (trace, _) = simulate(&probe, &model, &cfg.control, &plant, &FilterVariant::Robust { c }, cfg.seed)?;
    let n = trace.theta.len();
    let (prev, last) = (trace.theta[n - 2], trace.theta[n - 1]);
    if (last - prev).abs() >= 1e-8 {
        return Err(Error::InvalidParameter(format!(
            "θ_t has not settled after {n} samples (last change {:.3e})",
            (last - prev).abs()
        )));
    }
    Ok(last)
}

pub fn scenario_controllers(c: f64, theta_bar: f64) -> Vec<Controller> {
    vec![
        Controller::new("S-MPC", FilterVariant::Standard),
        Controller::new("R-MPC", FilterVariant::Robust { c }),
        Controller::new("RS-MPC", FilterVariant::RiskSensitive { theta_bar }),
    ]
}

/// Runs S-MPC, R-MPC and RS-MPC on the plant selected by `cfg.scenario`
/// (`nominal_match` or `mismatch`), all with the same noise seed.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    cfg.check()?;
    let plant = match cfg.scenario {
        ScenarioKind::NominalMatch => PlantKind::Linear,
        ScenarioKind::Mismatch => PlantKind::Servo(default_real_params()),
        other => {
            return Err(Error::InvalidParameter(format!(
                "run_scenario handles nominal_match and mismatch, not {}",
                other.name()
            )))
        }
    };
    let theta_bar = match cfg.theta_bar {
        Some(t) => t,
        None => derive_theta_bar(cfg, cfg.c)?,
    };
    let model = cfg.nominal_model()?;
    let runs = scenario_controllers(cfg.c, theta_bar)
        .into_iter()
        .map(|controller| {
            let outcome = simulate(cfg, &model, &cfg.control, &plant, &controller.variant, cfg.seed).map_err(|e| {
                log::warn!("{} failed: {e}", controller.name);
                e.to_string()
            });
            ControllerRun {
                controller,
                seed: cfg.seed,
                outcome,
            }
        })
        .collect();
    Ok(ScenarioResult {
        config: cfg.clone(),
        theta_bar,
        runs,
    })
}
