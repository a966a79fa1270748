use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{quartiles, simulate, Controller, ControlSettings, Metrics, PlantKind, ScenarioConfig};
use crate::error::Result;
use crate::filters::FilterVariant;
use crate::servo::{perturb_params, perturbation_base, PerturbationSpec};

/// One controller on one perturbed plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub controller: String,
    pub run: usize,
    /// Seed of the plant noise, shared by every controller of the run.
    pub seed: u64,
    pub perturbation_seed: u64,
    pub mse: f64,
    pub settling_time: Option<f64>,
    pub input_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub controller: String,
    pub run: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerSummary {
    pub name: String,
    pub variant: FilterVariant,
    pub count: usize,
    /// 25th, 50th, 75th percentile of the MSE.
    pub mse_quartiles: Option<[f64; 3]>,
    pub energy_median: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub hp: usize,
    pub hu: usize,
    pub runs: usize,
    pub controllers: Vec<ControllerSummary>,
    /// Runs in order, controllers in `controllers` order within a run.
    pub records: Vec<RunRecord>,
    /// A run where any controller failed is dropped for all of them.
    pub failures: Vec<Failure>,
}

impl CampaignSummary {
    pub fn controller(&self, name: &str) -> Option<&ControllerSummary> {
        self.controllers.iter().find(|c| c.name == name)
    }

    pub fn median_mse(&self, name: &str) -> Option<f64> {
        self.controller(name)?.mse_quartiles.map(|q| q[1])
    }

    pub fn mse_samples(&self, name: &str) -> Vec<f64> {
        self.records.iter().filter(|r| r.controller == name).map(|r| r.mse).collect()
    }

    pub fn excluded_runs(&self) -> usize {
        let mut runs: Vec<usize> = self.failures.iter().map(|f| f.run).collect();
        runs.dedup();
        runs.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonSummary {
    pub hp: usize,
    pub hu: usize,
    pub summary: CampaignSummary,
}

/// S-MPC followed by R-MPC1, R-MPC2, … for each tolerance in `c_list`.
pub fn campaign_controllers(c_list: &[f64]) -> Vec<Controller> {
    std::iter::once(Controller::new("S-MPC", FilterVariant::Standard))
        .chain(
            c_list
                .iter()
                .enumerate()
                .map(|(i, &c)| Controller::new(format!("R-MPC{}", i + 1), FilterVariant::Robust { c })),
        )
        .collect()
}

/// `(perturbation seed, noise seed)` per run, drawn from the master seed.
pub fn run_seeds(master: u64, runs: usize) -> Vec<(u64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    (0..runs).map(|_| (rng.random(), rng.random())).collect()
}

type RunOutcome = std::result::Result<Vec<(Controller, Metrics)>, Vec<Failure>>;

fn one_run(
    cfg: &ScenarioConfig,
    control: &ControlSettings,
    controllers: &[Controller],
    run: usize,
    (pert_seed, noise_seed): (u64, u64),
) -> Result<RunOutcome> {
    let model = cfg.nominal_model()?;
    let spec = PerturbationSpec {
        seed: pert_seed,
        ..cfg.perturbation
    };
    let fail = |controller: &str, message: String| Failure {
        controller: controller.to_string(),
        run,
        seed: noise_seed,
        message,
    };
    let params = match perturb_params(&perturbation_base(), &spec) {
        Ok(p) => p,
        Err(e) => return Ok(Err(vec![fail("*", e.to_string())])),
    };
    let plant = PlantKind::Servo(params);
    let mut ok = Vec::with_capacity(controllers.len());
    let mut failed = Vec::new();
    for ctl in controllers {
        match simulate(cfg, &model, control, &plant, &ctl.variant, noise_seed) {
            Ok((_, m)) => ok.push((ctl.clone(), m)),
            Err(e) => {
                log::warn!("run {run}, {}: {e}", ctl.name);
                failed.push(fail(&ctl.name, e.to_string()));
            }
        }
    }
    Ok(if failed.is_empty() { Ok(ok) } else { Err(failed) })
}

fn campaign(cfg: &ScenarioConfig, control: &ControlSettings) -> Result<CampaignSummary> {
    cfg.check()?;
    control.mpc_config()?;
    let controllers = campaign_controllers(&cfg.c_list);
    let seeds = run_seeds(cfg.seed, cfg.runs);
    let outcomes = seeds
        .par_iter()
        .enumerate()
        .map(|(run, &s)| one_run(cfg, control, &controllers, run, s))
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (run, outcome) in outcomes.into_iter().enumerate() {
        let (pert_seed, noise_seed) = seeds[run];
        match outcome {
            Ok(list) => records.extend(list.into_iter().map(|(ctl, m)| RunRecord {
                controller: ctl.name,
                run,
                seed: noise_seed,
                perturbation_seed: pert_seed,
                mse: m.mse,
                settling_time: m.settling_time,
                input_energy: m.input_energy,
            })),
            Err(f) => failures.extend(f),
        }
    }
    if !failures.is_empty() {
        log::warn!("{} of {} runs excluded after failures", failures.len(), cfg.runs);
    }

    let controllers = controllers
        .into_iter()
        .map(|ctl| {
            let mine: Vec<&RunRecord> = records.iter().filter(|r| r.controller == ctl.name).collect();
            let mse: Vec<f64> = mine.iter().map(|r| r.mse).collect();
            let energy: Vec<f64> = mine.iter().map(|r| r.input_energy).collect();
            ControllerSummary {
                count: mse.len(),
                mse_quartiles: quartiles(&mse),
                energy_median: quartiles(&energy).map(|q| q[1]),
                name: ctl.name,
                variant: ctl.variant,
            }
        })
        .collect();
    Ok(CampaignSummary {
        hp: control.hp,
        hu: control.hu,
        runs: cfg.runs,
        controllers,
        records,
        failures,
    })
}

/// S-MPC and one R-MPC per tolerance on `cfg.runs` randomly perturbed
/// nonlinear plants. Within a run every controller sees the same plant and
/// the same noise realization. Deterministic in `cfg.seed`.
pub fn run_montecarlo(cfg: &ScenarioConfig) -> Result<CampaignSummary> {
    campaign(cfg, &cfg.control)
}

/// [`run_montecarlo`] once per `(Hp, Hu)` pair, same seeds for every pair.
pub fn run_horizons(cfg: &ScenarioConfig) -> Result<Vec<HorizonSummary>> {
    cfg.check()?;
    cfg.horizon_pairs
        .iter()
        .map(|&(hp, hu)| {
            let control = ControlSettings {
                hp,
                hu,
                ..cfg.control.clone()
            };
            Ok(HorizonSummary {
                hp,
                hu,
                summary: campaign(cfg, &control)?,
            })
        })
        .collect()
}
