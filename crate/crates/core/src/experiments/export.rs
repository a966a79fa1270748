use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::campaign::run_seeds;
use super::{CampaignSummary, HorizonSummary, ScenarioConfig, ScenarioResult};
use crate::error::{Error, Result};

/// Written in place of a settling time when the output never settles.
pub const NOT_SETTLED: &str = "not settled";

/// Everything needed to rerun an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ScenarioConfig,
    /// Risk parameter RS-MPC used, if the experiment had one.
    pub theta_bar: Option<f64>,
    /// `(perturbation seed, noise seed)` per Monte Carlo run.
    #[serde(default)]
    pub run_seeds: Vec<(u64, u64)>,
}

impl Manifest {
    pub fn for_scenario(result: &ScenarioResult) -> Self {
        Self {
            config: result.config.clone(),
            theta_bar: Some(result.theta_bar),
            run_seeds: Vec::new(),
        }
    }

    pub fn for_campaign(cfg: &ScenarioConfig) -> Self {
        Self {
            config: cfg.clone(),
            theta_bar: None,
            run_seeds: run_seeds(cfg.seed, cfg.runs),
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(serde_json::from_str(&text)?)
}

fn settling_field(t: Option<f64>) -> String {
    t.map_or_else(|| NOT_SETTLED.to_string(), |v| v.to_string())
}

fn file_stem(name: &str) -> String {
    name.to_lowercase().replace(|c: char| !c.is_ascii_alphanumeric(), "_")
}

const RECORD_HEADER: [&str; 6] = ["controller", "run", "seed", "mse", "settling_time", "input_energy"];

/// One time-series CSV per controller, `metrics.csv` and `manifest.json`.
pub fn export_scenario(result: &ScenarioResult, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut written = Vec::new();
    let scenario = result.config.scenario.name();
    let metrics_path = dir.join("metrics.csv");
    let mut metrics = csv::Writer::from_writer(create(&metrics_path)?);
    metrics.write_record(RECORD_HEADER)?;
    for run in &result.runs {
        let Ok((trace, m)) = &run.outcome else {
            continue;
        };
        let path = dir.join(format!("{scenario}_{}.csv", file_stem(&run.controller.name)));
        trace.write_csv(result.config.sample_time, create(&path)?)?;
        written.push(path);
        metrics.write_record([
            run.controller.name.clone(),
            "0".into(),
            run.seed.to_string(),
            m.mse.to_string(),
            settling_field(m.settling_time),
            m.input_energy.to_string(),
        ])?;
    }
    metrics.flush().map_err(|e| Error::io(metrics_path.display().to_string(), e))?;
    written.push(metrics_path);
    let manifest = dir.join("manifest.json");
    write_manifest(&Manifest::for_scenario(result), &manifest)?;
    written.push(manifest);
    Ok(written)
}

fn write_campaign_tables(summary: &CampaignSummary, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let campaign_path = dir.join("campaign.csv");
    let mut w = csv::Writer::from_writer(create(&campaign_path)?);
    w.write_record(RECORD_HEADER)?;
    for r in &summary.records {
        w.write_record([
            r.controller.clone(),
            r.run.to_string(),
            r.seed.to_string(),
            r.mse.to_string(),
            settling_field(r.settling_time),
            r.input_energy.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(campaign_path.display().to_string(), e))?;

    let box_path = dir.join("boxplot.csv");
    let mut w = csv::Writer::from_writer(create(&box_path)?);
    w.write_record(["controller", "count", "q25", "median", "q75", "energy_median"])?;
    for c in &summary.controllers {
        let q = c.mse_quartiles.map(|q| q.map(|v| v.to_string()));
        let [q25, med, q75] = q.unwrap_or_default();
        w.write_record([
            c.name.clone(),
            c.count.to_string(),
            q25,
            med,
            q75,
            c.energy_median.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(box_path.display().to_string(), e))?;

    let fail_path = dir.join("failures.csv");
    let mut w = csv::Writer::from_writer(create(&fail_path)?);
    w.write_record(["controller", "run", "seed", "message"])?;
    for f in &summary.failures {
        w.write_record([f.controller.clone(), f.run.to_string(), f.seed.to_string(), f.message.clone()])?;
    }
    w.flush().map_err(|e| Error::io(fail_path.display().to_string(), e))?;
    Ok(vec![campaign_path, box_path, fail_path])
}

/// `campaign.csv`, `boxplot.csv`, `failures.csv` and `manifest.json`.
pub fn export_campaign(summary: &CampaignSummary, cfg: &ScenarioConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = write_campaign_tables(summary, dir)?;
    let manifest = dir.join("manifest.json");
    write_manifest(&Manifest::for_campaign(cfg), &manifest)?;
    written.push(manifest);
    Ok(written)
}

/// One `hp<Hp>_hu<Hu>/` directory of campaign tables per pair, one manifest.
pub fn export_horizons(results: &[HorizonSummary], cfg: &ScenarioConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for h in results {
        written.extend(write_campaign_tables(&h.summary, &dir.join(format!("hp{}_hu{}", h.hp, h.hu)))?);
    }
    let manifest = dir.join("manifest.json");
    write_manifest(&Manifest::for_campaign(cfg), &manifest)?;
    written.push(manifest);
    Ok(written)
}
