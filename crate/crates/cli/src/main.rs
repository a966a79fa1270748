use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use robust_mpc::experiments::{
    export_campaign, export_horizons, export_scenario, run_horizons, run_montecarlo, run_scenario, CampaignSummary,
    ScenarioConfig, ScenarioKind,
};

#[derive(Parser, Debug)]
#[command(name = "rmpc", version, about = "Robust MPC experiments on a nonlinear servomechanism")]
struct Cli {
    /// JSON file merged over the command-line settings (its keys win).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Print the resolved configuration and exit.
    #[arg(long, global = true)]
    dry_run: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Scenario {
    Nominal,
    Mismatch,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// S-MPC, R-MPC and RS-MPC on one plant.
    Simulate {
        #[arg(long, value_enum, default_value = "mismatch")]
        scenario: Scenario,
        /// R-MPC tolerance.
        #[arg(long)]
        c: Option<f64>,
        /// RS-MPC risk parameter; derived from an R-MPC run when omitted.
        #[arg(long)]
        theta_bar: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Simulated seconds.
        #[arg(long)]
        duration: Option<f64>,
        /// Run the plant without process and measurement noise.
        #[arg(long)]
        noise_free: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Campaign over randomly perturbed plants.
    Montecarlo {
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        c_list: Option<Vec<f64>>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo campaign repeated for several (Hp, Hu) pairs.
    Horizons {
        /// Comma separated `Hp:Hu` pairs.
        #[arg(long, value_delimiter = ',', value_parser = parse_pair)]
        pairs: Option<Vec<(usize, usize)>>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        c_list: Option<Vec<f64>>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (hp, hu) = s.split_once(':').ok_or_else(|| format!("expected Hp:Hu, got {s:?}"))?;
    let hp = hp.trim().parse().map_err(|e| format!("bad Hp in {s:?}: {e}"))?;
    let hu = hu.trim().parse().map_err(|e| format!("bad Hu in {s:?}: {e}"))?;
    Ok((hp, hu))
}

/// Recursively overlays `patch` on `base`; objects merge key by key, anything
/// else replaces.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

fn set_if<T: Into<Value>>(v: &mut Value, key: &str, value: Option<T>) {
    if let Some(x) = value {
        v[key] = x.into();
    }
}

fn path_value(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.to_string_lossy().into_owned())
}

fn resolve(cli: &Cli) -> Result<ScenarioConfig> {
    let kind = match &cli.command {
        Command::Simulate { scenario: Scenario::Nominal, .. } => ScenarioKind::NominalMatch,
        Command::Simulate { scenario: Scenario::Mismatch, .. } => ScenarioKind::Mismatch,
        Command::Montecarlo { .. } => ScenarioKind::Montecarlo,
        Command::Horizons { .. } => ScenarioKind::Horizons,
    };
    let mut v = serde_json::to_value(ScenarioConfig::new(kind))?;
    match &cli.command {
        Command::Simulate {
            c,
            theta_bar,
            seed,
            duration,
            noise_free,
            out,
            ..
        } => {
            set_if(&mut v, "c", *c);
            set_if(&mut v, "theta_bar", *theta_bar);
            set_if(&mut v, "seed", *seed);
            set_if(&mut v, "duration", *duration);
            set_if(&mut v, "output_dir", path_value(out));
            if *noise_free {
                v["plant_noise"] = json!(false);
            }
        }
        Command::Montecarlo { runs, c_list, seed, out } => {
            set_if(&mut v, "runs", *runs);
            set_if(&mut v, "c_list", c_list.clone());
            set_if(&mut v, "seed", *seed);
            set_if(&mut v, "output_dir", path_value(out));
        }
        Command::Horizons {
            pairs,
            runs,
            c_list,
            seed,
            out,
        } => {
            set_if(&mut v, "horizon_pairs", pairs.as_ref().map(|ps| ps.iter().map(|&(a, b)| json!([a, b])).collect::<Vec<_>>()));
            set_if(&mut v, "runs", *runs);
            set_if(&mut v, "c_list", c_list.clone());
            set_if(&mut v, "seed", *seed);
            set_if(&mut v, "output_dir", path_value(out));
        }
    }
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let patch: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        merge(&mut v, patch);
    }
    let cfg: ScenarioConfig = serde_json::from_value(v).context("invalid configuration")?;
    if cfg.scenario != kind {
        bail!("config scenario {:?} does not match the {:?} subcommand", cfg.scenario.name(), kind.name());
    }
    cfg.check()?;
    Ok(cfg)
}

fn fmt_settling(t: Option<f64>) -> String {
    t.map_or_else(|| "not settled".into(), |t| format!("{t:.1} s"))
}

fn print_campaign(s: &CampaignSummary) {
    println!("Hp={} Hu={} runs={} excluded={}", s.hp, s.hu, s.runs, s.excluded_runs());
    println!("{:<8} {:>6} {:>10} {:>10} {:>10} {:>12}", "", "count", "q25", "median", "q75", "energy");
    for c in &s.controllers {
        let [a, b, d] = c.mse_quartiles.unwrap_or([f64::NAN; 3]);
        println!(
            "{:<8} {:>6} {:>10.5} {:>10.5} {:>10.5} {:>12.1}",
            c.name,
            c.count,
            a,
            b,
            d,
            c.energy_median.unwrap_or(f64::NAN)
        );
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let cfg = resolve(cli)?;
    if cli.dry_run {
        println!("{}", serde_json::to_string_pretty(&cfg)?);
        return Ok(true);
    }
    log::info!("running {} with seed {}", cfg.scenario.name(), cfg.seed);
    match cfg.scenario {
        ScenarioKind::NominalMatch | ScenarioKind::Mismatch => {
            let result = run_scenario(&cfg)?;
            println!("{} (theta_bar = {:.6})", cfg.scenario.name(), result.theta_bar);
            let mut all_ok = true;
            for r in &result.runs {
                match &r.outcome {
                    Ok((_, m)) => println!(
                        "{:<8} mse {:.5}  settling {:<12} energy {:.1}",
                        r.controller.name,
                        m.mse,
                        fmt_settling(m.settling_time),
                        m.input_energy
                    ),
                    Err(e) => {
                        all_ok = false;
                        eprintln!("{:<8} failed: {e}", r.controller.name);
                    }
                }
            }
            if let Some(dir) = &cfg.output_dir {
                export_scenario(&result, dir)?;
                println!("wrote {}", dir.display());
            }
            Ok(all_ok)
        }
        ScenarioKind::Montecarlo => {
            let summary = run_montecarlo(&cfg)?;
            print_campaign(&summary);
            if let Some(dir) = &cfg.output_dir {
                export_campaign(&summary, &cfg, dir)?;
                println!("wrote {}", dir.display());
            }
            Ok(true)
        }
        ScenarioKind::Horizons => {
            let results = run_horizons(&cfg)?;
            for h in &results {
                print_campaign(&h.summary);
            }
            if let Some(dir) = &cfg.output_dir {
                export_horizons(&results, &cfg, dir)?;
                println!("wrote {}", dir.display());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
