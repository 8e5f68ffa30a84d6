use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use radiomap_core::bench::{self, ConfigMap, ExperimentConfig, FieldTemplate, TheoryConfig};
use radiomap_core::completion;
use radiomap_core::field::{self, RadioMap};
use radiomap_core::sampling::{self, SamplingPlan, Strategy};
use radiomap_core::{io, Error};

/// Radio map construction from sparse measurements.
#[derive(Parser)]
#[command(name = "radiomap", disable_version_flag = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// `key = value` config file; defaults are used for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a ground-truth map and write it as a matrix CSV.
    Simulate(Common),
    /// Measure a ground-truth map with the configured sampling strategy.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Complete a sample set by SVT; prints NMSE when the truth is given.
    Complete {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Run a benchmark sweep and write the NMSE report.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Worker threads; falls back to RADIOMAP_WORKERS, then the config.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Write the leverage-probability limit traces into a directory.
    Theory(Common),
    /// Print the version.
    Version,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn config_err(e: Error) -> Failure {
    Failure::Config(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn load_config(common: &Common) -> Result<ConfigMap, Failure> {
    match &common.config {
        Some(path) => ConfigMap::load(path).map_err(config_err),
        None => Ok(ConfigMap::default()),
    }
}

fn out_path<'a>(common: &'a Common, map: &'a ConfigMap, what: &str) -> Result<PathBuf, Failure> {
    common
        .out
        .clone()
        .or_else(|| map.raw("output.path").map(PathBuf::from))
        .ok_or_else(|| Failure::Config(format!("{what} needs --out or output.path")))
}

fn read_truth(path: &Path) -> Result<RadioMap, Failure> {
    let values = io::read_matrix(path).map_err(config_err)?;
    RadioMap::new(values).map_err(config_err)
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Version => {
            println!("radiomap {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
        Command::Simulate(common) => {
            let map = load_config(&common)?;
            let template = FieldTemplate::from_config(&map).map_err(config_err)?;
            let seed = match common.seed {
                Some(s) => s,
                None => map.get_or("field.seed", 1).map_err(config_err)?,
            };
            let out = out_path(&common, &map, "simulate")?;
            let spec = template.realize(seed).map_err(config_err)?;
            let truth = field::build_ground_truth(&spec)?;
            io::write_matrix(&out, &truth.values)?;
            Ok(())
        }
        Command::Sample { common, truth } => {
            let map = load_config(&common)?;
            let out = out_path(&common, &map, "sample")?;
            let truth = read_truth(&truth)?;
            let template = FieldTemplate::from_config(&map).map_err(config_err)?;
            let strategy = match map.raw("sampling.strategy") {
                None => Strategy::EnergyModified,
                Some(s) => Strategy::parse(s)
                    .ok_or_else(|| Failure::Config(format!("`sampling.strategy`: unknown value `{s}`")))?,
            };
            let cfg = ExperimentConfig::from_config(&map).map_err(config_err)?;
            let n = truth.side();
            let budget = (cfg.sampling_ratio * (n * n) as f64).round() as usize;
            let plan = SamplingPlan {
                strategy,
                budget,
                first_round_fraction: cfg.iota,
                mode: cfg.mode,
                leverage_weighting: cfg.leverage_weighting,
                rank_selection: cfg.rank_selection,
                seed: common.seed.unwrap_or(cfg.seed),
            };
            let knn = completion::Knn { k: cfg.k };
            let planned = sampling::run_two_round_plan(&truth, &plan, &knn, template.noise_sigma)?;
            io::write_samples(&out, &planned.samples)?;
            Ok(())
        }
        Command::Complete {
            common,
            samples,
            truth,
        } => {
            let map = load_config(&common)?;
            let out = out_path(&common, &map, "complete")?;
            let samples = io::read_samples(&samples).map_err(config_err)?;
            let truth = truth.as_deref().map(read_truth).transpose()?;
            let cfg = ExperimentConfig::from_config(&map).map_err(config_err)?;
            let n = match &truth {
                Some(t) => t.side(),
                None => map.get_or("field.N", cfg.field.grid_side).map_err(config_err)?,
            };
            let result = completion::svt_complete(&samples, n, &cfg.svt)?;
            io::write_matrix(&out, &result.map.values)?;
            if let Some(t) = truth {
                println!("nmse = {}", completion::nmse(&result.map.values, &t.values)?);
            }
            println!("iterations = {}", result.iterations);
            println!("converged = {}", result.converged);
            Ok(())
        }
        Command::Bench { common, workers } => {
            let mut map = load_config(&common)?;
            if let Some(seed) = common.seed {
                map.set("experiment.seed", seed.to_string());
            }
            let workers = match workers {
                Some(w) => Some(w),
                None => match std::env::var("RADIOMAP_WORKERS") {
                    Ok(v) => Some(
                        v.trim()
                            .parse()
                            .map_err(|_| Failure::Config(format!("RADIOMAP_WORKERS: cannot parse `{v}`")))?,
                    ),
                    Err(_) => None,
                },
            };
            if let Some(w) = workers {
                map.set("experiment.workers", w.to_string());
            }
            let cfg = ExperimentConfig::from_config(&map).map_err(config_err)?;
            let out = out_path(&common, &map, "bench")?;
            let report = bench::run_experiment(&cfg)?;
            report.write(&out)?;
            for s in &report.summary {
                println!(
                    "{:<16} {:<6} mean_nmse={:.6} se={:.6} failed={}",
                    s.strategy, s.sweep_value, s.mean_nmse, s.std_error, s.failed
                );
            }
            Ok(())
        }
        Command::Theory(common) => {
            let map = load_config(&common)?;
            let cfg = TheoryConfig::from_config(&map).map_err(config_err)?;
            let out = out_path(&common, &map, "theory")?;
            for path in bench::run_theory(&cfg, &out)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}
