//! `lwrctl`: run scenarios, validate configs, sweep a parameter across runs,
//! and query the brute-force synthesis oracles.
//!
//! Exit codes: 0 success, 1 configuration/validation error, 2 runtime
//! failure.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Deserialize;

use crate::error::Error;
use crate::flux::FluxModel;
use crate::functionals::FunctionalParams;
use crate::oracle;
use crate::scenario::{
    emit_plots, emit_run_csvs, run_scenario, RunArtifacts, RunOutput, ScenarioConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Parser)]
#[command(
    name = "lwrctl",
    about = "Boundary-controlled LWR traffic flow: simulation and control synthesis",
    disable_help_subcommand = true
)]
struct Cli {
    /// Output directory (default: $LWR_OUT_DIR, then the current directory)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the config's RNG seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress informational output
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and emit CSV files plus plot scripts
    Run { config: PathBuf },
    /// Parse and validate a scenario config, reporting problems
    Validate { config: PathBuf },
    /// Re-run a scenario while varying one scalar parameter
    Sweep {
        config: PathBuf,
        /// Config field to vary (e.g. alpha_gain, u_bar, control_dt)
        #[arg(long)]
        param: String,
        /// Comma-separated values to apply
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Run the grid brute-force oracle for one synthesis instance
    Oracle {
        /// One of: stab_left, stab_right, inv_left, inv_right, stab_both,
        /// inv_both, compound_left, compound_right (solve_ prefix accepted)
        solver: String,
        /// Inline JSON or a path to a JSON file, e.g.
        /// '{"u_b":0.5,"C":0.001}'
        instance: String,
    },
}

/// Entry point shared by the binary and the CLI tests.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<String>,
{
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are successful exits.
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_VALIDATION
            } else {
                EXIT_OK
            };
        }
    };

    let out_dir = cli
        .out
        .clone()
        .or_else(|| std::env::var_os("LWR_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));

    match cli.command {
        Command::Validate { ref config } => match load_config(config, cli.seed) {
            Ok(_) => {
                if !cli.quiet {
                    println!("{}: ok", config.display());
                }
                EXIT_OK
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_VALIDATION
            }
        },
        Command::Run { ref config } => {
            let cfg = match load_config(config, cli.seed) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_VALIDATION;
                }
            };
            match run_and_emit(&cfg, &out_dir) {
                Ok((output, artifacts)) => {
                    if !cli.quiet {
                        println!("wrote {}", artifacts.timeseries_csv.display());
                        for (_, p) in &artifacts.snapshot_csvs {
                            println!("wrote {}", p.display());
                        }
                        summarize(&output);
                    }
                    EXIT_OK
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_RUNTIME
                }
            }
        }
        Command::Sweep {
            ref config,
            ref param,
            ref values,
        } => {
            let base = match load_config(config, cli.seed) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_VALIDATION;
                }
            };
            let mut artifacts = Vec::new();
            for &value in values {
                let mut cfg = base.clone();
                if let Err(e) = apply_param(&mut cfg, param, value) {
                    eprintln!("error: {e}");
                    return EXIT_VALIDATION;
                }
                cfg.output_prefix = format!("{}_{param}_{value}", base.output_prefix);
                match run_and_emit_csvs_only(&cfg, &out_dir) {
                    Ok(mut a) => {
                        a.label = format!("{param}={value}");
                        artifacts.push(a);
                    }
                    Err(e) => {
                        eprintln!("error: {e}");
                        return EXIT_RUNTIME;
                    }
                }
            }
            let prefix = out_dir.join(format!("{}_sweep_{param}", base.output_prefix));
            match emit_plots(&artifacts, &prefix) {
                Ok(files) => {
                    if !cli.quiet {
                        for f in files {
                            println!("wrote {}", f.display());
                        }
                    }
                    EXIT_OK
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_RUNTIME
                }
            }
        }
        Command::Oracle {
            ref solver,
            ref instance,
        } => match run_oracle(solver, instance) {
            Ok(text) => {
                println!("{text}");
                EXIT_OK
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_VALIDATION
            }
        },
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> crate::Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run_and_emit(cfg: &ScenarioConfig, out_dir: &Path) -> crate::Result<(RunOutput, RunArtifacts)> {
    let output = run_scenario(cfg)?;
    let artifacts = emit_run_csvs(cfg, &output, out_dir)?;
    let prefix = out_dir.join(format!("{}_{}", cfg.output_prefix, cfg.mode.slug()));
    emit_plots(std::slice::from_ref(&artifacts), &prefix)?;
    Ok((output, artifacts))
}

fn run_and_emit_csvs_only(cfg: &ScenarioConfig, out_dir: &Path) -> crate::Result<RunArtifacts> {
    let output = run_scenario(cfg)?;
    emit_run_csvs(cfg, &output, out_dir)
}

fn summarize(output: &RunOutput) {
    let first = output.records.first();
    let last = output.records.last();
    if let (Some(first), Some(last)) = (first, last) {
        let min_b = output
            .records
            .iter()
            .map(|r| r.barrier_b)
            .fold(f64::INFINITY, f64::min);
        println!(
            "V: {:.6} -> {:.6}   B: {:.6} -> {:.6} (min {:.6})   fallback steps: {}   mass defect: {:.2e}",
            first.lyapunov_v,
            last.lyapunov_v,
            first.barrier_b,
            last.barrier_b,
            min_b,
            output.fallback_steps,
            output.mass_audit_residual(),
        );
    }
}

fn apply_param(cfg: &mut ScenarioConfig, param: &str, value: f64) -> crate::Result<()> {
    match param {
        "u_max" => cfg.u_max = value,
        "u_star" => cfg.u_star = value,
        "u_bar" => cfg.u_bar = value,
        "alpha_gain" => cfg.alpha_gain = value,
        "beta_gain" => cfg.beta_gain = value,
        "c_cap" => cfg.c_cap = value,
        "d_cap" => cfg.d_cap = value,
        "t_final" => cfg.t_final = value,
        "control_dt" => cfg.control_dt = value,
        "cfl" => cfg.cfl = value,
        "dt_max" => cfg.dt_max = value,
        "n_cells" => cfg.n_cells = value.round() as usize,
        "seed" => cfg.seed = value.round() as u64,
        other => {
            return Err(Error::Config {
                field: other.to_string(),
                reason: "not a sweepable scalar parameter".to_string(),
            })
        }
    }
    cfg.validate()
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OracleInstance {
    u_a: Option<f64>,
    u_b: Option<f64>,
    #[serde(rename = "C")]
    c: Option<f64>,
    #[serde(rename = "D")]
    d: Option<f64>,
    u_star: Option<f64>,
    u_max: Option<f64>,
    n: Option<usize>,
}

fn run_oracle(solver: &str, instance: &str) -> crate::Result<String> {
    let text = if instance.trim_start().starts_with('{') {
        instance.to_string()
    } else {
        let path = Path::new(instance);
        std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?
    };
    let inst: OracleInstance =
        serde_json::from_str(&text).map_err(|e| Error::ConfigParse(e.to_string()))?;

    let model = FluxModel::new(inst.u_max.unwrap_or(1.0))?;
    let params = FunctionalParams::new(
        &model,
        inst.u_star.unwrap_or(1.0 / 3.0),
        0.25 * model.u_max(),
        0.05,
        0.5,
        f64::INFINITY,
        f64::INFINITY,
    )?;
    let c = inst.c.unwrap_or(0.0);
    let d = inst.d.unwrap_or(0.0);
    let u_a = inst.u_a.unwrap_or(0.0);
    let u_b = inst.u_b.unwrap_or(0.0);
    let n = inst.n.unwrap_or(2000);

    let single = |v: Option<f64>| match v {
        Some(x) => format!("{x:.12}"),
        None => "infeasible".to_string(),
    };
    let pair = |v: Option<(f64, f64)>| match v {
        Some((a, b)) => format!("{a:.12} {b:.12}"),
        None => "infeasible".to_string(),
    };

    let name = solver.trim_start_matches("solve_");
    Ok(match name {
        "stab_left" => single(oracle::stab_left(u_b, c, &params, &model, n)),
        "stab_right" => single(oracle::stab_right(u_a, c, &params, &model, n)),
        "inv_left" => single(oracle::inv_left(u_b, d, &model, n)),
        "inv_right" => single(oracle::inv_right(u_a, d, &model, n)),
        "stab_both" => pair(oracle::stab_both(c, &params, &model, n)),
        "inv_both" => pair(oracle::inv_both(d, &model, n)),
        "compound_left" => single(oracle::compound_left(c, d, &params, &model, n)),
        "compound_right" => single(oracle::compound_right(c, d, &params, &model, n)),
        other => {
            return Err(Error::Config {
                field: "solver".to_string(),
                reason: format!("unknown solver `{other}`"),
            })
        }
    })
}
