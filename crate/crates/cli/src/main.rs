use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use opwg_cli::config::ExperimentConfig;
use opwg_cli::output::{render_csv, write_outputs};
use opwg_cli::presets::{preset, PRESET_NAMES};
use opwg_cli::study::run_study;
use opwg_cli::verify::verify_all;

/// Convergence studies for the over-penalized weak Galerkin heat solver.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// Directory that receives result folders (default: $OPWG_OUTPUT_ROOT or ./results).
    #[arg(long, global = true)]
    output_root: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the study described by a configuration file.
    Run { config: PathBuf },
    /// Run a named preset (table1 .. table6, table3_scaled, table6_scaled).
    Preset {
        name: String,
        /// Required for presets marked long-running.
        #[arg(long)]
        allow_long: bool,
    },
    /// List the presets.
    Presets,
    /// Re-run the golden regression cases and compare their CSV output.
    Verify,
}

fn output_root(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("OPWG_OUTPUT_ROOT").map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("results"))
}

fn execute(config: &ExperimentConfig, root: &std::path::Path) -> Result<()> {
    let result = run_study(config)?;
    print!("{}", render_csv(&result.report));
    let files = write_outputs(&result, root).with_context(|| format!("writing results under {}", root.display()))?;
    println!("wrote {}, {}, {}", files.csv.display(), files.svg.display(), files.manifest.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match real_main() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<ExitCode> {
    let cli = Cli::parse();
    let root = output_root(cli.output_root);
    match cli.command {
        Command::Run { config } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let config = ExperimentConfig::parse(&text).with_context(|| format!("in {}", config.display()))?;
            execute(&config, &root)?;
        }
        Command::Preset { name, allow_long } => {
            let Some(p) = preset(&name) else {
                bail!("unknown preset `{name}`; choose one of {}", PRESET_NAMES.join(", "));
            };
            if p.long_running && !allow_long {
                bail!("preset `{name}` ({}) is long-running; pass --allow-long to run it", p.description);
            }
            execute(&p.config, &root)?;
        }
        Command::Presets => {
            for name in PRESET_NAMES {
                let p = preset(name).expect("listed preset");
                let mark = if p.long_running { " [long-running]" } else { "" };
                println!("{name:<14} {}{mark}", p.description);
            }
        }
        Command::Verify => {
            let outcomes = verify_all()?;
            let mut ok = true;
            for o in &outcomes {
                match &o.mismatch {
                    None => println!("PASS {}", o.name),
                    Some((line, expected, actual)) => {
                        ok = false;
                        println!("FAIL {} line {line}: expected `{expected}`, got `{actual}`", o.name);
                    }
                }
            }
            if !ok {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
