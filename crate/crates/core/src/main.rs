use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use tdnlse::harness::output::check_distinct_outputs;
use tdnlse::harness::{calibrate_beta, emit_results, parse_config, run_batch, run_scenario, ScenarioConfig};
use tdnlse::Result;

#[derive(Parser)]
#[command(name = "tdnlse", about = "Damped nonlinear Schrodinger simulator in one dimension")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenarios and write timeseries.csv and summary.json for each.
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Output directory; with several configs each gets a subdirectory named after its file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep damping strengths on a base scenario and recommend one.
    Calibrate {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        betas: Vec<f64>,
    },
    /// Run a scenario and report only the identity residuals.
    Check { config: PathBuf },
    Version,
}

fn output_dir(cfg: &ScenarioConfig, path: &Path, out: Option<&Path>, batch: bool) -> PathBuf {
    match out {
        Some(dir) if batch => dir.join(path.file_stem().unwrap_or(path.as_os_str())),
        Some(dir) => dir.to_path_buf(),
        None => cfg.output.path.clone(),
    }
}

fn run(configs: &[PathBuf], out: Option<&Path>) -> Result<bool> {
    let cfgs = configs.iter().map(|p| parse_config(p)).collect::<Result<Vec<_>>>()?;
    let batch = configs.len() > 1;
    let dirs: Vec<PathBuf> = cfgs
        .iter()
        .zip(configs)
        .map(|(c, p)| output_dir(c, p, out, batch))
        .collect();
    check_distinct_outputs(&dirs)?;
    let mut all_ok = true;
    for ((result, dir), path) in run_batch(&cfgs).into_iter().zip(&dirs).zip(configs) {
        let r = match result {
            Ok(r) => r,
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                all_ok = false;
                continue;
            }
        };
        let (csv, summary) = emit_results(&r, dir)?;
        let k = r.final_eigenstate.map_or("none".to_string(), |k| k.to_string());
        println!(
            "{}: final_eigenstate={k} radiated={:.12e} work={:.12e} balance={:.3e} -> {}, {}",
            path.display(),
            r.radiated_total,
            r.work_total,
            r.balance_residual,
            csv.display(),
            summary.display()
        );
        eprintln!("{}: {} steps in {:.3} s", path.display(), r.total_steps, r.wall_time.as_secs_f64());
        if let Some(f) = &r.failure {
            eprintln!("{}: run cut short: {f}", path.display());
            all_ok = false;
        }
        if !r.consistent {
            eprintln!("{}: eigenstate detected but the energy balance does not close", path.display());
            all_ok = false;
        }
    }
    Ok(all_ok)
}

fn calibrate(config: &Path, betas: &[f64]) -> Result<bool> {
    let cfg = parse_config(config)?;
    let report = calibrate_beta(&cfg, betas)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(report.recommended.is_some())
}

fn check(config: &Path) -> Result<bool> {
    let cfg = parse_config(config)?;
    let r = run_scenario(&cfg)?;
    let report = json!({
        "residual_maxima": r.residuals,
        "ledger_closure": r.ledger_closure,
        "samples": r.records.len(),
        "finite": r.residuals.is_finite(),
    });
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(r.residuals.is_finite() && r.failure.is_none())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { configs, out } => run(configs, out.as_deref()),
        Command::Calibrate { config, betas } => calibrate(config, betas),
        Command::Check { config } => check(config),
        Command::Version => {
            println!("tdnlse {}", tdnlse::VERSION);
            Ok(true)
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
