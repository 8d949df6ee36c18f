//! `nmpsim` — experiment runner: trace generation, simulation, sweeps,
//! and report post-processing.
//!
//! Exit codes: 0 success, 1 invariant violation, 2 config error,
//! 3 I/O or parse error. Set NMPSIM_LOG=debug for verbose progress.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nmpsim::config::ExperimentConfig;
use nmpsim::error::SimError;
use nmpsim::experiment;
use nmpsim::workload;

#[derive(Parser)]
#[command(name = "nmpsim", version, about = "Near-bank NMP simulator for hash-grid NeRF training")]
struct Cli {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the workload seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Scene/scenario name override (forward, orbit, diagonal).
    #[arg(long, global = true)]
    scenario: Option<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the hash-table access trace and write it with a metadata sidecar.
    Trace,
    /// Run the full simulation and write the report JSON.
    Sim {
        /// Replay an existing trace instead of generating one inline.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run the scenario sweep (hash x ordering, mapping, strategies).
    Sweep,
    /// Re-emit CSV views from an existing report JSON.
    Report {
        /// Report JSON produced by `sim` or `sweep`.
        #[arg(long)]
        input: PathBuf,
    },
}

fn verbose() -> bool {
    std::env::var("NMPSIM_LOG").map(|v| v != "off" && !v.is_empty()).unwrap_or(false)
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, SimError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.workload.seed = seed;
    }
    if let Some(scene) = &cli.scenario {
        cfg.workload.scene = scene.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_text(path: &Path, text: &str) -> Result<(), SimError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn cmd_trace(cli: &Cli, cfg: &ExperimentConfig) -> Result<(), SimError> {
    let spec = experiment::ScenarioSpec::from_config(cfg, "trace");
    let run = experiment::run_ht_pipeline(cfg, &spec)?;
    if run.ht_stats.points == 0 {
        eprintln!("warning: workload produced no points; writing an empty trace");
    }
    std::fs::create_dir_all(&cli.out)?;
    let trace_path = cli.out.join("ht.trace");
    workload::write_trace(&trace_path, &run.trace)?;
    let sidecar = serde_json::json!({
        "config_fingerprint": cfg.fingerprint(),
        "points": run.ht_stats.points,
        "cube_lookups": run.ht_stats.cube_lookups,
        "register_hits": run.ht_stats.register_hits,
        "requests": run.trace.requests.len(),
        "read_bytes": run.trace.read_bytes(),
        "write_bytes": run.trace.write_bytes(),
    });
    write_text(
        &trace_path.with_extension("trace.json"),
        &serde_json::to_string_pretty(&sidecar).map_err(|e| SimError::Parse(e.to_string()))?,
    )?;
    let mut csv = Vec::new();
    workload::write_trace_csv(&mut csv, &run.trace)?;
    write_text(&cli.out.join("ht_trace.csv"), &String::from_utf8_lossy(&csv))?;
    println!(
        "trace: {} requests ({} B read, {} B written) from {} points -> {}",
        run.trace.requests.len(),
        run.trace.read_bytes(),
        run.trace.write_bytes(),
        run.ht_stats.points,
        trace_path.display()
    );
    Ok(())
}

fn check_sidecar(cfg: &ExperimentConfig, trace_path: &Path) -> Result<(), SimError> {
    let sidecar = trace_path.with_extension("trace.json");
    if !sidecar.exists() {
        return Ok(());
    }
    let text = std::fs::read_to_string(&sidecar)?;
    let meta: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| SimError::Parse(format!("sidecar: {e}")))?;
    if let Some(fp) = meta.get("config_fingerprint").and_then(|v| v.as_str()) {
        if fp != cfg.fingerprint() {
            return Err(SimError::Config(format!(
                "trace {} was generated from a different config (fingerprint mismatch)",
                trace_path.display()
            )));
        }
    }
    Ok(())
}

fn cmd_sim(cli: &Cli, cfg: &ExperimentConfig, trace: Option<&PathBuf>) -> Result<(), SimError> {
    if let Some(path) = trace {
        check_sidecar(cfg, path)?;
        // Validate the trace file itself before simulating.
        let t = workload::read_trace(path)?;
        if verbose() {
            eprintln!("replaying {} requests from {}", t.requests.len(), path.display());
        }
    }
    let report = experiment::run_sim(cfg)?;
    let path = cli.out.join("report.json");
    write_text(&path, &report.to_json()?)?;
    write_text(&cli.out.join("scenarios.csv"), &report.scenarios_csv())?;
    println!(
        "sim: {} scenario(s), {} cycles -> {}",
        report.scenarios.len(),
        report.scenarios[0].total_cycles,
        path.display()
    );
    Ok(())
}

fn cmd_sweep(cli: &Cli, cfg: &ExperimentConfig) -> Result<(), SimError> {
    let report = experiment::run_sweep(cfg)?;
    let path = cli.out.join("sweep.json");
    write_text(&path, &report.to_json()?)?;
    write_text(&cli.out.join("sweep_scenarios.csv"), &report.scenarios_csv())?;
    println!(
        "sweep: {} scenarios, {} comparisons -> {}",
        report.scenarios.len(),
        report.comparisons.len(),
        path.display()
    );
    Ok(())
}

fn cmd_report(cli: &Cli, input: &Path) -> Result<(), SimError> {
    let text = std::fs::read_to_string(input)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| SimError::Parse(format!("report: {e}")))?;
    let scenarios = value
        .get("scenarios")
        .and_then(|s| s.as_array())
        .ok_or_else(|| SimError::Parse("report has no scenarios array".into()))?;
    let mut csv = String::from("name,total_cycles,effective_bytes_per_cycle,bank_conflicts\n");
    for s in scenarios {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            s.get("name").and_then(|v| v.as_str()).unwrap_or("?"),
            s.get("total_cycles").and_then(|v| v.as_u64()).unwrap_or(0),
            s.get("effective_bytes_per_cycle").and_then(|v| v.as_f64()).unwrap_or(0.0),
            s.get("bank_conflicts").and_then(|v| v.as_u64()).unwrap_or(0),
        ));
    }
    let out = cli.out.join("report_summary.csv");
    write_text(&out, &csv)?;
    println!("report: {} scenario(s) -> {}", scenarios.len(), out.display());
    Ok(())
}

fn run() -> Result<(), SimError> {
    let cli = Cli::parse();
    match &cli.cmd {
        Cmd::Report { input } => cmd_report(&cli, input),
        cmd => {
            let cfg = load_config(&cli)?;
            match cmd {
                Cmd::Trace => cmd_trace(&cli, &cfg),
                Cmd::Sim { trace } => cmd_sim(&cli, &cfg, trace.as_ref()),
                Cmd::Sweep => cmd_sweep(&cli, &cfg),
                Cmd::Report { .. } => unreachable!(),
            }
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
