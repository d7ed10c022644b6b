use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hiersim::scenario::{
    emit_plots, load_scenario_source, read_manifest, run_scenario, validate_text, ScenarioError, BUNDLED,
};
use hiersim::thermal::{
    generate_rc_trace, read_trace_csv, rollout_rmse, train, write_model, write_trace_csv, HvacPolicy, RcZoneSpec,
    TraceGenConfig, TrainConfig,
};

/// Hierarchical building/DER co-simulation.
///
/// Log verbosity follows RUST_LOG (e.g. RUST_LOG=info).
#[derive(Parser)]
#[command(name = "hiersim", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and wire-check a scenario (file path or bundled name).
    Validate { scenario: String },
    /// Run a scenario, or re-run from a run directory's manifest.txt.
    Run {
        scenario: String,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write SVG plots into the output directory.
        #[arg(long)]
        plots: bool,
    },
    /// Train a constrained thermal model on a trace CSV.
    TrainThermal {
        csv: PathBuf,
        #[arg(long, default_value_t = 2000)]
        epochs: usize,
        #[arg(long, default_value_t = 96)]
        horizon: usize,
        #[arg(long)]
        out: PathBuf,
        /// Fraction of the trace held out (from the end) for evaluation.
        #[arg(long, default_value_t = 0.2)]
        holdout: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a synthetic summer trace from a single-zone RC reference.
    GenRcTrace {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 90)]
        days: usize,
        /// J/K
        #[arg(long, default_value_t = 1e7)]
        capacitance: f64,
        /// K/W
        #[arg(long, default_value_t = 0.004)]
        resistance: f64,
        /// HVAC cycles on a 24 ± 0.5 °C deadband unless set.
        #[arg(long)]
        hvac_off: bool,
        #[arg(long, default_value = "2023-06-01")]
        start: chrono::NaiveDate,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// List the bundled scenarios.
    ListScenarios,
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn source(spec: &str, seed: Option<u64>) -> Result<(String, PathBuf, Option<u64>), Failure> {
    if Path::new(spec).file_name().is_some_and(|n| n == "manifest.txt") {
        let (m, text) = read_manifest(Path::new(spec))?;
        return Ok((text, m.base_dir, Some(seed.unwrap_or(m.seed))));
    }
    let (text, base) = load_scenario_source(spec)?;
    Ok((text, base, seed))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Validate { scenario } => {
            let (text, base, seed) = source(&scenario, None)?;
            let cfg = validate_text(&text, &base, seed)?;
            println!(
                "{}: ok ({} buildings, {} steps)",
                cfg.simulation.name,
                cfg.buildings.len(),
                cfg.simulation.steps
            );
        }
        Cmd::Run {
            scenario,
            out,
            seed,
            plots,
        } => {
            let (text, base, seed) = source(&scenario, seed)?;
            let cfg = validate_text(&text, &base, seed)?;
            let m = run_scenario(&cfg, &out)?;
            print!("{}", m.to_text());
            if plots || cfg.output.plots {
                let r = emit_plots(&out, None)?;
                for p in r.written {
                    println!("wrote {}", p.display());
                }
                for n in r.skipped {
                    println!("{n}");
                }
            }
        }
        Cmd::TrainThermal {
            csv,
            epochs,
            horizon,
            out,
            holdout,
            seed,
        } => {
            let trace = read_trace_csv(&csv).map_err(|e| Failure::Validation(format!("{}: {e}", csv.display())))?;
            if !(0.0..1.0).contains(&holdout) {
                return Err(Failure::Validation("--holdout must lie in [0, 1)".into()));
            }
            let n_test = (trace.len() as f64 * holdout).round() as usize;
            let (fit, test) = trace.split_at(trace.len() - n_test);
            let cfg = TrainConfig {
                epochs,
                horizon,
                seed,
                ..TrainConfig::default()
            };
            let report = train(&fit, &cfg).map_err(|e| Failure::Runtime(e.to_string()))?;
            let file = std::fs::File::create(&out).map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
            write_model(&report.params, std::io::BufWriter::new(file)).map_err(|e| Failure::Runtime(e.to_string()))?;
            let eval_h = horizon.min(test.len().saturating_sub(1));
            let rmse = if eval_h > 0 {
                rollout_rmse(&report.params, &test, eval_h).map_err(|e| Failure::Runtime(e.to_string()))?
            } else {
                f64::NAN
            };
            println!(
                "final_loss = {}",
                report.loss_history.last().copied().unwrap_or(f64::NAN)
            );
            println!("heldout_rmse_c = {rmse}");
            println!("heldout_horizon = {eval_h}");
            println!("wall_time_s = {:.3}", report.wall_time.as_secs_f64());
            println!("model = {}", out.display());
        }
        Cmd::GenRcTrace {
            out,
            days,
            capacitance,
            resistance,
            hvac_off,
            start,
            seed,
        } => {
            let mut spec = RcZoneSpec::new(capacitance, resistance).map_err(|e| Failure::Validation(e.to_string()))?;
            spec.solar_aperture = 2.0;
            spec.gain_per_occupant = 100.0;
            spec.gain_per_activity = 300.0;
            let policy = if hvac_off {
                HvacPolicy::Off
            } else {
                HvacPolicy::Deadband {
                    setpoint: 24.0,
                    band: 1.0,
                    q_max: 4000.0,
                }
            };
            let start = start.and_hms_opt(0, 0, 0).expect("midnight exists");
            let trace = generate_rc_trace(&TraceGenConfig::summer(spec, start, days, policy, seed))
                .map_err(|e| Failure::Validation(e.to_string()))?;
            write_trace_csv(&trace, &out).map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
            println!("wrote {} rows to {}", trace.len(), out.display());
        }
        Cmd::ListScenarios => {
            for b in BUNDLED {
                println!("{:<26} {}", b.name, b.summary);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
