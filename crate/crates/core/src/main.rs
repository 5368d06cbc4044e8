use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use sehasel::circuit::envelope;
use sehasel::harness::trace::column_index;
use sehasel::harness::{run_scenario, ScenarioConfig, ScenarioKind, SimTrace};
use sehasel::sysid::{
    calibrate_p_from_displacement_drop, fit_exponential, DecayScenario, DecayTrace, FitWeighting, TraceKind,
};
use sehasel::{Error, Result};

#[derive(Parser)]
#[command(
    name = "sehasel",
    version,
    about = "Series-elastic electrohydraulic actuator workbench"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Overrides the sensor noise seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for traces and reports; relative output paths resolve against it.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run a time-domain scenario.
    Simulate { config: PathBuf },
    /// Run a FREQ_SWEEP or HYSTERESIS_SWEEP scenario.
    Sweep { config: PathBuf },
    /// Fit an exponential decay to one column of a trace CSV.
    Fit {
        trace: PathBuf,
        #[arg(long, default_value = "u_o")]
        column: String,
        /// DC step magnitude, enables the divider ratio estimate.
        #[arg(long)]
        magnitude: Option<f64>,
        /// Least absolute deviations instead of least squares.
        #[arg(long)]
        robust: bool,
    },
    /// Print leakage constants and the AC envelope of a config's circuit.
    Envelope {
        config: PathBuf,
        /// Drive frequency, Hz; defaults to the config's drive frequency.
        #[arg(long)]
        frequency: Option<f64>,
    },
    /// Decay rate reproducing a displacement drop under the config's DC load.
    CalibrateP {
        drop: f64,
        horizon: f64,
        config: PathBuf,
    },
}

fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    ScenarioConfig::parse(&text)
}

fn prepare(cli: &Cli, path: &Path) -> Result<ScenarioConfig> {
    let mut config = load_config(path)?;
    if let Some(seed) = cli.seed {
        config.plant.rng_seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        let stem = config.kind.as_str().to_lowercase();
        let resolve =
            |p: Option<PathBuf>, default: String| Some(dir.join(p.unwrap_or_else(|| default.into())));
        config.output.trace = resolve(config.output.trace.take(), format!("{stem}.csv"));
        config.output.report = resolve(config.output.report.take(), format!("{stem}.report.txt"));
    }
    Ok(config)
}

fn simulate(cli: &Cli, path: &Path, sweep: bool) -> Result<String> {
    let config = prepare(cli, path)?;
    let is_sweep = matches!(
        config.kind,
        ScenarioKind::FreqSweep | ScenarioKind::HysteresisSweep
    );
    if sweep != is_sweep {
        let expected = if sweep { "a sweep" } else { "a time-domain" };
        return Err(Error::validation(
            "scenario.kind",
            format!("{} is not {expected} scenario", config.kind),
        ));
    }
    let run = run_scenario(&config)?;
    let mut out = run.report.to_text();
    if let Some(table) = &run.table {
        out.push('\n');
        out.push_str(&table.to_text());
    }
    Ok(out)
}

fn fit(path: &Path, column: &str, magnitude: Option<f64>, robust: bool) -> Result<String> {
    let file = fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let trace = SimTrace::read_csv(file)?;
    let index = column_index(column)?;
    let kind = match column {
        "u_i" | "u_o" => TraceKind::Voltage,
        "x_a" | "x_b" => TraceKind::Displacement,
        other => return Err(Error::Data(format!("column `{other}` is not a decay record"))),
    };
    let decay = DecayTrace {
        dt: trace.dt_record,
        values: trace.column(index),
        kind,
        drive_magnitude: magnitude,
    };
    let weighting = if robust {
        FitWeighting::AbsoluteDeviation
    } else {
        FitWeighting::Uniform
    };
    Ok(fit_exponential(&decay, weighting)?.report())
}

fn show_envelope(path: &Path, frequency: Option<f64>) -> Result<String> {
    let config = load_config(path)?;
    let f = frequency.unwrap_or(config.drive.frequency);
    let env = envelope(&config.circuit, f)?;
    Ok(format!(
        "k: {:.8e}\np: {:.8e}\nfrequency: {f:.8e}\nk1: {:.8e}\nk2: {:.8e}\nwidth: {:.8e}\n",
        config.circuit.k(),
        config.circuit.p(),
        env.k1,
        env.k2,
        env.width()
    ))
}

fn calibrate(drop: f64, horizon: f64, path: &Path) -> Result<String> {
    let config = load_config(path)?;
    let scenario = DecayScenario {
        actuator: config.actuator,
        k: config.circuit.k(),
        magnitude: config.drive.magnitude,
        load_force: config.plant.preload(),
    };
    let p = calibrate_p_from_displacement_drop(drop, horizon, &scenario)?;
    Ok(format!("p: {p:.8e}\ntime_constant: {:.8e}\n", -1.0 / p))
}

fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Simulate { config } => simulate(cli, config, false),
        Command::Sweep { config } => simulate(cli, config, true),
        Command::Fit {
            trace,
            column,
            magnitude,
            robust,
        } => fit(trace, column, *magnitude, *robust),
        Command::Envelope { config, frequency } => show_envelope(config, *frequency),
        Command::CalibrateP {
            drop,
            horizon,
            config,
        } => calibrate(*drop, *horizon, config),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.format {
        Format::Csv => {}
    }
    match run(&cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
