//! Command-line front end: run a scenario to a CSV trace, sweep train
//! speeds, run mesh/time-step convergence studies, list built-in cases.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vtsi::scenario::{self, cases, Scheme, ScenarioConfig};

#[derive(Parser)]
#[command(name = "vtsi", version, about = "2-D vehicle-track-structure interaction analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its trace as CSV.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Also run a second scheme and print per-probe relative L∞ deltas.
        #[arg(long, value_name = "SCHEME")]
        compare: Option<String>,
        /// Trace output path (defaults to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep train speed and report per-speed response maxima.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Speeds as `start:end:step` (m/s).
        #[arg(long, default_value = "10:150:2")]
        speeds: String,
        /// Summary output path (defaults to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rerun a scenario over mesh and time-step refinements.
    Converge {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Elements per span, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "2,4,10,20,40,100")]
        elements: Vec<usize>,
        /// Time steps (s), comma separated.
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.005,0.002,0.001")]
        dts: Vec<f64>,
        /// Summary output path (defaults to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inspect the built-in case catalog.
    Cases {
        #[command(subcommand)]
        action: CasesAction,
    },
}

#[derive(Subcommand)]
enum CasesAction {
    /// List case names and descriptions.
    List,
    /// Print one case as a config file.
    Show { name: String },
}

#[derive(Args)]
struct ScenarioArgs {
    /// Built-in case name (see `cases list`).
    #[arg(long, conflicts_with = "config")]
    case: Option<String>,
    /// Scenario config file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the integration scheme
    /// (bauchau|bathe|oracle-bdf1|oracle-bdf2|oracle-direct).
    #[arg(long)]
    scheme: Option<String>,
    /// Override the time step (s).
    #[arg(long)]
    dt: Option<f64>,
    /// Override the elements per span.
    #[arg(long)]
    elements: Option<usize>,
    /// Override the train speed (m/s).
    #[arg(long)]
    speed: Option<f64>,
    /// Enable track irregularities with this seed (keeps configured PSD
    /// parameters, or class-6 defaults).
    #[arg(long)]
    seed: Option<u64>,
}

impl ScenarioArgs {
    fn resolve(&self) -> vtsi::Result<ScenarioConfig> {
        let mut cfg = match (&self.case, &self.config) {
            (Some(name), None) => cases::get(name)?,
            (None, Some(path)) => ScenarioConfig::from_file(path)?,
            _ => {
                return Err(vtsi::VtsiError::InvalidConfig(
                    "pass exactly one of --case or --config".into(),
                ))
            }
        };
        if let Some(scheme) = &self.scheme {
            cfg.run.scheme = Scheme::parse(scheme)?;
        }
        if let Some(dt) = self.dt {
            cfg.run.dt = dt;
        }
        if let Some(n) = self.elements {
            for span in cfg.bridge.spans.iter_mut() {
                span.1 = n;
            }
        }
        if let Some(v) = self.speed {
            cfg.run.speed = v;
        }
        if let Some(seed) = self.seed {
            match cfg.irregularity.as_mut() {
                Some(irr) => irr.seed = seed,
                None => {
                    cfg.irregularity = Some(scenario::IrregularityConfig {
                        seed,
                        tolerance: vtsi::irregularity::CLASS6_TOLERANCE,
                        roughness: 1.5e-6,
                        omega_r: 0.0206,
                        omega_c: 0.825,
                        omega_l: 0.00383,
                        omega_u: 13.573_83,
                        n_freq: 3540,
                    })
                }
            }
        }
        Ok(cfg)
    }
}

fn parse_speeds(spec: &str) -> vtsi::Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let err = || vtsi::VtsiError::InvalidConfig(format!("bad speed range `{spec}`, want start:end:step"));
    if parts.len() != 3 {
        return Err(err());
    }
    let start: f64 = parts[0].parse().map_err(|_| err())?;
    let end: f64 = parts[1].parse().map_err(|_| err())?;
    let step: f64 = parts[2].parse().map_err(|_| err())?;
    if step <= 0.0 || end < start {
        return Err(err());
    }
    let mut speeds = Vec::new();
    let mut v = start;
    while v <= end + 1e-9 {
        speeds.push(v);
        v += step;
    }
    Ok(speeds)
}

fn write_out<F>(out: Option<&PathBuf>, write: F) -> vtsi::Result<()>
where
    F: FnOnce(&mut dyn std::io::Write) -> vtsi::Result<()>,
{
    match out {
        Some(path) => {
            let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
            write(&mut file)
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)
        }
    }
}

fn main_inner() -> vtsi::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, compare, out } => {
            let cfg = scenario.resolve()?;
            if let Some(other) = compare {
                let other = Scheme::parse(&other)?;
                let deltas = cfg.compare(cfg.run.scheme, other)?;
                for (label, delta) in deltas {
                    println!("{label}: relative Linf = {delta:.6e}");
                }
                return Ok(());
            }
            let trace = cfg.run()?;
            write_out(out.as_ref(), |w| trace.write_csv(w))?;
            eprintln!(
                "{} steps, max scaled constraint residual {:.3e}",
                trace.times.len() - 1,
                trace.max_scaled_residual
            );
            Ok(())
        }
        Command::Sweep { scenario, speeds, out } => {
            let cfg = scenario.resolve()?;
            let speeds = parse_speeds(&speeds)?;
            let rows = scenario::sweep_speed(&cfg, &speeds);
            let failures = rows.iter().filter(|(_, r)| r.is_err()).count();
            write_out(out.as_ref(), |w| scenario::write_sweep_csv(w, &rows))?;
            if failures > 0 {
                eprintln!("{failures} of {} speeds failed; partial results kept", rows.len());
            }
            Ok(())
        }
        Command::Converge {
            scenario,
            elements,
            dts,
            out,
        } => {
            let cfg = scenario.resolve()?;
            let rows = scenario::convergence_study(&cfg, &elements, &dts)?;
            write_out(out.as_ref(), |w| scenario::write_convergence_csv(w, &rows))
        }
        Command::Cases { action } => {
            match action {
                CasesAction::List => {
                    for name in cases::NAMES {
                        println!("{name}: {}", cases::describe(name));
                    }
                }
                CasesAction::Show { name } => {
                    print!("{}", cases::get(&name)?.to_toml());
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
