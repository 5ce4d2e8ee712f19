mod commands;
mod config;
mod emit;

use clap::{Args, Parser, Subcommand};
use commands::Status;
use config::RunConfig;
use emit::Emitter;
use hyperdamp::verify::CRITERION_COUNT;
use std::path::PathBuf;
use std::process::ExitCode;

/// Set to anything but `0` or the empty string to run every parallel section on one thread.
const SINGLE_THREAD_ENV: &str = "HYPERDAMP_SINGLE_THREAD";

#[derive(Parser)]
#[command(name = "hyperdamp", version, about = "Damped waves on the Bolza surface")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    Surface {
        #[command(subcommand)]
        action: SurfaceAction,
    },
    Flow {
        #[command(subcommand)]
        action: FlowAction,
    },
    Control {
        #[command(subcommand)]
        action: ControlAction,
    },
    Spectrum {
        #[command(subcommand)]
        action: SpectrumAction,
    },
    Resolvent {
        #[command(subcommand)]
        action: ResolventAction,
    },
    Wave {
        #[command(subcommand)]
        action: WaveAction,
    },
    Words {
        #[command(subcommand)]
        action: WordsAction,
    },
    Verify {
        #[command(subcommand)]
        action: VerifyAction,
    },
    Mesh {
        #[command(subcommand)]
        action: MeshAction,
    },
}

#[derive(Subcommand)]
enum SurfaceAction {
    /// Generators, octagon vertices, area and mesh statistics.
    Info,
}

#[derive(Subcommand)]
enum FlowAction {
    /// Finite-time inf/sup of the damping averages over sampled geodesics.
    Average,
}

#[derive(Subcommand)]
enum ControlAction {
    /// Whether every sampled geodesic of the configured length meets the damping.
    Check,
}

#[derive(Subcommand)]
enum SpectrumAction {
    /// Damped eigenvalues in the configured window plus summary statistics.
    Solve,
}

#[derive(Subcommand)]
enum ResolventAction {
    /// Resolvent norm along a horizontal line.
    Scan,
}

#[derive(Subcommand)]
enum WaveAction {
    /// Time integration with an energy trace.
    Evolve,
}

#[derive(Subcommand)]
enum WordsAction {
    /// Exact word counts and the scaled bound over a dyadic grid of h.
    Bound(WordsArgs),
}

#[derive(Args)]
struct WordsArgs {
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    kmin: Option<u32>,
    #[arg(long)]
    kmax: Option<u32>,
}

#[derive(Subcommand)]
enum VerifyAction {
    /// Runs the acceptance criteria.
    All {
        /// Comma-separated criterion numbers.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

#[derive(Subcommand)]
enum MeshAction {
    /// Sparse K, M and A in plain text plus the mesh as JSON.
    Export,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Surface { .. } => "surface info",
            Command::Flow { .. } => "flow average",
            Command::Control { .. } => "control check",
            Command::Spectrum { .. } => "spectrum solve",
            Command::Resolvent { .. } => "resolvent scan",
            Command::Wave { .. } => "wave evolve",
            Command::Words { .. } => "words bound",
            Command::Verify { .. } => "verify all",
            Command::Mesh { .. } => "mesh export",
        }
    }
}

const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_ACCEPTANCE: u8 = 3;

fn load_config(cli: &Cli) -> Result<RunConfig, String> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            RunConfig::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Command::Words { action: WordsAction::Bound(a) } = &cli.command {
        let w = &mut cfg.words;
        w.rho = a.rho.unwrap_or(w.rho);
        w.alpha = a.alpha.unwrap_or(w.alpha);
        w.kmin = a.kmin.unwrap_or(w.kmin);
        w.kmax = a.kmax.unwrap_or(w.kmax);
    }
    if let Some(dir) = &cli.out {
        cfg.output.directory = dir.to_string_lossy().into_owned();
    }
    cfg.validate().map_err(|p| p.0.join("\n"))?;
    Ok(cfg)
}

/// Library errors caused by bad input map to the validation code, everything else is
/// numerical.
fn error_code(err: &anyhow::Error) -> u8 {
    use hyperdamp::Error as E;
    match err.chain().find_map(|e| e.downcast_ref::<E>()) {
        Some(E::Argument(_) | E::Domain(_) | E::OutOfRange { .. }) => EXIT_VALIDATION,
        Some(_) => EXIT_NUMERICAL,
        None if err.chain().any(|e| e.is::<std::io::Error>()) => EXIT_VALIDATION,
        None => EXIT_NUMERICAL,
    }
}

fn single_thread_requested() -> bool {
    std::env::var(SINGLE_THREAD_ENV).map(|v| !v.is_empty() && v != "0").unwrap_or(false)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("invalid configuration:\n{msg}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    if single_thread_requested() {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(1).build_global() {
            eprintln!("warning: could not restrict the thread pool: {e}");
        }
    }
    if let Command::Verify { action: VerifyAction::All { only } } = &cli.command {
        if let Some(bad) = only.iter().find(|id| !(1..=CRITERION_COUNT).contains(*id)) {
            eprintln!("invalid configuration:\n--only: criterion {bad} not in 1..={CRITERION_COUNT}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    }

    let mut out = Emitter::new(&cfg, cli.command.name());
    let mut acceptance_failed = false;
    let result = match &cli.command {
        Command::Surface { .. } => commands::surface_info(&cfg, &mut out),
        Command::Flow { .. } => commands::flow_average(&cfg, &mut out),
        Command::Control { .. } => commands::control_check(&cfg, &mut out),
        Command::Spectrum { .. } => commands::spectrum_solve(&cfg, &mut out),
        Command::Resolvent { .. } => commands::resolvent(&cfg, &mut out),
        Command::Wave { .. } => commands::wave_evolve(&cfg, &mut out),
        Command::Words { .. } => commands::words_bound(&cfg, &mut out),
        Command::Mesh { .. } => commands::mesh_export(&cfg, &mut out),
        Command::Verify { action: VerifyAction::All { only } } => commands::verify_all(only, &mut out).map(|r| {
            acceptance_failed = r.iter().any(|c| !c.passed);
            Status::Ok
        }),
    };
    let status = match result {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error in {}: {e:#}", cli.command.name());
            return ExitCode::from(error_code(&e));
        }
    };
    match out.commit(std::path::Path::new(&cfg.output.directory)) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    }
    if let Status::Violation(msg) = status {
        eprintln!("invariant violated: {msg}");
        return ExitCode::from(EXIT_NUMERICAL);
    }
    if acceptance_failed {
        eprintln!("acceptance failures present");
        return ExitCode::from(EXIT_ACCEPTANCE);
    }
    ExitCode::SUCCESS
}
