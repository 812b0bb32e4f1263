use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use spinbath::analytic::fid_series_analytic;
use spinbath::compare::{run_compare, CompareRequest, CompareSide};
use spinbath::config::{parse_config, serialize_config};
use spinbath::csv::{emit_csv, format_g17};
use spinbath::model::{preset, PresetName, PresetOverrides};
use spinbath::nonrwa::TraceExtraction;
use spinbath::oracle::QUBIT_CAP;
use spinbath::rk4::uniform_grid;
use spinbath::series::{first_zero, recursion_metric};
use spinbath::solver::{SolveSettings, SolverRegistry};
use spinbath::{AngularFreq, Error, Frame, FullFrameSpec, SpinSystem, Window};

const EXIT_COMPARE_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INVALID: u8 = 3;
const EXIT_IO: u8 = 4;
const EXIT_NUMERICAL: u8 = 5;
const EXIT_CAPACITY: u8 = 6;
const EXIT_UNSUPPORTED: u8 = 7;

#[derive(Parser, Debug)]
#[command(name = "spinbath", version, about = "Central-spin free-induction-decay simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form RWA signal as CSV.
    Analytic(RunArgs),
    /// Non-RWA part propagation as CSV.
    Nonrwa(RunArgs),
    /// Brute-force density-matrix signal as CSV.
    Oracle(RunArgs),
    /// Compare two solvers (or two systems) on one grid.
    Compare(CompareArgs),
    /// Print the resolved system and summary figures.
    Report(RunArgs),
}

#[derive(Args, Debug, Clone)]
struct SystemArgs {
    /// Built-in parameter set: tms, tes, tes-virtual-13c, tes-lowfield.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    /// TOML system description.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Coupling J of the tms preset, in Hz.
    #[arg(long, requires = "preset")]
    tms_j_hz: Option<f64>,
    /// Override the central dissipation rate, in Hz.
    #[arg(long, requires = "preset")]
    center_gamma_hz: Option<f64>,
    /// Override group dissipation rates in group order, in Hz (comma separated).
    #[arg(long, requires = "preset", value_delimiter = ',')]
    group_gamma_hz: Vec<f64>,
}

#[derive(Args, Debug, Clone)]
struct GridArgs {
    /// End of the time grid, in s.
    #[arg(long, default_value_t = 3.0)]
    tmax: f64,
    /// Output sample spacing, in s.
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// Internal integration step, in s (solver default when omitted).
    #[arg(long)]
    step: Option<f64>,
    /// Oracle frame.
    #[arg(long, value_enum)]
    frame: Option<FrameArg>,
    /// Central resonance frequency for the lab frame, in Hz.
    #[arg(long)]
    omega_center_hz: Option<f64>,
    /// Group resonance frequencies for the lab frame, in Hz (comma separated).
    #[arg(long, value_delimiter = ',')]
    omega_group_hz: Vec<f64>,
    /// How the non-RWA signal is formed from the part trace.
    #[arg(long, value_enum, default_value_t = ExtractionArg::RealPart)]
    extraction: ExtractionArg,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Recursion-metric window START:END in s (report only; repeatable).
    #[arg(long)]
    window: Vec<Window>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Solver for the first series.
    #[arg(long, default_value = "analytic")]
    a: String,
    /// Solver for the second series.
    #[arg(long, default_value = "oracle")]
    b: String,
    /// Preset for the second series (defaults to the first system).
    #[arg(long, conflicts_with = "b_config")]
    b_preset: Option<String>,
    /// Config for the second series.
    #[arg(long)]
    b_config: Option<PathBuf>,
    /// Maximum allowed |re_a − re_b|.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    /// Recursion-metric window START:END in s (repeatable).
    #[arg(long)]
    window: Vec<Window>,
    /// Output file for the report (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FrameArg {
    Lab,
    Rwa,
    RotatingNonrwa,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ExtractionArg {
    RealPart,
    Coherent,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) => EXIT_IO,
        Error::NonFinite { .. } | Error::InvariantBreach { .. } => EXIT_NUMERICAL,
        Error::QubitCap { .. } => EXIT_CAPACITY,
        Error::MissingNonRwa(_) => EXIT_UNSUPPORTED,
        _ => EXIT_INVALID,
    }
}

fn hz(x: f64) -> AngularFreq {
    AngularFreq::from_hz(x)
}

fn load_system(preset_name: Option<&str>, config: Option<&Path>, args: Option<&SystemArgs>) -> Result<SpinSystem, Error> {
    match (preset_name, config) {
        (Some(name), _) => {
            let overrides = args.map_or_else(PresetOverrides::default, |a| PresetOverrides {
                tms_j: a.tms_j_hz.map(hz),
                center_gamma: a.center_gamma_hz.map(hz),
                group_gammas: a.group_gamma_hz.iter().copied().map(hz).collect(),
            });
            preset(name.parse::<PresetName>()?, &overrides)
        }
        (None, Some(path)) => parse_config(&std::fs::read_to_string(path)?),
        (None, None) => Err(Error::InvalidArgument("either --preset or --config is required".into())),
    }
}

fn system_from(args: &SystemArgs) -> Result<SpinSystem, Error> {
    load_system(args.preset.as_deref(), args.config.as_deref(), Some(args))
}

fn grid_from(args: &GridArgs) -> Result<Vec<f64>, Error> {
    if !(args.tmax > 0.0) || !args.tmax.is_finite() {
        return Err(Error::InvalidArgument(format!("--tmax {} must be positive", args.tmax)));
    }
    if !(args.dt > 0.0 && args.dt <= args.tmax) {
        return Err(Error::InvalidArgument(format!("--dt {} must lie in (0, tmax]", args.dt)));
    }
    if let Some(h) = args.step {
        if !(h > 0.0 && h <= args.dt) {
            return Err(Error::InvalidArgument(format!("--step {h} must lie in (0, dt]")));
        }
    }
    uniform_grid(0.0, args.tmax, args.dt)
}

fn settings_from(args: &GridArgs) -> SolveSettings {
    let frame = args.frame.map(|f| match f {
        FrameArg::Lab => FullFrameSpec {
            frame: Frame::Lab,
            omega_center: args.omega_center_hz.map(hz),
            omega_groups: args.omega_group_hz.iter().copied().map(hz).collect(),
        },
        FrameArg::Rwa => FullFrameSpec::rwa(),
        FrameArg::RotatingNonrwa => FullFrameSpec::rotating_nonrwa(),
    });
    SolveSettings {
        step: args.step,
        frame,
        extraction: match args.extraction {
            ExtractionArg::RealPart => TraceExtraction::RealPart,
            ExtractionArg::Coherent => TraceExtraction::Coherent,
        },
    }
}

fn threads() -> Result<usize, Error> {
    match std::env::var("SPINBATH_THREADS") {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Error::InvalidArgument(format!("SPINBATH_THREADS=`{v}` must be a positive integer"))),
        },
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn run_solver(solver: &str, args: &RunArgs) -> Result<u8, Error> {
    let system = system_from(&args.system)?;
    let grid = grid_from(&args.grid)?;
    let settings = settings_from(&args.grid);
    let series = SolverRegistry::with_defaults().get(solver)?.solve(&system, &grid, &settings)?;
    write_output(args.out.as_deref(), &emit_csv(&series))?;
    Ok(0)
}

fn default_windows(given: &[Window], tmax: f64) -> Vec<Window> {
    if !given.is_empty() {
        given.to_vec()
    } else if tmax >= 3.0 {
        vec![Window::new(0.5, 3.0)]
    } else {
        Vec::new()
    }
}

fn run_report(args: &RunArgs) -> Result<u8, Error> {
    let system = system_from(&args.system)?;
    let grid = grid_from(&args.grid)?;
    let analytic = fid_series_analytic(&system, &grid)?;
    let mut text = String::new();
    text.push_str("# system\n");
    text.push_str(&serialize_config(&system));
    text.push_str("\n# summary\n");
    text.push_str(&format!("total_qubits = {}\n", system.total_qubits()));
    text.push_str(&format!("oracle_capable = {}\n", system.total_qubits() <= QUBIT_CAP));
    text.push_str(&format!("nonrwa = {}\n", system.nonrwa.is_some()));
    match first_zero(&analytic, 1e-3) {
        Some(t) => text.push_str(&format!("analytic_first_zero_s = {}\n", format_g17(t))),
        None => text.push_str("analytic_first_zero_s = none\n"),
    }
    for w in default_windows(&args.window, args.grid.tmax) {
        let m = recursion_metric(&analytic, w)?;
        text.push_str(&format!("analytic_recursion_metric{w} = {}\n", format_g17(m)));
    }
    write_output(args.out.as_deref(), &text)?;
    Ok(0)
}

fn run_compare_cmd(args: &CompareArgs) -> Result<u8, Error> {
    let system_a = system_from(&args.system)?;
    let system_b = if args.b_preset.is_some() || args.b_config.is_some() {
        load_system(args.b_preset.as_deref(), args.b_config.as_deref(), None)?
    } else {
        system_a.clone()
    };
    let grid = grid_from(&args.grid)?;
    let side = |solver: &str, system: SpinSystem| CompareSide {
        label: format!("{solver}:{}", system.name),
        solver: solver.to_string(),
        settings: settings_from(&args.grid),
        system,
    };
    let request = CompareRequest {
        a: side(&args.a, system_a),
        b: side(&args.b, system_b),
        grid,
        tolerance: args.tolerance,
        windows: default_windows(&args.window, args.grid.tmax),
        threads: threads()?,
    };
    let (report, _, _) = run_compare(&SolverRegistry::with_defaults(), &request)?;
    write_output(args.out.as_deref(), &format!("{report}\n"))?;
    Ok(if report.passed { 0 } else { EXIT_COMPARE_FAILED })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Analytic(a) => run_solver("analytic", a),
        Command::Nonrwa(a) => run_solver("nonrwa", a),
        Command::Oracle(a) => run_solver("oracle", a),
        Command::Compare(a) => run_compare_cmd(a),
        Command::Report(a) => run_report(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
