use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use epk_core::cli::{load_config, parse_week_window, run_subcommand, AppError, Command};

#[derive(Parser)]
#[command(name = "epk", version, about = "SVEIRT influenza model toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate the uncontrolled model and check positivity and boundedness
    Simulate(Common),
    /// Optimal control by forward-backward sweep plus constant-effort scenarios
    Control(Common),
    /// Fit parameters to weekly incidence and run the growth-phase regression
    Fit(Common),
    /// LHS design, PRCC, spread of sampled R0 and an R0 level grid
    Sensitivity(Common),
    /// Effective reproduction number from weekly incidence
    Rt(Common),
    /// Reproduction numbers, equilibria and sensitivity indices as JSON
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file
    #[arg(long)]
    config: PathBuf,
    /// Bundled parameter preset, replacing the config's [model]
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, env = "EPK_OUT")]
    out: Option<PathBuf>,
    /// Inclusive week window `a:b` for the growth regression
    #[arg(long)]
    weeks: Option<String>,
    /// Integration step in weeks
    #[arg(long)]
    h: Option<f64>,
    /// Degree of the polynomial trend fitted by `fit`
    #[arg(long)]
    degree: Option<usize>,
}

fn run(command: Command, args: Common) -> Result<(), AppError> {
    let mut config = load_config(&args.config)?;
    if let Some(name) = &args.preset {
        config.use_preset(name)?;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(w) = &args.weeks {
        config.fit.weeks = Some(parse_week_window(w)?);
    }
    if let Some(h) = args.h {
        config.time.h = h;
    }
    if let Some(d) = args.degree {
        config.fit.degree = Some(d);
    }
    let out = args.out.or(config.out_dir.clone()).unwrap_or_else(|| PathBuf::from("epk-out"));
    for path in run_subcommand(&config, command, &out)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Control(a) => (Command::Control, a),
        Cmd::Fit(a) => (Command::Fit, a),
        Cmd::Sensitivity(a) => (Command::Sensitivity, a),
        Cmd::Rt(a) => (Command::Rt, a),
        Cmd::Report(a) => (Command::Report, a),
    };
    match run(command, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.machine_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
