use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use irs_core::scenario::{load_config, parse_aperture_config, run_scenario, ScenarioKindName};

#[derive(Parser)]
#[command(
    name = "irs-sim",
    version,
    about = "Reflecting-surface scenario runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Far-field beam steering.
    Steer(RunArgs),
    /// Near-field focusing and depth scan.
    Focus(RunArgs),
    /// Focus/defocus bit link.
    Modulate(RunArgs),
    /// Square-wave lattice harmonics.
    Timevary(RunArgs),
    /// Print the Fresnel interval of the configured aperture.
    Bounds(BoundsArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    config: PathBuf,
}

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn run(kind: ScenarioKindName, args: RunArgs) -> ExitCode {
    let mut config = match load_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    if config.kind.name() != kind {
        eprintln!(
            "error: {}: config describes a {} scenario, not {kind}",
            args.config.display(),
            config.kind.name()
        );
        return ExitCode::from(EXIT_VALIDATION);
    }
    if let Some(dir) = args.out_dir {
        config.output_dir = dir;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    for w in &config.warnings {
        log::warn!("{w}");
    }
    match run_scenario(&config) {
        Ok(out) => {
            print!("{}", out.summary_text());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn bounds(args: BoundsArgs) -> ExitCode {
    let text = match fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    let config = match parse_aperture_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    match config.report() {
        Ok(r) => {
            print!("{r}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match cli.command {
        Command::Steer(a) => run(ScenarioKindName::Steer, a),
        Command::Focus(a) => run(ScenarioKindName::Focus, a),
        Command::Modulate(a) => run(ScenarioKindName::Modulate, a),
        Command::Timevary(a) => run(ScenarioKindName::Timevary, a),
        Command::Bounds(a) => bounds(a),
    }
}
