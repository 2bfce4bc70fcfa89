use clap::{Args, Parser, Subcommand};
use shockratio_cli::{run_file, validate_file, Mode, RunOptions};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "shockratio",
    version,
    about = "Survival probabilities and ratio asymptotics of cumulative shock models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the task of every experiment in the file
    Run(RunArgs),
    /// Tabulate two or more methods side by side for every experiment
    Compare(RunArgs),
    /// Parse the file and check engine support without computing
    Validate { spec: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    spec: PathBuf,
    /// worker threads for independent experiments
    #[arg(long)]
    jobs: Option<usize>,
    /// output directory (defaults to the spec file's directory)
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// seed overriding every experiment's options.seed
    #[arg(long)]
    seed: Option<u64>,
    /// treat warnings as errors
    #[arg(long)]
    strict: bool,
}

fn run(args: RunArgs, mode: Mode) -> ExitCode {
    let opts = RunOptions {
        out_dir: args.out_dir,
        jobs: args.jobs,
        seed: args.seed,
        strict: args.strict,
    };
    match run_file(&args.spec, mode, &opts) {
        Ok(summary) => {
            for rec in &summary.manifest.experiments {
                for w in &rec.warnings {
                    eprintln!("warning: {}: {w}", rec.id);
                }
            }
            eprintln!("manifest: {}", summary.manifest_path.display());
            match summary
                .failures
                .iter()
                .map(|(id, e)| {
                    eprintln!("error: {id}: {e}");
                    e.exit_code()
                })
                .max()
            {
                Some(code) => ExitCode::from(code),
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(a) => run(a, Mode::Run),
        Command::Compare(a) => run(a, Mode::Compare),
        Command::Validate { spec } => match validate_file(&spec, Mode::Run) {
            Ok(k) => {
                println!("ok: {k} experiment(s)");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code())
            }
        },
    }
}
