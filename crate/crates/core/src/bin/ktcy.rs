use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use ktcy::runner::{run, Command};

#[derive(Clone, Copy, ValueEnum)]
enum Sub {
    Solve,
    Verify,
    Sweep,
    Report,
}

/// Calabi-Yau solver and estimate checks on the Kodaira-Thurston manifold.
#[derive(Parser)]
#[command(version)]
struct Args {
    #[arg(value_enum)]
    command: Sub,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let cmd = match args.command {
        Sub::Solve => Command::Solve,
        Sub::Verify => Command::Verify,
        Sub::Sweep => Command::Sweep,
        Sub::Report => Command::Report,
    };
    match run(cmd, &args.config, &args.out) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("ktcy {}: {e}", cmd.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
