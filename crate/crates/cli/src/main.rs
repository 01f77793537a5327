use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spectral_lab_cli::run::{load, suite_table};
use spectral_lab_cli::{output_root, run_file, run_suite};

#[derive(Parser)]
#[command(name = "spectral-lab", version, about = "Run spectral-lab scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Run {
        config: PathBuf,
        /// Output root (overrides SPECTRAL_LAB_OUT).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a scenario without computing anything.
    Validate { config: PathBuf },
    /// Run every *.cfg in a directory and print a pass/fail table.
    Suite {
        dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c.clamp(0, 255) as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out } => {
            let root = output_root(out.as_deref());
            let o = run_file(&config, &root);
            if o.exit_code == 0 {
                if let Some(d) = &o.dir {
                    println!("ok: {} -> {}", config.display(), d.display());
                }
            } else {
                eprintln!("{}", o.message);
            }
            code(o.exit_code)
        }
        Command::Validate { config } => match load(&config) {
            Ok(s) => {
                println!("ok: {} ({})", s.name, s.pipeline);
                code(0)
            }
            Err((c, msg)) => {
                eprintln!("{msg}");
                code(c)
            }
        },
        Command::Suite { dir, jobs, out } => {
            let root = output_root(out.as_deref());
            match run_suite(&dir, &root, jobs) {
                Ok(outcomes) => {
                    print!("{}", suite_table(&outcomes));
                    for o in outcomes.iter().filter(|o| o.exit_code != 0) {
                        eprintln!("{}", o.message);
                    }
                    code(if outcomes.iter().all(|o| o.exit_code == 0) {
                        0
                    } else {
                        1
                    })
                }
                Err(e) => {
                    eprintln!("cannot run suite in {}: {e}", dir.display());
                    code(1)
                }
            }
        }
    }
}
