use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lab::config::parse_config;
use lab::{families, run, selftest, THREADS_ENV};

#[derive(Parser)]
#[command(name = "lab", version, about = "Defect measure experiments on grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Output directory; overrides `[output] dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; overrides the environment.
        #[arg(long)]
        threads: Option<usize>,
        /// Also write SVG drawings.
        #[arg(long)]
        svg: bool,
    },
    /// Print the known field families.
    ListFamilies,
    /// Run the acceptance suite.
    Selftest {
        /// Directory for the suite's CSV files.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn init_threads(flag: Option<usize>) -> Result<usize, String> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var(THREADS_ENV) {
            Ok(s) => s.trim().parse().map_err(|_| format!("{THREADS_ENV} must be a thread count, got {s:?}"))?,
            Err(_) => 0,
        },
    };
    if n > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    }
    Ok(rayon::current_num_threads())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<ExitCode, String> {
    match Cli::parse().command {
        Command::Run { config, out, threads, svg } => {
            let threads = init_threads(threads)?;
            let text =
                std::fs::read_to_string(&config).map_err(|e| format!("cannot read {}: {e}", config.display()))?;
            let mut cfg = parse_config(&text).map_err(|e| format!("{}: {e}", config.display()))?;
            if let Some(dir) = out {
                cfg.out_dir = dir;
            }
            cfg.svg |= svg;
            let report = run::run(&cfg).map_err(|e| e.to_string())?;
            report.write(&cfg.out_dir, threads).map_err(|e| e.to_string())?;
            print!("{}", report.render());
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::ListFamilies => {
            for (name, about) in families::all() {
                println!("{name:<16} {about}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Selftest { out, seed, threads } => {
            init_threads(threads)?;
            let report = selftest::selftest(seed, |c| println!("{}", c.line()));
            if let Some(dir) = out {
                report.write(&dir).map_err(|e| format!("cannot write {}: {e}", dir.display()))?;
            }
            let n = report.criteria.iter().filter(|c| c.passed).count();
            println!("{n}/{} criteria passed", report.criteria.len());
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}
