use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use vcslab::config::{bundled, list_bundled, ExperimentConfig};
use vcslab::experiments::run;

#[derive(Parser)]
#[command(
    name = "vcslab",
    version,
    about = "Vector coherent states and intertwining operators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a TOML file or a bundled config name.
    Run {
        config: String,
        /// Output directory [default: vcslab-out/<name>].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for parallel sections.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// List the bundled configs.
    List,
}

fn load(arg: &str) -> Result<ExperimentConfig, String> {
    let text = if Path::new(arg).is_file() {
        fs::read_to_string(arg).map_err(|e| format!("{arg}: {e}"))?
    } else if let Some(t) = bundled(arg) {
        t.to_string()
    } else {
        return Err(format!("{arg}: no such file or bundled config"));
    };
    ExperimentConfig::parse(&text).map_err(|e| format!("{arg}: {e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for name in list_bundled() {
                let cfg = ExperimentConfig::parse(bundled(name).unwrap()).expect("bundled config parses");
                println!("{name:<20} {:<20} {}", cfg.experiment.kind(), cfg.anchor);
            }
            ExitCode::SUCCESS
        }
        Command::Run {
            config,
            out,
            seed,
            jobs,
        } => {
            let mut cfg = match load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(n) = jobs {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            }
            let (report, rec) = run(&cfg);
            let dir = out.unwrap_or_else(|| PathBuf::from("vcslab-out").join(&cfg.name));
            if let Err(e) = report.write(&dir, &rec) {
                eprintln!("error: writing {}: {e}", dir.display());
                return ExitCode::from(1);
            }
            print!("{}", report.summary());
            println!("report written to {}", dir.display());
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
