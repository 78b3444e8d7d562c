use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sitesel::harness::{self, Figure, Job, RunError, Scenario};

#[derive(Parser)]
#[command(name = "sitesel", version, about = "Cavity site-selection simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario from a TOML config.
    Simulate {
        scenario: String,
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Parse and check the config, then exit without running.
        #[arg(long)]
        validate_only: bool,
    },
    /// Produce the data behind one figure panel.
    Reproduce {
        tag: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn fail(e: RunError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn usage(msg: String) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let command = format!("sitesel {}", args.join(" "));
    match cli.command {
        Command::Simulate {
            scenario,
            config,
            seed,
            out,
            validate_only,
        } => {
            let scenario: Scenario = match scenario.parse() {
                Ok(s) => s,
                Err(m) => return usage(m),
            };
            let mut cfg = match harness::load_config(&config, scenario) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            if validate_only {
                println!("{}: ok", config.display());
                return ExitCode::SUCCESS;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let mut job = Job::new(scenario, cfg);
            if let Some(dir) = config.parent() {
                job.base_dir = dir.to_path_buf();
            }
            match harness::execute(&[job], &out, &command) {
                Ok(m) => {
                    for o in &m.outputs {
                        println!("{}", out.join(&o.file).display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Reproduce { tag, seed, out } => {
            let fig: Figure = match tag.parse() {
                Ok(f) => f,
                Err(m) => return usage(m),
            };
            let out = out.unwrap_or_else(|| PathBuf::from("out").join(fig.tag()));
            match harness::reproduce(fig, &out, seed) {
                Ok(m) => {
                    for o in &m.outputs {
                        println!("{}", out.join(&o.file).display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
    }
}
