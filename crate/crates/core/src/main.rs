use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crl_mnp::harness::{compare_solvers, enumerate_measurements, run_experiment, validate_config, ExperimentConfig, HarnessError};

const ENUMERATE_LIMIT: u64 = 1 << 20;

#[derive(Parser)]
#[command(name = "crl-mnp", version, about = "Constrained RL by minimum-norm-point reduction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured solver and write the trace CSV and JSON summary.
    Solve(CommonArgs),
    /// Run vanilla CG and modified MNP side by side and write a paired CSV.
    Compare(CommonArgs),
    /// Check a config and print the problem dimensions.
    Validate(CommonArgs),
    /// Print the exact measurement of every deterministic policy as CSV.
    Enumerate(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the TOML config.
    config_file: Option<PathBuf>,
    #[arg(long = "config", conflicts_with = "config_file")]
    config: Option<PathBuf>,
    /// Overrides the config's output path.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Overrides the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
    /// Exit with code 3 unless every run reaches the target.
    #[arg(long)]
    require_feasible: bool,
}

impl CommonArgs {
    fn config_path(&self) -> Result<&PathBuf, HarnessError> {
        self.config_file.as_ref().or(self.config.as_ref()).ok_or_else(|| HarnessError::Config {
            field: "--config".into(),
            message: "no config file given".into(),
        })
    }

    fn load(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = ExperimentConfig::load(self.config_path()?)?;
        if let Some(out) = &self.output {
            cfg.output = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

fn run(command: Command) -> Result<ExitCode, HarnessError> {
    match command {
        Command::Solve(args) => {
            let cfg = args.load()?;
            let report = run_experiment(&cfg)?;
            if !args.quiet {
                println!(
                    "{}: {} run(s), final dist^2 median {:.3e}, stored policies median {}, trace {}",
                    report.solver.name(),
                    report.repeats,
                    report.final_dist_sq.median,
                    report.final_stored_policies.median,
                    cfg.output.display()
                );
            }
            Ok(feasibility_code(args.require_feasible, report.all_reached_target))
        }
        Command::Compare(args) => {
            let cfg = args.load()?;
            let report = compare_solvers(&cfg)?;
            if !args.quiet {
                for r in [&report.vanilla_cg, &report.modified_mnp] {
                    println!(
                        "{}: final dist^2 median {:.3e}, stored policies median {}",
                        r.solver.name(),
                        r.final_dist_sq.median,
                        r.final_stored_policies.median
                    );
                }
                println!("paired trace {}", cfg.output.display());
            }
            let reached = report.vanilla_cg.all_reached_target && report.modified_mnp.all_reached_target;
            Ok(feasibility_code(args.require_feasible, reached))
        }
        Command::Validate(args) => {
            let report = validate_config(args.config_path()?)?;
            if !args.quiet {
                println!("{report}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Enumerate(args) => {
            let cfg = args.load()?;
            let mdp = cfg.validate()?;
            let rows = enumerate_measurements(&mdp, ENUMERATE_LIMIT)?;
            let mut header = vec!["policy".to_string()];
            header.extend((0..mdp.measurement_dim()).map(|k| format!("j{k}")));
            let sink: Box<dyn Write> = match &args.output {
                Some(path) => Box::new(
                    std::fs::File::create(path).map_err(|source| HarnessError::Io { path: path.clone(), source })?,
                ),
                None => Box::new(io::stdout().lock()),
            };
            let mut w = csv::Writer::from_writer(sink);
            w.write_record(&header)?;
            for (policy, j) in rows {
                let mut record = vec![policy.label()];
                record.extend(j.iter().map(f64::to_string));
                w.write_record(&record)?;
            }
            w.flush().map_err(csv::Error::from)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn feasibility_code(required: bool, reached: bool) -> ExitCode {
    if required && !reached {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
