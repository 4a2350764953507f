use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use fracdual_harness::record::{RunRecord, Status};
use fracdual_harness::{experiments, report, suite, sweep, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "fracdual",
    about = "Run, sweep and report fracdual experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run one experiment per value of a config field.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Dotted config path, such as `solver.alpha`.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
    },
    /// Summarize every record below a directory.
    Report {
        #[arg(long)]
        dir: PathBuf,
        /// Destination of the summary files; defaults to `--dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance suite.
    Check {
        #[arg(long, required = true)]
        all: bool,
        #[arg(long, default_value = "runs/check")]
        out: PathBuf,
    },
}

fn print_record(rec: &RunRecord) {
    println!("{} -> {}", rec.experiment(), rec.output_dir().display());
    for v in &rec.verdicts {
        let tag = match v.status {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Skipped => "skip",
        };
        let margin = v
            .margin
            .map(|m| format!(" margin {m:.3e}"))
            .unwrap_or_default();
        println!("  [{tag}] {}{margin}: {}", v.name, v.detail);
    }
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let rec = experiments::run(&cfg)?;
            print_record(&rec);
            Ok(rec.passed())
        }
        Command::Sweep {
            config,
            axis,
            values,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let values = sweep::parse_values(&values);
            let records = sweep::sweep(&cfg, &axis, &values, sweep::worker_count()?)?;
            records.iter().for_each(print_record);
            let records: Vec<_> = sweep::sweep_dirs(&cfg, &axis, &values)
                .into_iter()
                .zip(records)
                .collect();
            let files = report::report(&records, &cfg.output_dir)?;
            println!("summary: {}", files.csv.display());
            Ok(records.iter().all(|(_, r)| r.passed()))
        }
        Command::Report { dir, out } => {
            let records = report::collect(&dir)?;
            let files = report::report(&records, out.as_deref().unwrap_or(&dir))?;
            println!("{} runs -> {}", records.len(), files.csv.display());
            Ok(records.iter().all(|(_, r)| r.passed()))
        }
        Command::Check { out, .. } => {
            let criteria = suite::criteria(&out);
            let configs: Vec<ExperimentConfig> = criteria
                .iter()
                .flat_map(|c| c.runs.iter().cloned())
                .collect();
            let mut records = sweep::run_all(&configs, sweep::worker_count()?)?.into_iter();
            let mut ok = true;
            for c in &criteria {
                let recs: Vec<RunRecord> = records.by_ref().take(c.runs.len()).collect();
                ok &= recs.iter().all(RunRecord::passed);
                println!("{}", suite::summary_line(c, &recs));
            }
            let files = report::report(&report::collect(&out)?, &out)?;
            println!("summary: {}", files.csv.display());
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
