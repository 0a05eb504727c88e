use std::fs;
use std::process::ExitCode;

use clap::Parser;

use netrepair::orchestrator::{render_report, run_pipeline, run_train_baseline, Cli, Invocation, ReportOptions, RunStatus};
use netrepair::Error;

const USAGE_ERROR: u8 = 1;
const PARTIAL_FAILURE: u8 = 2;

fn exit_for(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Config(_) | Error::UnsupportedArchitecture { .. } => ExitCode::from(USAGE_ERROR),
        _ => ExitCode::from(PARTIAL_FAILURE),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(USAGE_ERROR)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let invocation = match cli.into_invocation() {
        Ok(i) => i,
        Err(e) => return exit_for(&e),
    };
    match invocation {
        Invocation::TrainBaseline(config) => match run_train_baseline(&config) {
            Ok(paths) => {
                for p in paths {
                    println!("{}", p.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => exit_for(&e),
        },
        Invocation::Run(config) => {
            let records = match run_pipeline(&config) {
                Ok(r) => r,
                Err(e) => return exit_for(&e),
            };
            if records.is_empty() {
                eprintln!("no run records to report");
                return ExitCode::from(PARTIAL_FAILURE);
            }
            let report = render_report(
                &records,
                &ReportOptions {
                    show_all_constraints: config.show_all_constraints,
                },
            );
            print!("{}", report.text);
            let written = fs::create_dir_all(&config.output)
                .and_then(|_| fs::write(config.output.join("report.txt"), &report.text))
                .and_then(|_| fs::write(config.output.join("report.csv"), &report.csv));
            if let Err(e) = written {
                eprintln!("error: cannot write report to {}: {e}", config.output.display());
                return ExitCode::from(PARTIAL_FAILURE);
            }
            if records.iter().any(|r| r.status == RunStatus::Failed) {
                ExitCode::from(PARTIAL_FAILURE)
            } else {
                ExitCode::SUCCESS
            }
        }
    }
}
