use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use thpsat::harness::{emit_report, run_suite, write_instances, ReportFormat, RunOptions, SuiteManifest};

/// Paired THP-off/THP-on benchmark runs.
#[derive(Parser)]
#[command(name = "bench", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run (or resume) a suite.
    Run {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Stop after this many runs; a later invocation resumes.
        #[arg(long)]
        stop_after: Option<usize>,
        /// Print the markdown report when done.
        #[arg(long)]
        report: bool,
    },
    /// Print the report for a suite directory.
    Report {
        dir: PathBuf,
        #[arg(long, default_value = "md")]
        format: ReportFormat,
    },
    /// Check a manifest and list every problem.
    Validate { manifest: PathBuf },
    /// Write random 3-CNF instances.
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 150)]
        vars: usize,
        #[arg(long, default_value_t = 4.26)]
        ratio: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn bindir() -> Option<PathBuf> {
    std::env::current_exe().ok()?.parent().map(PathBuf::from)
}

fn main() -> ExitCode {
    match Cli::parse().cmd {
        Cmd::Validate { manifest } => match SuiteManifest::load(&manifest) {
            Ok(m) => {
                println!(
                    "ok: {} solver(s) x {} instance(s) x 2 variants x {} repetition(s) = {} runs",
                    m.solvers.len(),
                    m.instances.len(),
                    m.repetitions,
                    m.solvers.len() * m.instances.len() * 2 * m.repetitions
                );
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprint!("{e}");
                ExitCode::from(2)
            }
        },
        Cmd::Run {
            manifest,
            out,
            stop_after,
            report,
        } => {
            let m = match SuiteManifest::load(&manifest) {
                Ok(m) => m,
                Err(e) => {
                    eprint!("{e}");
                    return ExitCode::from(2);
                }
            };
            let opts = RunOptions {
                bindir: bindir(),
                stop_after,
                base_env: None,
            };
            match run_suite(&m, &out, &opts) {
                Ok(s) => {
                    eprintln!(
                        "executed {} run(s), {} already done, {} remaining",
                        s.executed, s.skipped_done, s.remaining
                    );
                    if report {
                        match emit_report(&out, ReportFormat::Markdown) {
                            Ok(text) => print!("{text}"),
                            Err(e) => {
                                eprintln!("bench: {e}");
                                return ExitCode::from(1);
                            }
                        }
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("bench: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Cmd::Report { dir, format } => match emit_report(&dir, format) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("bench: {e}");
                ExitCode::from(1)
            }
        },
        Cmd::Gen {
            out,
            count,
            vars,
            ratio,
            seed,
        } => match write_instances(&out, count, vars, ratio, seed) {
            Ok(paths) => {
                for p in paths {
                    println!("{}", p.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("bench: {e}");
                ExitCode::from(1)
            }
        },
    }
}
