use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use thpsat::tlb::{simulate, AccessTrace, TlbModel};

/// Replays an address trace through an LRU TLB.
#[derive(Parser)]
#[command(name = "tlbsim", version)]
struct Args {
    /// Page size in bytes (power of two).
    #[arg(long, default_value_t = 4096)]
    page_size: u64,
    /// Number of TLB entries.
    #[arg(long, default_value_t = 64)]
    entries: usize,
    /// Trace file: one decimal address per line, '#' comments. `-` reads stdin.
    trace: PathBuf,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = if args.trace.as_os_str() == "-" {
        std::io::read_to_string(std::io::stdin())
    } else {
        std::fs::read_to_string(&args.trace)
    };
    let text = match text {
        Ok(t) => t,
        Err(e) => {
            eprintln!("tlbsim: {}: {e}", args.trace.display());
            return ExitCode::from(1);
        }
    };
    let result = AccessTrace::parse(&text)
        .map_err(|e| e.to_string())
        .and_then(|t| {
            let m = TlbModel::new(args.entries, args.page_size).map_err(|e| e.to_string())?;
            Ok((t.len(), simulate(&t, &m)))
        });
    match result {
        Ok((len, r)) => {
            println!("accesses={len} {r}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("tlbsim: {e}");
            ExitCode::from(1)
        }
    }
}
