use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use clap::Parser;
use serde_json::Value;

use thpsat::alloc::{process_anon_huge_bytes, HugeAlloc};
use thpsat::cnf::parse_dimacs;
use thpsat::solver::{Budget, SolveResult, Solver, SolverConfig};

/// CDCL SAT solver. Exits 10 for SAT, 20 for UNSAT, 0 when undecided.
#[derive(Parser)]
#[command(name = "solve", version)]
struct Args {
    /// DIMACS CNF file.
    file: PathBuf,
    /// Wall-clock limit in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Conflict limit.
    #[arg(long)]
    conflicts: Option<u64>,
    /// Write solver and allocator statistics as JSON.
    #[arg(long)]
    stats_json: Option<PathBuf>,
    /// Disable blocking literals in watch lists.
    #[arg(long)]
    no_blockers: bool,
    /// Check watch invariants after every propagation (slow).
    #[arg(long)]
    check_invariants: bool,
    /// Do not print the model.
    #[arg(long, short)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let bytes = match std::fs::read(&args.file) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("c cannot read {}: {e}", args.file.display());
            return ExitCode::from(1);
        }
    };
    let formula = match parse_dimacs(&bytes) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("c parse error: {e}");
            return ExitCode::from(1);
        }
    };
    let config = SolverConfig {
        use_blockers: !args.no_blockers,
        check_invariants: args.check_invariants,
        ..Default::default()
    };
    let alloc = Arc::new(HugeAlloc::from_env());
    let start = Instant::now();
    let mut solver = Solver::from_formula(&formula, config, alloc.clone());
    let budget = Budget {
        timeout: args.timeout.map(Duration::from_secs_f64),
        conflicts: args.conflicts,
    };
    let result = solver.solve(budget);
    let elapsed = start.elapsed();

    if let Some(path) = &args.stats_json {
        let mut doc = solver.stats().to_json();
        let snap = alloc.snapshot();
        let cfg = alloc.config();
        doc.insert("alloc_enabled".into(), Value::from(cfg.is_enabled()));
        doc.insert("alloc_regions".into(), Value::from(snap.regions));
        doc.insert("alloc_slabs".into(), Value::from(snap.slabs));
        doc.insert("alloc_advised_bytes".into(), Value::from(snap.advised_bytes));
        doc.insert("alloc_fallbacks".into(), Value::from(snap.fallback_count));
        doc.insert("arena_bytes".into(), Value::from(solver.arena_bytes()));
        doc.insert(
            "anon_huge_bytes".into(),
            process_anon_huge_bytes().map_or(Value::Null, Value::from),
        );
        doc.insert("solve_seconds".into(), Value::from(elapsed.as_secs_f64()));
        doc.insert("exit_code".into(), Value::from(result.exit_code()));
        let text = serde_json::to_string_pretty(&Value::Object(doc)).expect("serializable");
        if let Err(e) = std::fs::write(path, text + "\n") {
            eprintln!("c cannot write {}: {e}", path.display());
        }
    }

    let st = solver.stats();
    println!(
        "c vars {} clauses {} conflicts {} decisions {} propagations {} time {:.3}s",
        formula.num_vars(),
        formula.num_clauses(),
        st.conflicts,
        st.decisions,
        st.propagations,
        elapsed.as_secs_f64()
    );
    if st.invariant_violations > 0 {
        eprintln!(
            "c {} invariant violations, first: {}",
            st.invariant_violations,
            st.first_violation.as_deref().unwrap_or("?")
        );
    }
    match &result {
        SolveResult::Sat(model) => {
            println!("s SATISFIABLE");
            if !args.quiet {
                let mut line = String::from("v");
                for (i, &b) in model.iter().enumerate() {
                    let lit = if b { i as i64 + 1 } else { -(i as i64 + 1) };
                    line.push_str(&format!(" {lit}"));
                    if line.len() > 72 {
                        println!("{line}");
                        line = String::from("v");
                    }
                }
                println!("{line} 0");
            }
        }
        SolveResult::Unsat => println!("s UNSATISFIABLE"),
        SolveResult::Unknown(_) => println!("s UNKNOWN"),
    }
    ExitCode::from(result.exit_code() as u8)
}
