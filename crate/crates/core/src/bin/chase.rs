use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use thpsat::chase::{run_chase_live, ChaseAllocator};

#[derive(Clone, Copy, ValueEnum)]
enum Thp {
    On,
    Off,
}

/// Random pointer chase in memory from the huge-page allocator.
#[derive(Parser)]
#[command(name = "chase", version)]
struct Args {
    /// Bytes of memory to chase through.
    #[arg(long, default_value_t = 512 << 20)]
    footprint: usize,
    /// Number of hops.
    #[arg(long, default_value_t = 50_000_000)]
    steps: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum)]
    thp: Thp,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let which = match args.thp {
        Thp::On => ChaseAllocator::HugePage,
        Thp::Off => ChaseAllocator::Baseline,
    };
    match run_chase_live(args.footprint, args.steps, args.seed, which) {
        Ok(r) => {
            let na = |v: Option<u64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
            println!(
                "footprint={} steps={} wall_s={:.6} ns_per_step={:.2} dtlb_load_misses={} anon_huge_bytes={} advised_bytes={} checksum={}",
                r.footprint,
                r.steps,
                r.wall.as_secs_f64(),
                r.wall.as_nanos() as f64 / r.steps.max(1) as f64,
                na(r.dtlb_load_misses),
                na(r.anon_huge_bytes),
                r.advised_bytes,
                r.checksum
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("chase: {e}");
            ExitCode::from(1)
        }
    }
}
