//! Pointer chase executed in real memory, for THP-on/THP-off comparison.

use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::alloc::{anon_huge_bytes_for, AllocConfig, AllocError, HugeAlloc, MadviseAdvisor};
use crate::metrics::perf::DtlbCounter;
use crate::tlb::{chase_cycle, CHASE_SLOT};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChaseAllocator {
    /// Huge-page-aware allocator with advice enabled.
    HugePage,
    /// Same allocator with the flag off.
    Baseline,
}

#[derive(Debug, Clone)]
pub struct ChaseReport {
    pub footprint: usize,
    pub steps: u64,
    pub wall: Duration,
    /// `None` when the counter is unavailable.
    pub dtlb_load_misses: Option<u64>,
    /// Huge-page-backed bytes in the chase mapping, if readable.
    pub anon_huge_bytes: Option<u64>,
    pub advised_bytes: usize,
    /// Final slot index, so the chase cannot be optimized out.
    pub checksum: u64,
}

fn pin_to_current_cpu() {
    // SAFETY: plain-data cpu set on our own thread.
    unsafe {
        let cpu = libc::sched_getcpu();
        if cpu >= 0 {
            let mut set: libc::cpu_set_t = std::mem::zeroed();
            libc::CPU_SET(cpu as usize, &mut set);
            libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set);
        }
    }
}

/// Builds a single-cycle chase over `footprint` bytes in memory from the
/// chosen allocator and follows it for `steps` hops.
pub fn run_chase_live(
    footprint: usize,
    steps: u64,
    seed: u64,
    which: ChaseAllocator,
) -> Result<ChaseReport, AllocError> {
    let config = match which {
        ChaseAllocator::HugePage => AllocConfig::enabled(),
        ChaseAllocator::Baseline => AllocConfig::disabled(),
    };
    let alloc = Arc::new(HugeAlloc::new(config, Arc::new(MadviseAdvisor)));
    let slots = (footprint / CHASE_SLOT).max(1);
    let bytes = slots * CHASE_SLOT;
    let block = alloc.alloc(bytes)?;
    let base = block.as_ptr();

    let succ = chase_cycle(slots, seed);
    for (i, &next) in succ.iter().enumerate() {
        // SAFETY: i < slots and each slot is 64 bytes inside the block.
        unsafe { (base.add(i * CHASE_SLOT) as *mut u64).write(next as u64) };
    }
    drop(succ);
    let anon_huge_bytes = anon_huge_bytes_for(base as usize);

    pin_to_current_cpu();
    let counter = DtlbCounter::for_self().ok();
    if let Some(c) = &counter {
        let _ = c.reset();
        let _ = c.enable();
    }
    let start = Instant::now();
    let mut at = 0u64;
    for _ in 0..steps {
        // SAFETY: every stored successor is a valid slot index.
        at = unsafe { std::ptr::read_volatile(base.add(at as usize * CHASE_SLOT) as *const u64) };
    }
    let wall = start.elapsed();
    let dtlb_load_misses = counter.and_then(|c| {
        c.disable().ok()?;
        c.read().ok()
    });
    let advised_bytes = alloc.snapshot().advised_bytes;
    alloc.free(block)?;
    Ok(ChaseReport {
        footprint: bytes,
        steps,
        wall,
        dtlb_load_misses,
        anon_huge_bytes,
        advised_bytes,
        checksum: at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_chase_returns_to_start_after_full_cycle() {
        let slots = 1024;
        for which in [ChaseAllocator::HugePage, ChaseAllocator::Baseline] {
            let r = run_chase_live(slots * CHASE_SLOT, slots as u64, 3, which).unwrap();
            assert_eq!(r.checksum, 0);
            let r = run_chase_live(slots * CHASE_SLOT, 0, 3, which).unwrap();
            assert_eq!((r.steps, r.checksum), (0, 0));
        }
    }

    #[test]
    fn advice_follows_allocator() {
        let on = run_chase_live(8 << 20, 1000, 1, ChaseAllocator::HugePage).unwrap();
        let off = run_chase_live(8 << 20, 1000, 1, ChaseAllocator::Baseline).unwrap();
        assert!(on.advised_bytes >= 8 << 20);
        assert_eq!(off.advised_bytes, 0);
    }
}
