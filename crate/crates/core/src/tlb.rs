//! Page-coverage and LRU TLB model, plus pointer-chase trace generation.

use std::collections::{HashMap, HashSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bytes per chase slot (one cache line).
pub const CHASE_SLOT: usize = 64;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TlbError {
    #[error("page size {0} is not a power of two")]
    BadPageSize(u64),
    #[error("a TLB needs at least one entry")]
    NoEntries,
    #[error("line {line}: invalid address '{text}'")]
    BadAddress { line: usize, text: String },
}

/// A sequence of byte addresses.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AccessTrace {
    pub addresses: Vec<u64>,
}

impl AccessTrace {
    pub fn new(addresses: Vec<u64>) -> Self {
        AccessTrace { addresses }
    }

    pub fn len(&self) -> usize {
        self.addresses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.addresses.is_empty()
    }

    /// One decimal address per line; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, TlbError> {
        let mut addresses = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let addr = line.parse().map_err(|_| TlbError::BadAddress {
                line: i + 1,
                text: line.to_string(),
            })?;
            addresses.push(addr);
        }
        Ok(AccessTrace { addresses })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.addresses.len() * 8);
        for a in &self.addresses {
            s.push_str(&a.to_string());
            s.push('\n');
        }
        s
    }
}

/// Fully associative TLB with LRU replacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TlbModel {
    entries: usize,
    page_size: u64,
}

impl TlbModel {
    pub fn new(entries: usize, page_size: u64) -> Result<Self, TlbError> {
        if entries == 0 {
            return Err(TlbError::NoEntries);
        }
        if !page_size.is_power_of_two() {
            return Err(TlbError::BadPageSize(page_size));
        }
        Ok(TlbModel { entries, page_size })
    }

    pub fn entries(&self) -> usize {
        self.entries
    }

    pub fn page_size(&self) -> u64 {
        self.page_size
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimResult {
    pub distinct_pages: u64,
    pub hits: u64,
    pub misses: u64,
}

impl fmt::Display for SimResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "distinct_pages={} hits={} misses={}",
            self.distinct_pages, self.hits, self.misses
        )
    }
}

/// Number of distinct pages of `page_size` bytes the trace touches.
pub fn pages_touched(trace: &AccessTrace, page_size: u64) -> Result<u64, TlbError> {
    if !page_size.is_power_of_two() {
        return Err(TlbError::BadPageSize(page_size));
    }
    let shift = page_size.trailing_zeros();
    let pages: HashSet<u64> = trace.addresses.iter().map(|a| a >> shift).collect();
    Ok(pages.len() as u64)
}

/// Replays `trace` through an LRU TLB.
pub fn simulate(trace: &AccessTrace, model: &TlbModel) -> SimResult {
    let shift = model.page_size.trailing_zeros();
    // page -> last-use tick; the resident set is small, so eviction scans it
    let mut resident: HashMap<u64, u64> = HashMap::with_capacity(model.entries.min(1 << 16) + 1);
    let mut seen: HashSet<u64> = HashSet::new();
    let mut lru_order: std::collections::BTreeMap<u64, u64> = std::collections::BTreeMap::new();
    let mut result = SimResult::default();
    for (tick, addr) in trace.addresses.iter().enumerate() {
        let tick = tick as u64;
        let page = addr >> shift;
        seen.insert(page);
        if let Some(last) = resident.insert(page, tick) {
            lru_order.remove(&last);
            lru_order.insert(tick, page);
            result.hits += 1;
            continue;
        }
        result.misses += 1;
        lru_order.insert(tick, page);
        if resident.len() > model.entries {
            let (&oldest, &victim) = lru_order.iter().next().expect("non-empty when over capacity");
            lru_order.remove(&oldest);
            resident.remove(&victim);
        }
    }
    result.distinct_pages = seen.len() as u64;
    result
}

/// Single-cycle random permutation over `slots` (Sattolo), as successor
/// indices: `succ[i]` is the slot visited after `i`.
pub fn chase_cycle(slots: usize, seed: u64) -> Vec<u32> {
    assert!(slots <= u32::MAX as usize);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<u32> = (0..slots as u32).collect();
    for i in (1..slots).rev() {
        let j = rng.gen_range(0..i);
        order.swap(i, j);
    }
    let mut succ = vec![0u32; slots];
    for k in 0..slots {
        succ[order[k] as usize] = order[(k + 1) % slots];
    }
    succ
}

/// Pointer-chase trace over `footprint` bytes: `steps` cache-line addresses
/// following one random cycle that starts at slot 0.
pub fn gen_chase_trace(footprint: u64, steps: usize, seed: u64) -> AccessTrace {
    assert!(footprint > 0, "footprint must be positive");
    let slots = ((footprint as usize) / CHASE_SLOT).max(1);
    if steps == 0 {
        return AccessTrace::default();
    }
    let succ = chase_cycle(slots, seed);
    let mut at = 0usize;
    let mut addresses = Vec::with_capacity(steps);
    for _ in 0..steps {
        addresses.push((at * CHASE_SLOT) as u64);
        at = succ[at] as usize;
    }
    AccessTrace { addresses }
}

/// Trace reproducing the page-coverage picture: seven 4 KiB pages spread
/// over three 2 MiB extents, with the first page revisited at the end.
pub fn coverage_example_trace() -> AccessTrace {
    const SMALL: u64 = 4096;
    const LARGE: u64 = 512 * SMALL;
    let pages = [
        0,
        1,
        LARGE / SMALL,
        LARGE / SMALL + 1,
        2 * LARGE / SMALL,
        2 * LARGE / SMALL + 1,
        2 * LARGE / SMALL + 2,
    ];
    let mut addresses: Vec<u64> = pages.iter().map(|p| p * SMALL + 128).collect();
    addresses.push(64);
    AccessTrace { addresses }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pages_touched_examples() {
        let t = AccessTrace::new(vec![0, 5000, 1_000_000]);
        assert_eq!(pages_touched(&t, 4096), Ok(3));
        assert_eq!(pages_touched(&AccessTrace::default(), 4096), Ok(0));
        assert!(pages_touched(&t, 3000).is_err());
    }

    #[test]
    fn lru_eviction_example() {
        let t = AccessTrace::new(vec![0, 1, 2, 3, 4, 0]);
        let r = simulate(&t, &TlbModel::new(4, 1).unwrap());
        assert_eq!(r, SimResult { distinct_pages: 5, hits: 0, misses: 6 });
        let r = simulate(&t, &TlbModel::new(4, 8).unwrap());
        assert_eq!(r, SimResult { distinct_pages: 1, hits: 5, misses: 1 });
        let r = simulate(&t, &TlbModel::new(5, 1).unwrap());
        assert_eq!(r.misses, r.distinct_pages);
    }

    #[test]
    fn lru_refresh_on_hit() {
        // 0 is touched again before 3 arrives, so 1 is the victim
        let t = AccessTrace::new(vec![0, 1, 2, 0, 3, 0, 1]);
        let r = simulate(&t, &TlbModel::new(3, 1).unwrap());
        assert_eq!((r.hits, r.misses), (2, 5));
    }

    #[test]
    fn coverage_example() {
        let t = coverage_example_trace();
        assert_eq!(pages_touched(&t, 4096), Ok(7));
        assert_eq!(pages_touched(&t, 512 * 4096), Ok(3));
        let small = simulate(&t, &TlbModel::new(4, 4096).unwrap());
        assert_eq!(small.misses, 8);
        let large = simulate(&t, &TlbModel::new(4, 512 * 4096).unwrap());
        assert_eq!((large.misses, large.hits), (3, 5));
    }

    #[test]
    fn chase_trace_examples() {
        assert_eq!(gen_chase_trace(65536, 1024, 9), gen_chase_trace(65536, 1024, 9));
        assert_ne!(gen_chase_trace(65536, 1024, 9), gen_chase_trace(65536, 1024, 10));
        assert!(gen_chase_trace(65536, 0, 1).is_empty());
        let t = gen_chase_trace(65536, 1024, 42);
        assert_eq!(pages_touched(&t, 4096), Ok(16));
        // one cycle: every slot exactly once
        let slots: HashSet<u64> = t.addresses.iter().copied().collect();
        assert_eq!(slots.len(), 1024);
    }

    #[test]
    fn trace_text_format() {
        let t = AccessTrace::parse("# header\n10\n  20 # tail\n\n30\n").unwrap();
        assert_eq!(t.addresses, vec![10, 20, 30]);
        assert_eq!(AccessTrace::parse(&t.to_text()).unwrap(), t);
        assert!(matches!(AccessTrace::parse("1\nx\n"), Err(TlbError::BadAddress { line: 2, .. })));
    }

    proptest! {
        #[test]
        fn sim_arithmetic(addrs in prop::collection::vec(0u64..1 << 16, 0..200), entries in 1usize..8, shift in 0u32..10) {
            let t = AccessTrace::new(addrs);
            let r = simulate(&t, &TlbModel::new(entries, 1 << shift).unwrap());
            prop_assert_eq!(r.hits + r.misses, t.len() as u64);
            prop_assert!(r.distinct_pages <= r.misses);
            prop_assert_eq!(r.distinct_pages, pages_touched(&t, 1 << shift).unwrap());
            let unbounded = simulate(&t, &TlbModel::new(t.len().max(1), 1 << shift).unwrap());
            prop_assert_eq!(unbounded.misses, unbounded.distinct_pages);
        }
    }
}
