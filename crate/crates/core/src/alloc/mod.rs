//! Huge-page-aware allocation front-end.
//!
//! When the `THP_ALWAYS=1` (or `GLIBC_THP_ALWAYS=1`) flag is present, large
//! requests are served from anonymous reservations whose base and length are
//! multiples of the huge-page size, and each reservation is advised for
//! transparent huge-page backing. Small requests are carved out of pooled,
//! advised 2 MiB slabs. With the flag absent everything goes straight to the
//! system allocator.

mod heap;
mod os;
mod vec;

use std::collections::HashMap;
use std::fmt;

pub use heap::{AllocSnapshot, Block, HugeAlloc};
pub use os::{anon_huge_bytes_for, process_anon_huge_bytes, MadviseAdvisor, OS_PAGE_SIZE};
pub use vec::HugeVec;

pub const KIB: usize = 1 << 10;
pub const MIB: usize = 1 << 20;

/// Default huge-page size (2 MiB on x86-64).
pub const DEFAULT_HUGE_PAGE_SIZE: usize = 2 * MIB;
/// Default minimum request size that gets a dedicated aligned region.
pub const DEFAULT_THRESHOLD: usize = 2 * MIB;
/// Alignment handed out for requests that do not get huge-page treatment.
pub const DEFAULT_ALIGN: usize = 2 * std::mem::size_of::<usize>();

pub const ENV_FLAG: &str = "THP_ALWAYS";
pub const ENV_FLAG_ALIAS: &str = "GLIBC_THP_ALWAYS";
pub const ENV_PAGE_SIZE: &str = "THP_PAGE_SIZE";
pub const ENV_THRESHOLD: &str = "THP_THRESHOLD";

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum AllocError {
    #[error("zero-sized allocation request")]
    ZeroSize,
    #[error("huge page size {0} is not a power of two")]
    BadPageSize(usize),
    #[error("threshold must be at least 1")]
    BadThreshold,
    #[error("requested size {0} overflows when rounded to the huge-page size")]
    Overflow(usize),
    #[error("memory reservation of {size} bytes failed (errno {errno})")]
    ReservationFailed { size: usize, errno: i32 },
    #[error("free of a block not owned by this allocator ({0:#x})")]
    UnknownBlock(usize),
}

/// Huge-page policy, read once at startup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AllocConfig {
    enabled: bool,
    huge_page_size: usize,
    threshold: usize,
}

impl AllocConfig {
    pub fn new(enabled: bool, huge_page_size: usize, threshold: usize) -> Result<Self, AllocError> {
        if !huge_page_size.is_power_of_two() {
            return Err(AllocError::BadPageSize(huge_page_size));
        }
        if threshold == 0 {
            return Err(AllocError::BadThreshold);
        }
        Ok(AllocConfig {
            enabled,
            huge_page_size,
            threshold,
        })
    }

    pub fn enabled() -> Self {
        AllocConfig {
            enabled: true,
            huge_page_size: DEFAULT_HUGE_PAGE_SIZE,
            threshold: DEFAULT_THRESHOLD,
        }
    }

    pub fn disabled() -> Self {
        AllocConfig {
            enabled: false,
            ..Self::enabled()
        }
    }

    /// Reads the policy from the process environment.
    pub fn from_env() -> Self {
        let env: HashMap<String, String> = std::env::vars().collect();
        load_config(&env)
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub fn huge_page_size(&self) -> usize {
        self.huge_page_size
    }

    pub fn threshold(&self) -> usize {
        self.threshold
    }

    /// Whether a request of `size` bytes gets an aligned, advised reservation.
    pub fn is_eligible(&self, size: usize) -> bool {
        self.enabled && size >= self.threshold
    }
}

impl Default for AllocConfig {
    fn default() -> Self {
        Self::disabled()
    }
}

/// Builds an [`AllocConfig`] from an environment map.
///
/// Only the literal value `"1"` enables the policy. Malformed size overrides
/// fall back to the defaults.
pub fn load_config(env: &HashMap<String, String>) -> AllocConfig {
    let enabled = [ENV_FLAG, ENV_FLAG_ALIAS]
        .iter()
        .any(|k| env.get(*k).map(String::as_str) == Some("1"));
    let huge_page_size = env
        .get(ENV_PAGE_SIZE)
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|v| v.is_power_of_two())
        .unwrap_or(DEFAULT_HUGE_PAGE_SIZE);
    let threshold = env
        .get(ENV_THRESHOLD)
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|v| *v >= 1)
        .unwrap_or(DEFAULT_THRESHOLD);
    AllocConfig {
        enabled,
        huge_page_size,
        threshold,
    }
}

/// Returns `(aligned_size, alignment)` for a request under `config`.
pub fn align_request(size: usize, config: &AllocConfig) -> Result<(usize, usize), AllocError> {
    if size == 0 {
        return Err(AllocError::ZeroSize);
    }
    if config.is_eligible(size) {
        let aligned = round_up(size, config.huge_page_size).ok_or(AllocError::Overflow(size))?;
        Ok((aligned, config.huge_page_size))
    } else {
        Ok((size, DEFAULT_ALIGN))
    }
}

pub(crate) fn round_up(size: usize, align: usize) -> Option<usize> {
    debug_assert!(align.is_power_of_two());
    size.checked_add(align - 1).map(|s| s & !(align - 1))
}

/// Outcome of a single advice request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdviseResult {
    Ok,
    Unsupported,
    Error(i32),
}

/// Issues huge-page advice for an address range.
pub trait Advisor: Send + Sync {
    /// `base` and `length` are always multiples of the OS page size.
    fn advise(&self, base: usize, length: usize) -> AdviseResult;
}

/// Advisor that records every call and answers with a fixed result.
#[derive(Debug)]
pub struct RecordingAdvisor {
    response: AdviseResult,
    calls: std::sync::Mutex<Vec<(usize, usize)>>,
}

impl RecordingAdvisor {
    pub fn new(response: AdviseResult) -> Self {
        RecordingAdvisor {
            response,
            calls: Default::default(),
        }
    }

    pub fn calls(&self) -> Vec<(usize, usize)> {
        self.calls.lock().unwrap().clone()
    }

    pub fn call_count(&self) -> usize {
        self.calls.lock().unwrap().len()
    }
}

impl Advisor for RecordingAdvisor {
    fn advise(&self, base: usize, length: usize) -> AdviseResult {
        self.calls.lock().unwrap().push((base, length));
        self.response
    }
}

/// Advice state of a region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Advice {
    /// The kernel accepted the huge-page advice.
    Advised,
    /// Policy disabled or request below threshold; no advice issued.
    Skipped,
    /// Advice was rejected; the region is backed by standard pages.
    FallbackOk,
}

impl fmt::Display for Advice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Advice::Advised => "advised",
            Advice::Skipped => "skipped",
            Advice::FallbackOk => "fallback",
        };
        f.write_str(s)
    }
}

/// Descriptor of a reserved memory range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub base: usize,
    pub length: usize,
    pub advised: Advice,
}

/// Issues advice for `region` according to `config`. Never fatal.
pub fn advise_region(region: &Region, config: &AllocConfig, advisor: &dyn Advisor) -> Advice {
    if !config.is_eligible(region.length) {
        return Advice::Skipped;
    }
    let length = round_up(region.length, OS_PAGE_SIZE).unwrap_or(region.length);
    debug_assert_eq!(region.base % OS_PAGE_SIZE, 0);
    match advisor.advise(region.base, length) {
        AdviseResult::Ok => Advice::Advised,
        AdviseResult::Unsupported => Advice::FallbackOk,
        AdviseResult::Error(code) => {
            log_advice_error(region, code);
            Advice::FallbackOk
        }
    }
}

fn log_advice_error(region: &Region, code: i32) {
    eprintln!(
        "warning: huge-page advice for {:#x}+{} failed with errno {}; using standard pages",
        region.base, region.length, code
    );
}

/// An owned anonymous mapping. Unmapped on drop.
#[derive(Debug)]
pub struct Reservation {
    region: Region,
    map_base: usize,
    map_len: usize,
}

impl Reservation {
    pub fn region(&self) -> Region {
        self.region
    }

    pub fn as_ptr(&self) -> *mut u8 {
        self.region.base as *mut u8
    }

    pub fn len(&self) -> usize {
        self.region.length
    }

    pub fn is_empty(&self) -> bool {
        self.region.length == 0
    }
}

impl Drop for Reservation {
    fn drop(&mut self) {
        // SAFETY: map_base/map_len describe a mapping created by `os::map`
        // that is owned exclusively by this value.
        unsafe { os::unmap(self.map_base, self.map_len) };
    }
}

// SAFETY: a Reservation is plain anonymous memory with a unique owner.
unsafe impl Send for Reservation {}
unsafe impl Sync for Reservation {}

/// Reserves zero-initialized anonymous memory for `size` bytes.
///
/// Eligible requests are rounded up to the huge-page size, placed on a
/// huge-page boundary and advised before anything writes to them.
pub fn reserve_region(
    size: usize,
    config: &AllocConfig,
    advisor: &dyn Advisor,
) -> Result<Reservation, AllocError> {
    let (length, align) = align_request(size, config)?;
    let eligible = config.is_eligible(size);
    let (map_base, map_len, base) = if eligible {
        os::map_aligned(length, align)?
    } else {
        let map_len = round_up(length, OS_PAGE_SIZE).ok_or(AllocError::Overflow(size))?;
        let base = os::map(map_len)?;
        (base, map_len, base)
    };
    let mut reservation = Reservation {
        region: Region {
            base,
            length,
            advised: Advice::Skipped,
        },
        map_base,
        map_len,
    };
    if eligible {
        reservation.region.advised = advise_region(&reservation.region, config, advisor);
    }
    Ok(reservation)
}
