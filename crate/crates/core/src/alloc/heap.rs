use std::alloc::{GlobalAlloc, Layout, System};
use std::collections::{BTreeMap, HashMap};
use std::ptr::NonNull;
use std::sync::{Arc, Mutex};

use super::{
    reserve_region, Advice, AllocConfig, AllocError, Advisor,
    MadviseAdvisor, Region, Reservation, DEFAULT_ALIGN,
};

const MIN_CLASS_SHIFT: u32 = 4;

/// A live allocation. Must be returned through [`HugeAlloc::free`].
#[derive(Debug, PartialEq, Eq)]
pub struct Block {
    ptr: NonNull<u8>,
    len: usize,
}

impl Block {
    pub fn as_ptr(&self) -> *mut u8 {
        self.ptr.as_ptr()
    }

    pub fn addr(&self) -> usize {
        self.ptr.as_ptr() as usize
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

// SAFETY: a Block is a unique handle to raw memory.
unsafe impl Send for Block {}
unsafe impl Sync for Block {}

/// Registry counters for the harness.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AllocSnapshot {
    /// Dedicated regions plus slabs currently mapped.
    pub regions: usize,
    pub slabs: usize,
    pub advised_bytes: usize,
    pub fallback_count: usize,
    pub skipped_count: usize,
    pub live_blocks: usize,
}

#[derive(Default)]
struct SizeClass {
    free: Vec<usize>,
    bump: usize,
    end: usize,
}

#[derive(Default)]
struct State {
    regions: BTreeMap<usize, Reservation>,
    slabs: HashMap<usize, Reservation>,
    classes: Vec<SizeClass>,
    live: usize,
    #[cfg(debug_assertions)]
    live_set: std::collections::HashSet<usize>,
}

impl State {
    fn track(&mut self, _addr: usize) {
        self.live += 1;
        #[cfg(debug_assertions)]
        self.live_set.insert(_addr);
    }

    fn untrack(&mut self, addr: usize) -> Result<(), AllocError> {
        #[cfg(debug_assertions)]
        if !self.live_set.remove(&addr) {
            return Err(AllocError::UnknownBlock(addr));
        }
        let _ = addr;
        self.live -= 1;
        Ok(())
    }
}

/// Allocator front-end honoring an [`AllocConfig`].
///
/// Enabled: requests at or above the threshold get dedicated aligned regions;
/// smaller ones come from power-of-two size classes carved out of
/// huge-page-sized, advised slabs. Disabled: every call goes to the system
/// allocator.
pub struct HugeAlloc {
    config: AllocConfig,
    advisor: Arc<dyn Advisor>,
    state: Mutex<State>,
}

impl std::fmt::Debug for HugeAlloc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HugeAlloc")
            .field("config", &self.config)
            .field("snapshot", &self.snapshot())
            .finish()
    }
}

impl HugeAlloc {
    pub fn new(config: AllocConfig, advisor: Arc<dyn Advisor>) -> Self {
        HugeAlloc {
            config,
            advisor,
            state: Mutex::new(State::default()),
        }
    }

    /// Allocator using the environment policy and `madvise`.
    pub fn from_env() -> Self {
        Self::new(AllocConfig::from_env(), Arc::new(MadviseAdvisor))
    }

    /// Flag-off allocator, i.e. the system allocator.
    pub fn baseline() -> Self {
        Self::new(AllocConfig::disabled(), Arc::new(MadviseAdvisor))
    }

    pub fn config(&self) -> &AllocConfig {
        &self.config
    }

    pub fn alloc(&self, size: usize) -> Result<Block, AllocError> {
        if size == 0 {
            return Err(AllocError::ZeroSize);
        }
        if !self.config.is_enabled() {
            return self.alloc_system(size);
        }
        let class = self.class_of(size);
        match class {
            Some(class) if size < self.config.threshold() => self.alloc_small(size, class),
            _ => self.alloc_region(size),
        }
    }

    pub fn free(&self, block: Block) -> Result<(), AllocError> {
        let addr = block.addr();
        if !self.config.is_enabled() {
            self.state.lock().unwrap().untrack(addr)?;
            // SAFETY: blocks of a disabled allocator come from System with
            // this exact layout.
            unsafe { System.dealloc(block.as_ptr(), system_layout(block.len)) };
            return Ok(());
        }
        let mut st = self.state.lock().unwrap();
        if st.regions.contains_key(&addr) {
            st.untrack(addr)?;
            let reservation = st.regions.remove(&addr);
            drop(st);
            drop(reservation);
            return Ok(());
        }
        let slab_base = addr & !(self.config.huge_page_size() - 1);
        let class = match self.class_of(block.len) {
            Some(c) if st.slabs.contains_key(&slab_base) => c,
            _ => return Err(AllocError::UnknownBlock(addr)),
        };
        st.untrack(addr)?;
        st.classes[class].free.push(addr);
        Ok(())
    }

    /// Every region currently mapped, dedicated regions first.
    pub fn regions(&self) -> Vec<Region> {
        let st = self.state.lock().unwrap();
        st.regions
            .values()
            .chain(st.slabs.values())
            .map(Reservation::region)
            .collect()
    }

    pub fn snapshot(&self) -> AllocSnapshot {
        let st = self.state.lock().unwrap();
        let mut snap = AllocSnapshot {
            regions: st.regions.len() + st.slabs.len(),
            slabs: st.slabs.len(),
            live_blocks: st.live,
            ..Default::default()
        };
        for r in st.regions.values().chain(st.slabs.values()).map(Reservation::region) {
            match r.advised {
                Advice::Advised => snap.advised_bytes += r.length,
                Advice::FallbackOk => snap.fallback_count += 1,
                Advice::Skipped => snap.skipped_count += 1,
            }
        }
        snap
    }

    fn alloc_system(&self, size: usize) -> Result<Block, AllocError> {
        // SAFETY: layout has non-zero size.
        let ptr = unsafe { System.alloc(system_layout(size)) };
        let ptr = NonNull::new(ptr).ok_or(AllocError::ReservationFailed { size, errno: libc::ENOMEM })?;
        self.state.lock().unwrap().track(ptr.as_ptr() as usize);
        Ok(Block { ptr, len: size })
    }

    fn alloc_region(&self, size: usize) -> Result<Block, AllocError> {
        let reservation = reserve_region(size, &self.config, self.advisor.as_ref())?;
        let base = reservation.region().base;
        let mut st = self.state.lock().unwrap();
        st.regions.insert(base, reservation);
        st.track(base);
        Ok(Block {
            ptr: NonNull::new(base as *mut u8).expect("mmap never returns null"),
            len: size,
        })
    }

    /// Size class index for `size`, or `None` if it would not fit a slab.
    fn class_of(&self, size: usize) -> Option<usize> {
        let class_size = size.max(1 << MIN_CLASS_SHIFT).checked_next_power_of_two()?;
        if class_size > self.config.huge_page_size() {
            return None;
        }
        Some((class_size.trailing_zeros() - MIN_CLASS_SHIFT) as usize)
    }

    fn alloc_small(&self, size: usize, class: usize) -> Result<Block, AllocError> {
        let class_size = 1usize << (class as u32 + MIN_CLASS_SHIFT);
        let mut st = self.state.lock().unwrap();
        if st.classes.len() <= class {
            st.classes.resize_with(class + 1, SizeClass::default);
        }
        let addr = if let Some(addr) = st.classes[class].free.pop() {
            addr
        } else {
            let sc = &st.classes[class];
            if sc.bump + class_size > sc.end || sc.end == 0 {
                let slab = self.new_slab()?;
                let base = slab.region().base;
                let len = slab.region().length;
                st.slabs.insert(base, slab);
                let sc = &mut st.classes[class];
                sc.bump = base;
                sc.end = base + len;
            }
            let sc = &mut st.classes[class];
            let addr = sc.bump;
            sc.bump += class_size;
            addr
        };
        st.track(addr);
        Ok(Block {
            ptr: NonNull::new(addr as *mut u8).expect("slab addresses are non-null"),
            len: size,
        })
    }

    fn new_slab(&self) -> Result<Reservation, AllocError> {
        // Slabs are exactly one huge page and always eligible under the
        // enabled policy, independent of the dedicated-region threshold.
        let hp = self.config.huge_page_size();
        let slab_config = AllocConfig::new(true, hp, hp).expect("valid by construction");
        reserve_region(hp, &slab_config, self.advisor.as_ref())
    }
}

fn system_layout(size: usize) -> Layout {
    Layout::from_size_align(size, DEFAULT_ALIGN).expect("size fits a layout")
}

impl Default for HugeAlloc {
    fn default() -> Self {
        Self::baseline()
    }
}

#[cfg(test)]
mod tests {
    use super::super::{AdviseResult, RecordingAdvisor, KIB, MIB};
    use super::*;

    fn recording(on: bool, response: AdviseResult) -> (HugeAlloc, Arc<RecordingAdvisor>) {
        let advisor = Arc::new(RecordingAdvisor::new(response));
        let config = if on {
            AllocConfig::enabled()
        } else {
            AllocConfig::disabled()
        };
        (HugeAlloc::new(config, advisor.clone()), advisor)
    }

    #[test]
    fn large_block_gets_dedicated_region() {
        let (a, advisor) = recording(true, AdviseResult::Ok);
        let b = a.alloc(8 * MIB).unwrap();
        assert_eq!(b.addr() % (2 * MIB), 0);
        let regions = a.regions();
        assert_eq!(regions.len(), 1);
        assert_eq!(regions[0].length, 8 * MIB);
        assert_eq!(regions[0].advised, Advice::Advised);
        assert_eq!(advisor.call_count(), 1);
        a.free(b).unwrap();
        assert!(a.regions().is_empty());
    }

    #[test]
    fn small_blocks_share_advised_slabs() {
        let (a, advisor) = recording(true, AdviseResult::Ok);
        let blocks: Vec<_> = (0..1000).map(|_| a.alloc(64).unwrap()).collect();
        let snap = a.snapshot();
        assert_eq!(snap.slabs, 1);
        assert_eq!(advisor.call_count(), 1);
        let slab = a.regions()[0];
        for b in &blocks {
            assert!(b.addr() >= slab.base && b.addr() + 64 <= slab.base + slab.length);
        }
        for b in blocks {
            a.free(b).unwrap();
        }
        // freed blocks are reused without new slabs
        let again: Vec<_> = (0..1000).map(|_| a.alloc(50).unwrap()).collect();
        assert_eq!(a.snapshot().slabs, 1);
        for b in again {
            a.free(b).unwrap();
        }
    }

    #[test]
    fn zero_size_rejected() {
        let (a, _) = recording(true, AdviseResult::Ok);
        assert_eq!(a.alloc(0), Err(AllocError::ZeroSize));
        let (a, _) = recording(false, AdviseResult::Ok);
        assert_eq!(a.alloc(0), Err(AllocError::ZeroSize));
    }

    #[test]
    fn disabled_never_advises() {
        let (a, advisor) = recording(false, AdviseResult::Ok);
        let big = a.alloc(8 * MIB).unwrap();
        let small = a.alloc(100).unwrap();
        assert_eq!(big.addr() % DEFAULT_ALIGN, 0);
        a.free(big).unwrap();
        a.free(small).unwrap();
        assert_eq!(advisor.call_count(), 0);
        assert!(a.regions().is_empty());
    }

    #[test]
    fn unknown_free_detected() {
        let (a, _) = recording(true, AdviseResult::Ok);
        let keep = a.alloc(64).unwrap();
        let bogus = Block {
            ptr: NonNull::new(0x1000 as *mut u8).unwrap(),
            len: 64,
        };
        assert_eq!(a.free(bogus), Err(AllocError::UnknownBlock(0x1000)));
        a.free(keep).unwrap();
    }

    #[cfg(debug_assertions)]
    #[test]
    fn double_free_detected_in_debug() {
        let (a, _) = recording(true, AdviseResult::Ok);
        let b = a.alloc(32).unwrap();
        let addr = b.addr();
        a.free(b).unwrap();
        let forged = Block {
            ptr: NonNull::new(addr as *mut u8).unwrap(),
            len: 32,
        };
        assert_eq!(a.free(forged), Err(AllocError::UnknownBlock(addr)));
    }

    #[test]
    fn fallback_tag_only() {
        let (a, _) = recording(true, AdviseResult::Unsupported);
        let b = a.alloc(3 * MIB).unwrap();
        let s = a.alloc(4 * KIB).unwrap();
        let snap = a.snapshot();
        assert_eq!(snap.advised_bytes, 0);
        assert_eq!(snap.fallback_count, 2);
        unsafe {
            b.as_ptr().write_bytes(0xAB, b.len());
            s.as_ptr().write_bytes(0xCD, s.len());
        }
        a.free(b).unwrap();
        a.free(s).unwrap();
    }

    #[test]
    fn concurrent_callers() {
        let (a, _) = recording(true, AdviseResult::Ok);
        let a = Arc::new(a);
        let handles: Vec<_> = (0..4)
            .map(|t| {
                let a = a.clone();
                std::thread::spawn(move || {
                    for i in 0..500 {
                        let b = a.alloc(16 + (i * 7 + t) % 3000).unwrap();
                        unsafe { b.as_ptr().write(t as u8) };
                        a.free(b).unwrap();
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(a.snapshot().live_blocks, 0);
    }
}
