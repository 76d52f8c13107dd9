use super::{AdviseResult, AllocError, Advisor};

pub const OS_PAGE_SIZE: usize = 4096;

fn errno() -> i32 {
    std::io::Error::last_os_error().raw_os_error().unwrap_or(0)
}

/// Maps `len` bytes of private anonymous memory.
pub(super) fn map(len: usize) -> Result<usize, AllocError> {
    // SAFETY: anonymous private mapping with no address hint.
    let ptr = unsafe {
        libc::mmap(
            std::ptr::null_mut(),
            len,
            libc::PROT_READ | libc::PROT_WRITE,
            libc::MAP_PRIVATE | libc::MAP_ANONYMOUS | libc::MAP_NORESERVE,
            -1,
            0,
        )
    };
    if ptr == libc::MAP_FAILED {
        return Err(AllocError::ReservationFailed {
            size: len,
            errno: errno(),
        });
    }
    Ok(ptr as usize)
}

/// Maps `len` bytes whose start is a multiple of `align`.
///
/// Returns `(map_base, map_len, aligned_base)`. The slack before and after
/// the aligned window is unmapped again where the platform allows it.
pub(super) fn map_aligned(len: usize, align: usize) -> Result<(usize, usize, usize), AllocError> {
    let over = len.checked_add(align).ok_or(AllocError::Overflow(len))?;
    let raw = map(over)?;
    let aligned = (raw + align - 1) & !(align - 1);
    let head = aligned - raw;
    let tail = over - head - len;
    // SAFETY: both trimmed ranges lie inside the mapping created above and
    // are disjoint from the aligned window we keep.
    unsafe {
        if head > 0 {
            unmap(raw, head);
        }
        if tail > 0 {
            unmap(aligned + len, tail);
        }
    }
    Ok((aligned, len, aligned))
}

/// # Safety
/// `[base, base + len)` must be a mapped range owned by the caller.
pub(super) unsafe fn unmap(base: usize, len: usize) {
    let rc = libc::munmap(base as *mut libc::c_void, len);
    debug_assert_eq!(rc, 0, "munmap failed");
}

/// Production advisor: `madvise(MADV_HUGEPAGE)`.
///
/// `EINVAL` (kernel built without THP) is reported as unsupported. On other
/// platforms every request is unsupported.
#[derive(Debug, Default, Clone, Copy)]
pub struct MadviseAdvisor;

impl Advisor for MadviseAdvisor {
    #[cfg(target_os = "linux")]
    fn advise(&self, base: usize, length: usize) -> AdviseResult {
        // SAFETY: madvise only changes paging hints for the given range.
        let rc = unsafe { libc::madvise(base as *mut libc::c_void, length, libc::MADV_HUGEPAGE) };
        if rc == 0 {
            AdviseResult::Ok
        } else {
            match errno() {
                libc::EINVAL | libc::ENOSYS => AdviseResult::Unsupported,
                code => AdviseResult::Error(code),
            }
        }
    }

    #[cfg(not(target_os = "linux"))]
    fn advise(&self, _base: usize, _length: usize) -> AdviseResult {
        AdviseResult::Unsupported
    }
}

fn parse_kb_field(line: &str, key: &str) -> Option<u64> {
    let rest = line.strip_prefix(key)?.trim_start().strip_prefix(':')?;
    let kb: u64 = rest.trim().trim_end_matches("kB").trim().parse().ok()?;
    Some(kb * 1024)
}

/// Huge-page-backed anonymous bytes of the mapping containing `addr`, read
/// from `/proc/self/smaps`. `None` where the file is unavailable.
pub fn anon_huge_bytes_for(addr: usize) -> Option<u64> {
    let smaps = std::fs::read_to_string("/proc/self/smaps").ok()?;
    let mut inside = false;
    for line in smaps.lines() {
        let first = line.split_whitespace().next().unwrap_or("");
        if let Some((lo, hi)) = first.split_once('-') {
            if let (Ok(lo), Ok(hi)) = (usize::from_str_radix(lo, 16), usize::from_str_radix(hi, 16)) {
                inside = lo <= addr && addr < hi;
                continue;
            }
        }
        if inside {
            if let Some(v) = parse_kb_field(line, "AnonHugePages") {
                return Some(v);
            }
        }
    }
    if inside {
        Some(0)
    } else {
        None
    }
}

/// Total huge-page-backed anonymous memory of this process.
pub fn process_anon_huge_bytes() -> Option<u64> {
    let text = std::fs::read_to_string("/proc/self/smaps_rollup").ok()?;
    text.lines().find_map(|l| parse_kb_field(l, "AnonHugePages"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aligned_mapping() {
        let (base, len, aligned) = map_aligned(3 * 4096, 1 << 21).unwrap();
        assert_eq!(aligned % (1 << 21), 0);
        assert_eq!(base, aligned);
        unsafe { unmap(base, len) };
    }

    #[test]
    fn kb_field() {
        assert_eq!(parse_kb_field("AnonHugePages:      2048 kB", "AnonHugePages"), Some(2 << 20));
        assert_eq!(parse_kb_field("Rss: 4 kB", "AnonHugePages"), None);
    }
}
