//! Minimal `perf_event_open` wrapper for the data-TLB load-miss counter.

use std::io;
use std::os::fd::{AsRawFd, FromRawFd, OwnedFd};

const PERF_TYPE_HW_CACHE: u32 = 3;
// DTLB | (OP_READ << 8) | (RESULT_MISS << 16)
const DTLB_LOAD_MISS: u64 = 3 | (1 << 16);
const ATTR_SIZE: u32 = 112;

const FLAG_DISABLED: u64 = 1 << 0;
const FLAG_INHERIT: u64 = 1 << 1;
const FLAG_EXCLUDE_KERNEL: u64 = 1 << 5;
const FLAG_EXCLUDE_HV: u64 = 1 << 6;
const FLAG_ENABLE_ON_EXEC: u64 = 1 << 12;

const IOC_ENABLE: u64 = 0x2400;
const IOC_DISABLE: u64 = 0x2401;
const IOC_RESET: u64 = 0x2403;
const PERF_FLAG_FD_CLOEXEC: libc::c_ulong = 8;

#[repr(C)]
struct PerfEventAttr {
    type_: u32,
    size: u32,
    config: u64,
    sample_period: u64,
    sample_type: u64,
    read_format: u64,
    flags: u64,
    rest: [u64; 8],
}

/// An open dTLB load-miss counter.
#[derive(Debug)]
pub struct DtlbCounter {
    fd: OwnedFd,
}

impl DtlbCounter {
    /// Counter for the calling thread, initially disabled.
    pub fn for_self() -> io::Result<Self> {
        Self::open(0, FLAG_DISABLED)
    }

    /// Counter for `pid` and its descendants that switches on when the
    /// process calls exec.
    pub fn for_child(pid: libc::pid_t) -> io::Result<Self> {
        Self::open(pid, FLAG_DISABLED | FLAG_INHERIT | FLAG_ENABLE_ON_EXEC)
    }

    fn open(pid: libc::pid_t, flags: u64) -> io::Result<Self> {
        let attr = PerfEventAttr {
            type_: PERF_TYPE_HW_CACHE,
            size: ATTR_SIZE,
            config: DTLB_LOAD_MISS,
            sample_period: 0,
            sample_type: 0,
            read_format: 0,
            flags: flags | FLAG_EXCLUDE_KERNEL | FLAG_EXCLUDE_HV,
            rest: [0; 8],
        };
        // SAFETY: attr is a valid, fully initialized perf_event_attr.
        let fd = unsafe {
            libc::syscall(
                libc::SYS_perf_event_open,
                &attr as *const PerfEventAttr,
                pid,
                -1 as libc::c_int,
                -1 as libc::c_int,
                PERF_FLAG_FD_CLOEXEC,
            )
        };
        if fd < 0 {
            return Err(io::Error::last_os_error());
        }
        // SAFETY: the syscall returned a fresh descriptor we now own.
        Ok(DtlbCounter { fd: unsafe { OwnedFd::from_raw_fd(fd as i32) } })
    }

    fn ioctl(&self, req: u64) -> io::Result<()> {
        // SAFETY: perf ioctls without an argument on our own fd.
        let rc = unsafe { libc::ioctl(self.fd.as_raw_fd(), req as _, 0) };
        if rc < 0 {
            return Err(io::Error::last_os_error());
        }
        Ok(())
    }

    pub fn reset(&self) -> io::Result<()> {
        self.ioctl(IOC_RESET)
    }

    pub fn enable(&self) -> io::Result<()> {
        self.ioctl(IOC_ENABLE)
    }

    pub fn disable(&self) -> io::Result<()> {
        self.ioctl(IOC_DISABLE)
    }

    pub fn read(&self) -> io::Result<u64> {
        let mut buf = [0u8; 8];
        // SAFETY: buf is 8 writable bytes.
        let n = unsafe { libc::read(self.fd.as_raw_fd(), buf.as_mut_ptr().cast(), 8) };
        if n != 8 {
            return Err(io::Error::last_os_error());
        }
        Ok(u64::from_ne_bytes(buf))
    }
}
