use std::ffi::{CString, NulError};
use std::fs::File;
use std::io;
use std::os::fd::AsRawFd;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use super::perf::DtlbCounter;
use super::PerfCounters;

/// Resource limits and redirections for one measured child.
#[derive(Debug, Clone, Default)]
pub struct Limits {
    pub timeout: Option<Duration>,
    /// Resident-set ceiling in bytes.
    pub mem_limit: Option<u64>,
    /// Core to pin the child to.
    pub cpu: Option<usize>,
    pub stdout: Option<PathBuf>,
    pub stderr: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Exited(i32),
    Signaled(i32),
    TimedOut,
    MemOut,
}

#[derive(Debug, Clone, Copy)]
pub struct Measurement {
    pub counters: PerfCounters,
    pub outcome: Outcome,
    pub started: Instant,
    pub finished: Instant,
}

#[derive(Debug, thiserror::Error)]
pub enum MeasureError {
    #[error("empty command")]
    Empty,
    #[error("command not found: {0}")]
    NotFound(String),
    #[error("argument contains a NUL byte")]
    Nul(#[from] NulError),
    #[error("cannot open {path}: {source}")]
    Redirect { path: PathBuf, source: io::Error },
    #[error("spawn failed: {0}")]
    Spawn(io::Error),
}

fn resolve(program: &str, env: &[(String, String)]) -> Result<PathBuf, MeasureError> {
    if program.contains('/') {
        return Ok(PathBuf::from(program));
    }
    let path = env
        .iter()
        .find(|(k, _)| k == "PATH")
        .map(|(_, v)| v.clone())
        .or_else(|| std::env::var("PATH").ok())
        .unwrap_or_else(|| "/usr/bin:/bin".into());
    path.split(':')
        .map(|dir| Path::new(dir).join(program))
        .find(|p| is_executable(p))
        .ok_or_else(|| MeasureError::NotFound(program.to_string()))
}

fn is_executable(p: &Path) -> bool {
    use std::os::unix::fs::PermissionsExt;
    p.metadata().is_ok_and(|m| m.is_file() && m.permissions().mode() & 0o111 != 0)
}

fn open_out(path: &Option<PathBuf>) -> Result<File, MeasureError> {
    let p = path.clone().unwrap_or_else(|| "/dev/null".into());
    File::create(&p).map_err(|source| MeasureError::Redirect { path: p, source })
}

fn rss_bytes(pid: libc::pid_t) -> Option<u64> {
    let text = std::fs::read_to_string(format!("/proc/{pid}/statm")).ok()?;
    let pages: u64 = text.split_whitespace().nth(1)?.parse().ok()?;
    Some(pages * 4096)
}

/// Runs `argv` with exactly the environment `env`, timing it from release
/// to exit on a monotonic clock and reading the dTLB load-miss counter
/// when the host allows it.
pub fn measure(argv: &[String], env: &[(String, String)], limits: &Limits) -> Result<Measurement, MeasureError> {
    let program = argv.first().ok_or(MeasureError::Empty)?;
    let path = CString::new(resolve(program, env)?.into_os_string().into_encoded_bytes())?;
    let args: Vec<CString> = argv.iter().map(|a| CString::new(a.as_str())).collect::<Result<_, _>>()?;
    let envs: Vec<CString> = env
        .iter()
        .map(|(k, v)| CString::new(format!("{k}={v}")))
        .collect::<Result<_, _>>()?;
    let mut arg_ptrs: Vec<*const libc::c_char> = args.iter().map(|a| a.as_ptr()).collect();
    arg_ptrs.push(std::ptr::null());
    let mut env_ptrs: Vec<*const libc::c_char> = envs.iter().map(|a| a.as_ptr()).collect();
    env_ptrs.push(std::ptr::null());

    let stdin = File::open("/dev/null").map_err(MeasureError::Spawn)?;
    let stdout = open_out(&limits.stdout)?;
    let stderr = open_out(&limits.stderr)?;

    // SAFETY: cpu_set_t is plain data; the CPU_* helpers only touch it.
    let cpuset = limits.cpu.map(|c| unsafe {
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        libc::CPU_SET(c, &mut set);
        set
    });

    let mut fds = [0 as libc::c_int; 2];
    // SAFETY: fds has room for two descriptors.
    if unsafe { libc::pipe2(fds.as_mut_ptr(), libc::O_CLOEXEC) } != 0 {
        return Err(MeasureError::Spawn(io::Error::last_os_error()));
    }
    let (gate_r, gate_w) = (fds[0], fds[1]);

    // SAFETY: the child only calls async-signal-safe functions before exec.
    let pid = unsafe { libc::fork() };
    if pid < 0 {
        let e = io::Error::last_os_error();
        unsafe {
            libc::close(gate_r);
            libc::close(gate_w);
        }
        return Err(MeasureError::Spawn(e));
    }
    if pid == 0 {
        unsafe {
            libc::close(gate_w);
            let mut b = 0u8;
            if libc::read(gate_r, (&mut b as *mut u8).cast(), 1) != 1 {
                libc::_exit(127);
            }
            libc::setpgid(0, 0);
            if let Some(set) = &cpuset {
                libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), set);
            }
            libc::dup2(stdin.as_raw_fd(), 0);
            libc::dup2(stdout.as_raw_fd(), 1);
            libc::dup2(stderr.as_raw_fd(), 2);
            libc::execve(path.as_ptr(), arg_ptrs.as_ptr(), env_ptrs.as_ptr());
            libc::_exit(127);
        }
    }

    // SAFETY: pid is our child; closing our copy of the read end.
    unsafe {
        libc::setpgid(pid, pid);
        libc::close(gate_r);
    }
    drop((stdin, stdout, stderr));
    let counter = DtlbCounter::for_child(pid).ok();
    let started = Instant::now();
    // SAFETY: one byte from a valid buffer to our pipe.
    unsafe {
        libc::write(gate_w, [1u8].as_ptr().cast(), 1);
        libc::close(gate_w);
    }

    let mut status: libc::c_int = 0;
    // SAFETY: rusage is plain data filled in by wait4.
    let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
    let mut limit_hit = None;
    let mut peak_rss = 0u64;
    loop {
        // SAFETY: waiting on our own child.
        let r = unsafe { libc::wait4(pid, &mut status, libc::WNOHANG, &mut usage) };
        if r == pid {
            break;
        }
        if r < 0 {
            let e = io::Error::last_os_error();
            if e.kind() == io::ErrorKind::Interrupted {
                continue;
            }
            return Err(MeasureError::Spawn(e));
        }
        let elapsed = started.elapsed();
        if limits.timeout.is_some_and(|t| elapsed >= t) {
            limit_hit = Some(Outcome::TimedOut);
        } else if let Some(limit) = limits.mem_limit {
            let rss = rss_bytes(pid).unwrap_or(0);
            peak_rss = peak_rss.max(rss);
            if rss > limit {
                limit_hit = Some(Outcome::MemOut);
            }
        }
        if limit_hit.is_some() {
            // SAFETY: signalling the child's own process group.
            unsafe {
                libc::kill(-pid, libc::SIGKILL);
                libc::kill(pid, libc::SIGKILL);
                while libc::wait4(pid, &mut status, 0, &mut usage) < 0
                    && io::Error::last_os_error().kind() == io::ErrorKind::Interrupted
                {}
            }
            break;
        }
        let nap = (elapsed / 50).clamp(Duration::from_micros(200), Duration::from_millis(10));
        std::thread::sleep(nap);
    }
    let finished = Instant::now();
    let wall_time = (finished - started).as_secs_f64();
    let max_rss = (usage.ru_maxrss.max(0) as u64 * 1024).max(peak_rss);
    let exit_code = if libc::WIFEXITED(status) {
        libc::WEXITSTATUS(status)
    } else if libc::WIFSIGNALED(status) {
        128 + libc::WTERMSIG(status)
    } else {
        -1
    };
    let outcome = match limit_hit {
        Some(o) => o,
        None if limits.timeout.is_some_and(|t| finished - started >= t) => Outcome::TimedOut,
        None if limits.mem_limit.is_some_and(|m| max_rss > m) => Outcome::MemOut,
        None if libc::WIFSIGNALED(status) => Outcome::Signaled(libc::WTERMSIG(status)),
        None => Outcome::Exited(exit_code),
    };
    let dtlb_load_misses = counter.and_then(|c| c.read().ok());
    Ok(Measurement {
        counters: PerfCounters {
            wall_time,
            dtlb_load_misses,
            max_rss,
            exit_code,
        },
        outcome,
        started,
        finished,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> Vec<(String, String)> {
        vec![("PATH".into(), "/usr/bin:/bin".into())]
    }

    fn argv(parts: &[&str]) -> Vec<String> {
        parts.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn noop_exits_zero() {
        let m = measure(&argv(&["true"]), &env(), &Limits::default()).unwrap();
        assert_eq!(m.outcome, Outcome::Exited(0));
        assert!(m.counters.wall_time > 0.0);
        let m = measure(&argv(&["sh", "-c", "exit 20"]), &env(), &Limits::default()).unwrap();
        assert_eq!(m.counters.exit_code, 20);
    }

    #[test]
    fn sleep_is_timed() {
        let m = measure(&argv(&["sleep", "0.1"]), &env(), &Limits::default()).unwrap();
        assert!(m.counters.wall_time >= 0.1);
    }

    #[test]
    fn timeout_kills() {
        let limits = Limits {
            timeout: Some(Duration::from_millis(200)),
            ..Default::default()
        };
        let m = measure(&argv(&["sleep", "5"]), &env(), &limits).unwrap();
        assert_eq!(m.outcome, Outcome::TimedOut);
        assert!(m.counters.wall_time >= 0.2 && m.counters.wall_time < 2.0);
    }

    #[test]
    fn environment_is_exact_and_output_redirected() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out.txt");
        let limits = Limits {
            stdout: Some(out.clone()),
            ..Default::default()
        };
        let mut e = env();
        e.push(("THP_ALWAYS".into(), "1".into()));
        measure(&argv(&["env"]), &e, &limits).unwrap();
        let text = std::fs::read_to_string(out).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines.sort();
        assert_eq!(lines, vec!["PATH=/usr/bin:/bin", "THP_ALWAYS=1"]);
    }

    #[test]
    fn missing_program() {
        assert!(matches!(
            measure(&argv(&["definitely-not-a-command-xyz"]), &env(), &Limits::default()),
            Err(MeasureError::NotFound(_))
        ));
        assert!(matches!(measure(&[], &env(), &Limits::default()), Err(MeasureError::Empty)));
    }
}
