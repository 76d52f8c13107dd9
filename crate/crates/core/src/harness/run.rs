use std::collections::{HashMap, VecDeque};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{fingerprint, SolverSpec, SuiteManifest};
use crate::alloc::{ENV_FLAG, ENV_FLAG_ALIAS};
use crate::metrics::{self, measure, Limits, Outcome, RunRecord, Verdict, CSV_HEADER};

pub const RUNS_CSV: &str = "runs.csv";
pub const TIMELINE_CSV: &str = "timeline.csv";
pub const FINGERPRINT_FILE: &str = "fingerprint.txt";

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Manifest(#[from] super::ManifestErrors),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] metrics::CsvError),
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Substituted for `{bindir}` in solver templates.
    pub bindir: Option<PathBuf>,
    /// Stop after starting this many runs (simulates an interruption).
    pub stop_after: Option<usize>,
    /// Base environment for children; the THP flags are always overridden.
    pub base_env: Option<Vec<(String, String)>>,
}

/// Where one run writes its logs and stats.
#[derive(Debug, Clone)]
pub struct RunPaths {
    pub stdout: PathBuf,
    pub stderr: PathBuf,
    pub stats: PathBuf,
}

impl RunPaths {
    pub fn new(out: &Path, solver: &str, instance: &str, thp: bool, rep: usize) -> Self {
        let key = run_key(solver, instance, thp, rep);
        RunPaths {
            stdout: out.join("logs").join(format!("{key}.out")),
            stderr: out.join("logs").join(format!("{key}.err")),
            stats: out.join("stats").join(format!("{key}.json")),
        }
    }
}

pub(crate) fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

pub fn run_key(solver: &str, instance: &str, thp: bool, rep: usize) -> String {
    format!(
        "{}__{}__thp-{}__r{rep}",
        sanitize(solver),
        sanitize(instance),
        if thp { "on" } else { "off" }
    )
}

/// Child environment: `base` minus any THP flags, plus both flags set for
/// the requested variant.
pub fn child_env(base: &[(String, String)], thp: bool) -> Vec<(String, String)> {
    let flag = if thp { "1" } else { "0" };
    let mut env: Vec<(String, String)> = base
        .iter()
        .filter(|(k, _)| k != ENV_FLAG && k != ENV_FLAG_ALIAS)
        .cloned()
        .collect();
    env.push((ENV_FLAG.to_string(), flag.to_string()));
    env.push((ENV_FLAG_ALIAS.to_string(), flag.to_string()));
    env
}

pub fn expand_template(
    template: &str,
    instance: &Path,
    stats: &Path,
    bindir: Option<&Path>,
) -> Vec<String> {
    template
        .split_whitespace()
        .map(|tok| {
            let mut t = tok
                .replace("{instance}", &instance.to_string_lossy())
                .replace("{stats}", &stats.to_string_lossy());
            if let Some(b) = bindir {
                t = t.replace("{bindir}", &b.to_string_lossy());
            }
            t
        })
        .collect()
}

fn verdict_of(outcome: Outcome) -> Verdict {
    match outcome {
        Outcome::TimedOut => Verdict::Timeout,
        Outcome::MemOut => Verdict::Memout,
        Outcome::Exited(code) => Verdict::from_exit_code(code),
        Outcome::Signaled(_) => Verdict::Unknown,
    }
}

/// Result of one child run with its wall-clock placement.
#[derive(Debug, Clone)]
pub struct CellRun {
    pub record: RunRecord,
    pub rep: usize,
    pub start_unix: f64,
    pub end_unix: f64,
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

/// Runs one (solver, instance, variant) cell. The instance is read into
/// memory first so the timed run starts from a warm page cache.
#[allow(clippy::too_many_arguments)]
pub fn run_cell(
    manifest: &SuiteManifest,
    solver: &SolverSpec,
    instance: &str,
    thp: bool,
    rep: usize,
    out: &Path,
    opts: &RunOptions,
    cpu: Option<usize>,
) -> CellRun {
    let path = manifest.instance_path(instance);
    let preload = fs::read(&path);
    let paths = RunPaths::new(out, &solver.name, instance, thp, rep);
    let argv = expand_template(&solver.template, &path, &paths.stats, opts.bindir.as_deref());
    let base = opts
        .base_env
        .clone()
        .unwrap_or_else(|| std::env::vars().collect());
    let env = child_env(&base, thp);
    let limits = Limits {
        timeout: Some(Duration::from_secs_f64(manifest.timeout_s)),
        mem_limit: Some(manifest.mem_limit_bytes),
        cpu,
        stdout: Some(paths.stdout.clone()),
        stderr: Some(paths.stderr.clone()),
    };
    let start_unix = unix_now();
    let result = match &preload {
        Ok(_) => measure(&argv, &env, &limits).map_err(|e| e.to_string()),
        Err(e) => Err(format!("cannot read {}: {e}", path.display())),
    };
    let end_unix = unix_now();
    drop(preload);
    let (counters, verdict) = match result {
        Ok(m) => (m.counters, verdict_of(m.outcome)),
        Err(msg) => {
            let _ = fs::write(&paths.stderr, format!("{msg}\n"));
            (
                metrics::PerfCounters {
                    wall_time: 0.0,
                    dtlb_load_misses: None,
                    max_rss: 0,
                    exit_code: 127,
                },
                Verdict::Unknown,
            )
        }
    };
    CellRun {
        record: RunRecord {
            instance: instance.to_string(),
            solver: solver.name.clone(),
            thp,
            counters,
            verdict,
        },
        rep,
        start_unix,
        end_unix,
    }
}

fn prepare_out(out: &Path) -> io::Result<()> {
    fs::create_dir_all(out.join("logs"))?;
    fs::create_dir_all(out.join("stats"))?;
    Ok(())
}

/// Runs the THP-off and THP-on variants back to back.
pub fn run_pair(
    manifest: &SuiteManifest,
    solver: &SolverSpec,
    instance: &str,
    out: &Path,
    opts: &RunOptions,
) -> io::Result<(RunRecord, RunRecord)> {
    prepare_out(out)?;
    let off = run_cell(manifest, solver, instance, false, 0, out, opts, None);
    let on = run_cell(manifest, solver, instance, true, 0, out, opts, None);
    Ok((off.record, on.record))
}

fn allowed_cpus() -> Vec<usize> {
    // SAFETY: plain-data cpu set filled by the kernel.
    unsafe {
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        if libc::sched_getaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &mut set) != 0 {
            return Vec::new();
        }
        (0..libc::CPU_SETSIZE as usize).filter(|&c| libc::CPU_ISSET(c, &set)).collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct SuiteSummary {
    pub executed: usize,
    pub skipped_done: usize,
    pub remaining: usize,
    pub records: Vec<RunRecord>,
}

type CellKey = (String, String, bool);

fn done_counts(records: &[RunRecord]) -> HashMap<CellKey, usize> {
    let mut m = HashMap::new();
    for r in records {
        *m.entry((r.solver.clone(), r.instance.clone(), r.thp)).or_insert(0) += 1;
    }
    m
}

/// Executes every missing (solver, instance, variant, repetition) run,
/// appending each record to `out/runs.csv` as soon as it finishes.
pub fn run_suite(manifest: &SuiteManifest, out: &Path, opts: &RunOptions) -> Result<SuiteSummary, HarnessError> {
    manifest.validate()?;
    prepare_out(out)?;
    let fp = fingerprint();
    if fp.thp_mode == "always" {
        eprintln!("warning: host THP mode is 'always': the THP-off variant is not a true control");
    }
    let fp_path = out.join(FINGERPRINT_FILE);
    if !fp_path.exists() {
        fs::write(&fp_path, fp.to_text())?;
    }

    let csv_path = out.join(RUNS_CSV);
    let existing = if csv_path.exists() {
        metrics::read_records(File::open(&csv_path)?)?
    } else {
        Vec::new()
    };
    let done = done_counts(&existing);

    let mut rng = ChaCha8Rng::seed_from_u64(manifest.seed);
    let mut tasks: VecDeque<(usize, String, bool, usize)> = VecDeque::new();
    let mut skipped_done = 0;
    for rep in 0..manifest.repetitions {
        let mut cells: Vec<(usize, String, bool)> = Vec::new();
        for (si, s) in manifest.solvers.iter().enumerate() {
            for inst in &manifest.instances {
                for thp in [false, true] {
                    let have = done.get(&(s.name.clone(), inst.clone(), thp)).copied().unwrap_or(0);
                    if rep < have {
                        skipped_done += 1;
                    } else {
                        cells.push((si, inst.clone(), thp));
                    }
                }
            }
        }
        cells.shuffle(&mut rng);
        tasks.extend(cells.into_iter().map(|(si, i, t)| (si, i, t, rep)));
    }
    let total = tasks.len();
    let budget = opts.stop_after.unwrap_or(usize::MAX).min(total);

    let mut csv_file = OpenOptions::new().create(true).append(true).open(&csv_path)?;
    if existing.is_empty() && csv_file.metadata()?.len() == 0 {
        writeln!(csv_file, "{}", CSV_HEADER.join(","))?;
    }
    let timeline_path = out.join(TIMELINE_CSV);
    let mut timeline = OpenOptions::new().create(true).append(true).open(&timeline_path)?;
    if timeline.metadata()?.len() == 0 {
        writeln!(timeline, "solver,instance,thp,rep,start_unix,end_unix")?;
    }

    let cpus = allowed_cpus();
    let workers = manifest.max_parallel.min(budget.max(1));
    let pin = cpus.len() >= workers;
    let queue = Mutex::new(tasks);
    let started = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<CellRun>();
    let mut new_records = Vec::new();
    let write_result: Result<(), HarnessError> = std::thread::scope(|scope| {
        for w in 0..workers {
            let tx = tx.clone();
            let queue = &queue;
            let started = &started;
            let cpu = if pin { cpus.get(w).copied() } else { None };
            scope.spawn(move || loop {
                if started.fetch_add(1, Ordering::SeqCst) >= budget {
                    break;
                }
                let Some((si, inst, thp, rep)) = queue.lock().unwrap().pop_front() else {
                    break;
                };
                let run = run_cell(manifest, &manifest.solvers[si], &inst, thp, rep, out, opts, cpu);
                if tx.send(run).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        // single writer: all bookkeeping happens on this thread
        for run in rx {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
            w.write_record(metrics::record_fields(&run.record)).map_err(metrics::CsvError::from)?;
            let bytes = w.into_inner().map_err(|e| HarnessError::Other(e.to_string()))?;
            csv_file.write_all(&bytes)?;
            csv_file.flush()?;
            writeln!(
                timeline,
                "{},{},{},{},{:.6},{:.6}",
                run.record.solver, run.record.instance, run.record.thp, run.rep, run.start_unix, run.end_unix
            )?;
            new_records.push(run.record);
        }
        Ok(())
    });
    write_result?;
    let executed = new_records.len();
    let mut records = existing;
    records.extend(new_records);
    Ok(SuiteSummary {
        executed,
        skipped_done,
        remaining: total - executed,
        records,
    })
}

/// One row of `timeline.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimelineEntry {
    pub solver: String,
    pub instance: String,
    pub thp: bool,
    pub rep: usize,
    pub start_unix: f64,
    pub end_unix: f64,
}

pub fn read_timeline(out: &Path) -> Result<Vec<TimelineEntry>, HarnessError> {
    let mut rd = csv::Reader::from_path(out.join(TIMELINE_CSV)).map_err(metrics::CsvError::from)?;
    let mut v = Vec::new();
    for row in rd.records() {
        let row = row.map_err(metrics::CsvError::from)?;
        let num = |i: usize| -> Result<f64, HarnessError> {
            row[i].parse().map_err(|_| HarnessError::Other(format!("bad timeline field '{}'", &row[i])))
        };
        v.push(TimelineEntry {
            solver: row[0].to_string(),
            instance: row[1].to_string(),
            thp: &row[2] == "true",
            rep: num(3)? as usize,
            start_unix: num(4)?,
            end_unix: num(5)?,
        });
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_differs_only_in_flags() {
        let base = vec![
            ("PATH".to_string(), "/bin".to_string()),
            ("THP_ALWAYS".to_string(), "1".to_string()),
        ];
        let off = child_env(&base, false);
        let on = child_env(&base, true);
        assert_eq!(off.len(), 3);
        let diff: Vec<_> = off.iter().zip(&on).filter(|(a, b)| a != b).collect();
        assert_eq!(diff.len(), 2);
        assert!(on.contains(&("GLIBC_THP_ALWAYS".into(), "1".into())));
        assert!(off.contains(&("THP_ALWAYS".into(), "0".into())));
    }

    #[test]
    fn template_expansion() {
        let argv = expand_template(
            "{bindir}/solve {instance} --stats-json {stats}",
            Path::new("/i/a.cnf"),
            Path::new("/o/s.json"),
            Some(Path::new("/b")),
        );
        assert_eq!(argv, vec!["/b/solve", "/i/a.cnf", "--stats-json", "/o/s.json"]);
        assert_eq!(run_key("my solver", "dir/a.cnf", true, 2), "my_solver__dir_a.cnf__thp-on__r2");
    }
}
