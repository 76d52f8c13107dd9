//! Paired THP-off/THP-on benchmark suites over external solver commands.

mod gen;
mod manifest;
mod report;
mod run;

pub use gen::{random_kcnf, write_instances};
pub use manifest::{ManifestErrors, SolverSpec, SuiteManifest};
pub use report::{
    emit_report, fmt_sci, load_stats, render_report, write_cactus, ReportFormat, StatsTotals,
};
pub use run::{
    child_env, expand_template, read_timeline, run_cell, run_key, run_pair, run_suite, CellRun,
    HarnessError, RunOptions, RunPaths, SuiteSummary, TimelineEntry, FINGERPRINT_FILE, RUNS_CSV,
    TIMELINE_CSV,
};

pub const THP_ENABLED_FILE: &str = "/sys/kernel/mm/transparent_hugepage/enabled";

/// Host properties that influence THP measurements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fingerprint {
    pub kernel: String,
    pub thp_mode: String,
    pub cpu_model: String,
}

impl Fingerprint {
    pub fn to_text(&self) -> String {
        format!(
            "kernel={}\nthp={}\ncpu={}\n",
            self.kernel, self.thp_mode, self.cpu_model
        )
    }
}

/// The bracketed choice in a sysfs THP setting, e.g. `madvise` from
/// `always [madvise] never`.
pub fn parse_thp_mode(text: &str) -> Option<String> {
    let start = text.find('[')?;
    let end = text[start..].find(']')? + start;
    Some(text[start + 1..end].to_string())
}

pub fn fingerprint() -> Fingerprint {
    let read = |p: &str| std::fs::read_to_string(p).ok();
    let kernel = read("/proc/sys/kernel/osrelease")
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|| "unknown".into());
    let thp_mode = read(THP_ENABLED_FILE)
        .and_then(|s| parse_thp_mode(&s))
        .unwrap_or_else(|| "unavailable".into());
    let cpu_model = read("/proc/cpuinfo")
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split_once(':'))
                .map(|(_, v)| v.trim().to_string())
        })
        .unwrap_or_else(|| "unknown".into());
    Fingerprint {
        kernel,
        thp_mode,
        cpu_model,
    }
}
