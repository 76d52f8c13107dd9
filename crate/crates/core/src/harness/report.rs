use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs::{self, File};
use std::path::Path;
use std::str::FromStr;

use super::run::{sanitize, HarnessError, RunPaths, FINGERPRINT_FILE, RUNS_CSV};
use crate::metrics::{cactus_series, comparison_row, read_records, ComparisonRow, RunRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(format!("unknown report format '{s}' (expected md or csv)")),
        }
    }
}

/// Software clause-access counters summed over the runs of one
/// (solver, variant).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StatsTotals {
    pub runs: usize,
    pub propagation: u64,
    pub other: u64,
}

impl StatsTotals {
    pub fn share_pct(&self) -> Option<f64> {
        let total = self.propagation + self.other;
        (total > 0).then(|| 100.0 * self.propagation as f64 / total as f64)
    }
}

/// `2.60E+11` style.
pub fn fmt_sci(v: u64) -> String {
    let s = format!("{:.2e}", v as f64);
    let (mant, exp) = s.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    format!("{mant}E{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
}

fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map_or_else(|| "NA".to_string(), f)
}

fn solvers(records: &[RunRecord]) -> Vec<String> {
    let set: BTreeSet<&str> = records.iter().map(|r| r.solver.as_str()).collect();
    set.into_iter().map(str::to_string).collect()
}

/// Reads per-run stats files for the records, keyed by (solver, thp).
pub fn load_stats(out: &Path, records: &[RunRecord]) -> BTreeMap<(String, bool), StatsTotals> {
    let mut seen: HashMap<(String, String, bool), usize> = HashMap::new();
    let mut totals: BTreeMap<(String, bool), StatsTotals> = BTreeMap::new();
    for r in records {
        let rep = seen.entry((r.solver.clone(), r.instance.clone(), r.thp)).or_insert(0);
        let path = RunPaths::new(out, &r.solver, &r.instance, r.thp, *rep).stats;
        *rep += 1;
        let Ok(text) = fs::read_to_string(&path) else {
            continue;
        };
        let Ok(doc) = serde_json::from_str::<serde_json::Value>(&text) else {
            continue;
        };
        let get = |k: &str| doc.get(k).and_then(|v| v.as_u64());
        if let (Some(p), Some(o)) = (get("propagation_accesses"), get("other_clause_accesses")) {
            let t = totals.entry((r.solver.clone(), r.thp)).or_default();
            t.runs += 1;
            t.propagation += p;
            t.other += o;
        }
    }
    totals
}

/// Table of per-solver comparison rows plus tallies, fingerprint and
/// clause-access shares.
pub fn render_report(
    records: &[RunRecord],
    fingerprint: Option<&str>,
    stats: &BTreeMap<(String, bool), StatsTotals>,
    format: ReportFormat,
) -> String {
    let rows: Vec<ComparisonRow> = solvers(records).iter().map(|s| comparison_row(s, records)).collect();
    match format {
        ReportFormat::Csv => render_csv(&rows),
        ReportFormat::Markdown => render_md(records, &rows, fingerprint, stats),
    }
}

fn row_cells(r: &ComparisonRow) -> [String; 7] {
    [
        r.solved_both.to_string(),
        format!("{:.6}", r.t_n),
        format!("{:.6}", r.t_thp),
        opt(r.s, |v| format!("{v:.2}")),
        opt(r.tlb_n, fmt_sci),
        opt(r.tlb_thp, fmt_sci),
        opt(r.r_tlb, |v| format!("{v:.2}")),
    ]
}

fn render_csv(rows: &[ComparisonRow]) -> String {
    let mut s = String::from("solver,solved,t_n_h,t_thp_h,s_pct,tlb_n,tlb_thp,r_tlb_pct,gained,lost\n");
    for r in rows {
        let c = row_cells(r);
        writeln!(s, "{},{},{},{}", r.solver, c.join(","), r.gained, r.lost).unwrap();
    }
    s
}

fn render_md(
    records: &[RunRecord],
    rows: &[ComparisonRow],
    fingerprint: Option<&str>,
    stats: &BTreeMap<(String, bool), StatsTotals>,
) -> String {
    let mut s = String::from("# THP comparison\n\n");
    if let Some(fp) = fingerprint {
        s.push_str("Host:\n\n");
        for line in fp.lines().filter(|l| !l.is_empty()) {
            writeln!(s, "- {line}").unwrap();
        }
        s.push('\n');
    }
    s.push_str("Times are hours summed over instances solved by both variants.\n\n");
    s.push_str("| Solver | # | t_n | t_thp | s | TLB_n | TLB_thp | r_tlb |\n");
    s.push_str("|---|---:|---:|---:|---:|---:|---:|---:|\n");
    for r in rows {
        writeln!(s, "| {} | {} |", r.solver, row_cells(r).join(" | ")).unwrap();
    }
    s.push_str("\n## Solved instances\n\n");
    s.push_str("| Solver | runs | solved_n | solved_thp | gained | lost |\n");
    s.push_str("|---|---:|---:|---:|---:|---:|\n");
    for r in rows {
        let runs = records.iter().filter(|x| x.solver == r.solver).count();
        writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} |",
            r.solver,
            runs,
            r.solved_both + r.lost,
            r.solved_both + r.gained,
            r.gained,
            r.lost
        )
        .unwrap();
    }
    if !stats.is_empty() {
        s.push_str("\n## Clause accesses by site\n\n");
        s.push_str("| Solver | THP | runs | propagation | other | propagation % |\n");
        s.push_str("|---|---|---:|---:|---:|---:|\n");
        for ((solver, thp), t) in stats {
            writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} |",
                solver,
                if *thp { "on" } else { "off" },
                t.runs,
                t.propagation,
                t.other,
                opt(t.share_pct(), |v| format!("{v:.2}"))
            )
            .unwrap();
        }
    }
    s
}

/// Writes `cactus/<solver>__thp-<on|off>.csv` files with `rank,seconds` rows.
pub fn write_cactus(dir: &Path, records: &[RunRecord]) -> std::io::Result<()> {
    let cdir = dir.join("cactus");
    fs::create_dir_all(&cdir)?;
    for ((solver, thp), times) in cactus_series(records) {
        let name = format!("{}__thp-{}", sanitize(&solver), if thp { "on" } else { "off" });
        let mut s = String::from("rank,seconds\n");
        for (i, t) in times.iter().enumerate() {
            writeln!(s, "{},{t:.6}", i + 1).unwrap();
        }
        fs::write(cdir.join(format!("{name}.csv")), s)?;
    }
    Ok(())
}

/// Rebuilds the report for a suite directory from its persisted files.
pub fn emit_report(dir: &Path, format: ReportFormat) -> Result<String, HarnessError> {
    let records = read_records(File::open(dir.join(RUNS_CSV))?)?;
    if records.is_empty() {
        return Err(HarnessError::Other(format!("{} has no records", dir.join(RUNS_CSV).display())));
    }
    let fp = fs::read_to_string(dir.join(FINGERPRINT_FILE)).ok();
    let stats = load_stats(dir, &records);
    write_cactus(dir, &records)?;
    Ok(render_report(&records, fp.as_deref(), &stats, format))
}
