//! Run records, the saved-runtime and TLB-miss-ratio metrics, cactus
//! series, and child-process measurement.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io;
use std::str::FromStr;

mod measure;
pub mod perf;

pub use measure::{measure, Limits, MeasureError, Measurement, Outcome};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricError {
    #[error("baseline value must be positive, got {0}")]
    ZeroBaseline(f64),
}

/// Resource usage of one child run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerfCounters {
    pub wall_time: f64,
    /// `None` when the host does not expose the counter.
    pub dtlb_load_misses: Option<u64>,
    pub max_rss: u64,
    pub exit_code: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Verdict {
    Sat,
    Unsat,
    Unknown,
    Timeout,
    Memout,
}

impl Verdict {
    pub fn is_solved(self) -> bool {
        matches!(self, Verdict::Sat | Verdict::Unsat)
    }

    /// Competition exit codes: 10 sat, 20 unsat, anything else unknown.
    pub fn from_exit_code(code: i32) -> Verdict {
        match code {
            10 => Verdict::Sat,
            20 => Verdict::Unsat,
            _ => Verdict::Unknown,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Sat => "sat",
            Verdict::Unsat => "unsat",
            Verdict::Unknown => "unknown",
            Verdict::Timeout => "timeout",
            Verdict::Memout => "memout",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Verdict {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "sat" => Verdict::Sat,
            "unsat" => Verdict::Unsat,
            "unknown" => Verdict::Unknown,
            "timeout" => Verdict::Timeout,
            "memout" => Verdict::Memout,
            _ => return Err(format!("unknown verdict '{s}'")),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub instance: String,
    pub solver: String,
    pub thp: bool,
    pub counters: PerfCounters,
    pub verdict: Verdict,
}

/// Percentage of runtime saved by the THP variant: `100 * (1 - t_thp / t_n)`.
pub fn saved_runtime_pct(t_n: f64, t_thp: f64) -> Result<f64, MetricError> {
    if t_n.is_nan() || t_n <= 0.0 {
        return Err(MetricError::ZeroBaseline(t_n));
    }
    Ok(100.0 * (1.0 - t_thp / t_n))
}

/// TLB misses left under THP, as a percentage of the baseline misses.
pub fn tlb_miss_ratio_pct(tlb_n: f64, tlb_thp: f64) -> Result<f64, MetricError> {
    if tlb_n.is_nan() || tlb_n <= 0.0 {
        return Err(MetricError::ZeroBaseline(tlb_n));
    }
    Ok(100.0 * tlb_thp / tlb_n)
}

/// One solver's THP-off vs THP-on summary over commonly solved instances.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub solver: String,
    pub solved_both: usize,
    pub t_n: f64,
    pub t_thp: f64,
    pub s: Option<f64>,
    pub tlb_n: Option<u64>,
    pub tlb_thp: Option<u64>,
    pub r_tlb: Option<f64>,
    /// Solved only with THP.
    pub gained: usize,
    /// Solved only without THP.
    pub lost: usize,
    /// No instance was solved by both variants.
    pub empty: bool,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    solved: bool,
    wall: f64,
    tlb: Option<u64>,
}

/// Collapses repetitions: mean wall time, mean counter (if always
/// available), solved only when every repetition solved it.
fn cells<'a>(records: &[&'a RunRecord]) -> BTreeMap<(&'a str, bool), Cell> {
    let mut groups: BTreeMap<(&'a str, bool), Vec<&'a RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.instance.as_str(), r.thp)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(k, rs)| {
            let n = rs.len() as f64;
            let wall = rs.iter().map(|r| r.counters.wall_time).sum::<f64>() / n;
            let tlb = rs
                .iter()
                .map(|r| r.counters.dtlb_load_misses)
                .collect::<Option<Vec<u64>>>()
                .map(|v| (v.iter().map(|&x| x as u128).sum::<u128>() / v.len() as u128) as u64);
            let solved = rs.iter().all(|r| r.verdict.is_solved());
            (k, Cell { solved, wall, tlb })
        })
        .collect()
}

/// Builds the comparison row for records of a single solver.
pub fn comparison_row(solver: &str, records: &[RunRecord]) -> ComparisonRow {
    let mine: Vec<&RunRecord> = records.iter().filter(|r| r.solver == solver).collect();
    let cells = cells(&mine);
    let instances: BTreeSet<&str> = cells.keys().map(|(i, _)| *i).collect();
    let mut row = ComparisonRow {
        solver: solver.to_string(),
        solved_both: 0,
        t_n: 0.0,
        t_thp: 0.0,
        s: None,
        tlb_n: None,
        tlb_thp: None,
        r_tlb: None,
        gained: 0,
        lost: 0,
        empty: true,
    };
    let (mut wall_n, mut wall_thp) = (0.0, 0.0);
    let mut tlb_n: Option<u64> = Some(0);
    let mut tlb_thp: Option<u64> = Some(0);
    for inst in instances {
        let off = cells.get(&(inst, false)).copied();
        let on = cells.get(&(inst, true)).copied();
        let solved_off = off.is_some_and(|c| c.solved);
        let solved_on = on.is_some_and(|c| c.solved);
        match (solved_off, solved_on) {
            (true, true) => {
                let (off, on) = (off.unwrap(), on.unwrap());
                row.solved_both += 1;
                wall_n += off.wall;
                wall_thp += on.wall;
                tlb_n = tlb_n.zip(off.tlb).map(|(a, b)| a + b);
                tlb_thp = tlb_thp.zip(on.tlb).map(|(a, b)| a + b);
            }
            (false, true) => row.gained += 1,
            (true, false) => row.lost += 1,
            (false, false) => {}
        }
    }
    if row.solved_both == 0 {
        return row;
    }
    row.empty = false;
    row.t_n = wall_n / 3600.0;
    row.t_thp = wall_thp / 3600.0;
    row.s = saved_runtime_pct(row.t_n, row.t_thp).ok();
    row.tlb_n = tlb_n;
    row.tlb_thp = tlb_thp;
    row.r_tlb = tlb_n
        .zip(tlb_thp)
        .and_then(|(n, t)| tlb_miss_ratio_pct(n as f64, t as f64).ok());
    row
}

/// Per (solver, variant), runtimes of solved runs in ascending order.
pub fn cactus_series(records: &[RunRecord]) -> BTreeMap<(String, bool), Vec<f64>> {
    let mut out: BTreeMap<(String, bool), Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.verdict.is_solved()) {
        out.entry((r.solver.clone(), r.thp)).or_default().push(r.counters.wall_time);
    }
    for v in out.values_mut() {
        v.sort_by(f64::total_cmp);
    }
    out
}

pub const CSV_HEADER: [&str; 8] = [
    "instance",
    "solver",
    "thp",
    "verdict",
    "wall_s",
    "dtlb_load_misses",
    "max_rss_bytes",
    "exit_code",
];

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Field { line: u64, msg: String },
    #[error("unexpected header {0:?}")]
    Header(Vec<String>),
}

pub fn record_fields(r: &RunRecord) -> [String; 8] {
    [
        r.instance.clone(),
        r.solver.clone(),
        r.thp.to_string(),
        r.verdict.to_string(),
        format!("{:.6}", r.counters.wall_time),
        r.counters
            .dtlb_load_misses
            .map_or_else(|| "NA".to_string(), |v| v.to_string()),
        r.counters.max_rss.to_string(),
        r.counters.exit_code.to_string(),
    ]
}

pub fn write_records<W: io::Write>(out: W, records: &[RunRecord]) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record(record_fields(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: io::Read>(input: R) -> Result<Vec<RunRecord>, CsvError> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(CsvError::Header(header));
    }
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |msg: String| CsvError::Field { line, msg };
        let num = |i: usize| -> Result<&str, CsvError> { Ok(&row[i]) };
        let thp = match num(2)? {
            "true" => true,
            "false" => false,
            other => return Err(bad(format!("bad thp '{other}'"))),
        };
        let verdict = num(3)?.parse().map_err(bad)?;
        let wall_time: f64 = num(4)?.parse().map_err(|_| CsvError::Field {
            line,
            msg: format!("bad wall_s '{}'", &row[4]),
        })?;
        let dtlb_load_misses = match num(5)? {
            "NA" => None,
            v => Some(v.parse().map_err(|_| CsvError::Field {
                line,
                msg: format!("bad dtlb_load_misses '{v}'"),
            })?),
        };
        let max_rss = num(6)?.parse().map_err(|_| CsvError::Field {
            line,
            msg: format!("bad max_rss_bytes '{}'", &row[6]),
        })?;
        let exit_code = num(7)?.parse().map_err(|_| CsvError::Field {
            line,
            msg: format!("bad exit_code '{}'", &row[7]),
        })?;
        out.push(RunRecord {
            instance: row[0].to_string(),
            solver: row[1].to_string(),
            thp,
            counters: PerfCounters {
                wall_time,
                dtlb_load_misses,
                max_rss,
                exit_code,
            },
            verdict,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(instance: &str, thp: bool, wall: f64, tlb: Option<u64>, verdict: Verdict) -> RunRecord {
        RunRecord {
            instance: instance.into(),
            solver: "s".into(),
            thp,
            counters: PerfCounters {
                wall_time: wall,
                dtlb_load_misses: tlb,
                max_rss: 1 << 20,
                exit_code: 10,
            },
            verdict,
        }
    }

    #[test]
    fn formula_examples() {
        assert!((saved_runtime_pct(4.58, 3.72).unwrap() - 18.78).abs() < 0.005);
        assert!((saved_runtime_pct(8.17, 7.03).unwrap() - 13.95).abs() < 0.005);
        assert_eq!(saved_runtime_pct(2.0, 2.0), Ok(0.0));
        assert!(saved_runtime_pct(0.0, 1.0).is_err());
        assert!((tlb_miss_ratio_pct(4.93e10, 5.13e8).unwrap() - 1.04).abs() < 0.005);
        assert!((tlb_miss_ratio_pct(2.75e11, 2.97e9).unwrap() - 1.08).abs() < 0.005);
        assert_eq!(tlb_miss_ratio_pct(7.0, 7.0), Ok(100.0));
        assert!(tlb_miss_ratio_pct(0.0, 1.0).is_err());
    }

    #[test]
    fn row_filters_to_common_solves() {
        let rs = vec![
            rec("a", false, 100.0, Some(1000), Verdict::Sat),
            rec("a", true, 80.0, Some(10), Verdict::Sat),
            rec("b", false, 200.0, Some(2000), Verdict::Unsat),
            rec("b", true, 100.0, Some(20), Verdict::Unsat),
            rec("c", false, 900.0, None, Verdict::Timeout),
            rec("c", true, 50.0, Some(5), Verdict::Sat),
            rec("d", false, 10.0, Some(5), Verdict::Sat),
            rec("d", true, 900.0, Some(5), Verdict::Timeout),
        ];
        let row = comparison_row("s", &rs);
        assert_eq!(row.solved_both, 2);
        assert!((row.t_n - 300.0 / 3600.0).abs() < 1e-12);
        assert!((row.s.unwrap() - 40.0).abs() < 1e-9);
        assert_eq!((row.tlb_n, row.tlb_thp), (Some(3000), Some(30)));
        assert!((row.r_tlb.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!((row.gained, row.lost), (1, 1));
        assert!(!row.empty);
    }

    #[test]
    fn disjoint_solves_give_empty_row() {
        let rs = vec![
            rec("a", false, 1.0, None, Verdict::Sat),
            rec("a", true, 9.0, None, Verdict::Timeout),
            rec("b", false, 9.0, None, Verdict::Memout),
            rec("b", true, 1.0, None, Verdict::Sat),
        ];
        let row = comparison_row("s", &rs);
        assert!(row.empty);
        assert_eq!(row.s, None);
        assert_eq!((row.gained, row.lost), (1, 1));
    }

    #[test]
    fn missing_counter_gives_na() {
        let rs = vec![
            rec("a", false, 2.0, None, Verdict::Sat),
            rec("a", true, 1.0, Some(3), Verdict::Sat),
        ];
        let row = comparison_row("s", &rs);
        assert_eq!(row.tlb_n, None);
        assert_eq!(row.r_tlb, None);
        assert!(row.s.is_some());
    }

    #[test]
    fn cactus_examples() {
        let rs = vec![
            rec("a", false, 3.0, None, Verdict::Sat),
            rec("b", false, 1.0, None, Verdict::Sat),
            rec("c", false, 2.0, None, Verdict::Unsat),
            rec("d", false, 0.5, None, Verdict::Timeout),
        ];
        let c = cactus_series(&rs);
        assert_eq!(c[&("s".to_string(), false)], vec![1.0, 2.0, 3.0]);
        assert!(cactus_series(&[]).is_empty());
    }

    #[test]
    fn csv_round_trip() {
        let rs = vec![
            rec("x,y.cnf", false, 1.25, None, Verdict::Sat),
            rec("z.cnf", true, 0.5, Some(42), Verdict::Memout),
        ];
        let mut buf = Vec::new();
        write_records(&mut buf, &rs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("instance,solver,thp,verdict,wall_s,dtlb_load_misses,max_rss_bytes,exit_code\n"));
        assert!(text.contains(",NA,"));
        assert_eq!(read_records(&buf[..]).unwrap(), rs);
        assert!(read_records("a,b\n".as_bytes()).is_err());
    }

    fn arb_record() -> impl Strategy<Value = RunRecord> {
        (0..6u8, any::<bool>(), 1u32..10_000, proptest::option::of(1u64..1_000_000), 0..5u8).prop_map(
            |(i, thp, ms, tlb, v)| {
                let verdict = [Verdict::Sat, Verdict::Unsat, Verdict::Unknown, Verdict::Timeout, Verdict::Memout]
                    [v as usize];
                rec(&format!("i{i}"), thp, ms as f64 / 1000.0, tlb, verdict)
            },
        )
    }

    proptest! {
        #[test]
        fn saved_sign_follows_difference(a in 1u32..10_000_000, b in 0u32..10_000_000) {
            let s = saved_runtime_pct(a as f64 / 1000.0, b as f64 / 1000.0).unwrap();
            prop_assert_eq!(s.partial_cmp(&0.0), Some(a.cmp(&b)));
        }

        #[test]
        fn ratio_below_hundred_iff_fewer_misses(n in 1u64..1 << 40, t in 1u64..1 << 40) {
            let r = tlb_miss_ratio_pct(n as f64, t as f64).unwrap();
            prop_assert!(r > 0.0);
            prop_assert_eq!(r < 100.0, t < n);
        }

        #[test]
        fn row_is_permutation_invariant(mut rs in prop::collection::vec(arb_record(), 0..30), seed in any::<u64>()) {
            let before = comparison_row("s", &rs);
            use rand::{seq::SliceRandom, SeedableRng};
            rs.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let after = comparison_row("s", &rs);
            prop_assert_eq!(before.solved_both, after.solved_both);
            prop_assert_eq!((before.gained, before.lost), (after.gained, after.lost));
            prop_assert_eq!((before.tlb_n, before.tlb_thp), (after.tlb_n, after.tlb_thp));
            prop_assert!((before.t_n - after.t_n).abs() < 1e-9);
            prop_assert!((before.t_thp - after.t_thp).abs() < 1e-9);
        }
    }
}
