use std::process::Command;

fn run(bin: &str, args: &[&str]) -> (i32, String, String) {
    let out = Command::new(bin).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn solve_exit_codes_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let sat = dir.path().join("sat.cnf");
    let unsat = dir.path().join("unsat.cnf");
    std::fs::write(&sat, "c tiny\np cnf 3 2\n1 -2 0\n2 3 0\n").unwrap();
    std::fs::write(&unsat, "p cnf 2 4\n1 2 0\n-1 2 0\n1 -2 0\n-1 -2 0\n").unwrap();
    let stats = dir.path().join("s.json");
    let bin = env!("CARGO_BIN_EXE_solve");

    let (code, out, _) = run(bin, &[sat.to_str().unwrap(), "--stats-json", stats.to_str().unwrap()]);
    assert_eq!(code, 10);
    assert!(out.contains("s SATISFIABLE"));
    let v: Vec<i32> = out
        .lines()
        .filter(|l| l.starts_with("v "))
        .flat_map(|l| l[2..].split_whitespace().map(|x| x.parse::<i32>().unwrap()))
        .collect();
    assert_eq!(v.len(), 4);
    assert_eq!(v.last(), Some(&0));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&stats).unwrap()).unwrap();
    for key in ["B3_list_load", "B4_clause_scan", "propagation_accesses", "alloc_advised_bytes", "exit_code"] {
        assert!(doc.get(key).is_some(), "missing {key}");
    }

    let (code, out, _) = run(bin, &[unsat.to_str().unwrap(), "--check-invariants", "--no-blockers"]);
    assert_eq!(code, 20);
    assert!(out.contains("s UNSATISFIABLE"));

    let (code, _, err) = run(bin, &["/nonexistent.cnf"]);
    assert_eq!(code, 1);
    assert!(err.contains("cannot read"));
}

#[test]
fn solve_conflict_budget_gives_unknown() {
    let dir = tempfile::tempdir().unwrap();
    // pigeonhole 7 into 6
    let (p, h) = (7, 6);
    let var = |i: usize, j: usize| (i * h + j + 1) as i32;
    let mut text = format!("p cnf {} {}\n", p * h, p + h * p * (p - 1) / 2);
    for i in 0..p {
        text.push_str(&(0..h).map(|j| format!("{} ", var(i, j))).collect::<String>());
        text.push_str("0\n");
    }
    for j in 0..h {
        for a in 0..p {
            for b in a + 1..p {
                text.push_str(&format!("-{} -{} 0\n", var(a, j), var(b, j)));
            }
        }
    }
    let f = dir.path().join("php.cnf");
    std::fs::write(&f, text).unwrap();
    let (code, out, _) = run(env!("CARGO_BIN_EXE_solve"), &[f.to_str().unwrap(), "--conflicts", "10"]);
    assert_eq!(code, 0);
    assert!(out.contains("s UNKNOWN"));
}

#[test]
fn tlbsim_reports_counts() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.txt");
    std::fs::write(&t, "# five pages then the first again\n0\n1\n2\n3\n4\n0\n").unwrap();
    let bin = env!("CARGO_BIN_EXE_tlbsim");
    let (code, out, _) = run(bin, &["--page-size", "1", "--entries", "4", t.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(out.trim(), "accesses=6 distinct_pages=5 hits=0 misses=6");
    let (code, _, err) = run(bin, &["--page-size", "3", t.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("power of two"));
}

#[test]
fn chase_runs_small_footprint() {
    let bin = env!("CARGO_BIN_EXE_chase");
    for thp in ["on", "off"] {
        let (code, out, _) = run(bin, &["--footprint", "65536", "--steps", "1024", "--seed", "2", "--thp", thp]);
        assert_eq!(code, 0);
        assert!(out.contains("steps=1024"));
        assert!(out.contains("checksum=0"));
    }
}

#[test]
fn bench_validate_and_gen() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_bench");
    let inst = dir.path().join("inst");
    let (code, out, _) = run(bin, &["gen", "--out", inst.to_str().unwrap(), "--count", "2", "--vars", "20"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 2);
    let m = dir.path().join("m.txt");
    std::fs::write(&m, "name = x\n[solvers]\ns = {bindir}/solve {instance}\n[instances]\ninst/rand-20-000.cnf\ninst/rand-20-001.cnf\n").unwrap();
    let (code, out, _) = run(bin, &["validate", m.to_str().unwrap()]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("= 4 runs"));
    std::fs::write(&m, "name = x\n[solvers]\ns = solve\n[instances]\nmissing.cnf\n").unwrap();
    let (code, _, err) = run(bin, &["validate", m.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("2 manifest error(s)"));

    std::fs::write(&m, "name = x\nmax_parallel = 1\n[solvers]\ns = {bindir}/solve {instance} --stats-json {stats}\n[instances]\ninst/rand-20-000.cnf\ninst/rand-20-001.cnf\n").unwrap();
    let out_dir = dir.path().join("out");
    let (code, _, err) = run(bin, &["run", m.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(err.contains("executed 4 run(s)"));
    let (code, out, _) = run(bin, &["report", out_dir.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("solver,solved,t_n_h"));
    assert!(out.lines().nth(1).unwrap().starts_with("s,2,"));
}
