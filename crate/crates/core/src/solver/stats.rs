use serde_json::{Map, Value};

/// Clause and watch-list accesses, keyed by the propagation line group that
/// caused them, plus the accesses made outside propagation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AccessCounters {
    /// Watch list `L_p` loaded for a propagated literal.
    pub b3_list_load: u64,
    /// Clause dereferenced while scanning `L_p` (blocker did not help).
    pub b4_clause_scan: u64,
    /// Clause moved from `L_p` to the list of its new watch.
    pub b6_b7_list_move: u64,
    /// Unit clause found; literal enqueued.
    pub b8_unit: u64,
    /// Falsified clause found.
    pub b9_conflict: u64,
    /// Watchers skipped because the blocking literal was true.
    pub blocker_skips: u64,
    /// Reason/conflict clauses read during conflict analysis.
    pub analyze_clause_reads: u64,
    /// Clauses written when attached.
    pub attach_clause_writes: u64,
    /// Clauses read by database reduction and compaction.
    pub reduce_clause_reads: u64,
}

impl AccessCounters {
    pub fn propagation_total(&self) -> u64 {
        self.b3_list_load + self.b4_clause_scan + self.b6_b7_list_move + self.b8_unit + self.b9_conflict
    }

    pub fn other_total(&self) -> u64 {
        self.analyze_clause_reads + self.attach_clause_writes + self.reduce_clause_reads
    }

    /// Share of all counted accesses that happen inside unit propagation.
    pub fn propagation_share(&self) -> f64 {
        let total = self.propagation_total() + self.other_total();
        if total == 0 {
            0.0
        } else {
            self.propagation_total() as f64 / total as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverStats {
    pub decisions: u64,
    pub propagations: u64,
    pub conflicts: u64,
    pub learned_clauses: u64,
    pub restarts: u64,
    pub reductions: u64,
    pub sites: AccessCounters,
    pub invariant_checks: u64,
    pub invariant_violations: u64,
    pub first_violation: Option<String>,
}

impl SolverStats {
    /// Flat key/value document.
    pub fn to_json(&self) -> Map<String, Value> {
        let s = &self.sites;
        let mut m = Map::new();
        let mut put = |k: &str, v: u64| {
            m.insert(k.to_string(), Value::from(v));
        };
        put("decisions", self.decisions);
        put("propagations", self.propagations);
        put("conflicts", self.conflicts);
        put("learned_clauses", self.learned_clauses);
        put("restarts", self.restarts);
        put("reductions", self.reductions);
        put("B3_list_load", s.b3_list_load);
        put("B4_clause_scan", s.b4_clause_scan);
        put("B6_B7_list_move", s.b6_b7_list_move);
        put("B8_unit", s.b8_unit);
        put("B9_conflict", s.b9_conflict);
        put("blocker_skips", s.blocker_skips);
        put("analyze_clause_reads", s.analyze_clause_reads);
        put("attach_clause_writes", s.attach_clause_writes);
        put("reduce_clause_reads", s.reduce_clause_reads);
        put("propagation_accesses", s.propagation_total());
        put("other_clause_accesses", s.other_total());
        put("invariant_checks", self.invariant_checks);
        put("invariant_violations", self.invariant_violations);
        m.insert("propagation_share".into(), Value::from(s.propagation_share()));
        m
    }
}
