//! CDCL solver with two-watched-literal propagation and blocking literals.
//!
//! Propagation follows the classic loop: take the next literal `p` from the
//! trail, load its watch list `L_p` (the clauses watching `¬p`), and for each
//! entry either skip it via the blocker, find a replacement watch and move
//! the clause to another list, enqueue the remaining watched literal, or
//! report a conflict. Every step is counted in [`AccessCounters`] so the
//! share of clause accesses made by propagation can be reported.

mod check;
mod order;
mod stats;

use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::alloc::{HugeAlloc, HugeVec};
use crate::cnf::{normalize, Assignment, ClauseArena, ClauseRef, Formula, LBool, Lit, Normalized, Var};

pub use check::InvariantViolation;
pub use stats::{AccessCounters, SolverStats};

use order::VarOrder;

/// Watch-list entry: a clause plus a cached literal of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Watcher {
    pub clause: ClauseRef,
    pub blocker: Lit,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Skip watchers whose blocking literal is already true.
    pub use_blockers: bool,
    /// Run the full watch/completeness check after every propagation.
    pub check_invariants: bool,
    pub restart_first: u64,
    pub restart_factor: f64,
    /// Learned-clause reduction period, in conflicts.
    pub reduce_interval: u64,
    /// Clauses learned within this many conflicts survive a reduction.
    pub recent_window: u64,
    pub var_decay: f64,
    pub clause_decay: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            use_blockers: true,
            check_invariants: false,
            restart_first: 100,
            restart_factor: 1.5,
            reduce_interval: 4000,
            recent_window: 1000,
            var_decay: 0.95,
            clause_decay: 0.999,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Budget {
    pub timeout: Option<Duration>,
    pub conflicts: Option<u64>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Budget::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnknownReason {
    Timeout,
    ConflictLimit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveResult {
    /// `model[i]` is the value of variable `i + 1`.
    Sat(Vec<bool>),
    Unsat,
    Unknown(UnknownReason),
}

impl SolveResult {
    /// Competition exit code: 10 SAT, 20 UNSAT, 0 unknown.
    pub fn exit_code(&self) -> i32 {
        match self {
            SolveResult::Sat(_) => 10,
            SolveResult::Unsat => 20,
            SolveResult::Unknown(_) => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttachOutcome {
    Attached(ClauseRef),
    /// A literal of the clause is already true at the root level.
    AlreadySatisfied,
    UnitEnqueued(Lit),
    EmptyConflict,
}

pub struct Solver {
    config: SolverConfig,
    num_vars: usize,
    arena: ClauseArena,
    originals: Vec<ClauseRef>,
    learnts: Vec<ClauseRef>,
    watches: Vec<HugeVec<Watcher>>,
    assign: Assignment,
    qhead: usize,
    order: VarOrder,
    activity: Vec<f64>,
    var_inc: f64,
    cla_inc: f32,
    /// Saved phase; `true` means the negative literal.
    phase: Vec<bool>,
    seen: Vec<bool>,
    ok: bool,
    stats: SolverStats,
    last_reduce: u64,
}

impl Solver {
    pub fn new(num_vars: usize, config: SolverConfig, alloc: Arc<HugeAlloc>) -> Solver {
        let watches = (0..2 * (num_vars + 1)).map(|_| HugeVec::new(alloc.clone())).collect();
        Solver {
            config,
            num_vars,
            arena: ClauseArena::new(alloc),
            originals: Vec::new(),
            learnts: Vec::new(),
            watches,
            assign: Assignment::new(num_vars),
            qhead: 0,
            order: VarOrder::new(num_vars),
            activity: vec![0.0; num_vars + 1],
            var_inc: 1.0,
            cla_inc: 1.0,
            phase: vec![true; num_vars + 1],
            seen: vec![false; num_vars + 1],
            ok: true,
            stats: SolverStats::default(),
            last_reduce: 0,
        }
    }

    /// Builds a solver holding every clause of `f`.
    pub fn from_formula(f: &Formula, config: SolverConfig, alloc: Arc<HugeAlloc>) -> Solver {
        let mut s = Solver::new(f.num_vars(), config, alloc);
        for c in f.clauses() {
            s.add_clause(c);
        }
        s
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn stats(&self) -> &SolverStats {
        &self.stats
    }

    pub fn assignment(&self) -> &Assignment {
        &self.assign
    }

    pub fn value(&self, l: Lit) -> LBool {
        self.assign.value(l)
    }

    pub fn decision_level(&self) -> u32 {
        self.assign.decision_level()
    }

    pub fn clause(&self, c: ClauseRef) -> &[Lit] {
        self.arena.lits(c)
    }

    /// Watch list `L_p`: the clauses watching `¬p`.
    pub fn watch_list(&self, p: Lit) -> &[Watcher] {
        &self.watches[p.index()]
    }

    pub fn allocator(&self) -> &Arc<HugeAlloc> {
        self.arena.allocator()
    }

    pub fn arena_bytes(&self) -> usize {
        self.arena.size_bytes()
    }

    /// Live clauses: originals followed by learned clauses.
    pub fn clause_refs(&self) -> impl Iterator<Item = ClauseRef> + '_ {
        self.originals.iter().chain(self.learnts.iter()).copied()
    }

    pub fn is_ok(&self) -> bool {
        self.ok
    }

    /// Adds a clause at decision level 0.
    ///
    /// Two non-falsified literals are moved to the front and watched; the
    /// first two are used when none is assigned.
    pub fn add_clause(&mut self, lits: &[Lit]) -> AttachOutcome {
        assert_eq!(self.decision_level(), 0, "clauses are added at the root level");
        assert!(
            lits.iter().all(|l| l.var().index() <= self.num_vars),
            "literal outside the solver's variable range"
        );
        let mut lits = match normalize(lits) {
            Normalized::Tautology => return AttachOutcome::AlreadySatisfied,
            Normalized::Clause(lits, _) => lits,
        };
        if !self.ok {
            return AttachOutcome::EmptyConflict;
        }
        if lits.iter().any(|&l| self.value(l) == LBool::True) {
            return AttachOutcome::AlreadySatisfied;
        }
        // Literals falsified by a pending (not yet propagated) assignment
        // still count as watchable: propagation will visit the clause.
        let pending: Vec<Lit> = self.assign.trail()[self.qhead..].to_vec();
        let falsified = |s: &Self, l: Lit| s.value(l) == LBool::False && !pending.contains(&!l);
        let mut open: Vec<Lit> = lits.iter().copied().filter(|&l| !falsified(self, l)).collect();
        match open.len() {
            0 => {
                self.ok = false;
                AttachOutcome::EmptyConflict
            }
            1 => {
                if self.enqueue(open[0], None) {
                    AttachOutcome::UnitEnqueued(open[0])
                } else {
                    self.ok = false;
                    AttachOutcome::EmptyConflict
                }
            }
            _ => {
                open.extend(lits.drain(..).filter(|&l| falsified(self, l)));
                let cref = self.arena.alloc(&open, false, 0);
                self.attach(cref);
                self.originals.push(cref);
                AttachOutcome::Attached(cref)
            }
        }
    }

    fn attach(&mut self, cref: ClauseRef) {
        self.stats.sites.attach_clause_writes += 1;
        self.watch_clause(cref);
    }

    fn watch_clause(&mut self, cref: ClauseRef) {
        let lits = self.arena.lits(cref);
        let (a, b) = (lits[0], lits[1]);
        self.watches[(!a).index()].push(Watcher { clause: cref, blocker: b });
        self.watches[(!b).index()].push(Watcher { clause: cref, blocker: a });
    }

    /// Makes `x` true with the given reason. Returns `false` if `x` is
    /// already false.
    pub fn enqueue(&mut self, x: Lit, reason: Option<ClauseRef>) -> bool {
        match self.assign.value(x) {
            LBool::True => true,
            LBool::False => false,
            LBool::Undef => {
                self.assign.assign(x, reason);
                true
            }
        }
    }

    /// Opens a new decision level and assigns `x` as its decision.
    pub fn push_decision(&mut self, x: Lit) {
        debug_assert_eq!(self.value(x), LBool::Undef);
        self.assign.new_level();
        self.assign.assign(x, None);
    }

    /// Propagates every pending trail literal. Returns the falsified clause
    /// on conflict; the rest of the offending watch list is left intact.
    pub fn unit_propagate(&mut self) -> Option<ClauseRef> {
        let mut conflict = None;
        let use_blockers = self.config.use_blockers;
        // B1
        while self.qhead < self.assign.trail().len() {
            // B2
            let p = self.assign.trail()[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let false_lit = !p;
            // B3
            self.stats.sites.b3_list_load += 1;
            let mut ws = std::mem::replace(
                &mut self.watches[p.index()],
                HugeVec::new(self.arena.allocator().clone()),
            );
            let n = ws.len();
            let (mut i, mut j) = (0, 0);
            // B4
            while i < n {
                let w = ws[i];
                i += 1;
                if use_blockers && self.assign.value(w.blocker) == LBool::True {
                    self.stats.sites.blocker_skips += 1;
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                self.stats.sites.b4_clause_scan += 1;
                let cref = w.clause;
                let lits = self.arena.lits_mut(cref);
                if lits[0] == false_lit {
                    lits.swap(0, 1);
                }
                debug_assert_eq!(lits[1], false_lit);
                let first = lits[0];
                let keep = Watcher { clause: cref, blocker: first };
                if self.assign.value(first) == LBool::True {
                    ws[j] = keep;
                    j += 1;
                    continue;
                }
                // B5
                let mut moved = false;
                for k in 2..lits.len() {
                    if self.assign.value(lits[k]) != LBool::False {
                        lits[1] = lits[k];
                        lits[k] = false_lit;
                        // B6 (by not copying to j) and B7
                        self.watches[(!lits[1]).index()].push(keep);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    self.stats.sites.b6_b7_list_move += 1;
                    continue;
                }
                ws[j] = keep;
                j += 1;
                if self.assign.value(first) == LBool::False {
                    // B9
                    self.stats.sites.b9_conflict += 1;
                    conflict = Some(cref);
                    self.qhead = self.assign.trail().len();
                    while i < n {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    // B8
                    self.stats.sites.b8_unit += 1;
                    self.assign.assign(first, Some(cref));
                }
            }
            ws.truncate(j);
            self.watches[p.index()] = ws;
            if conflict.is_some() {
                break;
            }
        }
        conflict
    }

    fn propagate_checked(&mut self) -> Option<ClauseRef> {
        let confl = self.unit_propagate();
        if self.config.check_invariants {
            self.stats.invariant_checks += 1;
            let result = match confl {
                None => self.check_invariants(),
                Some(_) => self.check_two_lists(),
            };
            if let Err(v) = result {
                self.stats.invariant_violations += 1;
                if self.stats.first_violation.is_none() {
                    self.stats.first_violation = Some(v.to_string());
                }
            }
        }
        confl
    }

    fn bump_var(&mut self, v: Var) {
        let a = &mut self.activity[v.index()];
        *a += self.var_inc;
        if *a > 1e100 {
            for x in self.activity.iter_mut() {
                *x *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.order.increased(v, &self.activity);
    }

    /// Raises `v`'s activity as if it took part in a conflict.
    pub fn bump_activity(&mut self, v: Var) {
        self.bump_var(v);
    }

    pub fn activity(&self, v: Var) -> f64 {
        self.activity[v.index()]
    }

    fn bump_clause(&mut self, c: ClauseRef) {
        let a = self.arena.activity(c) + self.cla_inc;
        self.arena.set_activity(c, a);
        if a > 1e20 {
            for &l in &self.learnts {
                let scaled = self.arena.activity(l) * 1e-20;
                self.arena.set_activity(l, scaled);
            }
            self.cla_inc *= 1e-20;
        }
    }

    fn decay_activities(&mut self) {
        self.var_inc /= self.config.var_decay;
        self.cla_inc /= self.config.clause_decay as f32;
    }

    /// First-UIP conflict analysis.
    ///
    /// Returns the learned clause with the asserting literal first and a
    /// literal of the backjump level second, plus the backjump level.
    pub fn analyze_conflict(&mut self, conflict: ClauseRef) -> (Vec<Lit>, u32) {
        let level = self.decision_level();
        assert!(level > 0, "conflict analysis needs a decision");
        let mut learnt = vec![Lit::positive(Var(1))];
        let mut pending = 0usize;
        let mut p: Option<Lit> = None;
        let mut idx = self.assign.trail().len();
        let mut confl = conflict;
        loop {
            self.stats.sites.analyze_clause_reads += 1;
            if self.arena.is_learnt(confl) {
                self.bump_clause(confl);
            }
            let start = usize::from(p.is_some());
            for k in start..self.arena.len_of(confl) {
                let q = self.arena.lits(confl)[k];
                let v = q.var();
                if !self.seen[v.index()] && self.assign.level(v) > 0 {
                    self.seen[v.index()] = true;
                    self.bump_var(v);
                    if self.assign.level(v) >= level {
                        pending += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if self.seen[self.assign.trail()[idx].var().index()] {
                    break;
                }
            }
            let pl = self.assign.trail()[idx];
            p = Some(pl);
            self.seen[pl.var().index()] = false;
            pending -= 1;
            if pending == 0 {
                break;
            }
            confl = self
                .assign
                .reason(pl.var())
                .expect("implied literal without a reason");
        }
        learnt[0] = !p.unwrap();
        for l in &learnt[1..] {
            self.seen[l.var().index()] = false;
        }
        let mut bt = 0;
        if learnt.len() > 1 {
            let mut max_i = 1;
            for i in 2..learnt.len() {
                if self.assign.level(learnt[i].var()) > self.assign.level(learnt[max_i].var()) {
                    max_i = i;
                }
            }
            learnt.swap(1, max_i);
            bt = self.assign.level(learnt[1].var());
        }
        (learnt, bt)
    }

    /// Undoes every assignment above `level`.
    pub fn backjump(&mut self, level: u32) {
        let Solver {
            assign,
            phase,
            order,
            activity,
            ..
        } = self;
        assign.backtrack(level, |l| {
            phase[l.var().index()] = l.is_negated();
            order.insert(l.var(), activity);
        });
        self.qhead = self.assign.trail().len();
    }

    /// Picks the unassigned variable of highest activity (lowest index on
    /// ties) with its saved phase, negative initially.
    pub fn decide(&mut self) -> Option<Lit> {
        loop {
            let v = self.order.pop(&self.activity)?;
            if self.assign.value_var(v) == LBool::Undef {
                return Some(Lit::new(v, self.phase[v.index()]));
            }
        }
    }

    fn learn(&mut self, learnt: Vec<Lit>) {
        self.stats.learned_clauses += 1;
        if learnt.len() == 1 {
            self.enqueue(learnt[0], None);
        } else {
            let cref = self.arena.alloc(&learnt, true, self.stats.conflicts as u32);
            self.attach(cref);
            self.learnts.push(cref);
            self.bump_clause(cref);
            self.assign.assign(learnt[0], Some(cref));
        }
    }

    fn locked(&self, c: ClauseRef) -> bool {
        let first = self.arena.lits(c)[0];
        self.assign.reason(first.var()) == Some(c) && self.value(first) == LBool::True
    }

    /// Deletes the less active half of the older, non-binary learned
    /// clauses, then compacts the arena and rebuilds the watch lists.
    pub fn reduce_db(&mut self) {
        self.stats.reductions += 1;
        let recent_cut = self.stats.conflicts.saturating_sub(self.config.recent_window);
        let mut candidates: Vec<ClauseRef> = Vec::new();
        for &c in &self.learnts {
            self.stats.sites.reduce_clause_reads += 1;
            if self.arena.len_of(c) > 2 && (self.arena.birth(c) as u64) < recent_cut && !self.locked(c) {
                candidates.push(c);
            }
        }
        candidates.sort_by(|a, b| self.arena.activity(*a).total_cmp(&self.arena.activity(*b)));
        for &c in &candidates[..candidates.len() / 2] {
            self.arena.delete(c);
        }
        let arena = &self.arena;
        self.learnts.retain(|&c| !arena.is_deleted(c));
        self.collect_garbage();
    }

    fn collect_garbage(&mut self) {
        let n_orig = self.originals.len();
        let mut refs: Vec<ClauseRef> = self.clause_refs().collect();
        let moves: HashMap<ClauseRef, ClauseRef> = self.arena.compact(&mut refs).into_iter().collect();
        self.learnts = refs.split_off(n_orig);
        self.originals = refs;
        for i in 0..self.assign.trail().len() {
            let v = self.assign.trail()[i].var();
            if let Some(r) = self.assign.reason(v) {
                self.assign.set_reason(v, moves.get(&r).copied());
            }
        }
        for w in self.watches.iter_mut() {
            w.clear();
        }
        let refs: Vec<ClauseRef> = self.clause_refs().collect();
        for c in refs {
            self.stats.sites.reduce_clause_reads += 1;
            self.watch_clause(c);
        }
    }

    /// Runs the CDCL loop until a verdict or the budget runs out.
    pub fn solve(&mut self, budget: Budget) -> SolveResult {
        let start = Instant::now();
        let conflicts_at_start = self.stats.conflicts;
        if !self.ok {
            return SolveResult::Unsat;
        }
        let timed_out = |start: &Instant| budget.timeout.is_some_and(|t| start.elapsed() >= t);
        let mut restart_limit = self.config.restart_first as f64;
        let mut conflicts_since_restart = 0u64;
        loop {
            if let Some(confl) = self.propagate_checked() {
                self.stats.conflicts += 1;
                conflicts_since_restart += 1;
                if self.decision_level() == 0 {
                    self.ok = false;
                    return SolveResult::Unsat;
                }
                let (learnt, bt) = self.analyze_conflict(confl);
                self.backjump(bt);
                self.learn(learnt);
                self.decay_activities();
                if budget
                    .conflicts
                    .is_some_and(|n| self.stats.conflicts - conflicts_at_start >= n)
                {
                    self.backjump(0);
                    return SolveResult::Unknown(UnknownReason::ConflictLimit);
                }
                if self.stats.conflicts.is_multiple_of(128) && timed_out(&start) {
                    self.backjump(0);
                    return SolveResult::Unknown(UnknownReason::Timeout);
                }
            } else {
                if conflicts_since_restart as f64 >= restart_limit {
                    self.stats.restarts += 1;
                    restart_limit *= self.config.restart_factor;
                    conflicts_since_restart = 0;
                    self.backjump(0);
                }
                if self.stats.conflicts - self.last_reduce >= self.config.reduce_interval {
                    self.last_reduce = self.stats.conflicts;
                    self.reduce_db();
                }
                if self.stats.decisions.is_multiple_of(1024) && timed_out(&start) {
                    self.backjump(0);
                    return SolveResult::Unknown(UnknownReason::Timeout);
                }
                match self.decide() {
                    None => {
                        let model = self.assign.model();
                        self.backjump(0);
                        return SolveResult::Sat(model);
                    }
                    Some(l) => {
                        self.stats.decisions += 1;
                        self.push_decision(l);
                    }
                }
            }
        }
    }
}

/// Solves `f` with the default configuration and the environment's
/// allocation policy.
pub fn solve(f: &Formula, budget: Budget) -> SolveResult {
    let mut s = Solver::from_formula(f, SolverConfig::default(), Arc::new(HugeAlloc::from_env()));
    s.solve(budget)
}
