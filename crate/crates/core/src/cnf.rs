//! CNF data model: literals, the clause arena, formulas, assignments and
//! DIMACS input/output.

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::alloc::{HugeAlloc, HugeVec};

/// A propositional variable, numbered from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub u32);

impl Var {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A literal encoded as `2v + negated`, so codes start at 2.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(transparent)]
pub struct Lit(u32);

impl Lit {
    #[inline]
    pub fn new(var: Var, negated: bool) -> Lit {
        debug_assert!(var.0 >= 1);
        Lit(var.0 << 1 | negated as u32)
    }

    #[inline]
    pub fn positive(var: Var) -> Lit {
        Lit::new(var, false)
    }

    /// From a non-zero DIMACS integer.
    pub fn from_dimacs(x: i32) -> Lit {
        assert!(x != 0, "0 is not a literal");
        Lit::new(Var(x.unsigned_abs()), x < 0)
    }

    pub fn from_code(code: u32) -> Option<Lit> {
        (code >= 2).then_some(Lit(code))
    }

    #[inline]
    pub fn to_dimacs(self) -> i32 {
        let v = self.var().0 as i32;
        if self.is_negated() {
            -v
        } else {
            v
        }
    }

    #[inline]
    pub fn var(self) -> Var {
        Var(self.0 >> 1)
    }

    #[inline]
    pub fn is_negated(self) -> bool {
        self.0 & 1 == 1
    }

    #[inline]
    pub fn code(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;

    #[inline]
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

impl fmt::Debug for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// Ternary truth value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[repr(u8)]
pub enum LBool {
    True,
    False,
    #[default]
    Undef,
}

impl LBool {
    #[inline]
    pub fn from_bool(b: bool) -> LBool {
        if b {
            LBool::True
        } else {
            LBool::False
        }
    }

    #[inline]
    fn flip_if(self, negate: bool) -> LBool {
        match (self, negate) {
            (LBool::True, true) => LBool::False,
            (LBool::False, true) => LBool::True,
            (v, _) => v,
        }
    }
}

/// Owned clause, as handed to and from the arena.
#[derive(Debug, Clone, PartialEq)]
pub struct Clause {
    pub lits: Vec<Lit>,
    pub learnt: bool,
    pub activity: f64,
}

impl Clause {
    pub fn new(lits: Vec<Lit>) -> Clause {
        Clause {
            lits,
            learnt: false,
            activity: 0.0,
        }
    }

    pub fn from_dimacs(lits: &[i32]) -> Clause {
        Clause::new(lits.iter().map(|&x| Lit::from_dimacs(x)).collect())
    }
}

/// Result of normalizing a literal list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Normalized {
    Clause(Vec<Lit>, usize),
    Tautology,
}

/// Removes duplicate literals (keeping first occurrences) and detects `x ∨ ¬x`.
pub fn normalize(lits: &[Lit]) -> Normalized {
    let mut out: Vec<Lit> = Vec::with_capacity(lits.len());
    let mut dups = 0;
    for &l in lits {
        if out.contains(&!l) {
            return Normalized::Tautology;
        }
        if out.contains(&l) {
            dups += 1;
        } else {
            out.push(l);
        }
    }
    Normalized::Clause(out, dups)
}

/// 32-bit handle of a clause inside a [`ClauseArena`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClauseRef(pub u32);

const HEADER_WORDS: usize = 4;
const FLAG_LEARNT: u32 = 1;
const FLAG_DELETED: u32 = 2;

/// Contiguous clause storage addressed by [`ClauseRef`].
///
/// Layout per clause: `[len, flags, activity (f32 bits), birth, lits...]`.
/// References stay valid until [`ClauseArena::compact`].
#[derive(Clone)]
pub struct ClauseArena {
    data: HugeVec<u32>,
    wasted: usize,
}

pub(crate) fn shared_baseline() -> Arc<HugeAlloc> {
    static BASELINE: OnceLock<Arc<HugeAlloc>> = OnceLock::new();
    BASELINE.get_or_init(|| Arc::new(HugeAlloc::baseline())).clone()
}

impl ClauseArena {
    pub fn new(alloc: Arc<HugeAlloc>) -> Self {
        ClauseArena {
            data: HugeVec::new(alloc),
            wasted: 0,
        }
    }

    pub fn allocator(&self) -> &Arc<HugeAlloc> {
        self.data.allocator()
    }

    pub fn alloc(&mut self, lits: &[Lit], learnt: bool, birth: u32) -> ClauseRef {
        let at = self.data.len();
        assert!(at + HEADER_WORDS + lits.len() <= u32::MAX as usize, "clause arena full");
        self.data.extend_from_slice(&[
            lits.len() as u32,
            if learnt { FLAG_LEARNT } else { 0 },
            0f32.to_bits(),
            birth,
        ]);
        // SAFETY: Lit is repr(transparent) over u32.
        let words = unsafe { std::slice::from_raw_parts(lits.as_ptr() as *const u32, lits.len()) };
        self.data.extend_from_slice(words);
        ClauseRef(at as u32)
    }

    #[inline]
    pub fn len_of(&self, c: ClauseRef) -> usize {
        self.data[c.0 as usize] as usize
    }

    #[inline]
    pub fn lits(&self, c: ClauseRef) -> &[Lit] {
        let start = c.0 as usize + HEADER_WORDS;
        let words = &self.data[start..start + self.len_of(c)];
        // SAFETY: Lit is repr(transparent) over u32 and every stored word is
        // a literal code written by `alloc`.
        unsafe { std::slice::from_raw_parts(words.as_ptr() as *const Lit, words.len()) }
    }

    #[inline]
    pub fn lits_mut(&mut self, c: ClauseRef) -> &mut [Lit] {
        let start = c.0 as usize + HEADER_WORDS;
        let len = self.len_of(c);
        let words = &mut self.data[start..start + len];
        // SAFETY: see `lits`.
        unsafe { std::slice::from_raw_parts_mut(words.as_mut_ptr() as *mut Lit, words.len()) }
    }

    pub fn is_learnt(&self, c: ClauseRef) -> bool {
        self.data[c.0 as usize + 1] & FLAG_LEARNT != 0
    }

    pub fn is_deleted(&self, c: ClauseRef) -> bool {
        self.data[c.0 as usize + 1] & FLAG_DELETED != 0
    }

    pub fn activity(&self, c: ClauseRef) -> f32 {
        f32::from_bits(self.data[c.0 as usize + 2])
    }

    pub fn set_activity(&mut self, c: ClauseRef, a: f32) {
        self.data[c.0 as usize + 2] = a.to_bits();
    }

    pub fn birth(&self, c: ClauseRef) -> u32 {
        self.data[c.0 as usize + 3]
    }

    pub fn delete(&mut self, c: ClauseRef) {
        if !self.is_deleted(c) {
            self.data[c.0 as usize + 1] |= FLAG_DELETED;
            self.wasted += HEADER_WORDS + self.len_of(c);
        }
    }

    pub fn to_clause(&self, c: ClauseRef) -> Clause {
        Clause {
            lits: self.lits(c).to_vec(),
            learnt: self.is_learnt(c),
            activity: self.activity(c) as f64,
        }
    }

    /// Words occupied by deleted clauses.
    pub fn wasted_words(&self) -> usize {
        self.wasted
    }

    pub fn size_words(&self) -> usize {
        self.data.len()
    }

    pub fn size_bytes(&self) -> usize {
        self.data.len() * 4
    }

    /// Drops deleted clauses. `refs` lists the live clauses; each entry is
    /// rewritten to its new reference. Returns `old -> new` pairs in order.
    pub fn compact(&mut self, refs: &mut [ClauseRef]) -> Vec<(ClauseRef, ClauseRef)> {
        let mut fresh = HugeVec::with_capacity(self.data.allocator().clone(), self.data.len() - self.wasted);
        let mut moves = Vec::with_capacity(refs.len());
        for r in refs.iter_mut() {
            debug_assert!(!self.is_deleted(*r));
            let start = r.0 as usize;
            let end = start + HEADER_WORDS + self.len_of(*r);
            let new = ClauseRef(fresh.len() as u32);
            fresh.extend_from_slice(&self.data[start..end]);
            moves.push((*r, new));
            *r = new;
        }
        self.data = fresh;
        self.wasted = 0;
        moves
    }
}

impl Default for ClauseArena {
    fn default() -> Self {
        ClauseArena::new(shared_baseline())
    }
}

impl fmt::Debug for ClauseArena {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClauseArena")
            .field("words", &self.data.len())
            .field("wasted", &self.wasted)
            .finish()
    }
}

/// A CNF formula: a set of clauses over `num_vars` variables.
#[derive(Clone, Default)]
pub struct Formula {
    num_vars: usize,
    arena: ClauseArena,
    clauses: Vec<ClauseRef>,
    tautologies_dropped: usize,
    duplicates_removed: usize,
}

impl Formula {
    pub fn new(num_vars: usize) -> Formula {
        Formula {
            num_vars,
            ..Default::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn tautologies_dropped(&self) -> usize {
        self.tautologies_dropped
    }

    pub fn duplicates_removed(&self) -> usize {
        self.duplicates_removed
    }

    /// Adds a clause after normalization, growing `num_vars` if needed.
    /// Tautologies are dropped and `None` is returned.
    pub fn add_clause(&mut self, lits: &[Lit]) -> Option<ClauseRef> {
        match normalize(lits) {
            Normalized::Tautology => {
                self.tautologies_dropped += 1;
                None
            }
            Normalized::Clause(lits, dups) => {
                self.duplicates_removed += dups;
                if let Some(m) = lits.iter().map(|l| l.var().index()).max() {
                    self.num_vars = self.num_vars.max(m);
                }
                let r = self.arena.alloc(&lits, false, 0);
                self.clauses.push(r);
                Some(r)
            }
        }
    }

    pub fn add_dimacs(&mut self, lits: &[i32]) -> Option<ClauseRef> {
        let lits: Vec<Lit> = lits.iter().map(|&x| Lit::from_dimacs(x)).collect();
        self.add_clause(&lits)
    }

    pub fn clause(&self, r: ClauseRef) -> &[Lit] {
        self.arena.lits(r)
    }

    pub fn clauses(&self) -> impl Iterator<Item = &[Lit]> + '_ {
        self.clauses.iter().map(move |&r| self.arena.lits(r))
    }

    pub fn clause_refs(&self) -> &[ClauseRef] {
        &self.clauses
    }
}

impl PartialEq for Formula {
    fn eq(&self, other: &Self) -> bool {
        self.num_vars == other.num_vars
            && self.clauses.len() == other.clauses.len()
            && self.clauses().zip(other.clauses()).all(|(a, b)| a == b)
    }
}

impl fmt::Debug for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let clauses: Vec<Vec<i32>> = self
            .clauses()
            .map(|c| c.iter().map(|l| l.to_dimacs()).collect())
            .collect();
        f.debug_struct("Formula")
            .field("num_vars", &self.num_vars)
            .field("clauses", &clauses)
            .finish()
    }
}

/// Partial truth assignment with trail, levels and reasons.
#[derive(Debug, Clone, Default)]
pub struct Assignment {
    values: Vec<LBool>,
    level: Vec<u32>,
    reason: Vec<Option<ClauseRef>>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
}

impl Assignment {
    pub fn new(num_vars: usize) -> Assignment {
        Assignment {
            values: vec![LBool::Undef; num_vars + 1],
            level: vec![0; num_vars + 1],
            reason: vec![None; num_vars + 1],
            trail: Vec::with_capacity(num_vars),
            trail_lim: Vec::new(),
        }
    }

    /// Total assignment from a model vector (`model[i]` is variable `i + 1`).
    pub fn from_model(model: &[bool]) -> Assignment {
        let mut a = Assignment::new(model.len());
        for (i, &b) in model.iter().enumerate() {
            a.assign(Lit::new(Var(i as u32 + 1), !b), None);
        }
        a
    }

    pub fn num_vars(&self) -> usize {
        self.values.len() - 1
    }

    #[inline]
    pub fn value_var(&self, v: Var) -> LBool {
        self.values.get(v.index()).copied().unwrap_or(LBool::Undef)
    }

    #[inline]
    pub fn value(&self, l: Lit) -> LBool {
        self.value_var(l.var()).flip_if(l.is_negated())
    }

    pub fn level(&self, v: Var) -> u32 {
        self.level[v.index()]
    }

    pub fn reason(&self, v: Var) -> Option<ClauseRef> {
        self.reason[v.index()]
    }

    pub(crate) fn set_reason(&mut self, v: Var, r: Option<ClauseRef>) {
        self.reason[v.index()] = r;
    }

    pub fn trail(&self) -> &[Lit] {
        &self.trail
    }

    pub fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    /// Trail position where `level` starts (`level >= 1`).
    pub fn level_start(&self, level: u32) -> usize {
        self.trail_lim[level as usize - 1]
    }

    pub fn new_level(&mut self) {
        self.trail_lim.push(self.trail.len());
    }

    /// Makes `l` true at the current level. `l` must be unassigned.
    #[inline]
    pub fn assign(&mut self, l: Lit, reason: Option<ClauseRef>) {
        let v = l.var().index();
        debug_assert_eq!(self.values[v], LBool::Undef);
        self.values[v] = LBool::from_bool(!l.is_negated());
        self.level[v] = self.trail_lim.len() as u32;
        self.reason[v] = reason;
        self.trail.push(l);
    }

    /// Undoes every level above `level`, calling `on_pop` for each literal.
    pub fn backtrack(&mut self, level: u32, mut on_pop: impl FnMut(Lit)) {
        if self.decision_level() <= level {
            return;
        }
        let keep = self.trail_lim[level as usize];
        for &l in &self.trail[keep..] {
            let v = l.var().index();
            self.values[v] = LBool::Undef;
            self.reason[v] = None;
            on_pop(l);
        }
        self.trail.truncate(keep);
        self.trail_lim.truncate(level as usize);
    }

    /// Model vector for variables `1..=num_vars`; unassigned reads false.
    pub fn model(&self) -> Vec<bool> {
        self.values[1..].iter().map(|v| *v == LBool::True).collect()
    }
}

/// Status of a clause under an assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClauseState {
    Satisfied,
    Falsified,
    Unit(Lit),
    Unresolved,
}

/// Classifies `lits` under `a`. The empty clause is falsified.
pub fn clause_state(lits: &[Lit], a: &Assignment) -> ClauseState {
    let mut unassigned = None;
    let mut n_unassigned = 0;
    for &l in lits {
        match a.value(l) {
            LBool::True => return ClauseState::Satisfied,
            LBool::Undef => {
                n_unassigned += 1;
                unassigned = Some(l);
            }
            LBool::False => {}
        }
    }
    match (n_unassigned, unassigned) {
        (0, _) => ClauseState::Falsified,
        (1, Some(l)) => ClauseState::Unit(l),
        _ => ClauseState::Unresolved,
    }
}

/// True iff every clause of `f` is satisfied by `a`.
pub fn is_model(f: &Formula, a: &Assignment) -> bool {
    f.clauses().all(|c| clause_state(c, a) == ClauseState::Satisfied)
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ParseErrorKind {
    #[error("missing 'p cnf' header")]
    MissingHeader,
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("invalid token '{0}'")]
    BadToken(String),
    #[error("literal {lit} exceeds declared variable count {num_vars}")]
    LiteralOutOfRange { lit: i64, num_vars: usize },
    #[error("last clause is not terminated by 0")]
    Unterminated,
}

/// Parses DIMACS CNF text.
///
/// Clauses may span lines. Duplicate literals are removed and tautologies
/// dropped; see [`Formula::tautologies_dropped`].
pub fn parse_dimacs(text: &[u8]) -> Result<Formula, ParseError> {
    let text = String::from_utf8_lossy(text);
    let mut formula: Option<Formula> = None;
    let mut current: Vec<Lit> = Vec::new();
    let mut last_line = 0;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('c') {
            continue;
        }
        if trimmed.starts_with('%') {
            break;
        }
        let err = |kind| ParseError { line: line_no, kind };
        if trimmed.starts_with('p') {
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if formula.is_some() || fields.len() != 4 || fields[0] != "p" || fields[1] != "cnf" {
                return Err(err(ParseErrorKind::BadHeader(trimmed.to_string())));
            }
            let vars: usize = fields[2]
                .parse()
                .map_err(|_| err(ParseErrorKind::BadHeader(trimmed.to_string())))?;
            let _clauses: usize = fields[3]
                .parse()
                .map_err(|_| err(ParseErrorKind::BadHeader(trimmed.to_string())))?;
            formula = Some(Formula::new(vars));
            continue;
        }
        let f = formula.as_mut().ok_or(err(ParseErrorKind::MissingHeader))?;
        for tok in trimmed.split_whitespace() {
            let x: i64 = tok.parse().map_err(|_| err(ParseErrorKind::BadToken(tok.to_string())))?;
            if x == 0 {
                f.add_clause(&current);
                current.clear();
                continue;
            }
            if x.unsigned_abs() as usize > f.num_vars || x.unsigned_abs() > i32::MAX as u64 {
                return Err(err(ParseErrorKind::LiteralOutOfRange {
                    lit: x,
                    num_vars: f.num_vars,
                }));
            }
            current.push(Lit::from_dimacs(x as i32));
            last_line = line_no;
        }
    }
    if !current.is_empty() {
        return Err(ParseError {
            line: last_line,
            kind: ParseErrorKind::Unterminated,
        });
    }
    formula.ok_or(ParseError {
        line: text.lines().count().max(1),
        kind: ParseErrorKind::MissingHeader,
    })
}

/// Serializes `f` as DIMACS CNF.
pub fn write_dimacs(f: &Formula) -> String {
    use std::fmt::Write;
    let mut out = format!("p cnf {} {}\n", f.num_vars(), f.num_clauses());
    for c in f.clauses() {
        for l in c {
            write!(out, "{} ", l.to_dimacs()).unwrap();
        }
        out.push_str("0\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lit(x: i32) -> Lit {
        Lit::from_dimacs(x)
    }

    fn assignment(n: usize, vals: &[i32]) -> Assignment {
        let mut a = Assignment::new(n);
        for &x in vals {
            a.assign(lit(x), None);
        }
        a
    }

    #[test]
    fn literal_encoding() {
        assert_eq!(lit(1).code(), 2);
        assert_eq!(lit(-1).code(), 3);
        assert_eq!(lit(-7).var(), Var(7));
        assert_eq!(!lit(3), lit(-3));
        assert_eq!(lit(-3).to_dimacs(), -3);
        assert_eq!(Lit::from_code(1), None);
    }

    #[test]
    fn parse_examples() {
        let f = parse_dimacs(b"p cnf 3 2\n1 -2 0\n2 3 0\n").unwrap();
        assert_eq!((f.num_vars(), f.num_clauses()), (3, 2));
        let f = parse_dimacs(b"c comment\np cnf 1 1\n1 0\n").unwrap();
        assert_eq!((f.num_vars(), f.num_clauses()), (1, 1));
        let e = parse_dimacs(b"p cnf 2 1\n1 2\n").unwrap_err();
        assert_eq!(e, ParseError { line: 2, kind: ParseErrorKind::Unterminated });
    }

    #[test]
    fn parse_errors_carry_lines() {
        let e = parse_dimacs(b"c x\n1 2 0\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert_eq!(e.kind, ParseErrorKind::MissingHeader);
        let e = parse_dimacs(b"p cnf 2 1\n1 3 0\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(matches!(e.kind, ParseErrorKind::LiteralOutOfRange { lit: 3, .. }));
        assert!(parse_dimacs(b"p cnf x 1\n").is_err());
        assert!(parse_dimacs(b"p cnf 2 1\n1 a 0\n").is_err());
        assert_eq!(parse_dimacs(b"").unwrap_err().kind, ParseErrorKind::MissingHeader);
    }

    #[test]
    fn parse_normalizes() {
        let f = parse_dimacs(b"p  cnf 3   3\n 1 1 -2 0 2 -2 3 0\n3\n -1 0\n").unwrap();
        assert_eq!(f.num_clauses(), 2);
        assert_eq!(f.tautologies_dropped(), 1);
        assert_eq!(f.duplicates_removed(), 1);
        assert_eq!(f.clauses().next().unwrap(), &[lit(1), lit(-2)]);
        assert_eq!(f.clauses().nth(1).unwrap(), &[lit(3), lit(-1)]);
    }

    #[test]
    fn clause_state_examples() {
        let c = [lit(1), lit(2)];
        assert_eq!(clause_state(&c, &assignment(2, &[1])), ClauseState::Satisfied);
        assert_eq!(clause_state(&c, &assignment(2, &[-1])), ClauseState::Unit(lit(2)));
        assert_eq!(clause_state(&c, &assignment(2, &[-1, -2])), ClauseState::Falsified);
        assert_eq!(clause_state(&c, &assignment(2, &[])), ClauseState::Unresolved);
        assert_eq!(clause_state(&[], &assignment(2, &[1])), ClauseState::Falsified);
    }

    #[test]
    fn is_model_examples() {
        let mut f = Formula::new(1);
        f.add_dimacs(&[1]);
        assert!(is_model(&f, &assignment(1, &[1])));
        assert!(!is_model(&f, &assignment(1, &[-1])));
        assert!(is_model(&Formula::new(3), &assignment(3, &[])));
    }

    #[test]
    fn backtrack_clears_levels() {
        let mut a = Assignment::new(4);
        a.assign(lit(1), None);
        a.new_level();
        a.assign(lit(2), None);
        a.new_level();
        a.assign(lit(-3), Some(ClauseRef(0)));
        let mut popped = vec![];
        a.backtrack(1, |l| popped.push(l));
        assert_eq!(popped, vec![lit(-3)]);
        assert_eq!(a.value(lit(3)), LBool::Undef);
        assert_eq!(a.reason(Var(3)), None);
        assert_eq!(a.value(lit(2)), LBool::True);
        a.backtrack(0, |_| {});
        assert_eq!(a.trail(), &[lit(1)]);
    }

    #[test]
    fn arena_compaction() {
        let mut arena = ClauseArena::default();
        let a = arena.alloc(&[lit(1), lit(2)], false, 0);
        let b = arena.alloc(&[lit(-1), lit(3), lit(4)], true, 7);
        let c = arena.alloc(&[lit(2)], false, 0);
        arena.delete(b);
        assert_eq!(arena.wasted_words(), 7);
        let mut live = vec![a, c];
        let moves = arena.compact(&mut live);
        assert_eq!(moves.len(), 2);
        assert_eq!(arena.lits(live[0]), &[lit(1), lit(2)]);
        assert_eq!(arena.lits(live[1]), &[lit(2)]);
        assert_eq!(arena.wasted_words(), 0);
        assert_eq!(arena.size_words(), 4 + 2 + 4 + 1);
    }

    fn brute_state(lits: &[Lit], a: &Assignment) -> ClauseState {
        let trues = lits.iter().filter(|l| a.value(**l) == LBool::True).count();
        let undef: Vec<Lit> = lits.iter().copied().filter(|l| a.value(*l) == LBool::Undef).collect();
        if trues > 0 {
            ClauseState::Satisfied
        } else if undef.is_empty() {
            ClauseState::Falsified
        } else if undef.len() == 1 {
            ClauseState::Unit(undef[0])
        } else {
            ClauseState::Unresolved
        }
    }

    fn arb_clause(max_var: i32) -> impl Strategy<Value = Vec<i32>> {
        prop::collection::vec((1..=max_var, any::<bool>()), 0..6)
            .prop_map(|v| v.into_iter().map(|(x, s)| if s { x } else { -x }).collect())
    }

    proptest! {
        #[test]
        fn negation_is_fixpoint_free_involution(code in 2u32..1_000_000) {
            let l = Lit::from_code(code).unwrap();
            prop_assert_eq!(!!l, l);
            prop_assert_ne!(!l, l);
            prop_assert_eq!((!l).var(), l.var());
        }

        #[test]
        fn clause_state_matches_enumeration(
            clause in arb_clause(6),
            vals in prop::collection::vec(0u8..3, 6),
        ) {
            let mut a = Assignment::new(6);
            for (i, v) in vals.iter().enumerate() {
                if *v < 2 {
                    a.assign(Lit::new(Var(i as u32 + 1), *v == 1), None);
                }
            }
            let lits: Vec<Lit> = clause.iter().map(|&x| lit(x)).collect();
            prop_assert_eq!(clause_state(&lits, &a), brute_state(&lits, &a));
        }

        #[test]
        fn dimacs_round_trip(clauses in prop::collection::vec(arb_clause(8), 0..20)) {
            let mut text = format!("p cnf 8 {}\n", clauses.len());
            for c in &clauses {
                for x in c {
                    text.push_str(&format!("{x} "));
                }
                text.push_str("0\n");
            }
            let f = parse_dimacs(text.as_bytes()).unwrap();
            let again = parse_dimacs(write_dimacs(&f).as_bytes()).unwrap();
            prop_assert_eq!(&f, &again);
        }
    }
}
