use std::collections::HashMap;
use std::fmt;

use super::Solver;
use crate::cnf::{clause_state, ClauseRef, ClauseState, LBool, Lit};

/// A broken watch-scheme invariant, found by a full scan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InvariantViolation {
    /// A clause is not in exactly the lists of its two negated watches.
    TwoList { clause: ClauseRef, expected: Vec<Lit>, found: Vec<Lit> },
    /// A watcher's blocker is not a literal of its clause.
    ForeignBlocker { clause: ClauseRef, blocker: Lit },
    /// Both watches are false and the clause is not satisfied.
    Watch { clause: ClauseRef },
    /// A clause is unit or falsified after a conflict-free propagation.
    Incomplete { clause: ClauseRef, state: ClauseState },
}

impl fmt::Display for InvariantViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InvariantViolation::TwoList { clause, expected, found } => write!(
                f,
                "clause {} watched in lists {:?}, expected {:?}",
                clause.0, found, expected
            ),
            InvariantViolation::ForeignBlocker { clause, blocker } => {
                write!(f, "blocker {blocker} not in clause {}", clause.0)
            }
            InvariantViolation::Watch { clause } => {
                write!(f, "clause {} has two false watches and is not satisfied", clause.0)
            }
            InvariantViolation::Incomplete { clause, state } => {
                write!(f, "clause {} is {:?} after propagation", clause.0, state)
            }
        }
    }
}

impl Solver {
    /// Checks that every clause sits in exactly the two watch lists of its
    /// negated watched literals and that blockers belong to their clauses.
    pub fn check_two_lists(&self) -> Result<(), InvariantViolation> {
        let mut found: HashMap<ClauseRef, Vec<Lit>> = HashMap::new();
        for (code, list) in self.watches.iter().enumerate() {
            let Some(p) = Lit::from_code(code as u32) else {
                continue;
            };
            for w in list.iter() {
                if !self.arena.lits(w.clause).contains(&w.blocker) {
                    return Err(InvariantViolation::ForeignBlocker {
                        clause: w.clause,
                        blocker: w.blocker,
                    });
                }
                found.entry(w.clause).or_default().push(p);
            }
        }
        for c in self.clause_refs() {
            let lits = self.arena.lits(c);
            let mut expected = vec![!lits[0], !lits[1]];
            expected.sort();
            let mut got = found.remove(&c).unwrap_or_default();
            got.sort();
            if got != expected {
                return Err(InvariantViolation::TwoList {
                    clause: c,
                    expected,
                    found: got,
                });
            }
        }
        if let Some((&clause, lists)) = found.iter().next() {
            return Err(InvariantViolation::TwoList {
                clause,
                expected: vec![],
                found: lists.clone(),
            });
        }
        Ok(())
    }

    /// Full check after a conflict-free propagation: two-list invariant,
    /// watch invariant and propagation completeness.
    pub fn check_invariants(&self) -> Result<(), InvariantViolation> {
        self.check_two_lists()?;
        for c in self.clause_refs() {
            let lits = self.arena.lits(c);
            let state = clause_state(lits, &self.assign);
            if matches!(state, ClauseState::Unit(_) | ClauseState::Falsified) {
                return Err(InvariantViolation::Incomplete { clause: c, state });
            }
            let watch_ok = self.value(lits[0]) != LBool::False || self.value(lits[1]) != LBool::False;
            if !watch_ok && state != ClauseState::Satisfied {
                return Err(InvariantViolation::Watch { clause: c });
            }
        }
        Ok(())
    }
}
