#![allow(dead_code)]

use rand::Rng;

/// Exhaustive truth-table satisfiability check. The lowest six variables
/// are evaluated 64 assignments at a time; higher variables are enumerated
/// and a branch is cut once a clause over already-fixed variables is false.
pub fn truth_table_sat(num_vars: usize, clauses: &[Vec<i32>]) -> bool {
    let low = num_vars.min(6);
    let valid: u64 = if low == 6 { !0 } else { (1u64 << (1 << low)) - 1 };
    let pattern = |v: usize| -> u64 {
        (0..64u64).filter(|b| b >> (v - 1) & 1 == 1).fold(0, |w, b| w | 1 << b)
    };
    struct Split {
        low_mask: u64,
        high: Vec<i32>,
        last_high: usize,
    }
    let split: Vec<Split> = clauses
        .iter()
        .map(|c| {
            let mut low_mask = 0u64;
            let mut high = Vec::new();
            for &x in c {
                let v = x.unsigned_abs() as usize;
                if v <= low {
                    low_mask |= if x > 0 { pattern(v) } else { !pattern(v) };
                } else {
                    high.push(x);
                }
            }
            let last_high = high.iter().map(|x| x.unsigned_abs() as usize).max().unwrap_or(low);
            Split { low_mask, high, last_high }
        })
        .collect();
    let mut by_last: Vec<Vec<usize>> = vec![Vec::new(); num_vars + 1];
    for (i, s) in split.iter().enumerate() {
        by_last[s.last_high].push(i);
    }

    fn rec(v: usize, n: usize, vals: &mut Vec<bool>, live: u64, split: &[Split], by_last: &[Vec<usize>]) -> bool {
        let mut live = live;
        for &ci in &by_last[v] {
            let s = &split[ci];
            let high_true = s.high.iter().any(|&x| vals[x.unsigned_abs() as usize] == (x > 0));
            if !high_true {
                live &= s.low_mask;
                if live == 0 {
                    return false;
                }
            }
        }
        if v == n {
            return live != 0;
        }
        for b in [false, true] {
            vals[v + 1] = b;
            if rec(v + 1, n, vals, live, split, by_last) {
                return true;
            }
        }
        false
    }

    let mut vals = vec![false; num_vars + 1];
    rec(low, num_vars, &mut vals, valid, &split, &by_last)
}

/// Literal-by-literal model check, independent of the solver crate.
pub fn satisfies(model: &[bool], clauses: &[Vec<i32>]) -> bool {
    clauses
        .iter()
        .all(|c| c.iter().any(|&x| model[x.unsigned_abs() as usize - 1] == (x > 0)))
}

/// Clauses of three literals over `1..=num_vars`; variables may repeat.
pub fn random_3cnf<R: Rng>(rng: &mut R, num_vars: usize, num_clauses: usize) -> Vec<Vec<i32>> {
    (0..num_clauses)
        .map(|_| {
            (0..3)
                .map(|_| {
                    let v = rng.gen_range(1..=num_vars as i32);
                    if rng.gen_bool(0.5) {
                        v
                    } else {
                        -v
                    }
                })
                .collect()
        })
        .collect()
}

/// The seeded corpus shared by the solver checks: 5 to 30 variables,
/// clause/variable ratio between 2 and 6.
pub fn corpus(seed: u64, count: usize) -> Vec<(usize, Vec<Vec<i32>>)> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(5..=30);
            let ratio = rng.gen_range(2.0..=6.0);
            let m = (n as f64 * ratio).round() as usize;
            (n, random_3cnf(&mut rng, n, m))
        })
        .collect()
}

/// Plain list-based LRU simulation returning the miss count.
pub fn lru_misses(addresses: &[u64], page_size: u64, entries: usize) -> u64 {
    let mut resident: Vec<u64> = Vec::new();
    let mut misses = 0;
    for a in addresses {
        let p = a / page_size;
        if let Some(i) = resident.iter().position(|&q| q == p) {
            resident.remove(i);
        } else {
            misses += 1;
            if resident.len() == entries {
                resident.remove(0);
            }
        }
        resident.push(p);
    }
    misses
}
