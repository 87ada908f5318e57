//! Exhaustive oracles for small instances. These are the ground truth the
//! search-based solver is tested against, so they stay as simple as
//! possible: plain enumeration over bitmask-encoded clauses.

use std::time::Instant;

use thiserror::Error;

use crate::cnf::Cnf;
use crate::solver::{SolveStats, Verdict, VerdictKind};

/// Enumeration bound for [`brute_force_solve`].
pub const MAX_SOLVE_VARS: u32 = 26;
/// Bounds for [`brute_force_min_core`].
pub const MAX_CORE_VARS: u32 = 20;
pub const MAX_CORE_CLAUSES: usize = 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BruteError {
    #[error("{num_vars} variables exceed the exhaustive bound of {max}")]
    TooManyVars { num_vars: u32, max: u32 },
    #[error("{num_clauses} clauses exceed the subset bound of {max}")]
    TooManyClauses { num_clauses: usize, max: usize },
    #[error("formula is satisfiable; it has no unsat core")]
    NotUnsat,
}

/// Per-clause positive/negative masks over assignment words. Variable `j`
/// lives at bit `n - j`, so the assignment word counts 0, 1, 2, ... in the
/// lexicographic order over (x1, x2, ..., xn) with false < true.
fn clause_masks(cnf: &Cnf) -> (Vec<u32>, Vec<u32>) {
    let n = cnf.num_vars();
    let mut pos = Vec::with_capacity(cnf.num_clauses());
    let mut neg = Vec::with_capacity(cnf.num_clauses());
    for clause in cnf.clauses() {
        let mut p = 0u32;
        let mut q = 0u32;
        for lit in clause.iter() {
            let bit = 1u32 << (n - lit.var());
            if lit.positive() {
                p |= bit;
            } else {
                q |= bit;
            }
        }
        pos.push(p);
        neg.push(q);
    }
    (pos, neg)
}

/// Exhaustive solve. Returns the lexicographically first satisfying
/// assignment (all-false first, x1 most significant) or Unsat.
pub fn brute_force_solve(cnf: &Cnf) -> Result<Verdict, BruteError> {
    let n = cnf.num_vars();
    if n > MAX_SOLVE_VARS {
        return Err(BruteError::TooManyVars {
            num_vars: n,
            max: MAX_SOLVE_VARS,
        });
    }
    let start = Instant::now();
    let (pos, neg) = clause_masks(cnf);
    let mut kind = VerdictKind::Unsat { core_clauses: None };
    for word in 0..(1u64 << n) {
        let a = word as u32;
        let satisfied = pos
            .iter()
            .zip(&neg)
            .all(|(&p, &q)| p & a != 0 || q & !a != 0);
        if satisfied {
            let model = (1..=n).map(|j| a & (1 << (n - j)) != 0).collect();
            kind = VerdictKind::Sat(model);
            break;
        }
    }
    Ok(Verdict {
        kind,
        stats: SolveStats {
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            ..SolveStats::default()
        },
    })
}

/// Advance `combo` to the next k-combination of `0..m` in lexicographic
/// order. Returns false when `combo` was the last one.
fn next_combination(combo: &mut [usize], m: usize) -> bool {
    let k = combo.len();
    for i in (0..k).rev() {
        if combo[i] != i + m - k {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// A minimum-cardinality unsatisfiable clause subset, ties broken by the
/// lexicographically smallest index set.
///
/// Works by reduction to a hitting-set problem: one pass over all 2^n
/// assignments records, per assignment, the mask of violated clauses. A
/// clause subset S is unsatisfiable exactly when S intersects every
/// violation mask, so the minimum core is the smallest S hitting all of
/// them (only the inclusion-minimal masks constrain the search).
pub fn brute_force_min_core(cnf: &Cnf) -> Result<Vec<usize>, BruteError> {
    let n = cnf.num_vars();
    let m = cnf.num_clauses();
    if n > MAX_CORE_VARS {
        return Err(BruteError::TooManyVars {
            num_vars: n,
            max: MAX_CORE_VARS,
        });
    }
    if m > MAX_CORE_CLAUSES {
        return Err(BruteError::TooManyClauses {
            num_clauses: m,
            max: MAX_CORE_CLAUSES,
        });
    }

    let (pos, neg) = clause_masks(cnf);
    let mut seen = vec![false; 1 << m];
    let mut masks: Vec<u32> = Vec::new();
    for word in 0..(1u64 << n) {
        let a = word as u32;
        let mut violated = 0u32;
        for (ci, (&p, &q)) in pos.iter().zip(&neg).enumerate() {
            if p & a == 0 && q & !a == 0 {
                violated |= 1 << ci;
            }
        }
        if violated == 0 {
            return Err(BruteError::NotUnsat);
        }
        if !seen[violated as usize] {
            seen[violated as usize] = true;
            masks.push(violated);
        }
    }

    // Keep only inclusion-minimal masks. Ascending popcount order means a
    // mask can only be covered by one already kept.
    masks.sort_by_key(|v| v.count_ones());
    let mut minimal: Vec<u32> = Vec::new();
    for &v in &masks {
        if !minimal.iter().any(|&w| w & v == w) {
            minimal.push(v);
        }
    }

    for k in 1..=m {
        let mut combo: Vec<usize> = (0..k).collect();
        loop {
            let s: u32 = combo.iter().fold(0, |acc, &i| acc | 1 << i);
            if minimal.iter().all(|&v| v & s != 0) {
                return Ok(combo);
            }
            if !next_combination(&mut combo, m) {
                break;
            }
        }
    }
    unreachable!("the full clause set hits every nonempty violation mask");
}
