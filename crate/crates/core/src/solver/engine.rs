//! The CDCL search engine: two-watched-literal unit propagation, first-UIP
//! conflict analysis, activity-driven branching with decay, non-chronological
//! backtracking, Luby restarts, and assumption solving. The engine is
//! incremental: learned clauses survive across `solve` calls, which is what
//! the deletion-minimization pass of core extraction leans on.

use std::time::Instant;

use super::heap::ActivityHeap;
use super::SolveStats;

/// Internal literal code: `2 * var + sign`, variables 0-based, sign bit set
/// for the negative literal.
pub(crate) type Code = u32;

#[inline]
pub(crate) fn code(var: u32, negative: bool) -> Code {
    2 * var + negative as u32
}

#[inline]
pub(crate) fn negate(lit: Code) -> Code {
    lit ^ 1
}

#[inline]
pub(crate) fn var_of(lit: Code) -> u32 {
    lit >> 1
}

#[inline]
fn is_negative(lit: Code) -> bool {
    lit & 1 == 1
}

const NO_REASON: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct Watch {
    clause: u32,
    blocker: Code,
}

pub(crate) enum SearchOutcome {
    Sat(Vec<bool>),
    /// Contradiction independent of any assumptions.
    Unsat,
    /// The given subset of the assumption literals cannot hold together.
    UnsatAssumptions(Vec<Code>),
    Halted,
}

pub(crate) struct Engine {
    num_vars: usize,
    clauses: Vec<Vec<Code>>,
    watches: Vec<Vec<Watch>>,
    assigns: Vec<Option<bool>>,
    phase: Vec<bool>,
    level: Vec<u32>,
    reason: Vec<u32>,
    trail: Vec<Code>,
    trail_lim: Vec<usize>,
    qhead: usize,
    heap: ActivityHeap,
    var_inc: f64,
    decay: f64,
    phase_saving: bool,
    seen: Vec<bool>,
    stats: SolveStats,
    ok: bool,
    /// Re-check the watch invariants after every propagation fixpoint.
    /// Test instrumentation only; far too slow for real solving.
    pub(crate) paranoid: bool,
}

impl Engine {
    pub fn new(num_vars: usize, decay: f64, phase_saving: bool) -> Engine {
        let mut heap = ActivityHeap::new(num_vars);
        for v in 0..num_vars as u32 {
            heap.insert(v);
        }
        Engine {
            num_vars,
            clauses: Vec::new(),
            watches: vec![Vec::new(); 2 * num_vars],
            assigns: vec![None; num_vars],
            phase: vec![false; num_vars],
            level: vec![0; num_vars],
            reason: vec![NO_REASON; num_vars],
            trail: Vec::with_capacity(num_vars),
            trail_lim: Vec::new(),
            qhead: 0,
            heap,
            var_inc: 1.0,
            decay,
            phase_saving,
            seen: vec![false; num_vars],
            stats: SolveStats::default(),
            ok: true,
            paranoid: false,
        }
    }

    pub fn stats(&self) -> &SolveStats {
        &self.stats
    }

    #[cfg(test)]
    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    #[cfg(test)]
    pub fn clause_lits(&self, i: usize) -> &[Code] {
        &self.clauses[i]
    }

    /// Install initial activities and decision order. Must be called before
    /// the first `solve`.
    pub fn seed(&mut self, scores: &[f64], order: &[u32]) {
        debug_assert!(self.trail.is_empty());
        let mut heap = ActivityHeap::new(self.num_vars);
        for (v, &s) in scores.iter().enumerate() {
            heap.set_activity(v as u32, s);
        }
        for &v in order {
            heap.insert(v);
        }
        self.heap = heap;
    }

    /// Add a problem clause at decision level 0, reduced against whatever
    /// is already forced there. Returns false once the clause set is
    /// contradictory on its own.
    pub fn add_clause(&mut self, lits: &[Code]) -> bool {
        debug_assert!(self.trail_lim.is_empty());
        if !self.ok {
            return false;
        }
        let mut reduced = Vec::with_capacity(lits.len());
        for &l in lits {
            match self.lit_value(l) {
                Some(true) => return self.ok,
                Some(false) => {}
                None => reduced.push(l),
            }
        }
        match reduced.len() {
            0 => self.ok = false,
            1 => {
                self.enqueue(reduced[0], NO_REASON);
                if self.propagate().is_some() {
                    self.ok = false;
                }
            }
            _ => {
                let ci = self.clauses.len() as u32;
                self.watches[reduced[0] as usize].push(Watch {
                    clause: ci,
                    blocker: reduced[1],
                });
                self.watches[reduced[1] as usize].push(Watch {
                    clause: ci,
                    blocker: reduced[0],
                });
                self.clauses.push(reduced);
            }
        }
        self.ok
    }

    #[inline]
    fn lit_value(&self, lit: Code) -> Option<bool> {
        self.assigns[var_of(lit) as usize].map(|v| v != is_negative(lit))
    }

    fn decision_level(&self) -> usize {
        self.trail_lim.len()
    }

    fn enqueue(&mut self, lit: Code, reason: u32) {
        let v = var_of(lit) as usize;
        debug_assert!(self.assigns[v].is_none());
        self.assigns[v] = Some(!is_negative(lit));
        self.level[v] = self.decision_level() as u32;
        self.reason[v] = reason;
        self.trail.push(lit);
        if reason != NO_REASON {
            self.stats.propagations += 1;
        }
    }

    fn propagate(&mut self) -> Option<u32> {
        let mut conflict = None;
        'queue: while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = negate(p);
            let mut ws = std::mem::take(&mut self.watches[false_lit as usize]);
            let mut i = 0;
            let mut j = 0;
            while i < ws.len() {
                let w = ws[i];
                if self.lit_value(w.blocker) == Some(true) {
                    ws[j] = w;
                    j += 1;
                    i += 1;
                    continue;
                }
                let ci = w.clause as usize;
                {
                    let cl = &mut self.clauses[ci];
                    if cl[0] == false_lit {
                        cl.swap(0, 1);
                    }
                    debug_assert_eq!(cl[1], false_lit);
                }
                let first = self.clauses[ci][0];
                let kept = Watch {
                    clause: w.clause,
                    blocker: first,
                };
                if first != w.blocker && self.lit_value(first) == Some(true) {
                    ws[j] = kept;
                    j += 1;
                    i += 1;
                    continue;
                }
                let mut moved = false;
                for k in 2..self.clauses[ci].len() {
                    let cand = self.clauses[ci][k];
                    if self.lit_value(cand) != Some(false) {
                        self.clauses[ci].swap(1, k);
                        self.watches[cand as usize].push(kept);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    i += 1;
                    continue;
                }
                ws[j] = kept;
                j += 1;
                i += 1;
                if self.lit_value(first) == Some(false) {
                    // Conflict: keep the remaining watches untouched.
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                    self.qhead = self.trail.len();
                    conflict = Some(w.clause);
                    ws.truncate(j);
                    self.watches[false_lit as usize] = ws;
                    break 'queue;
                }
                self.enqueue(first, w.clause);
            }
            ws.truncate(j);
            self.watches[false_lit as usize] = ws;
        }
        conflict
    }

    fn bump_var(&mut self, var: u32) {
        if self.heap.bump(var, self.var_inc) > 1e100 {
            self.heap.rescale(1e-100);
            self.var_inc *= 1e-100;
        }
    }

    /// First-UIP conflict analysis. Returns the learned clause (asserting
    /// literal first, deepest remaining literal second) and the backjump
    /// level. Bumps every variable on the conflict side.
    fn analyze(&mut self, confl: u32) -> (Vec<Code>, usize) {
        let current = self.decision_level() as u32;
        let mut learnt: Vec<Code> = vec![0];
        let mut counter = 0u32;
        let mut cref = confl;
        let mut idx = self.trail.len();
        let mut resolved: Option<Code> = None;

        loop {
            let skip = usize::from(resolved.is_some());
            for k in skip..self.clauses[cref as usize].len() {
                let q = self.clauses[cref as usize][k];
                let v = var_of(q);
                if !self.seen[v as usize] && self.level[v as usize] > 0 {
                    self.seen[v as usize] = true;
                    self.bump_var(v);
                    if self.level[v as usize] >= current {
                        counter += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if self.seen[var_of(self.trail[idx]) as usize] {
                    break;
                }
            }
            let p = self.trail[idx];
            let v = var_of(p) as usize;
            self.seen[v] = false;
            counter -= 1;
            if counter == 0 {
                resolved = Some(p);
                break;
            }
            debug_assert_ne!(self.reason[v], NO_REASON);
            cref = self.reason[v];
            resolved = Some(p);
        }

        learnt[0] = negate(resolved.expect("first UIP exists"));

        let back_level = if learnt.len() == 1 {
            0
        } else {
            let mut max_idx = 1;
            for k in 2..learnt.len() {
                if self.level[var_of(learnt[k]) as usize]
                    > self.level[var_of(learnt[max_idx]) as usize]
                {
                    max_idx = k;
                }
            }
            learnt.swap(1, max_idx);
            self.level[var_of(learnt[1]) as usize] as usize
        };

        for &l in &learnt[1..] {
            self.seen[var_of(l) as usize] = false;
        }
        (learnt, back_level)
    }

    /// Express a failed assumption in terms of the assumptions that force
    /// it. Returns the failing subset (including `failing` itself).
    fn analyze_final(&mut self, failing: Code) -> Vec<Code> {
        let mut out = vec![failing];
        if self.trail_lim.is_empty() {
            return out;
        }
        self.seen[var_of(failing) as usize] = true;
        for idx in (self.trail_lim[0]..self.trail.len()).rev() {
            let x = self.trail[idx];
            let v = var_of(x) as usize;
            if !self.seen[v] {
                continue;
            }
            self.seen[v] = false;
            if self.reason[v] == NO_REASON {
                debug_assert!(self.level[v] > 0);
                if x != failing {
                    out.push(x);
                }
            } else {
                let cref = self.reason[v] as usize;
                for k in 1..self.clauses[cref].len() {
                    let q = self.clauses[cref][k];
                    if self.level[var_of(q) as usize] > 0 {
                        self.seen[var_of(q) as usize] = true;
                    }
                }
            }
        }
        self.seen[var_of(failing) as usize] = false;
        out
    }

    fn backjump(&mut self, target_level: usize) {
        if self.decision_level() <= target_level {
            return;
        }
        let sep = self.trail_lim[target_level];
        for idx in (sep..self.trail.len()).rev() {
            let lit = self.trail[idx];
            let v = var_of(lit) as usize;
            if self.phase_saving {
                self.phase[v] = !is_negative(lit);
            }
            self.assigns[v] = None;
            self.reason[v] = NO_REASON;
            self.level[v] = 0;
            self.heap.insert(v as u32);
        }
        self.trail.truncate(sep);
        self.trail_lim.truncate(target_level);
        self.qhead = sep;
    }

    fn attach_learned(&mut self, learnt: Vec<Code>) {
        if learnt.len() == 1 {
            debug_assert_eq!(self.decision_level(), 0);
            self.enqueue(learnt[0], NO_REASON);
            return;
        }
        let ci = self.clauses.len() as u32;
        self.watches[learnt[0] as usize].push(Watch {
            clause: ci,
            blocker: learnt[1],
        });
        self.watches[learnt[1] as usize].push(Watch {
            clause: ci,
            blocker: learnt[0],
        });
        let asserting = learnt[0];
        self.clauses.push(learnt);
        self.enqueue(asserting, ci);
    }

    fn pick_branch(&mut self) -> Option<Code> {
        while let Some(v) = self.heap.pop_max() {
            if self.assigns[v as usize].is_none() {
                return Some(code(v, !self.phase[v as usize]));
            }
        }
        None
    }

    pub fn solve(
        &mut self,
        assumptions: &[Code],
        conflict_budget: u64,
        deadline: Option<Instant>,
        luby_unit: u64,
    ) -> SearchOutcome {
        if !self.ok {
            return SearchOutcome::Unsat;
        }
        debug_assert!(self.trail_lim.is_empty());
        if self.propagate().is_some() {
            self.ok = false;
            return SearchOutcome::Unsat;
        }

        let start_conflicts = self.stats.conflicts;
        let mut restarts_this_solve: u64 = 0;
        let mut run_conflicts: u64 = 0;
        let mut threshold = restart_threshold(0, luby_unit);

        let outcome = loop {
            if let Some(confl) = self.propagate() {
                self.stats.conflicts += 1;
                run_conflicts += 1;
                if self.decision_level() == 0 {
                    self.ok = false;
                    break SearchOutcome::Unsat;
                }
                let (learnt, back_level) = self.analyze(confl);
                self.backjump(back_level);
                self.attach_learned(learnt);
                self.var_inc /= self.decay;
                if conflict_budget != 0 && self.stats.conflicts - start_conflicts >= conflict_budget
                {
                    break SearchOutcome::Halted;
                }
                if let Some(d) = deadline {
                    if Instant::now() >= d {
                        break SearchOutcome::Halted;
                    }
                }
            } else {
                if self.paranoid {
                    self.check_propagation_fixpoint();
                }
                if run_conflicts >= threshold {
                    restarts_this_solve += 1;
                    self.stats.restarts += 1;
                    run_conflicts = 0;
                    threshold = restart_threshold(restarts_this_solve, luby_unit);
                    self.backjump(0);
                    continue;
                }
                let mut next_assumption = None;
                let mut failed = None;
                while self.decision_level() < assumptions.len() {
                    let a = assumptions[self.decision_level()];
                    match self.lit_value(a) {
                        Some(true) => self.trail_lim.push(self.trail.len()),
                        Some(false) => {
                            failed = Some(a);
                            break;
                        }
                        None => {
                            next_assumption = Some(a);
                            break;
                        }
                    }
                }
                if let Some(a) = failed {
                    let subset = self.analyze_final(a);
                    break SearchOutcome::UnsatAssumptions(subset);
                }
                if let Some(a) = next_assumption {
                    self.trail_lim.push(self.trail.len());
                    self.enqueue(a, NO_REASON);
                    continue;
                }
                match self.pick_branch() {
                    None => {
                        let model: Vec<bool> = self
                            .assigns
                            .iter()
                            .map(|a| a.expect("all variables assigned"))
                            .collect();
                        break SearchOutcome::Sat(model);
                    }
                    Some(lit) => {
                        self.stats.decisions += 1;
                        self.trail_lim.push(self.trail.len());
                        self.enqueue(lit, NO_REASON);
                    }
                }
            }
        };
        self.backjump(0);
        outcome
    }

    /// After a propagation fixpoint no clause may be unit-and-unsatisfied
    /// or fully falsified. O(total literals); test instrumentation.
    fn check_propagation_fixpoint(&self) {
        for (ci, clause) in self.clauses.iter().enumerate() {
            let mut unassigned = 0usize;
            let mut satisfied = false;
            for &l in clause {
                match self.lit_value(l) {
                    Some(true) => {
                        satisfied = true;
                        break;
                    }
                    None => unassigned += 1,
                    Some(false) => {}
                }
            }
            assert!(
                satisfied || unassigned >= 2,
                "clause {ci} is unit or falsified after a propagation fixpoint"
            );
        }
    }
}

fn restart_threshold(restarts: u64, luby_unit: u64) -> u64 {
    if luby_unit == 0 {
        u64::MAX
    } else {
        luby(restarts).saturating_mul(luby_unit)
    }
}

/// The Luby restart sequence 1, 1, 2, 1, 1, 2, 4, ... (0-based index).
pub(crate) fn luby(x: u64) -> u64 {
    let mut size: u64 = 1;
    let mut seq: u32 = 0;
    while size < x + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    let mut x = x;
    while size - 1 != x {
        size = (size - 1) / 2;
        seq -= 1;
        x %= size;
    }
    1u64 << seq
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn luby_prefix() {
        let got: Vec<u64> = (0..15).map(luby).collect();
        assert_eq!(got, vec![1, 1, 2, 1, 1, 2, 4, 1, 1, 2, 1, 1, 2, 4, 8]);
    }
}
