//! CNF data model: literals, clauses, formulas, and the literal-to-node
//! index convention shared by the graph encoders and the network head.

use std::fmt;

use thiserror::Error;

/// A truth assignment, indexed by `var - 1`.
pub type Assignment = Vec<bool>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CnfError {
    #[error("variable {var} out of range 1..={num_vars}")]
    VarOutOfRange { var: u32, num_vars: u32 },
    #[error("clause index {index} out of range for {num_clauses} clauses")]
    ClauseOutOfRange { index: usize, num_clauses: usize },
}

/// A literal: a variable (1-based) with a polarity.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit {
    var: u32,
    positive: bool,
}

impl Lit {
    /// `var` must be >= 1.
    pub fn new(var: u32, positive: bool) -> Lit {
        assert!(var >= 1, "literal variable must be >= 1");
        Lit { var, positive }
    }

    /// Positive literal of `var`.
    pub fn pos(var: u32) -> Lit {
        Lit::new(var, true)
    }

    /// Negative literal of `var`.
    pub fn neg(var: u32) -> Lit {
        Lit::new(var, false)
    }

    /// From a signed DIMACS integer (nonzero).
    pub fn from_dimacs(x: i64) -> Lit {
        assert!(x != 0, "DIMACS literal must be nonzero");
        Lit::new(x.unsigned_abs() as u32, x > 0)
    }

    pub fn to_dimacs(self) -> i64 {
        let v = i64::from(self.var);
        if self.positive {
            v
        } else {
            -v
        }
    }

    pub fn var(self) -> u32 {
        self.var
    }

    pub fn positive(self) -> bool {
        self.positive
    }

    pub fn negated(self) -> Lit {
        Lit {
            var: self.var,
            positive: !self.positive,
        }
    }

    /// True under the given assignment (indexed by `var - 1`).
    pub fn eval(self, assignment: &[bool]) -> bool {
        assignment[(self.var - 1) as usize] == self.positive
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

/// Node index of a literal in the 2n-node literal layout: positive literal
/// of variable `i` maps to node `i`, negative to node `n + i` (1-based,
/// range `[1, 2n]`). The index and its partner under the half-split swap
/// differ by exactly `n`.
pub fn lit_node_index(lit: Lit, num_vars: u32) -> Result<usize, CnfError> {
    if lit.var() < 1 || lit.var() > num_vars {
        return Err(CnfError::VarOutOfRange {
            var: lit.var(),
            num_vars,
        });
    }
    let base = lit.var() as usize;
    Ok(if lit.positive() {
        base
    } else {
        num_vars as usize + base
    })
}

/// A disjunction of literals. Duplicate literals are dropped on
/// construction (first occurrence wins); a clause holding both a literal
/// and its negation is kept and reports itself tautological.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Clause {
    lits: Vec<Lit>,
}

impl Clause {
    pub fn new(lits: Vec<Lit>) -> Clause {
        let mut seen = Vec::with_capacity(lits.len());
        for lit in lits {
            if !seen.contains(&lit) {
                seen.push(lit);
            }
        }
        Clause { lits: seen }
    }

    /// The empty clause. Not producible by the parser; used to build
    /// trivially unsatisfiable formulas in tests.
    pub fn empty() -> Clause {
        Clause { lits: Vec::new() }
    }

    pub fn lits(&self) -> &[Lit] {
        &self.lits
    }

    pub fn len(&self) -> usize {
        self.lits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lits.is_empty()
    }

    /// Contains some variable in both polarities.
    pub fn is_tautological(&self) -> bool {
        self.lits.iter().any(|&l| self.lits.contains(&l.negated()))
    }

    /// Some literal is true under the (total) assignment.
    pub fn eval(&self, assignment: &[bool]) -> bool {
        self.lits.iter().any(|l| l.eval(assignment))
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Lit> {
        self.lits.iter()
    }
}

impl<'a> IntoIterator for &'a Clause {
    type Item = &'a Lit;
    type IntoIter = std::slice::Iter<'a, Lit>;
    fn into_iter(self) -> Self::IntoIter {
        self.lits.iter()
    }
}

/// A formula in conjunctive normal form.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Cnf {
    num_vars: u32,
    clauses: Vec<Clause>,
    name: String,
}

impl Cnf {
    /// Checked constructor: every literal's variable must be within
    /// `1..=num_vars`.
    pub fn new(num_vars: u32, clauses: Vec<Clause>) -> Result<Cnf, CnfError> {
        for clause in &clauses {
            for lit in clause {
                if lit.var() > num_vars {
                    return Err(CnfError::VarOutOfRange {
                        var: lit.var(),
                        num_vars,
                    });
                }
            }
        }
        Ok(Cnf {
            num_vars,
            clauses,
            name: String::new(),
        })
    }

    /// Build from signed-integer clause lists, e.g. `&[&[1, -2], &[2]]`.
    pub fn from_dimacs_clauses(num_vars: u32, clauses: &[&[i64]]) -> Cnf {
        let clauses = clauses
            .iter()
            .map(|c| Clause::new(c.iter().map(|&x| Lit::from_dimacs(x)).collect()))
            .collect();
        Cnf::new(num_vars, clauses).expect("literal out of range")
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Cnf {
        self.name = name.into();
        self
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Every clause satisfied by the (total) assignment.
    pub fn eval(&self, assignment: &[bool]) -> bool {
        self.clauses.iter().all(|c| c.eval(assignment))
    }

    /// The subformula made of the given clauses, over the same variables.
    pub fn clause_subset(&self, indices: &[usize]) -> Result<Cnf, CnfError> {
        let mut clauses = Vec::with_capacity(indices.len());
        for &i in indices {
            let clause = self
                .clauses
                .get(i)
                .ok_or(CnfError::ClauseOutOfRange {
                    index: i,
                    num_clauses: self.clauses.len(),
                })?
                .clone();
            clauses.push(clause);
        }
        Ok(Cnf {
            num_vars: self.num_vars,
            clauses,
            name: self.name.clone(),
        })
    }

    /// Variables (1-based, ascending) occurring in the given clauses.
    pub fn vars_of_clauses(&self, indices: &[usize]) -> Result<Vec<u32>, CnfError> {
        let mut present = vec![false; self.num_vars as usize];
        for &i in indices {
            let clause = self.clauses.get(i).ok_or(CnfError::ClauseOutOfRange {
                index: i,
                num_clauses: self.clauses.len(),
            })?;
            for lit in clause.iter() {
                present[(lit.var() - 1) as usize] = true;
            }
        }
        Ok(present
            .iter()
            .enumerate()
            .filter_map(|(i, &p)| p.then_some(i as u32 + 1))
            .collect())
    }
}
