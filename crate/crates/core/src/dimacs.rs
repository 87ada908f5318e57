//! DIMACS CNF reading and writing.
//!
//! Reads the standard format: `c` comment lines, one `p cnf <vars> <clauses>`
//! header, then clauses as whitespace-separated signed integers, each
//! terminated by `0`. Clauses may span lines. CR/LF and LF line endings are
//! both accepted; output always uses LF.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::cnf::{Clause, Cnf, Lit};

#[derive(Debug, Error)]
pub enum DimacsError {
    #[error("line {line}: malformed header: {detail}")]
    MalformedHeader { line: usize, detail: String },
    #[error("line {line}: literal {lit} out of range (num_vars = {num_vars})")]
    LitOutOfRange {
        line: usize,
        lit: i64,
        num_vars: u32,
    },
    #[error("line {line}: clause not terminated by 0")]
    MissingTerminator { line: usize },
    #[error("line {line}: empty clause in input")]
    EmptyClause { line: usize },
    #[error("line {line}: unexpected token {token:?}")]
    BadToken { line: usize, token: String },
    #[error("header declares {declared} clauses but input has {found}")]
    ClauseCountMismatch { declared: usize, found: usize },
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

/// Parse DIMACS CNF from a byte stream.
pub fn parse_dimacs<R: BufRead>(reader: R) -> Result<Cnf, DimacsError> {
    let mut header: Option<(u32, usize)> = None;
    let mut clauses: Vec<Clause> = Vec::new();
    let mut pending: Vec<Lit> = Vec::new();
    let mut pending_line = 0usize;
    let mut line_no = 0usize;

    for line in reader.lines() {
        line_no += 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        let trimmed = line.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('c') {
            continue;
        }
        if trimmed.starts_with('p') {
            if header.is_some() {
                return Err(DimacsError::MalformedHeader {
                    line: line_no,
                    detail: "duplicate header".into(),
                });
            }
            header = Some(parse_header(trimmed, line_no)?);
            continue;
        }
        let (num_vars, _) = header.ok_or(DimacsError::MalformedHeader {
            line: line_no,
            detail: "clause before `p cnf` header".into(),
        })?;
        for token in trimmed.split_whitespace() {
            let value: i64 = token.parse().map_err(|_| DimacsError::BadToken {
                line: line_no,
                token: token.to_string(),
            })?;
            if value == 0 {
                if pending.is_empty() {
                    return Err(DimacsError::EmptyClause { line: line_no });
                }
                clauses.push(Clause::new(std::mem::take(&mut pending)));
            } else {
                if value.unsigned_abs() > u64::from(num_vars) {
                    return Err(DimacsError::LitOutOfRange {
                        line: line_no,
                        lit: value,
                        num_vars,
                    });
                }
                if pending.is_empty() {
                    pending_line = line_no;
                }
                pending.push(Lit::from_dimacs(value));
            }
        }
    }

    if !pending.is_empty() {
        return Err(DimacsError::MissingTerminator { line: pending_line });
    }
    let (num_vars, declared) = header.ok_or(DimacsError::MalformedHeader {
        line: line_no,
        detail: "missing `p cnf` header".into(),
    })?;
    if clauses.len() != declared {
        return Err(DimacsError::ClauseCountMismatch {
            declared,
            found: clauses.len(),
        });
    }
    Ok(Cnf::new(num_vars, clauses).expect("literals range-checked during parse"))
}

fn parse_header(line: &str, line_no: usize) -> Result<(u32, usize), DimacsError> {
    let bad = |detail: &str| DimacsError::MalformedHeader {
        line: line_no,
        detail: detail.to_string(),
    };
    let mut parts = line.split_whitespace();
    if parts.next() != Some("p") || parts.next() != Some("cnf") {
        return Err(bad("expected `p cnf <vars> <clauses>`"));
    }
    let num_vars = parts
        .next()
        .ok_or_else(|| bad("missing variable count"))?
        .parse::<u32>()
        .map_err(|_| bad("variable count is not a non-negative integer"))?;
    let num_clauses = parts
        .next()
        .ok_or_else(|| bad("missing clause count"))?
        .parse::<usize>()
        .map_err(|_| bad("clause count is not a non-negative integer"))?;
    if parts.next().is_some() {
        return Err(bad("trailing tokens after clause count"));
    }
    Ok((num_vars, num_clauses))
}

/// Parse from an in-memory string.
pub fn parse_dimacs_str(text: &str) -> Result<Cnf, DimacsError> {
    parse_dimacs(text.as_bytes())
}

/// Write canonical DIMACS: header, then one clause per line, LF endings.
/// `parse_dimacs(write_dimacs(c))` reproduces `c` with clause order intact.
pub fn write_dimacs<W: Write>(cnf: &Cnf, mut out: W) -> io::Result<()> {
    writeln!(out, "p cnf {} {}", cnf.num_vars(), cnf.num_clauses())?;
    for clause in cnf.clauses() {
        for lit in clause {
            write!(out, "{} ", lit.to_dimacs())?;
        }
        writeln!(out, "0")?;
    }
    Ok(())
}

pub fn write_dimacs_string(cnf: &Cnf) -> String {
    let mut buf = Vec::new();
    write_dimacs(cnf, &mut buf).expect("write to Vec cannot fail");
    String::from_utf8(buf).expect("DIMACS output is ASCII")
}
