//! Synthetic instance generators. The main product is the planted-core
//! family: a verified-UNSAT kernel disjointly unioned with verified-SAT
//! padding, which gives every instance exact ground-truth core labels and
//! a controllable core fraction.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::Cnf;
use crate::dimacs::write_dimacs_string;
use crate::solver::{solve, SolverConfig, SolverError};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator spec: {detail}")]
    InvalidSpec { detail: String },
    #[error("kernel still satisfiable after {attempts} resamples")]
    KernelNotUnsat { attempts: u32 },
    #[error("padding still unsatisfiable after {attempts} resamples")]
    PaddingNotSat { attempts: u32 },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    #[default]
    PlantedCore,
    Pigeonhole,
    RandomKsat,
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "planted_core" | "planted" => Ok(Family::PlantedCore),
            "pigeonhole" | "php" => Ok(Family::Pigeonhole),
            "random_ksat" | "ksat" => Ok(Family::RandomKsat),
            other => Err(format!(
                "unknown family '{other}' (planted_core|pigeonhole|random_ksat)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenSpec {
    pub family: Family,
    /// Kernel width for planted instances; variable count for random k-SAT;
    /// hole count for pigeonhole.
    pub n_core_vars: u32,
    pub n_pad_vars: u32,
    pub k: u32,
    /// Clauses per variable for the kernel (and for bare random k-SAT).
    pub clause_ratio: f64,
    /// Clauses per variable for the padding. None picks
    /// `min(clause_ratio, 3.0)`, sparse enough that the SAT resample loop
    /// stays cheap; benchmark corpora push this toward the satisfiability
    /// threshold so unguided search pays a real cost off the kernel.
    pub pad_ratio: Option<f64>,
    pub seed: u64,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            family: Family::PlantedCore,
            n_core_vars: 20,
            n_pad_vars: 0,
            k: 3,
            clause_ratio: 5.0,
            pad_ratio: None,
            seed: 0,
        }
    }
}

impl GenSpec {
    pub fn validate(&self) -> Result<(), GenError> {
        let fail = |detail: String| Err(GenError::InvalidSpec { detail });
        if self.n_core_vars == 0 {
            return fail("n_core_vars must be positive".into());
        }
        if self.k == 0 {
            return fail("k must be positive".into());
        }
        if self.k > self.n_core_vars {
            return fail(format!(
                "k = {} exceeds n_core_vars = {}",
                self.k, self.n_core_vars
            ));
        }
        if !(self.clause_ratio > 0.0) {
            return fail(format!(
                "clause_ratio must be > 0, got {}",
                self.clause_ratio
            ));
        }
        if let Some(r) = self.pad_ratio {
            if !(r > 0.0 && r.is_finite()) {
                return fail(format!("pad_ratio must be finite and > 0, got {r}"));
            }
        }
        Ok(())
    }
}

/// A generated instance with its ground truth: which (renamed) variables
/// belong to the planted kernel, and where the kernel clauses ended up
/// after shuffling.
#[derive(Clone, Debug)]
pub struct PlantedInstance {
    pub cnf: Cnf,
    /// Kernel variables under their final names, ascending.
    pub core_vars: Vec<u32>,
    /// Post-shuffle indices of the kernel clauses, ascending.
    pub kernel_clauses: Vec<usize>,
}

/// Pigeonhole formula: `pigeons` into `holes`. One clause per pigeon, then
/// pairwise hole-exclusion clauses. UNSAT iff pigeons > holes, and then
/// every variable is in the core.
pub fn php(pigeons: u32, holes: u32) -> Cnf {
    let var = |p: u32, h: u32| (p * holes + h + 1) as i64;
    let mut clauses: Vec<Vec<i64>> = Vec::new();
    for p in 0..pigeons {
        clauses.push((0..holes).map(|h| var(p, h)).collect());
    }
    for h in 0..holes {
        for p in 0..pigeons {
            for q in p + 1..pigeons {
                clauses.push(vec![-var(p, h), -var(q, h)]);
            }
        }
    }
    let views: Vec<&[i64]> = clauses.iter().map(|c| c.as_slice()).collect();
    Cnf::from_dimacs_clauses(pigeons * holes, &views).with_name(format!("php-{pigeons}-{holes}"))
}

/// PHP(holes+1, holes): the canonical fully-core UNSAT family.
pub fn gen_pigeonhole(holes: u32) -> Cnf {
    php(holes + 1, holes)
}

/// `m` clauses, each over `k` distinct variables with independent random
/// polarities.
pub fn gen_random_ksat(n: u32, m: usize, k: u32, rng: &mut impl Rng) -> Cnf {
    assert!(k >= 1 && k <= n, "need 1 <= k <= n");
    let mut pool: Vec<u32> = (1..=n).collect();
    let mut clauses: Vec<Vec<i64>> = Vec::with_capacity(m);
    for _ in 0..m {
        // Partial Fisher-Yates: the first k entries become the clause.
        for i in 0..k as usize {
            let j = rng.random_range(i..pool.len());
            pool.swap(i, j);
        }
        clauses.push(
            pool[..k as usize]
                .iter()
                .map(|&v| {
                    if rng.random_bool(0.5) {
                        v as i64
                    } else {
                        -(v as i64)
                    }
                })
                .collect(),
        );
    }
    let views: Vec<&[i64]> = clauses.iter().map(|c| c.as_slice()).collect();
    Cnf::from_dimacs_clauses(n, &views)
}

const RESAMPLE_LIMIT: u32 = 100;

/// Conflict cap per verification solve; a kernel this hard to refute gets
/// resampled rather than stalling generation.
const VERIFY_BUDGET: u64 = 2_000_000;

fn verify_cfg() -> SolverConfig {
    SolverConfig {
        conflict_budget: VERIFY_BUDGET,
        ..SolverConfig::default()
    }
}

/// UNSAT kernel + disjoint SAT padding, both solver-verified, with clause
/// order and variable names shuffled. Ground truth: `core_vars` are the
/// kernel's variables. Core fraction = n_core_vars / (n_core_vars +
/// n_pad_vars) by construction.
pub fn gen_planted_core(spec: &GenSpec, rng: &mut impl Rng) -> Result<PlantedInstance, GenError> {
    spec.validate()?;
    let n_core = spec.n_core_vars;
    let m_core = ((spec.clause_ratio * n_core as f64).round() as usize).max(1);

    let mut kernel = None;
    for _ in 0..RESAMPLE_LIMIT {
        let candidate = gen_random_ksat(n_core, m_core, spec.k, rng);
        if solve(&candidate, &verify_cfg(), None)?.is_unsat() {
            kernel = Some(candidate);
            break;
        }
    }
    let kernel = kernel.ok_or(GenError::KernelNotUnsat {
        attempts: RESAMPLE_LIMIT,
    })?;

    let padding = if spec.n_pad_vars > 0 {
        let k_pad = spec.k.min(spec.n_pad_vars);
        // Default padding stays well under the satisfiability threshold so
        // the resample loop terminates quickly.
        let pad_ratio = spec.pad_ratio.unwrap_or(spec.clause_ratio.min(3.0));
        let m_pad = ((pad_ratio * spec.n_pad_vars as f64).round() as usize).max(1);
        let mut padding = None;
        for _ in 0..RESAMPLE_LIMIT {
            let candidate = gen_random_ksat(spec.n_pad_vars, m_pad, k_pad, rng);
            if solve(&candidate, &verify_cfg(), None)?.is_sat() {
                padding = Some(candidate);
                break;
            }
        }
        Some(padding.ok_or(GenError::PaddingNotSat {
            attempts: RESAMPLE_LIMIT,
        })?)
    } else {
        None
    };

    // Rename variables with a random permutation of 1..=n_total (kernel
    // vars first in the old numbering), then shuffle clause order.
    let n_total = n_core + spec.n_pad_vars;
    let mut perm: Vec<u32> = (1..=n_total).collect();
    for i in (1..perm.len()).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    let rename = |old: u32| perm[(old - 1) as usize];

    let mut clauses: Vec<(bool, Vec<i64>)> = Vec::new();
    for clause in kernel.clauses() {
        let lits = clause
            .iter()
            .map(|l| {
                let new = rename(l.var()) as i64;
                if l.positive() {
                    new
                } else {
                    -new
                }
            })
            .collect();
        clauses.push((true, lits));
    }
    if let Some(pad) = &padding {
        for clause in pad.clauses() {
            let lits = clause
                .iter()
                .map(|l| {
                    let new = rename(n_core + l.var()) as i64;
                    if l.positive() {
                        new
                    } else {
                        -new
                    }
                })
                .collect();
            clauses.push((false, lits));
        }
    }
    for i in (1..clauses.len()).rev() {
        let j = rng.random_range(0..=i);
        clauses.swap(i, j);
    }

    let views: Vec<&[i64]> = clauses.iter().map(|(_, c)| c.as_slice()).collect();
    let cnf = Cnf::from_dimacs_clauses(n_total, &views).with_name("planted");
    let mut core_vars: Vec<u32> = (1..=n_core).map(rename).collect();
    core_vars.sort_unstable();
    let kernel_clauses = clauses
        .iter()
        .enumerate()
        .filter_map(|(i, (is_kernel, _))| is_kernel.then_some(i))
        .collect();
    Ok(PlantedInstance {
        cnf,
        core_vars,
        kernel_clauses,
    })
}

/// Corpus presets mirroring the two data regimes: core-heavy equivalence-
/// checking style corpora and balanced competition-style ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusPreset {
    /// Core fraction 0.90..=0.97, total variables 60..=300.
    LecLike,
    /// Core fraction 0.30..=0.50, total variables 60..=300.
    CompLike,
}

impl std::str::FromStr for CorpusPreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lec-like" | "lec_like" | "lec" => Ok(CorpusPreset::LecLike),
            "comp-like" | "comp_like" | "comp" => Ok(CorpusPreset::CompLike),
            other => Err(format!("unknown preset '{other}' (lec-like|comp-like)")),
        }
    }
}

/// Draw one instance's spec from a preset. Sizes and core fractions are
/// sampled uniformly from the preset's ranges.
pub fn preset_spec(preset: CorpusPreset, seed: u64, rng: &mut impl Rng) -> GenSpec {
    let (frac_lo, frac_hi) = match preset {
        CorpusPreset::LecLike => (0.90, 0.97),
        CorpusPreset::CompLike => (0.30, 0.50),
    };
    let n_total = rng.random_range(60..=300u32);
    let frac = rng.random_range(frac_lo..=frac_hi);
    let n_core = ((n_total as f64 * frac).round() as u32).clamp(3, n_total);
    GenSpec {
        family: Family::PlantedCore,
        n_core_vars: n_core,
        n_pad_vars: n_total - n_core,
        k: 3,
        clause_ratio: 5.0,
        pad_ratio: None,
        seed,
    }
}

/// Write `<stem>.cnf` (DIMACS) and, when labels are given, the
/// `<stem>.labels` sidecar: first line `core-vars`, second line the
/// ascending variable indices separated by spaces.
pub fn write_instance(
    dir: &Path,
    stem: &str,
    cnf: &Cnf,
    core_vars: Option<&[u32]>,
) -> io::Result<(PathBuf, Option<PathBuf>)> {
    let cnf_path = dir.join(format!("{stem}.cnf"));
    fs::write(&cnf_path, write_dimacs_string(cnf))?;
    let label_path = match core_vars {
        Some(vars) => {
            let path = dir.join(format!("{stem}.labels"));
            let mut text = String::from("core-vars\n");
            let joined: Vec<String> = vars.iter().map(|v| v.to_string()).collect();
            text.push_str(&joined.join(" "));
            text.push('\n');
            fs::write(&path, text)?;
            Some(path)
        }
        None => None,
    };
    Ok((cnf_path, label_path))
}

/// Parse a label sidecar written by [`write_instance`].
pub fn read_label_sidecar(path: &Path) -> io::Result<Vec<u32>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
    match lines.next() {
        Some("core-vars") => {}
        _ => return Err(bad("missing core-vars header")),
    }
    let body = lines.next().unwrap_or("");
    let mut vars = Vec::new();
    for tok in body.split_whitespace() {
        vars.push(
            tok.parse::<u32>()
                .map_err(|_| bad(&format!("bad variable index '{tok}'")))?,
        );
    }
    Ok(vars)
}
