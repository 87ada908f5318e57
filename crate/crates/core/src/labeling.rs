//! Core-membership labels for a corpus, plus train/test split management.
//!
//! Labels come from either a generator sidecar (planted ground truth) or
//! the solver's verified core extraction. Labeled corpora are described by
//! a JSON manifest that pins the split, so every downstream consumer sees
//! the same partition.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::Cnf;
use crate::datagen::read_label_sidecar;
use crate::dimacs::{parse_dimacs_str, DimacsError};
use crate::model::{ModelConfig, ModelError, TrainExample};
use crate::solver::{extract_core, SolverConfig, SolverError};

#[derive(Debug, Error)]
pub enum LabelError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Dimacs(#[from] DimacsError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("bad sidecar {path}: {detail}")]
    BadSidecar { path: PathBuf, detail: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    /// Computed by the solver's core extraction in this run.
    Oracle,
    /// Read from a generator/cache sidecar.
    Planted,
}

/// Per-variable core membership for one UNSAT instance.
#[derive(Clone, Debug, PartialEq)]
pub struct VarLabels {
    pub core: Vec<bool>,
    pub source: LabelSource,
}

impl VarLabels {
    pub fn from_core_vars(
        n_vars: u32,
        vars: &[u32],
        source: LabelSource,
    ) -> Result<VarLabels, LabelError> {
        let mut core = vec![false; n_vars as usize];
        for &v in vars {
            if v == 0 || v > n_vars {
                return Err(LabelError::BadSidecar {
                    path: PathBuf::new(),
                    detail: format!("variable {v} out of range 1..={n_vars}"),
                });
            }
            core[(v - 1) as usize] = true;
        }
        Ok(VarLabels { core, source })
    }

    /// 1-based indices of the core variables, ascending.
    pub fn core_vars(&self) -> Vec<u32> {
        self.core
            .iter()
            .enumerate()
            .filter_map(|(i, &y)| y.then_some(i as u32 + 1))
            .collect()
    }

    pub fn num_positive(&self) -> usize {
        self.core.iter().filter(|&&y| y).count()
    }
}

/// Label one instance through verified core extraction: a variable is core
/// iff it occurs in some clause of the extracted core. SAT instances
/// surface as [`SolverError::NotUnsat`] and budget exhaustion as
/// [`SolverError::Halted`]; callers downgrade both to skip records.
pub fn label_instance(cnf: &Cnf, cfg: &SolverConfig) -> Result<VarLabels, SolverError> {
    let core = extract_core(cnf, cfg)?;
    debug_assert!(!core.vars.is_empty(), "a verified core touches >= 1 var");
    let mut labels = vec![false; cnf.num_vars() as usize];
    for &v in &core.vars {
        labels[(v - 1) as usize] = true;
    }
    Ok(VarLabels {
        core: labels,
        source: LabelSource::Oracle,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split '{other}' (train|test)")),
        }
    }
}

/// One labeled (necessarily UNSAT) instance in the corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub cnf_path: PathBuf,
    pub label_path: PathBuf,
    pub split: Split,
    pub n_vars: u32,
    pub n_clauses: usize,
    pub verdict: String,
}

/// An instance excluded from core-label training, with the reason. SAT
/// instances keep their verdict and split so the satisfiability-supervision
/// ablation can still train on them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub cnf_path: PathBuf,
    pub reason: String,
    pub verdict: Option<String>,
    pub split: Option<Split>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub skipped: Vec<SkipRecord>,
    pub split_seed: u64,
}

impl DatasetManifest {
    pub fn split_entries(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

enum Labeled {
    Entry {
        cnf_path: PathBuf,
        label_path: PathBuf,
        n_vars: u32,
        n_clauses: usize,
    },
    Sat {
        cnf_path: PathBuf,
    },
    Skip {
        cnf_path: PathBuf,
        reason: String,
        verdict: Option<String>,
    },
}

/// Label every `.cnf` file in `dir` (reusing `.labels` sidecars where they
/// exist, writing them where they don't), assign a deterministic shuffled
/// 80/20 train/test split, and write `manifest.json` into the directory.
/// Unreadable or unlabelable files become skip records, not errors.
pub fn build_dataset(
    dir: &Path,
    cfg: &SolverConfig,
    split_seed: u64,
) -> Result<DatasetManifest, LabelError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "cnf"))
        .collect();
    files.sort();

    let labeled: Vec<Labeled> = files
        .par_iter()
        .map(|cnf_path| label_file(cnf_path, cfg))
        .collect();

    // Split over everything that parsed (labeled entries and SAT skips
    // alike), so the satisfiability arm inherits a consistent partition.
    let splittable: Vec<usize> = labeled
        .iter()
        .enumerate()
        .filter_map(|(i, l)| (!matches!(l, Labeled::Skip { .. })).then_some(i))
        .collect();
    let mut order: Vec<usize> = (0..splittable.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed);
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let n_test = ((splittable.len() as f64) * 0.2).round() as usize;
    let mut split_of = vec![None; labeled.len()];
    for (rank, &pos) in order.iter().enumerate() {
        let split = if rank < n_test {
            Split::Test
        } else {
            Split::Train
        };
        split_of[splittable[pos]] = Some(split);
    }

    let mut manifest = DatasetManifest {
        split_seed,
        ..DatasetManifest::default()
    };
    for (i, item) in labeled.into_iter().enumerate() {
        match item {
            Labeled::Entry {
                cnf_path,
                label_path,
                n_vars,
                n_clauses,
            } => manifest.entries.push(ManifestEntry {
                cnf_path,
                label_path,
                split: split_of[i].expect("entries are splittable"),
                n_vars,
                n_clauses,
                verdict: "unsat".into(),
            }),
            Labeled::Sat { cnf_path } => manifest.skipped.push(SkipRecord {
                cnf_path,
                reason: "satisfiable: no core to label".into(),
                verdict: Some("sat".into()),
                split: split_of[i],
            }),
            Labeled::Skip {
                cnf_path,
                reason,
                verdict,
            } => manifest.skipped.push(SkipRecord {
                cnf_path,
                reason,
                verdict,
                split: None,
            }),
        }
    }
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(dir.join(MANIFEST_FILE), json)?;
    Ok(manifest)
}

fn label_file(cnf_path: &Path, cfg: &SolverConfig) -> Labeled {
    let skip = |reason: String, verdict: Option<String>| Labeled::Skip {
        cnf_path: cnf_path.to_path_buf(),
        reason,
        verdict,
    };
    let text = match fs::read_to_string(cnf_path) {
        Ok(t) => t,
        Err(e) => return skip(format!("unreadable: {e}"), None),
    };
    let cnf = match parse_dimacs_str(&text) {
        Ok(c) => c,
        Err(e) => return skip(format!("bad DIMACS: {e}"), None),
    };
    let label_path = cnf_path.with_extension("labels");
    if label_path.exists() {
        match read_label_sidecar(&label_path) {
            Ok(vars) => {
                match VarLabels::from_core_vars(cnf.num_vars(), &vars, LabelSource::Planted) {
                    Ok(_) => {
                        return Labeled::Entry {
                            cnf_path: cnf_path.to_path_buf(),
                            label_path,
                            n_vars: cnf.num_vars(),
                            n_clauses: cnf.num_clauses(),
                        }
                    }
                    Err(e) => return skip(format!("bad sidecar: {e}"), None),
                }
            }
            Err(e) => return skip(format!("bad sidecar: {e}"), None),
        }
    }
    match label_instance(&cnf, cfg) {
        Ok(labels) => {
            let vars = labels.core_vars();
            let joined: Vec<String> = vars.iter().map(|v| v.to_string()).collect();
            let text = format!("core-vars\n{}\n", joined.join(" "));
            if let Err(e) = fs::write(&label_path, text) {
                return skip(format!("cannot cache labels: {e}"), Some("unsat".into()));
            }
            Labeled::Entry {
                cnf_path: cnf_path.to_path_buf(),
                label_path,
                n_vars: cnf.num_vars(),
                n_clauses: cnf.num_clauses(),
            }
        }
        Err(SolverError::NotUnsat) => Labeled::Sat {
            cnf_path: cnf_path.to_path_buf(),
        },
        Err(SolverError::Halted) => skip("budget exhausted".into(), Some("halted".into())),
        Err(e) => skip(format!("solver error: {e}"), None),
    }
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest, LabelError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Materialize a manifest split as encoded training examples. With
/// `include_sat`, SAT skip records of the same split join in with all-false
/// core labels (they carry signal only for the satisfiability target).
pub fn load_examples(
    manifest: &DatasetManifest,
    split: Split,
    model_cfg: &ModelConfig,
    include_sat: bool,
) -> Result<Vec<TrainExample>, LabelError> {
    let mut out = Vec::new();
    for entry in manifest.split_entries(split) {
        let cnf = parse_dimacs_str(&fs::read_to_string(&entry.cnf_path)?)?;
        let vars = read_label_sidecar(&entry.label_path)?;
        let labels = VarLabels::from_core_vars(cnf.num_vars(), &vars, LabelSource::Planted)?;
        let name = entry
            .cnf_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "instance".into());
        out.push(TrainExample::from_cnf(
            name,
            &cnf,
            labels.core,
            true,
            model_cfg,
        )?);
    }
    if include_sat {
        for rec in &manifest.skipped {
            if rec.split != Some(split) || rec.verdict.as_deref() != Some("sat") {
                continue;
            }
            let cnf = parse_dimacs_str(&fs::read_to_string(&rec.cnf_path)?)?;
            let name = rec
                .cnf_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "instance".into());
            let labels = vec![false; cnf.num_vars() as usize];
            out.push(TrainExample::from_cnf(
                name, &cnf, labels, false, model_cfg,
            )?);
        }
    }
    Ok(out)
}
