//! Evaluation harness: prediction quality on labeled corpora, guided vs
//! unguided solver runtime, and the three ablations (graph encoding,
//! supervision signal, loss function).
//!
//! Wall-clock numbers at this scale are noisy, so conflict and decision
//! counts ride along as deterministic, hardware-independent effort proxies.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::Cnf;
use crate::datagen::read_label_sidecar;
use crate::dimacs::parse_dimacs_str;
use crate::labeling::{load_examples, DatasetManifest, LabelError, Split};
use crate::model::{
    net, predict_timed, train, GraphKind, LossKind, ModelConfig, ModelError, ModelParams,
    TargetKind, TrainExample,
};
use crate::solver::{seed_from_prediction, solve, SolverConfig, SolverError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Dimacs(#[from] crate::dimacs::DimacsError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("empty evaluation set")]
    EmptyTestSet,
    #[error("instance '{instance}' has no core labels for oracle seeding")]
    MissingLabels { instance: String },
}

/// Pooled binary confusion counts for the core class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn add(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn merge(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    /// F1 on the core class. `None` iff the class occurs in neither ground
    /// truth nor predictions (nothing to score); a class that exists but is
    /// never predicted scores a legitimate 0.
    pub fn pos_f1(&self) -> Option<f64> {
        let denom = 2 * self.tp + self.fp + self.fn_;
        (denom > 0).then(|| 2.0 * self.tp as f64 / denom as f64)
    }

    /// F1 on the non-core class (swap the class roles).
    pub fn neg_f1(&self) -> Option<f64> {
        let denom = 2 * self.tn + self.fn_ + self.fp;
        (denom > 0).then(|| 2.0 * self.tn as f64 / denom as f64)
    }
}

/// Core-prediction quality. Micro metrics pool all variables across
/// instances; macro metrics average per-instance values where defined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredMetrics {
    pub accuracy: f64,
    pub pos_f1: Option<f64>,
    pub neg_f1: Option<f64>,
    pub confusion: Confusion,
    pub macro_accuracy: f64,
    pub macro_pos_f1: Option<f64>,
    pub macro_neg_f1: Option<f64>,
    pub instances: usize,
}

pub const DECISION_THRESHOLD: f64 = 0.5;

pub fn confusion_from_probs(probs: &[f64], labels: &[bool]) -> Confusion {
    let mut c = Confusion::default();
    for (&p, &y) in probs.iter().zip(labels) {
        c.add(p >= DECISION_THRESHOLD, y);
    }
    c
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

fn metrics_from_pairs(pairs: &[(Confusion, ())]) -> PredMetrics {
    let mut pooled = Confusion::default();
    for (c, ()) in pairs {
        pooled.merge(c);
    }
    PredMetrics {
        accuracy: pooled.accuracy(),
        pos_f1: pooled.pos_f1(),
        neg_f1: pooled.neg_f1(),
        confusion: pooled,
        macro_accuracy: pairs.iter().map(|(c, ())| c.accuracy()).sum::<f64>() / pairs.len() as f64,
        macro_pos_f1: mean_defined(pairs.iter().map(|(c, ())| c.pos_f1())),
        macro_neg_f1: mean_defined(pairs.iter().map(|(c, ())| c.neg_f1())),
        instances: pairs.len(),
    }
}

/// Threshold the model's probabilities at 0.5 and score them against the
/// examples' core labels.
pub fn eval_prediction(
    params: &ModelParams,
    cfg: &ModelConfig,
    examples: &[TrainExample],
) -> Result<PredMetrics, BenchError> {
    if examples.is_empty() {
        return Err(BenchError::EmptyTestSet);
    }
    let mut pairs = Vec::with_capacity(examples.len());
    for ex in examples {
        let cache = net::forward(params, &ex.input, cfg)?;
        pairs.push((confusion_from_probs(&cache.probs, &ex.core_labels), ()));
    }
    Ok(metrics_from_pairs(&pairs))
}

/// Score a predictor that says the same thing for every variable; the
/// reference point any trained model has to beat.
pub fn constant_predictor_metrics(
    examples: &[TrainExample],
    predict_core: bool,
) -> Result<PredMetrics, BenchError> {
    if examples.is_empty() {
        return Err(BenchError::EmptyTestSet);
    }
    let p = if predict_core { 1.0 } else { 0.0 };
    let pairs: Vec<(Confusion, ())> = examples
        .iter()
        .map(|ex| {
            let probs = vec![p; ex.core_labels.len()];
            (confusion_from_probs(&probs, &ex.core_labels), ())
        })
        .collect();
    Ok(metrics_from_pairs(&pairs))
}

/// An instance ready for the runtime harness.
#[derive(Clone, Debug)]
pub struct BenchInstance {
    pub name: String,
    pub cnf: Cnf,
    pub core_labels: Option<Vec<bool>>,
}

/// Load a manifest's labeled entries (optionally one split) for the
/// runtime harness, in manifest order.
pub fn manifest_instances(
    manifest: &DatasetManifest,
    split: Option<Split>,
) -> Result<Vec<BenchInstance>, BenchError> {
    let mut out = Vec::new();
    for entry in &manifest.entries {
        if split.is_some_and(|s| entry.split != s) {
            continue;
        }
        let cnf = parse_dimacs_str(&fs::read_to_string(&entry.cnf_path)?)?;
        let vars = read_label_sidecar(&entry.label_path)?;
        let mut labels = vec![false; cnf.num_vars() as usize];
        for v in vars {
            labels[(v - 1) as usize] = true;
        }
        let name = entry
            .cnf_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "instance".into());
        out.push(BenchInstance {
            name,
            cnf,
            core_labels: Some(labels),
        });
    }
    Ok(out)
}

/// Where the guided arm's branch seeds come from.
pub enum SeedSource<'a> {
    /// No seeding: the guided arm is a self-comparison (improvement 0).
    Unseeded,
    /// Network predictions; overhead includes graph build and inference.
    Model(&'a ModelParams, &'a ModelConfig),
    /// Ground-truth labels mapped to fixed probabilities (upper bound on
    /// what a perfect predictor could contribute).
    OracleLabels { hi: f64, lo: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub instance: String,
    pub kind: String,
    pub decisions: u64,
    pub propagations: u64,
    pub conflicts: u64,
    pub restarts: u64,
    /// Solver wall time.
    pub solve_ms: f64,
    /// Graph build + inference + seed construction (0 for the baseline).
    pub overhead_ms: f64,
    pub total_ms: f64,
    /// What this instance contributes to A.RT: halted instances are
    /// charged the full time budget (censored mean), so removing the
    /// timeout can never lower their contribution.
    pub censored_ms: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpeedMetrics {
    /// Censored mean runtime (A.RT).
    pub avg_runtime_ms: f64,
    /// Baseline A.RT minus this arm's A.RT (0 for the baseline itself).
    pub improvement_ms: f64,
    pub improvement_pct: f64,
    pub halted_count: usize,
    pub halted_pct: f64,
    pub median_conflicts: f64,
    pub median_decisions: f64,
    pub records: Vec<InstanceRecord>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpeedBench {
    pub baseline: SpeedMetrics,
    pub guided: SpeedMetrics,
}

fn median(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    }
}

fn run_one(
    inst: &BenchInstance,
    solver_cfg: &SolverConfig,
    seeder: &SeedSource,
) -> Result<InstanceRecord, BenchError> {
    let (seed, overhead_ms) = match seeder {
        SeedSource::Unseeded => (None, 0.0),
        SeedSource::Model(params, cfg) => {
            let start = Instant::now();
            let (pred, _) = predict_timed(params, cfg, &inst.cnf)?;
            let seed = pred.branch_seed();
            (Some(seed), start.elapsed().as_secs_f64() * 1e3)
        }
        SeedSource::OracleLabels { hi, lo } => {
            let labels = inst
                .core_labels
                .as_ref()
                .ok_or_else(|| BenchError::MissingLabels {
                    instance: inst.name.clone(),
                })?;
            let start = Instant::now();
            let probs: Vec<f64> = labels.iter().map(|&y| if y { *hi } else { *lo }).collect();
            let seed = seed_from_prediction(&probs);
            (Some(seed), start.elapsed().as_secs_f64() * 1e3)
        }
    };
    let verdict = solve(&inst.cnf, solver_cfg, seed.as_ref())?;
    let stats = &verdict.stats;
    let total_ms = overhead_ms + stats.wall_ms;
    let censored_ms = if verdict.is_halted() && solver_cfg.time_budget_ms > 0 {
        total_ms.max(solver_cfg.time_budget_ms as f64 + overhead_ms)
    } else {
        total_ms
    };
    Ok(InstanceRecord {
        instance: inst.name.clone(),
        kind: verdict.kind_name().to_string(),
        decisions: stats.decisions,
        propagations: stats.propagations,
        conflicts: stats.conflicts,
        restarts: stats.restarts,
        solve_ms: stats.wall_ms,
        overhead_ms,
        total_ms,
        censored_ms,
    })
}

fn aggregate(records: Vec<InstanceRecord>, baseline_art: Option<f64>) -> SpeedMetrics {
    let n = records.len().max(1) as f64;
    let art = records.iter().map(|r| r.censored_ms).sum::<f64>() / n;
    let halted = records.iter().filter(|r| r.kind == "halted").count();
    let (imp_ms, imp_pct) = match baseline_art {
        Some(base) => {
            let imp = base - art;
            let pct = if base > 0.0 { 100.0 * imp / base } else { 0.0 };
            (imp, pct)
        }
        None => (0.0, 0.0),
    };
    SpeedMetrics {
        avg_runtime_ms: art,
        improvement_ms: imp_ms,
        improvement_pct: imp_pct,
        halted_count: halted,
        halted_pct: 100.0 * halted as f64 / n,
        median_conflicts: median(records.iter().map(|r| r.conflicts as f64).collect()),
        median_decisions: median(records.iter().map(|r| r.decisions as f64).collect()),
        records,
    }
}

/// Run the unseeded baseline and the guided arm over the same instances in
/// the same order. With [`SeedSource::Unseeded`] the guided arm reuses the
/// baseline's records, making the improvement exactly zero by definition.
pub fn run_speed_bench(
    instances: &[BenchInstance],
    solver_cfg: &SolverConfig,
    seeder: &SeedSource,
) -> Result<SpeedBench, BenchError> {
    let mut base_records = Vec::with_capacity(instances.len());
    for inst in instances {
        base_records.push(run_one(inst, solver_cfg, &SeedSource::Unseeded)?);
    }
    let guided_records = match seeder {
        SeedSource::Unseeded => base_records.clone(),
        _ => {
            let mut records = Vec::with_capacity(instances.len());
            for inst in instances {
                records.push(run_one(inst, solver_cfg, seeder)?);
            }
            records
        }
    };
    let baseline = aggregate(base_records, None);
    let guided = aggregate(guided_records, Some(baseline.avg_runtime_ms));
    Ok(SpeedBench { baseline, guided })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationAxis {
    Graph,
    Supervision,
    Loss,
}

impl std::str::FromStr for AblationAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "graph" => Ok(AblationAxis::Graph),
            "supervision" => Ok(AblationAxis::Supervision),
            "loss" => Ok(AblationAxis::Loss),
            other => Err(format!("unknown axis '{other}' (graph|supervision|loss)")),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AblationArm {
    pub label: String,
    pub metrics: PredMetrics,
    pub final_train_loss: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AblationReport {
    pub axis: AblationAxis,
    pub arms: Vec<AblationArm>,
}

/// Train one model per arm of the axis, everything else (data, split,
/// seeds) identical, and score each on the test split's core labels.
pub fn run_ablation(
    manifest: &DatasetManifest,
    axis: AblationAxis,
    base: &ModelConfig,
) -> Result<AblationReport, BenchError> {
    let arms: Vec<(String, ModelConfig, bool)> = match axis {
        AblationAxis::Graph => [GraphKind::Wlig, GraphKind::Lcg]
            .into_iter()
            .map(|g| {
                (
                    format!("{g:?}").to_lowercase(),
                    ModelConfig {
                        graph_kind: g,
                        ..base.clone()
                    },
                    false,
                )
            })
            .collect(),
        AblationAxis::Supervision => vec![
            (
                "core".into(),
                ModelConfig {
                    target_kind: TargetKind::Core,
                    ..base.clone()
                },
                false,
            ),
            // The satisfiability arm also trains on SAT instances; they
            // carry no core labels but define the graph-level signal.
            (
                "satisfiability".into(),
                ModelConfig {
                    target_kind: TargetKind::Satisfiability,
                    ..base.clone()
                },
                true,
            ),
        ],
        AblationAxis::Loss => [
            ("focal", LossKind::Focal),
            ("cross_entropy", LossKind::CrossEntropy),
            ("kl", LossKind::Kl),
        ]
        .into_iter()
        .map(|(label, l)| {
            (
                label.to_string(),
                ModelConfig {
                    loss_kind: l,
                    ..base.clone()
                },
                false,
            )
        })
        .collect(),
    };

    let mut report = AblationReport {
        axis,
        arms: Vec::new(),
    };
    for (label, cfg, include_sat) in arms {
        let train_set = load_examples(manifest, Split::Train, &cfg, include_sat)?;
        let test_set = load_examples(manifest, Split::Test, &cfg, false)?;
        let (params, history) = train(&train_set, None, &cfg)?;
        let metrics = eval_prediction(&params, &cfg, &test_set)?;
        report.arms.push(AblationArm {
            label,
            metrics,
            final_train_loss: history.epochs.last().map(|e| e.train_loss).unwrap_or(0.0),
        });
    }
    Ok(report)
}

pub const INSTANCE_CSV_HEADER: &str =
    "arm,instance,kind,decisions,propagations,conflicts,restarts,solve_ms,overhead_ms,total_ms,censored_ms";

/// Wall-time columns in the per-instance CSV; everything to their left is
/// deterministic under fixed seeds.
pub const CSV_WALL_COLUMNS: [usize; 4] = [7, 8, 9, 10];

fn push_records(out: &mut String, arm: &str, records: &[InstanceRecord]) {
    for r in records {
        out.push_str(&format!(
            "{arm},{},{},{},{},{},{},{:.3},{:.3},{:.3},{:.3}\n",
            r.instance,
            r.kind,
            r.decisions,
            r.propagations,
            r.conflicts,
            r.restarts,
            r.solve_ms,
            r.overhead_ms,
            r.total_ms,
            r.censored_ms
        ));
    }
}

/// Per-instance CSV with both arms, provenance first.
pub fn instance_csv(bench: &SpeedBench, provenance: &str) -> String {
    let mut out = format!("# {provenance}\n{INSTANCE_CSV_HEADER}\n");
    push_records(&mut out, "baseline", &bench.baseline.records);
    push_records(&mut out, "guided", &bench.guided.records);
    out
}

/// Per-instance baseline-vs-guided pairs, one row per instance: the data
/// behind a runtime scatter plot.
pub fn scatter_csv(bench: &SpeedBench, provenance: &str) -> String {
    let mut out = format!(
        "# {provenance}\ninstance,baseline_total_ms,guided_total_ms,baseline_conflicts,guided_conflicts\n"
    );
    for (b, g) in bench.baseline.records.iter().zip(&bench.guided.records) {
        out.push_str(&format!(
            "{},{:.3},{:.3},{},{}\n",
            b.instance, b.total_ms, g.total_ms, b.conflicts, g.conflicts
        ));
    }
    out
}

fn f1_text(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.4}"),
        None => "undefined".into(),
    }
}

pub fn speed_summary_text(bench: &SpeedBench, provenance: &str) -> String {
    let arm = |name: &str, m: &SpeedMetrics| {
        format!(
            "{name}: A.RT {:.3} ms | Imp. {:.3} ms ({:.2}%) | halted {} ({:.1}%) | median conflicts {:.1} | median decisions {:.1}\n",
            m.avg_runtime_ms,
            m.improvement_ms,
            m.improvement_pct,
            m.halted_count,
            m.halted_pct,
            m.median_conflicts,
            m.median_decisions
        )
    };
    format!(
        "# {provenance}\ninstances: {}\n{}{}",
        bench.baseline.records.len(),
        arm("baseline", &bench.baseline),
        arm("guided  ", &bench.guided)
    )
}

pub fn pred_summary_text(metrics: &PredMetrics, provenance: &str) -> String {
    format!(
        "# {provenance}\ninstances: {}\nmicro: Acc {:.4} | Pos.F1 {} | Neg.F1 {}\nmacro: Acc {:.4} | Pos.F1 {} | Neg.F1 {}\nconfusion: tp {} fp {} tn {} fn {}\n",
        metrics.instances,
        metrics.accuracy,
        f1_text(metrics.pos_f1),
        f1_text(metrics.neg_f1),
        metrics.macro_accuracy,
        f1_text(metrics.macro_pos_f1),
        f1_text(metrics.macro_neg_f1),
        metrics.confusion.tp,
        metrics.confusion.fp,
        metrics.confusion.tn,
        metrics.confusion.fn_,
    )
}

/// Write the full report set: per-instance CSV, scatter CSV, JSON summary,
/// and a plain-text summary. Returns the paths written.
pub fn write_reports(
    dir: &Path,
    bench: &SpeedBench,
    pred: Option<&PredMetrics>,
    provenance: &str,
) -> Result<Vec<PathBuf>, BenchError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let put = |name: &str, content: String, written: &mut Vec<PathBuf>| -> io::Result<()> {
        let path = dir.join(name);
        fs::write(&path, content)?;
        written.push(path);
        Ok(())
    };
    put(
        "per_instance.csv",
        instance_csv(bench, provenance),
        &mut written,
    )?;
    put("scatter.csv", scatter_csv(bench, provenance), &mut written)?;
    let mut summary = speed_summary_text(bench, provenance);
    if let Some(m) = pred {
        summary.push_str(&pred_summary_text(m, provenance));
    }
    put("summary.txt", summary, &mut written)?;
    #[derive(Serialize)]
    struct JsonReport<'a> {
        provenance: &'a str,
        baseline: &'a SpeedMetrics,
        guided: &'a SpeedMetrics,
        prediction: Option<&'a PredMetrics>,
    }
    let json = serde_json::to_string_pretty(&JsonReport {
        provenance,
        baseline: &bench.baseline,
        guided: &bench.guided,
        prediction: pred,
    })
    .expect("report serializes");
    put("summary.json", json, &mut written)?;
    Ok(written)
}

/// Strip the wall-time columns from a per-instance CSV, leaving only the
/// deterministic ones; two runs with identical seeds must agree on this.
pub fn deterministic_csv_view(csv: &str) -> String {
    let mut out = String::new();
    for line in csv.lines() {
        if line.starts_with('#') {
            out.push_str(line);
        } else {
            let fields: Vec<&str> = line.split(',').collect();
            let kept: Vec<&str> = fields
                .iter()
                .enumerate()
                .filter_map(|(i, f)| (!CSV_WALL_COLUMNS.contains(&i)).then_some(*f))
                .collect();
            out.push_str(&kept.join(","));
        }
        out.push('\n');
    }
    out
}
