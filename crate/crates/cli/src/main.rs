//! Command-line front end for the core-prediction pipeline: corpus
//! generation, labeling, graph encoding, training, prediction, guided
//! solving, and the benchmark/ablation harness.
//!
//! Exit codes: 0 on success, 1 on domain errors (unreadable files, bad
//! DIMACS, failed checks), 2 on usage errors (clap's convention).

use std::error::Error;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use coreseed::bench::{
    eval_prediction, manifest_instances, pred_summary_text, run_ablation, run_speed_bench,
    speed_summary_text, write_reports, AblationAxis, SeedSource,
};
use coreseed::datagen::{
    gen_pigeonhole, gen_planted_core, gen_random_ksat, preset_spec, write_instance, CorpusPreset,
    Family, GenSpec,
};
use coreseed::dimacs::parse_dimacs_str;
use coreseed::graph::{DegreeMode, NormMode};
use coreseed::labeling::{build_dataset, load_examples, load_manifest, Split, MANIFEST_FILE};
use coreseed::model::checkpoint::{load_checkpoint, save_checkpoint};
use coreseed::model::gradcheck::run_random;
use coreseed::model::{
    predict, predict_timed, train, GraphInput, GraphKind, LossKind, ModelConfig, Pairing,
    TargetKind,
};
use coreseed::solver::{extract_core, solve, SolverConfig, VerdictKind};

type CliResult = Result<(), Box<dyn Error>>;

#[derive(Parser)]
#[command(
    name = "coreseed",
    version,
    about = "Predict UNSAT-core membership with a weighted GCN and seed a CDCL solver with it"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a CNF corpus (planted-core instances ship label sidecars).
    Gen(GenArgs),
    /// Label a corpus directory with core membership and write a manifest.
    Label(LabelArgs),
    /// Dump an instance's normalized graph encoding as CSV.
    Encode(EncodeArgs),
    /// Train a model on a labeled corpus and write a checkpoint.
    Train(TrainArgs),
    /// Per-variable core probabilities for one instance.
    Predict(PredictArgs),
    /// Solve one instance, optionally guided by a checkpoint.
    Solve(SolveArgs),
    /// Guided-vs-baseline runtime benchmark over a labeled corpus.
    Bench(BenchArgs),
    /// Train paired models differing on one axis and compare them.
    Ablate(AblateArgs),
    /// Compare analytic gradients against central finite differences.
    Gradcheck(GradcheckArgs),
}

/// First line of every machine-readable output: tool version plus the
/// exact invocation, so results carry their own configuration.
fn provenance() -> String {
    let args: Vec<String> = std::env::args().skip(1).collect();
    format!(
        "coreseed {} | {}",
        env!("CARGO_PKG_VERSION"),
        args.join(" ")
    )
}

fn manifest_path(data: &Path) -> PathBuf {
    if data.is_dir() {
        data.join(MANIFEST_FILE)
    } else {
        data.to_path_buf()
    }
}

fn init_jobs(jobs: usize) -> CliResult {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .map_err(|e| format!("thread pool: {e}").into())
}

fn write_output(out: Option<&Path>, content: &str) -> CliResult {
    match out {
        Some(path) => fs::write(path, content)?,
        None => std::io::stdout().write_all(content.as_bytes())?,
    }
    Ok(())
}

#[derive(Args)]
struct GenArgs {
    /// Output directory for .cnf files and .labels sidecars.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "planted_core")]
    family: Family,
    /// Instances to generate; pigeonhole grows the hole count by one per
    /// instance starting at --holes.
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Sizing preset for planted cores; overrides the explicit sizing
    /// flags below.
    #[arg(long)]
    preset: Option<CorpusPreset>,
    /// Kernel variables (planted) or total variables (random k-SAT).
    #[arg(long, default_value_t = 20)]
    n_core: u32,
    #[arg(long, default_value_t = 0)]
    n_pad: u32,
    #[arg(long, default_value_t = 3)]
    k: u32,
    /// Clauses per variable.
    #[arg(long, default_value_t = 5.0)]
    ratio: f64,
    /// Padding clauses per padding variable; default min(ratio, 3.0).
    #[arg(long)]
    pad_ratio: Option<f64>,
    /// Hole count for the pigeonhole family.
    #[arg(long, default_value_t = 2)]
    holes: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// File-stem prefix; defaults to the family name.
    #[arg(long)]
    prefix: Option<String>,
}

fn run_gen(a: GenArgs) -> CliResult {
    fs::create_dir_all(&a.out)?;
    let prefix = a.prefix.clone().unwrap_or_else(|| {
        match a.family {
            Family::PlantedCore => "planted",
            Family::Pigeonhole => "php",
            Family::RandomKsat => "ksat",
        }
        .to_string()
    });
    for i in 0..a.count {
        let stem = format!("{prefix}{i:05}");
        let inst_seed = a.seed.wrapping_add(i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(inst_seed);
        match a.family {
            Family::Pigeonhole => {
                let cnf = gen_pigeonhole(a.holes + i as u32);
                write_instance(&a.out, &stem, &cnf, None)?;
            }
            Family::RandomKsat => {
                let m = (a.ratio * a.n_core as f64).round().max(1.0) as usize;
                let cnf = gen_random_ksat(a.n_core, m, a.k, &mut rng);
                write_instance(&a.out, &stem, &cnf, None)?;
            }
            Family::PlantedCore => {
                let spec = match a.preset {
                    Some(p) => preset_spec(p, inst_seed, &mut rng),
                    None => GenSpec {
                        family: Family::PlantedCore,
                        n_core_vars: a.n_core,
                        n_pad_vars: a.n_pad,
                        k: a.k,
                        clause_ratio: a.ratio,
                        pad_ratio: a.pad_ratio,
                        seed: inst_seed,
                    },
                };
                let inst = gen_planted_core(&spec, &mut rng)?;
                write_instance(&a.out, &stem, &inst.cnf, Some(&inst.core_vars))?;
            }
        }
    }
    println!("# {}", provenance());
    println!("wrote {} instance(s) to {}", a.count, a.out.display());
    Ok(())
}

#[derive(Args)]
struct LabelArgs {
    /// Corpus directory full of .cnf files.
    #[arg(long)]
    dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    /// Conflict budget per labeling solve; 0 = unlimited.
    #[arg(long, default_value_t = 0)]
    conflict_budget: u64,
    #[arg(long, default_value_t = 0)]
    time_budget_ms: u64,
    /// Labeling worker threads; 0 = one per core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

fn run_label(a: LabelArgs) -> CliResult {
    init_jobs(a.jobs)?;
    let cfg = SolverConfig {
        conflict_budget: a.conflict_budget,
        time_budget_ms: a.time_budget_ms,
        ..SolverConfig::default()
    };
    let manifest = build_dataset(&a.dir, &cfg, a.split_seed)?;
    let train_n = manifest.split_entries(Split::Train).count();
    let test_n = manifest.split_entries(Split::Test).count();
    println!("# {}", provenance());
    println!(
        "labeled {} instance(s) ({} train / {} test), {} skipped",
        manifest.entries.len(),
        train_n,
        test_n,
        manifest.skipped.len()
    );
    println!("manifest: {}", a.dir.join(MANIFEST_FILE).display());
    Ok(())
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    cnf: PathBuf,
    #[arg(long, default_value = "wlig")]
    graph: GraphKind,
    #[arg(long, default_value = "global_sum")]
    norm: NormMode,
    #[arg(long, default_value = "weighted")]
    degree: DegreeMode,
    /// Write to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run_encode(a: EncodeArgs) -> CliResult {
    let cnf = read_cnf(&a.cnf)?;
    let cfg = ModelConfig {
        graph_kind: a.graph,
        norm_mode: a.norm,
        degree_mode: a.degree,
        ..ModelConfig::default()
    };
    let input = GraphInput::from_cnf(&cnf, &cfg)?;
    let mut text = format!(
        "# {}\n# nodes={} nnz={}\nrow,col,weight\n",
        provenance(),
        input.adj.num_rows(),
        input.adj.nnz()
    );
    for i in 0..input.adj.num_rows() {
        let (cols, vals) = input.adj.row(i);
        for (&j, &w) in cols.iter().zip(vals) {
            text.push_str(&format!("{i},{j},{w:.12}\n"));
        }
    }
    write_output(a.out.as_deref(), &text)
}

/// Model settings shared by train and ablate. Precedence: explicit flags
/// beat the --config file, which beats the defaults.
#[derive(Args)]
struct ModelOpts {
    /// JSON file with model settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Embedding half-width (node states are 2d wide).
    #[arg(long)]
    d: Option<usize>,
    /// Graph-convolution iterations.
    #[arg(long)]
    iterations: Option<usize>,
    /// MLP head hidden width.
    #[arg(long)]
    hidden: Option<usize>,
    /// Reuse one convolution map across iterations.
    #[arg(long)]
    shared_weights: Option<bool>,
    /// Focal-loss class weight on the core class.
    #[arg(long)]
    alpha: Option<f64>,
    /// Focal-loss focusing exponent.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// focal | cross_entropy | kl
    #[arg(long)]
    loss: Option<LossKind>,
    /// core | satisfiability
    #[arg(long)]
    target: Option<TargetKind>,
    /// half | mirror
    #[arg(long)]
    pairing: Option<Pairing>,
    /// wlig | lcg
    #[arg(long)]
    graph: Option<GraphKind>,
    /// weighted | simple
    #[arg(long)]
    degree: Option<DegreeMode>,
    /// global_sum | row
    #[arg(long)]
    norm: Option<NormMode>,
}

impl ModelOpts {
    fn resolve(&self) -> Result<ModelConfig, Box<dyn Error>> {
        let mut cfg: ModelConfig = match &self.config {
            Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
            None => ModelConfig::default(),
        };
        if let Some(v) = self.d {
            cfg.d = v;
        }
        if let Some(v) = self.iterations {
            cfg.iterations = v;
        }
        if let Some(v) = self.hidden {
            cfg.hidden = v;
        }
        if let Some(v) = self.shared_weights {
            cfg.shared_weights = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = self.lr {
            cfg.lr = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.loss {
            cfg.loss_kind = v;
        }
        if let Some(v) = self.target {
            cfg.target_kind = v;
        }
        if let Some(v) = self.pairing {
            cfg.pairing = v;
        }
        if let Some(v) = self.graph {
            cfg.graph_kind = v;
        }
        if let Some(v) = self.degree {
            cfg.degree_mode = v;
        }
        if let Some(v) = self.norm {
            cfg.norm_mode = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Corpus directory containing manifest.json, or a manifest path.
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint output path.
    #[arg(long)]
    out: PathBuf,
    /// Track the best epoch on the test split instead of train loss.
    #[arg(long)]
    holdout: bool,
    #[command(flatten)]
    model: ModelOpts,
}

fn run_train(a: TrainArgs) -> CliResult {
    let cfg = a.model.resolve()?;
    let manifest = load_manifest(&manifest_path(&a.data))?;
    let include_sat = cfg.target_kind == TargetKind::Satisfiability;
    let train_set = load_examples(&manifest, Split::Train, &cfg, include_sat)?;
    let val_set = if a.holdout {
        Some(load_examples(&manifest, Split::Test, &cfg, include_sat)?)
    } else {
        None
    };
    println!("# {}", provenance());
    println!("# config: {}", serde_json::to_string(&cfg)?);
    println!(
        "training on {} example(s){}",
        train_set.len(),
        match &val_set {
            Some(v) => format!(", validating on {}", v.len()),
            None => String::new(),
        }
    );
    let (params, history) = train(&train_set, val_set.as_deref(), &cfg)?;
    save_checkpoint(&params, &cfg, &a.out)?;
    if let Some(last) = history.epochs.last() {
        println!(
            "final train loss {:.6}, best epoch {} of {}",
            last.train_loss, history.best_epoch, cfg.epochs
        );
    }
    println!("checkpoint: {}", a.out.display());
    Ok(())
}

#[derive(Args)]
struct PredictArgs {
    /// Checkpoint path.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    cnf: PathBuf,
    /// Write to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run_predict(a: PredictArgs) -> CliResult {
    let (params, cfg) = load_checkpoint(&a.model)?;
    let cnf = read_cnf(&a.cnf)?;
    let (pred, timing) = predict_timed(&params, &cfg, &cnf)?;
    let mut text = format!(
        "# {}\n# graph_ms={:.3} inference_ms={:.3} total_ms={:.3}\nvar,core_prob\n",
        provenance(),
        timing.graph_ms,
        timing.inference_ms,
        timing.total_ms()
    );
    for (i, p) in pred.probs.iter().enumerate() {
        text.push_str(&format!("{},{:.6}\n", i + 1, p));
    }
    write_output(a.out.as_deref(), &text)
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    cnf: PathBuf,
    /// Checkpoint whose predictions seed branching order and scores.
    #[arg(long)]
    seed_model: Option<PathBuf>,
    /// Max conflicts; 0 = unlimited.
    #[arg(long, default_value_t = 0)]
    conflict_budget: u64,
    /// Wall-clock budget; 0 = unlimited.
    #[arg(long, default_value_t = 0)]
    time_budget_ms: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Append the per-solve statistics record.
    #[arg(long)]
    stats: bool,
    /// After an UNSAT verdict, extract and print the clause core.
    #[arg(long)]
    core: bool,
    /// After a SAT verdict, print the satisfying assignment.
    #[arg(long)]
    assignment: bool,
}

fn run_solve(a: SolveArgs) -> CliResult {
    let cnf = read_cnf(&a.cnf)?;
    let solver_cfg = SolverConfig {
        conflict_budget: a.conflict_budget,
        time_budget_ms: a.time_budget_ms,
        seed: a.seed,
        ..SolverConfig::default()
    };
    let branch_seed = match &a.seed_model {
        Some(path) => {
            let (params, cfg) = load_checkpoint(path)?;
            Some(predict(&params, &cfg, &cnf)?.branch_seed())
        }
        None => None,
    };
    let verdict = solve(&cnf, &solver_cfg, branch_seed.as_ref())?;
    println!("{}", verdict.kind_name().to_uppercase());
    if a.assignment {
        if let VerdictKind::Sat(model) = &verdict.kind {
            let lits: Vec<String> = model
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let var = i as i64 + 1;
                    (if v { var } else { -var }).to_string()
                })
                .collect();
            println!("v {} 0", lits.join(" "));
        }
    }
    if a.stats {
        let s = &verdict.stats;
        println!("instance,kind,decisions,propagations,conflicts,restarts,wall_ms");
        println!(
            "{},{},{},{},{},{},{:.3}",
            cnf.name(),
            verdict.kind_name(),
            s.decisions,
            s.propagations,
            s.conflicts,
            s.restarts,
            s.wall_ms
        );
    }
    if a.core {
        if !matches!(verdict.kind, VerdictKind::Unsat { .. }) {
            return Err("--core needs an UNSAT verdict".into());
        }
        let core = extract_core(&cnf, &solver_cfg)?;
        let clauses: Vec<String> = core.clauses.iter().map(|c| c.to_string()).collect();
        let vars: Vec<String> = core.vars.iter().map(|v| v.to_string()).collect();
        println!("core clauses: {}", clauses.join(" "));
        println!("core vars: {}", vars.join(" "));
    }
    Ok(())
}

#[derive(Args)]
struct BenchArgs {
    /// Corpus directory containing manifest.json, or a manifest path.
    #[arg(long)]
    data: PathBuf,
    /// Restrict the run to one manifest split.
    #[arg(long)]
    split: Option<Split>,
    /// Checkpoint for the guided arm; omitted = unguided self-comparison.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Seed from ground-truth labels instead of a model.
    #[arg(long, conflicts_with = "model")]
    oracle: bool,
    #[arg(long, default_value_t = 0.99)]
    oracle_hi: f64,
    #[arg(long, default_value_t = 0.01)]
    oracle_lo: f64,
    /// Report directory (per-instance CSV, scatter CSV, summaries).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    conflict_budget: u64,
    #[arg(long, default_value_t = 0)]
    time_budget_ms: u64,
    #[arg(long, default_value_t = 0)]
    solver_seed: u64,
    /// Harness threads; stays at 1 so wall times mean something.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn run_bench(a: BenchArgs) -> CliResult {
    init_jobs(a.jobs)?;
    let manifest = load_manifest(&manifest_path(&a.data))?;
    let instances = manifest_instances(&manifest, a.split)?;
    if instances.is_empty() {
        return Err("no labeled instances match the requested split".into());
    }
    let solver_cfg = SolverConfig {
        conflict_budget: a.conflict_budget,
        time_budget_ms: a.time_budget_ms,
        seed: a.solver_seed,
        ..SolverConfig::default()
    };
    let loaded = match &a.model {
        Some(path) => Some(load_checkpoint(path)?),
        None => None,
    };
    let seeder = if a.oracle {
        SeedSource::OracleLabels {
            hi: a.oracle_hi,
            lo: a.oracle_lo,
        }
    } else if let Some((params, cfg)) = &loaded {
        SeedSource::Model(params, cfg)
    } else {
        SeedSource::Unseeded
    };
    let bench = run_speed_bench(&instances, &solver_cfg, &seeder)?;
    let prov = provenance();
    print!("{}", speed_summary_text(&bench, &prov));
    let pred = match &loaded {
        Some((params, cfg)) => {
            let test = load_examples(&manifest, Split::Test, cfg, false)?;
            if test.is_empty() {
                None
            } else {
                Some(eval_prediction(params, cfg, &test)?)
            }
        }
        None => None,
    };
    if let Some(m) = &pred {
        print!("{}", pred_summary_text(m, &prov));
    }
    if let Some(dir) = &a.out {
        let written = write_reports(dir, &bench, pred.as_ref(), &prov)?;
        for path in written {
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

#[derive(Args)]
struct AblateArgs {
    /// Corpus directory containing manifest.json, or a manifest path.
    #[arg(long)]
    data: PathBuf,
    /// graph | supervision | loss
    #[arg(long)]
    axis: AblationAxis,
    /// Write the full report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    model: ModelOpts,
}

fn run_ablate(a: AblateArgs) -> CliResult {
    init_jobs(a.jobs)?;
    let cfg = a.model.resolve()?;
    let manifest = load_manifest(&manifest_path(&a.data))?;
    let report = run_ablation(&manifest, a.axis, &cfg)?;
    println!("# {}", provenance());
    let f1 = |v: Option<f64>| match v {
        Some(x) => format!("{x:.4}"),
        None => "undefined".into(),
    };
    for arm in &report.arms {
        println!(
            "{:<16} Acc {:.4} | Pos.F1 {} | Neg.F1 {} | final train loss {:.6}",
            arm.label,
            arm.metrics.accuracy,
            f1(arm.metrics.pos_f1),
            f1(arm.metrics.neg_f1),
            arm.final_train_loss
        );
    }
    if let Some(path) = &a.out {
        #[derive(serde::Serialize)]
        struct JsonOut<'a> {
            provenance: String,
            report: &'a coreseed::bench::AblationReport,
        }
        fs::write(
            path,
            serde_json::to_string_pretty(&JsonOut {
                provenance: provenance(),
                report: &report,
            })?,
        )?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    cases: usize,
}

fn run_gradcheck(a: GradcheckArgs) -> CliResult {
    let report = run_random(a.seed, a.cases)?;
    println!("# {}", provenance());
    println!(
        "max rel err {:.3e} at {}[{}] over {} case(s), {} parameter(s) checked, {} kink-straddling coordinate(s) excluded",
        report.worst_rel_err,
        report.worst_tensor,
        report.worst_index,
        report.cases,
        report.params_checked,
        report.kink_skips
    );
    if report.passes() {
        println!("PASS (tolerance 1e-4)");
        Ok(())
    } else {
        Err("gradient check failed: analytic and finite-difference gradients disagree".into())
    }
}

fn read_cnf(path: &Path) -> Result<coreseed::cnf::Cnf, Box<dyn Error>> {
    let text = fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".into());
    Ok(parse_dimacs_str(&text)?.with_name(stem))
}

fn run(cli: Cli) -> CliResult {
    match cli.cmd {
        Cmd::Gen(a) => run_gen(a),
        Cmd::Label(a) => run_label(a),
        Cmd::Encode(a) => run_encode(a),
        Cmd::Train(a) => run_train(a),
        Cmd::Predict(a) => run_predict(a),
        Cmd::Solve(a) => run_solve(a),
        Cmd::Bench(a) => run_bench(a),
        Cmd::Ablate(a) => run_ablate(a),
        Cmd::Gradcheck(a) => run_gradcheck(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
