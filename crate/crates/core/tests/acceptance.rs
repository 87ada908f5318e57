//! Acceptance suite: one test per release criterion, numbered so the
//! harness runs and reports them in order. Each test prints a one-line
//! summary (visible with `--nocapture`) and asserts its own runtime
//! budget where the criterion carries one. The heavyweight checks
//! (learning signal, guided solving) generate their corpora in-process
//! from fixed seeds, so every run sees identical data.

use std::time::Instant;

use coreseed::bench::{
    constant_predictor_metrics, deterministic_csv_view, eval_prediction, instance_csv,
    run_ablation, run_speed_bench, AblationAxis, BenchInstance, SeedSource,
};
use coreseed::brute::{brute_force_min_core, brute_force_solve};
use coreseed::cnf::{Cnf, Lit};
use coreseed::datagen::{
    gen_pigeonhole, gen_planted_core, gen_random_ksat, preset_spec, write_instance, CorpusPreset,
    GenSpec, PlantedInstance,
};
use coreseed::graph::{build_wlig, normalize_adjacency, NormMode};
use coreseed::labeling::build_dataset;
use coreseed::model::checkpoint::save_checkpoint;
use coreseed::model::gradcheck::run_random;
use coreseed::model::net::{cross_entropy_loss, focal_loss};
use coreseed::model::{init_params, predict_timed, train, GraphInput, ModelConfig, TrainExample};
use coreseed::solver::{
    extract_core, seed_from_prediction, solve, verify_core, verify_model, SolverConfig, VerdictKind,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Asserts the elapsed wall time stays under the criterion's ceiling and
/// returns it in seconds for the summary line.
fn within_budget(t0: Instant, ceiling_secs: u64, what: &str) -> f64 {
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(
        elapsed < ceiling_secs as f64,
        "{what} took {elapsed:.1}s, ceiling {ceiling_secs}s"
    );
    elapsed
}

fn core_label_vec(inst: &PlantedInstance) -> Vec<bool> {
    let mut labels = vec![false; inst.cnf.num_vars() as usize];
    for &v in &inst.core_vars {
        labels[(v - 1) as usize] = true;
    }
    labels
}

/// Planted instance from a fixed seed; sizes follow the `lec-like` preset.
fn lec_corpus(count: u64, seed_base: u64, cfg: &ModelConfig) -> Vec<TrainExample> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed_base + i);
            let spec = preset_spec(CorpusPreset::LecLike, seed_base + i, &mut rng);
            let inst = gen_planted_core(&spec, &mut rng).expect("planted generation");
            let labels = core_label_vec(&inst);
            TrainExample::from_cnf(format!("lec{i:04}"), &inst.cnf, labels, true, cfg)
                .expect("encoding")
        })
        .collect()
}

/// The guided-solving corpus: planted instances big enough that the
/// unguided baseline needs well over a thousand conflicts, with padding
/// dense enough (near the 3-SAT threshold, still satisfiable) that
/// branching into it costs real conflicts instead of free decisions.
fn hard_planted(seed: u64) -> PlantedInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = GenSpec {
        n_core_vars: 170,
        n_pad_vars: 340,
        clause_ratio: 5.0,
        pad_ratio: Some(4.0),
        seed,
        ..GenSpec::default()
    };
    gen_planted_core(&spec, &mut rng).expect("planted generation")
}

fn small_planted(seed: u64, n_core_lo: u32, n_core_hi: u32, n_pad_hi: u32) -> PlantedInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = GenSpec {
        n_core_vars: rng.random_range(n_core_lo..=n_core_hi),
        n_pad_vars: rng.random_range(0..=n_pad_hi),
        clause_ratio: 5.0,
        seed,
        ..GenSpec::default()
    };
    gen_planted_core(&spec, &mut rng).expect("planted generation")
}

fn node_of(lit: Lit, n_vars: u32) -> usize {
    if lit.positive() {
        lit.var() as usize - 1
    } else {
        n_vars as usize + lit.var() as usize - 1
    }
}

#[test]
fn c01_gradient_fidelity() {
    let t0 = Instant::now();
    let report = run_random(11, 20).expect("gradient check");
    assert!(
        report.passes(),
        "max rel err {:.3e} at {}[{}]",
        report.worst_rel_err,
        report.worst_tensor,
        report.worst_index
    );
    // Kink exclusions must stay rare, or the audit is measuring nothing.
    assert!(
        report.kink_skips * 100 <= report.params_checked,
        "{} of {} coordinates straddled a kink",
        report.kink_skips,
        report.params_checked
    );
    let elapsed = within_budget(t0, 60, "gradient check");
    println!(
        "gradient fidelity: max rel err {:.2e} at {}[{}], {} parameters over {} cases ({} kink-straddling coordinates excluded); {:.1}s (ceiling 60s)",
        report.worst_rel_err,
        report.worst_tensor,
        report.worst_index,
        report.params_checked,
        report.cases,
        report.kink_skips,
        elapsed
    );
}

#[test]
fn c02_solver_agrees_with_enumeration() {
    let t0 = Instant::now();
    let cfg = SolverConfig::default();
    let (mut sat, mut unsat) = (0usize, 0usize);
    for i in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x2000 + i);
        let n: u32 = rng.random_range(3..=20);
        let ratio = [1.5, 3.0, 4.3, 6.0][(i % 4) as usize];
        let m = ((n as f64 * ratio).round() as usize).max(1);
        let k: u32 = rng.random_range(2..=3);
        let cnf = gen_random_ksat(n, m, k, &mut rng);
        let want = brute_force_solve(&cnf).expect("within enumeration bounds");
        let got = solve(&cnf, &cfg, None).expect("solve");
        assert_eq!(
            want.kind_name(),
            got.kind_name(),
            "instance {i} (n={n} m={m} k={k})"
        );
        if let VerdictKind::Sat(assignment) = &got.kind {
            assert!(
                verify_model(&cnf, assignment).expect("model check"),
                "instance {i}: returned model falsifies the formula"
            );
            sat += 1;
        } else {
            unsat += 1;
        }
    }
    for holes in 1..=3u32 {
        let cnf = gen_pigeonhole(holes);
        assert!(brute_force_solve(&cnf).expect("enumeration").is_unsat());
        assert!(solve(&cnf, &cfg, None).expect("solve").is_unsat());
    }
    let elapsed = within_budget(t0, 300, "solver agreement");
    println!(
        "solver agreement: 1000 random ({sat} sat / {unsat} unsat) and 3 pigeonhole instances match enumeration; {elapsed:.1}s (ceiling 300s)"
    );
}

#[test]
fn c03_seeding_preserves_verdicts() {
    let t0 = Instant::now();
    // Generous but finite, so the no-halt assertion means something.
    let cfg = SolverConfig {
        conflict_budget: 500_000,
        ..SolverConfig::default()
    };
    let (mut sat, mut unsat) = (0usize, 0usize);
    for i in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x3000 + i);
        let cnf = if i % 10 == 9 {
            small_planted(0x3000 + i, 6, 14, 10).cnf
        } else {
            let n: u32 = rng.random_range(8..=24);
            let ratio = [2.0, 3.5, 4.3, 5.5][(i % 4) as usize];
            let m = ((n as f64 * ratio).round() as usize).max(1);
            gen_random_ksat(n, m, 3, &mut rng)
        };
        let base = solve(&cnf, &cfg, None).expect("solve");
        assert!(!base.is_halted(), "instance {i} halted unguided");
        for s in 0..5 {
            let probs: Vec<f64> = (0..cnf.num_vars())
                .map(|_| rng.random_range(0.0..1.0))
                .collect();
            let seed = seed_from_prediction(&probs);
            let guided = solve(&cnf, &cfg, Some(&seed)).expect("guided solve");
            assert!(!guided.is_halted(), "instance {i} seed {s} halted");
            assert_eq!(
                base.kind_name(),
                guided.kind_name(),
                "instance {i} seed {s}: verdict changed under seeding"
            );
        }
        if base.is_sat() {
            sat += 1;
        } else {
            unsat += 1;
        }
    }
    let elapsed = within_budget(t0, 300, "seeding check");
    println!(
        "seeding preserves verdicts: 200 instances ({sat} sat / {unsat} unsat) x 5 random seeds, kinds stable, 0 halts; {elapsed:.1}s (ceiling 300s)"
    );
}

/// True iff some `k`-subset of `pool` is unsatisfiable on its own. Used to
/// decide whether a reported core contains a minimum-cardinality core.
fn contains_unsat_subset(cnf: &Cnf, pool: &[usize], k: usize, cfg: &SolverConfig) -> bool {
    if k == 0 || k > pool.len() {
        return false;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let subset: Vec<usize> = idx.iter().map(|&i| pool[i]).collect();
        if verify_core(cnf, &subset, cfg).expect("subset check") {
            return true;
        }
        let mut i = k;
        loop {
            if i == 0 {
                return false;
            }
            i -= 1;
            if idx[i] != i + pool.len() - k {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Draws random 3-CNFs until enumeration says unsatisfiable; stays inside
/// the enumeration bounds of the minimum-core search (<= 16 clauses).
fn tiny_unsat(seed: u64) -> Cnf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..10_000 {
        let n: u32 = rng.random_range(3..=5);
        let m: usize = rng.random_range(10..=16);
        let cnf = gen_random_ksat(n, m, 3, &mut rng);
        if brute_force_solve(&cnf).expect("tiny instance").is_unsat() {
            return cnf;
        }
    }
    panic!("no unsatisfiable draw in 10000 attempts (seed {seed})");
}

#[test]
fn c04_extracted_cores_verify() {
    let t0 = Instant::now();
    let cfg = SolverConfig::default();
    let mut instances: Vec<Cnf> = (0..170u64)
        .map(|i| small_planted(0x4000 + i, 8, 20, 15).cnf)
        .collect();
    instances.extend((0..28u64).map(|i| tiny_unsat(0x4100 + i)));
    instances.push(gen_pigeonhole(1));
    instances.push(gen_pigeonhole(2));
    assert_eq!(instances.len(), 200);

    let mut min_checked = 0usize;
    let mut largest_core = 0usize;
    for (i, cnf) in instances.iter().enumerate() {
        let core = extract_core(cnf, &cfg).expect("core extraction");
        assert!(!core.clauses.is_empty(), "instance {i}: empty core");
        assert!(
            verify_core(cnf, &core.clauses, &cfg).expect("core check"),
            "instance {i}: reported core is satisfiable"
        );
        largest_core = largest_core.max(core.clauses.len());
        if let Ok(min_core) = brute_force_min_core(cnf) {
            // Containment of some minimum core: either the enumerated one
            // sits inside the report, or some equally small subset of the
            // report is unsatisfiable by itself.
            let direct = min_core.iter().all(|c| core.clauses.contains(c));
            assert!(
                direct || contains_unsat_subset(cnf, &core.clauses, min_core.len(), &cfg),
                "instance {i}: core {:?} contains no minimum core (size {})",
                core.clauses,
                min_core.len()
            );
            min_checked += 1;
        }
    }
    assert!(
        min_checked >= 30,
        "only {min_checked} instances within enumeration bounds"
    );
    let elapsed = within_budget(t0, 600, "core validity");
    println!(
        "core validity: 200/200 extracted cores verify unsatisfiable; {min_checked} within enumeration bounds all contain a minimum core; largest core {largest_core} clauses; {elapsed:.1}s (ceiling 600s)"
    );
}

#[test]
fn c05_graph_encoding_matches_pair_counts() {
    let t0 = Instant::now();
    let model_cfg = ModelConfig::default();
    let mut worst_sum_dev = 0f64;
    for i in 0..500u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5000 + i);
        let n: u32 = rng.random_range(2..=8);
        let m: usize = rng.random_range(1..=20);
        let k: u32 = rng.random_range(2..=n.min(3));
        let cnf = gen_random_ksat(n, m, k, &mut rng);

        let g = build_wlig(&cnf);
        let nn = g.num_nodes();
        let mut counts = vec![0u32; nn * nn];
        for clause in cnf.clauses() {
            let nodes: Vec<usize> = clause.iter().map(|&l| node_of(l, n)).collect();
            for a in 0..nodes.len() {
                for b in a + 1..nodes.len() {
                    let (x, y) = (nodes[a].min(nodes[b]), nodes[a].max(nodes[b]));
                    counts[x * nn + y] += 1;
                }
            }
        }
        for x in 0..nn {
            for y in 0..nn {
                let want = if x < y {
                    counts[x * nn + y]
                } else if y < x {
                    counts[y * nn + x]
                } else {
                    0
                };
                assert_eq!(
                    g.weight_between(x, y),
                    want,
                    "instance {i}: weight between nodes {x} and {y}"
                );
            }
        }

        let norm = normalize_adjacency(&g).expect("at least one co-occurrence");
        let total: f64 = (0..norm.num_nodes())
            .map(|r| norm.adjacency.row(r).1.iter().sum::<f64>())
            .sum();
        let dev = (total - 1.0).abs();
        assert!(
            dev <= 1e-12,
            "instance {i}: normalized entries sum to {total}"
        );
        worst_sum_dev = worst_sum_dev.max(dev);

        let input = GraphInput::from_cnf(&cnf, &model_cfg).expect("encoding");
        for v in 0..n as usize {
            assert_eq!(input.flip[v] as usize, v + n as usize, "instance {i}");
            assert_eq!(input.flip[v + n as usize] as usize, v, "instance {i}");
            assert_eq!(
                input.head_pairs[v],
                (v as u32, v as u32 + n),
                "instance {i}: head pair for variable {}",
                v + 1
            );
        }
        for node in 0..input.flip.len() {
            let image = input.flip[node] as usize;
            assert_ne!(image, node, "instance {i}: flip fixes literal node {node}");
            assert_eq!(
                input.flip[image] as usize, node,
                "instance {i}: flip not an involution at node {node}"
            );
        }
    }
    println!(
        "graph encoding: 500 graphs match clause-pair counting; worst |sum-1| {:.1e} after normalization; flip is a fixed-point-free involution; {:.1}s",
        worst_sum_dev,
        t0.elapsed().as_secs_f64()
    );
}

#[test]
fn c06_focal_reduces_to_cross_entropy() {
    let mut worst_loss = 0f64;
    let mut worst_grad = 0f64;
    for i in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6000 + i);
        let len: usize = rng.random_range(1..=64);
        let probs: Vec<f64> = (0..len)
            .map(|_| rng.random_range(1e-6..=1.0 - 1e-6))
            .collect();
        let labels: Vec<bool> = (0..len).map(|_| rng.random_bool(0.5)).collect();
        let (fl, fg) = focal_loss(&probs, &labels, 0.5, 0.0).expect("focal");
        let (cl, cg) = cross_entropy_loss(&probs, &labels).expect("cross-entropy");
        let dev = (fl - 0.5 * cl).abs();
        assert!(
            dev <= 1e-12,
            "vector {i}: focal {fl} vs half cross-entropy {}",
            0.5 * cl
        );
        worst_loss = worst_loss.max(dev);
        for j in 0..len {
            let gdev = (fg[j] - 0.5 * cg[j]).abs();
            assert!(
                gdev <= 1e-12 * cg[j].abs().max(1.0),
                "vector {i} entry {j}: focal grad {} vs half cross-entropy grad {}",
                fg[j],
                0.5 * cg[j]
            );
            worst_grad = worst_grad.max(gdev);
        }
    }
    println!(
        "focal reduction: gamma 0, alpha 0.5 equals half cross-entropy on 100 vectors; worst loss dev {worst_loss:.1e}, worst grad dev {worst_grad:.1e}"
    );
}

#[test]
fn c07_learning_beats_majority() {
    let t0 = Instant::now();
    // Row normalization keeps message magnitudes independent of instance
    // size; with the global-sum mode the convolution signal is scaled by
    // 1/nnz and training plateaus at the degree-only optimum.
    let cfg = ModelConfig {
        d: 8,
        iterations: 2,
        hidden: 16,
        epochs: 40,
        norm_mode: NormMode::Row,
        ..ModelConfig::default()
    };
    let all = lec_corpus(2500, 0, &cfg);
    let (train_set, test_set) = all.split_at(2000);
    let (params, history) = train(train_set, None, &cfg).expect("training");
    let model = eval_prediction(&params, &cfg, test_set).expect("test metrics");
    let majority = constant_predictor_metrics(test_set, true).expect("baseline metrics");
    let model_neg = model.neg_f1.expect("test split has non-core variables");
    let majority_neg = majority.neg_f1.expect("majority baseline neg F1");
    assert!(
        model.accuracy >= majority.accuracy + 0.05,
        "test accuracy {:.4} vs constant-majority {:.4}: below the +5pp bar",
        model.accuracy,
        majority.accuracy
    );
    assert!(
        model_neg > majority_neg,
        "neg F1 {model_neg:.4} not above the constant-majority predictor's {majority_neg:.4}"
    );
    let final_loss = history
        .epochs
        .last()
        .map(|e| e.train_loss)
        .unwrap_or(f64::NAN);
    let elapsed = within_budget(t0, 7200, "learning signal");
    println!(
        "learning signal: accuracy {:.4} vs majority {:.4} (+{:.1}pp, bar +5.0), neg F1 {:.4} vs {:.4}; final train loss {:.3} after {} epochs on 2000 train / 500 test; {:.0}s (ceiling 7200s)",
        model.accuracy,
        majority.accuracy,
        (model.accuracy - majority.accuracy) * 100.0,
        model_neg,
        majority_neg,
        final_loss,
        cfg.epochs,
        elapsed
    );
}

#[test]
fn c08_oracle_seeding_conflicts() {
    let t0 = Instant::now();
    let instances: Vec<BenchInstance> = (0..300u64)
        .into_par_iter()
        .map(|i| {
            let inst = hard_planted(5000 + i);
            let labels = core_label_vec(&inst);
            BenchInstance {
                name: format!("hard{i:03}"),
                cnf: inst.cnf,
                core_labels: Some(labels),
            }
        })
        .collect();
    let solver_cfg = SolverConfig::default();
    let oracle = run_speed_bench(
        &instances,
        &solver_cfg,
        &SeedSource::OracleLabels { hi: 0.99, lo: 0.01 },
    )
    .expect("oracle bench");
    let base_conf = oracle.baseline.median_conflicts;
    let guided_conf = oracle.guided.median_conflicts;
    assert!(
        base_conf >= 1000.0,
        "baseline median {base_conf} conflicts: instances sized too easy for the comparison"
    );
    assert!(
        guided_conf <= base_conf,
        "oracle-guided median {guided_conf} conflicts above baseline {base_conf}"
    );
    // Unguided index-order branching wanders into the near-threshold
    // padding and pays conflicts there before activity bumps pull it back;
    // the seeded arm starts on the kernel and proves unsatisfiability
    // without that detour. Ties are possible (the padding never resolves
    // against the kernel) and count as a pass, just not the expected one.
    let conflict_note = if guided_conf == base_conf {
        "medians tie: branching converged to the kernel before padding cost anything".to_string()
    } else {
        format!(
            "guided arm ahead by {:.0} conflicts at the median",
            base_conf - guided_conf
        )
    };

    // Trained-model deltas, reported without a pass bar. The model trains
    // on fresh instances from the same family.
    let cfg = ModelConfig {
        d: 8,
        iterations: 2,
        hidden: 16,
        epochs: 8,
        norm_mode: NormMode::Row,
        ..ModelConfig::default()
    };
    let train_set: Vec<TrainExample> = (0..120u64)
        .into_par_iter()
        .map(|i| {
            let inst = hard_planted(6000 + i);
            let labels = core_label_vec(&inst);
            TrainExample::from_cnf(format!("fit{i:03}"), &inst.cnf, labels, true, &cfg)
                .expect("encoding")
        })
        .collect();
    let (params, _) = train(&train_set, None, &cfg).expect("training");
    let modeled = run_speed_bench(&instances, &solver_cfg, &SeedSource::Model(&params, &cfg))
        .expect("model bench");

    let elapsed = within_budget(t0, 1800, "guided solving");
    println!(
        "guided solving: median conflicts baseline {base_conf} vs oracle-guided {guided_conf} ({conflict_note}); median decisions {} vs {}; trained model: median conflicts {}, decisions {}, runtime improvement {:.1} ms ({:.1}%); {:.0}s (ceiling 1800s)",
        oracle.baseline.median_decisions,
        oracle.guided.median_decisions,
        modeled.guided.median_conflicts,
        modeled.guided.median_decisions,
        modeled.guided.improvement_ms,
        modeled.guided.improvement_pct,
        elapsed
    );
}

#[test]
fn c09_pipeline_overhead_bound() {
    let cfg = ModelConfig::default();
    let params = init_params(&cfg, 0);
    let mut details = Vec::new();
    for (idx, n) in [1000u32, 2500, 5000].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x9000 + idx as u64);
        let cnf = gen_random_ksat(n, 4 * n as usize, 3, &mut rng);
        let t0 = Instant::now();
        let (pred, timing) = predict_timed(&params, &cfg, &cnf).expect("prediction");
        let seed = pred.branch_seed();
        let total_ms = t0.elapsed().as_secs_f64() * 1e3;
        assert_eq!(seed.order.len(), n as usize);
        assert!(
            total_ms < 1500.0,
            "{n} vars: graph + inference + seeding took {total_ms:.0} ms"
        );
        details.push(format!(
            "{n} vars {:.0}+{:.0}={:.0} ms",
            timing.graph_ms, timing.inference_ms, total_ms
        ));
    }
    println!(
        "pipeline overhead: {} (bound 1500 ms per instance, default model)",
        details.join(", ")
    );
}

#[test]
fn c10_determinism() {
    let dir = tempfile::tempdir().expect("tempdir");

    // Identical seeds, identical checkpoints, byte for byte.
    let cfg = ModelConfig {
        d: 4,
        iterations: 2,
        hidden: 8,
        epochs: 3,
        norm_mode: NormMode::Row,
        seed: 9,
        ..ModelConfig::default()
    };
    let corpus: Vec<TrainExample> = (0..40u64)
        .map(|i| {
            let inst = small_planted(0xA000 + i, 10, 20, 8);
            let labels = core_label_vec(&inst);
            TrainExample::from_cnf(format!("t{i:02}"), &inst.cnf, labels, true, &cfg)
                .expect("encoding")
        })
        .collect();
    let (p1, _) = train(&corpus, None, &cfg).expect("first run");
    let (p2, _) = train(&corpus, None, &cfg).expect("second run");
    let path_a = dir.path().join("a.ckpt");
    let path_b = dir.path().join("b.ckpt");
    save_checkpoint(&p1, &cfg, &path_a).expect("save");
    save_checkpoint(&p2, &cfg, &path_b).expect("save");
    let bytes_a = std::fs::read(&path_a).expect("read");
    let bytes_b = std::fs::read(&path_b).expect("read");
    assert_eq!(bytes_a, bytes_b, "checkpoints differ across identical runs");

    // Identical solver statistics, wall time aside.
    let solver_cfg = SolverConfig::default();
    let inst = small_planted(0xA100, 25, 25, 10);
    let effort = |cnf: &Cnf, seed: Option<&coreseed::solver::BranchSeed>| {
        let v = solve(cnf, &solver_cfg, seed).expect("solve");
        (
            v.kind_name(),
            v.stats.decisions,
            v.stats.propagations,
            v.stats.conflicts,
            v.stats.restarts,
        )
    };
    assert_eq!(effort(&inst.cnf, None), effort(&inst.cnf, None));
    let probs: Vec<f64> = (0..inst.cnf.num_vars())
        .map(|v| (v as f64 * 0.37).fract())
        .collect();
    let branch_seed = seed_from_prediction(&probs);
    assert_eq!(
        effort(&inst.cnf, Some(&branch_seed)),
        effort(&inst.cnf, Some(&branch_seed))
    );

    // Identical benchmark CSVs once the wall-time columns are dropped.
    let instances: Vec<BenchInstance> = (0..10u64)
        .map(|i| {
            let inst = small_planted(0xB000 + i, 20, 30, 10);
            let labels = core_label_vec(&inst);
            BenchInstance {
                name: format!("d{i:02}"),
                cnf: inst.cnf,
                core_labels: Some(labels),
            }
        })
        .collect();
    let seeder = SeedSource::OracleLabels { hi: 0.99, lo: 0.01 };
    let bench1 = run_speed_bench(&instances, &solver_cfg, &seeder).expect("bench");
    let bench2 = run_speed_bench(&instances, &solver_cfg, &seeder).expect("bench");
    assert_eq!(
        deterministic_csv_view(&instance_csv(&bench1, "determinism-check")),
        deterministic_csv_view(&instance_csv(&bench2, "determinism-check")),
        "per-instance CSV differs beyond wall-time columns"
    );

    println!(
        "determinism: checkpoints byte-identical ({} bytes); solver statistics identical across reruns, seeded and unseeded; benchmark CSV identical after dropping wall-time columns",
        bytes_a.len()
    );
}

#[test]
fn c11_ablation_axes() {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().expect("tempdir");
    // 475 planted plus 25 satisfiable draws, so the satisfiability arm of
    // the supervision axis sees both classes.
    (0..475u64).into_par_iter().for_each(|i| {
        let inst = small_planted(0xC000 + i, 12, 26, 8);
        write_instance(
            dir.path(),
            &format!("p{i:03}"),
            &inst.cnf,
            Some(&inst.core_vars),
        )
        .expect("write instance");
    });
    for i in 0..25u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0xD000 + i);
        let cnf = gen_random_ksat(25, 50, 3, &mut rng);
        write_instance(dir.path(), &format!("s{i:02}"), &cnf, None).expect("write instance");
    }
    let manifest = build_dataset(dir.path(), &SolverConfig::default(), 3).expect("labeling");

    let base = ModelConfig {
        d: 8,
        iterations: 2,
        hidden: 16,
        epochs: 12,
        norm_mode: NormMode::Row,
        seed: 5,
        ..ModelConfig::default()
    };
    let mut lines = Vec::new();
    let mut graph_arms = None;
    for axis in [
        AblationAxis::Graph,
        AblationAxis::Supervision,
        AblationAxis::Loss,
    ] {
        let report = run_ablation(&manifest, axis, &base).expect("ablation");
        let expected = if axis == AblationAxis::Loss { 3 } else { 2 };
        assert_eq!(report.arms.len(), expected, "{axis:?} arm count");
        for arm in &report.arms {
            assert!(
                arm.metrics.accuracy.is_finite() && (0.0..=1.0).contains(&arm.metrics.accuracy),
                "{axis:?}/{}: accuracy {}",
                arm.label,
                arm.metrics.accuracy
            );
        }
        if axis == AblationAxis::Graph {
            graph_arms = Some((
                report.arms[0].metrics.accuracy,
                report.arms[1].metrics.accuracy,
            ));
        }
        lines.push(format!(
            "{:?} [{}]",
            axis,
            report
                .arms
                .iter()
                .map(|a| format!("{} {:.4}", a.label, a.metrics.accuracy))
                .collect::<Vec<_>>()
                .join(", ")
        ));
    }
    let (wlig_acc, lcg_acc) = graph_arms.expect("graph axis ran");
    let direction = if wlig_acc >= lcg_acc {
        "matching the expected direction"
    } else {
        "a deviation on this corpus, reported rather than asserted"
    };
    println!(
        "ablation: {}; wlig {:.4} vs lcg {:.4} accuracy ({direction}); {:.0}s",
        lines.join("; "),
        wlig_acc,
        lcg_acc,
        t0.elapsed().as_secs_f64()
    );
}
