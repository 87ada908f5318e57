//! Central finite-difference audit of the hand-derived gradients. Every
//! flat parameter coordinate is perturbed by ±`FD_STEP` and the numerical
//! slope compared against the analytic one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{
    init_params, instance_loss, net, GraphKind, LossKind, ModelConfig, ModelError, ModelParams,
    Pairing, TargetKind, TrainExample,
};
use crate::cnf::Cnf;
use crate::graph::{DegreeMode, NormMode};

pub const FD_STEP: f64 = 1e-4;

/// The acceptance threshold on the worst relative error.
pub const REL_TOL: f64 = 1e-4;

/// Glorot weights plus small random biases. Fresh params have all-zero
/// biases, which parks every dead ReLU row exactly on the kink, where the
/// subgradient convention (0) and a central difference (half the incoming
/// slope) disagree by construction. The audit needs a generic point in
/// parameter space, not that measure-zero locus.
pub fn generic_params(cfg: &ModelConfig, seed: u64) -> ModelParams {
    let mut params = init_params(cfg, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb1a5);
    let mut fill = |b: &mut [f64]| {
        for v in b {
            *v = rng.random_range(-0.5..0.5);
        }
    };
    fill(&mut params.b_init);
    for b in &mut params.b_out {
        fill(b);
    }
    fill(&mut params.b1);
    fill(&mut params.b2);
    params
}

#[derive(Clone, Debug, Serialize)]
pub struct GradReport {
    pub worst_rel_err: f64,
    pub worst_tensor: String,
    pub worst_index: usize,
    pub params_checked: usize,
    pub cases: usize,
    /// Coordinates whose ±step perturbation flipped a ReLU state or a
    /// probability clamp. The central difference there averages two
    /// one-sided slopes instead of estimating the derivative, so the
    /// measurement is discarded rather than compared.
    pub kink_skips: usize,
}

impl GradReport {
    pub fn passes(&self) -> bool {
        self.worst_rel_err < REL_TOL
    }

    fn absorb(&mut self, other: GradReport) {
        if other.worst_rel_err > self.worst_rel_err {
            self.worst_rel_err = other.worst_rel_err;
            self.worst_tensor = other.worst_tensor;
            self.worst_index = other.worst_index;
        }
        self.params_checked += other.params_checked;
        self.cases += other.cases;
        self.kink_skips += other.kink_skips;
    }
}

/// Compare analytic gradients against central differences on one instance.
pub fn check_instance(
    params: &ModelParams,
    ex: &TrainExample,
    cfg: &ModelConfig,
) -> Result<GradReport, ModelError> {
    let (_, analytic) = net::forward_backward(params, &ex.input, &ex.core_labels, ex.unsat, cfg)?;
    let analytic_flat = analytic.flat();
    let mut theta = params.flat();
    let mut scratch = params.clone();
    let mut report = GradReport {
        worst_rel_err: 0.0,
        worst_tensor: "none".into(),
        worst_index: 0,
        params_checked: theta.len(),
        cases: 1,
        kink_skips: 0,
    };
    // Both evaluation points must sit on the same smooth piece of the loss
    // for the central difference to mean anything; checked lazily, only
    // when a coordinate looks like a failure.
    let same_piece = |scratch: &mut ModelParams,
                      theta: &mut [f64],
                      i: usize,
                      orig: f64|
     -> Result<bool, ModelError> {
        theta[i] = orig + FD_STEP;
        scratch.set_flat(theta);
        let plus = net::forward(scratch, &ex.input, cfg)?.kink_pattern(cfg.target_kind);
        theta[i] = orig - FD_STEP;
        scratch.set_flat(theta);
        let minus = net::forward(scratch, &ex.input, cfg)?.kink_pattern(cfg.target_kind);
        theta[i] = orig;
        Ok(plus == minus)
    };
    for i in 0..theta.len() {
        let orig = theta[i];
        theta[i] = orig + FD_STEP;
        scratch.set_flat(&theta);
        let plus = instance_loss(&scratch, ex, cfg)?;
        theta[i] = orig - FD_STEP;
        scratch.set_flat(&theta);
        let minus = instance_loss(&scratch, ex, cfg)?;
        theta[i] = orig;
        let fd = (plus - minus) / (2.0 * FD_STEP);
        let a = analytic_flat[i];
        // Floored denominator: keeps near-zero gradients from amplifying
        // the scheme's own O(step^2) truncation noise.
        let rel = (a - fd).abs() / (a.abs() + fd.abs()).max(1e-3);
        if rel > report.worst_rel_err {
            if rel >= REL_TOL && !same_piece(&mut scratch, &mut theta, i, orig)? {
                report.kink_skips += 1;
                continue;
            }
            let (tensor, offset) = params.locate_flat(i);
            report.worst_rel_err = rel;
            report.worst_tensor = tensor;
            report.worst_index = offset;
        }
    }
    Ok(report)
}

/// One random small case: instance bounds n <= 6, d <= 3, L <= 2, with the
/// discrete axes (loss, target, pairing, graph, normalization, sharing)
/// cycled so a batch of cases covers them all.
pub fn random_case(case_seed: u64) -> (TrainExample, ModelConfig, ModelParams) {
    let mut rng = ChaCha8Rng::seed_from_u64(case_seed);
    let n = rng.random_range(2..=6u32);
    let m = rng.random_range(3..=9usize);
    let mut clauses: Vec<Vec<i64>> = Vec::with_capacity(m);
    for _ in 0..m {
        let k = rng.random_range(2..=3.min(n as usize));
        let mut vars: Vec<u32> = (1..=n).collect();
        for i in (1..vars.len()).rev() {
            let j = rng.random_range(0..=i);
            vars.swap(i, j);
        }
        clauses.push(
            vars[..k]
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
    let clause_refs: Vec<&[i64]> = clauses.iter().map(|c| c.as_slice()).collect();
    let cnf = Cnf::from_dimacs_clauses(n, &clause_refs);

    let cfg = ModelConfig {
        d: rng.random_range(1..=3),
        iterations: rng.random_range(1..=2),
        hidden: rng.random_range(2..=4),
        shared_weights: case_seed % 2 == 0,
        gamma: [0.0, 1.0, 2.0][(case_seed % 3) as usize],
        loss_kind: [LossKind::Focal, LossKind::CrossEntropy, LossKind::Kl]
            [(case_seed % 3) as usize],
        target_kind: if case_seed % 5 == 0 {
            TargetKind::Satisfiability
        } else {
            TargetKind::Core
        },
        pairing: if case_seed % 2 == 0 {
            Pairing::Half
        } else {
            Pairing::Mirror
        },
        graph_kind: if case_seed % 4 == 3 {
            GraphKind::Lcg
        } else {
            GraphKind::Wlig
        },
        norm_mode: if case_seed % 4 == 1 {
            NormMode::Row
        } else {
            NormMode::GlobalSum
        },
        degree_mode: if case_seed % 4 == 2 {
            DegreeMode::Simple
        } else {
            DegreeMode::Weighted
        },
        ..ModelConfig::default()
    };
    let labels = (0..n).map(|_| rng.random_bool(0.5)).collect();
    let unsat = rng.random_bool(0.5);
    let ex = TrainExample::from_cnf(format!("gradcheck-{case_seed}"), &cnf, labels, unsat, &cfg)
        .expect("k >= 2 clauses always leave edges");
    let params = generic_params(&cfg, case_seed.wrapping_mul(0x9e3779b97f4a7c15));
    (ex, cfg, params)
}

/// Worst finite-difference deviation across `cases` random small instances.
pub fn run_random(seed: u64, cases: usize) -> Result<GradReport, ModelError> {
    let mut report = GradReport {
        worst_rel_err: 0.0,
        worst_tensor: "none".into(),
        worst_index: 0,
        params_checked: 0,
        cases: 0,
        kink_skips: 0,
    };
    for c in 0..cases {
        let (ex, cfg, params) = random_case(seed.wrapping_add(c as u64));
        report.absorb(check_instance(&params, &ex, &cfg)?);
    }
    Ok(report)
}
