//! The network itself: embedding, graph-convolution iterations with the
//! half-flip, the per-variable MLP head, the losses, and the hand-derived
//! reverse-mode gradients. No autodiff: every backward formula here is
//! checked against central finite differences in the tests.

use super::mat::{outer_acc, spmm, spmm_t, vecmat, vecmat_t, Mat};
use super::{GraphInput, LossKind, ModelConfig, ModelError, ModelParams, TargetKind};

/// Probability clamp applied before any log.
pub const PROB_EPS: f64 = 1e-7;

/// Block-swap the top and bottom halves of a matrix with an even number of
/// rows: [a, b, c, d] -> [c, d, a, b].
pub fn flip_rows(h: &Mat) -> Result<Mat, ModelError> {
    if h.rows() % 2 != 0 {
        return Err(ModelError::OddRowCount { rows: h.rows() });
    }
    let half = h.rows() / 2;
    let perm: Vec<u32> = (0..h.rows())
        .map(|i| ((i + half) % h.rows()) as u32)
        .collect();
    Ok(h.permute_rows(&perm))
}

/// Two-way softmax, probability of the first channel.
pub fn softmax_first(z0: f64, z1: f64) -> f64 {
    1.0 / (1.0 + (z1 - z0).exp())
}

fn ensure_finite(name: &str, data: &[f64]) -> Result<(), ModelError> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ModelError::NumericalOverflow {
            tensor: name.to_string(),
        })
    }
}

/// Everything the backward pass needs from a forward run.
pub struct ForwardCache {
    /// N×2 raw features.
    pub x: Mat,
    /// Post-activation states H^0 ..= H^L.
    pub h: Vec<Mat>,
    /// Pre-activation Z per iteration (length L).
    pub z: Vec<Mat>,
    /// Concatenated convolution inputs per iteration (length L).
    pub c: Vec<Mat>,
    /// Per-variable head input rows (n×4d).
    pub u: Mat,
    /// MLP hidden pre-activation (n×hidden).
    pub a: Mat,
    /// MLP hidden post-activation (n×hidden).
    pub r: Mat,
    /// Per-variable logits (n×2).
    pub logits: Mat,
    /// Per-variable probability of the core channel.
    pub probs: Vec<f64>,
    /// Mean-pooled logits and pooled probability (satisfiability target).
    pub pooled: Option<([f64; 2], f64)>,
}

impl ForwardCache {
    /// Which side of each kink the pass landed on: the sign of every ReLU
    /// pre-activation plus the clamp state of each probability the loss
    /// reads. Two evaluations with equal patterns lie on the same smooth
    /// piece of the loss surface.
    pub fn kink_pattern(&self, target: TargetKind) -> Vec<bool> {
        let mut pattern = Vec::new();
        for z in &self.z {
            pattern.extend(z.data().iter().map(|&v| v > 0.0));
        }
        pattern.extend(self.a.data().iter().map(|&v| v > 0.0));
        let clamped = |p: f64| p < PROB_EPS || p > 1.0 - PROB_EPS;
        match target {
            TargetKind::Core => pattern.extend(self.probs.iter().map(|&p| clamped(p))),
            TargetKind::Satisfiability => {
                let (_, p) = self.pooled.expect("pooled state present");
                pattern.push(clamped(p));
            }
        }
        pattern
    }
}

/// Affine embedding of per-node (degree, type) features.
pub fn embed_nodes(params: &ModelParams, features: &[(f64, f64)]) -> Mat {
    let mut x = Mat::zeros(features.len(), 2);
    for (i, &(d, t)) in features.iter().enumerate() {
        x.row_mut(i)[0] = d;
        x.row_mut(i)[1] = t;
    }
    let mut h0 = x.matmul(&params.w_init);
    h0.add_row(&params.b_init);
    h0
}

/// The L graph-convolution iterations. `flip` comes from the graph input
/// so that the literal-clause ablation (where clause nodes map to
/// themselves) reuses the same code.
pub fn wgcn_forward(
    params: &ModelParams,
    input: &GraphInput,
    h0: Mat,
    cfg: &ModelConfig,
) -> Result<(Vec<Mat>, Vec<Mat>, Vec<Mat>), ModelError> {
    ensure_finite("h0", h0.data())?;
    let mut h_states = vec![h0];
    let mut z_states = Vec::with_capacity(cfg.iterations);
    let mut c_states = Vec::with_capacity(cfg.iterations);
    for l in 0..cfg.iterations {
        let h = h_states.last().expect("nonempty");
        let m = spmm(&input.adj, h);
        let c = m.hstack(&h.permute_rows(&input.flip));
        let (w, b) = params.w_out_for(l);
        let mut z = c.matmul(w);
        z.add_row(b);
        ensure_finite(&format!("z{}", l + 1), z.data())?;
        let next = z.relu();
        c_states.push(c);
        z_states.push(z);
        h_states.push(next);
    }
    Ok((h_states, z_states, c_states))
}

/// The per-variable MLP head over paired literal rows. Returns
/// (u, a, r, logits, probs).
pub fn head_forward(
    params: &ModelParams,
    h_last: &Mat,
    pairs: &[(u32, u32)],
) -> Result<(Mat, Mat, Mat, Mat, Vec<f64>), ModelError> {
    let n = pairs.len();
    let four_d = 2 * h_last.cols();
    let hidden = params.b1.len();
    let mut u = Mat::zeros(n, four_d);
    let mut a = Mat::zeros(n, hidden);
    let mut logits = Mat::zeros(n, 2);
    for (i, &(pos, neg)) in pairs.iter().enumerate() {
        let row = u.row_mut(i);
        row[..h_last.cols()].copy_from_slice(h_last.row(pos as usize));
        row[h_last.cols()..].copy_from_slice(h_last.row(neg as usize));
        let mut ai = vecmat(row, &params.w1);
        for (v, &b) in ai.iter_mut().zip(&params.b1) {
            *v += b;
        }
        a.row_mut(i).copy_from_slice(&ai);
    }
    let r = a.relu();
    for i in 0..n {
        let mut zi = vecmat(r.row(i), &params.w2);
        for (v, &b) in zi.iter_mut().zip(&params.b2) {
            *v += b;
        }
        logits.row_mut(i).copy_from_slice(&zi);
    }
    ensure_finite("logits", logits.data())?;
    let probs = (0..n)
        .map(|i| softmax_first(logits.get(i, 0), logits.get(i, 1)))
        .collect();
    Ok((u, a, r, logits, probs))
}

/// Full forward pass, caching every intermediate for the backward pass.
pub fn forward(
    params: &ModelParams,
    input: &GraphInput,
    cfg: &ModelConfig,
) -> Result<ForwardCache, ModelError> {
    let mut x = Mat::zeros(input.features.len(), 2);
    for (i, &(d, t)) in input.features.iter().enumerate() {
        x.row_mut(i)[0] = d;
        x.row_mut(i)[1] = t;
    }
    let h0 = embed_nodes(params, &input.features);
    let (h, z, c) = wgcn_forward(params, input, h0, cfg)?;
    let (u, a, r, logits, probs) =
        head_forward(params, h.last().expect("nonempty"), &input.head_pairs)?;
    let pooled = match cfg.target_kind {
        TargetKind::Core => None,
        TargetKind::Satisfiability => {
            let n = input.head_pairs.len() as f64;
            let sums = logits.col_sums();
            let zbar = [sums[0] / n, sums[1] / n];
            Some((zbar, softmax_first(zbar[0], zbar[1])))
        }
    };
    Ok(ForwardCache {
        x,
        h,
        z,
        c,
        u,
        a,
        r,
        logits,
        probs,
        pooled,
    })
}

fn check_lengths(probs: usize, labels: usize) -> Result<(), ModelError> {
    if probs == labels {
        Ok(())
    } else {
        Err(ModelError::LabelLength {
            expected: probs,
            got: labels,
        })
    }
}

/// Focal loss, summed over variables, with the analytic d(loss)/d(p_i).
/// Probabilities are clamped to [eps, 1-eps] before the logs; a clamped
/// probability contributes zero gradient (the clamp is flat there).
pub fn focal_loss(
    probs: &[f64],
    labels: &[bool],
    alpha: f64,
    gamma: f64,
) -> Result<(f64, Vec<f64>), ModelError> {
    check_lengths(probs.len(), labels.len())?;
    let mut loss = 0.0;
    let mut grad = vec![0.0; probs.len()];
    for (i, (&p_raw, &y)) in probs.iter().zip(labels).enumerate() {
        let p = p_raw.clamp(PROB_EPS, 1.0 - PROB_EPS);
        let clamped = p != p_raw;
        if y {
            loss += -alpha * (1.0 - p).powf(gamma) * p.ln();
            if !clamped {
                grad[i] = alpha * gamma * (1.0 - p).powf(gamma - 1.0) * p.ln()
                    - alpha * (1.0 - p).powf(gamma) / p;
            }
        } else {
            loss += -(1.0 - alpha) * p.powf(gamma) * (1.0 - p).ln();
            if !clamped {
                grad[i] = -(1.0 - alpha) * gamma * p.powf(gamma - 1.0) * (1.0 - p).ln()
                    + (1.0 - alpha) * p.powf(gamma) / (1.0 - p);
            }
        }
    }
    Ok((loss, grad))
}

/// Plain binary cross-entropy, summed over variables.
pub fn cross_entropy_loss(probs: &[f64], labels: &[bool]) -> Result<(f64, Vec<f64>), ModelError> {
    check_lengths(probs.len(), labels.len())?;
    let mut loss = 0.0;
    let mut grad = vec![0.0; probs.len()];
    for (i, (&p_raw, &y)) in probs.iter().zip(labels).enumerate() {
        let p = p_raw.clamp(PROB_EPS, 1.0 - PROB_EPS);
        let clamped = p != p_raw;
        if y {
            loss += -p.ln();
            if !clamped {
                grad[i] = -1.0 / p;
            }
        } else {
            loss += -(1.0 - p).ln();
            if !clamped {
                grad[i] = 1.0 / (1.0 - p);
            }
        }
    }
    Ok((loss, grad))
}

/// KL divergence from the label distribution (y, 1-y) to the predicted
/// (p, 1-p), summed over variables. With hard 0/1 labels the divergence
/// coincides with cross-entropy (the label-entropy term is zero).
pub fn kl_loss(probs: &[f64], labels: &[bool]) -> Result<(f64, Vec<f64>), ModelError> {
    cross_entropy_loss(probs, labels)
}

pub fn loss_by_kind(
    kind: LossKind,
    probs: &[f64],
    labels: &[bool],
    alpha: f64,
    gamma: f64,
) -> Result<(f64, Vec<f64>), ModelError> {
    match kind {
        LossKind::Focal => focal_loss(probs, labels, alpha, gamma),
        LossKind::CrossEntropy => cross_entropy_loss(probs, labels),
        LossKind::Kl => kl_loss(probs, labels),
    }
}

/// Gradients of the scalar loss with respect to every parameter tensor.
/// Returns (loss, ModelParams-shaped gradients).
pub fn forward_backward(
    params: &ModelParams,
    input: &GraphInput,
    core_labels: &[bool],
    unsat_label: bool,
    cfg: &ModelConfig,
) -> Result<(f64, ModelParams), ModelError> {
    let cache = forward(params, input, cfg)?;
    let n = input.head_pairs.len();

    // d(loss)/d(logits), shape n×2, via dp/dz0 = p(1-p) = -dp/dz1.
    let mut dlogits = Mat::zeros(n, 2);
    let loss = match cfg.target_kind {
        TargetKind::Core => {
            let (loss, dp) = loss_by_kind(
                cfg.loss_kind,
                &cache.probs,
                core_labels,
                cfg.alpha,
                cfg.gamma,
            )?;
            for i in 0..n {
                let p = cache.probs[i].clamp(PROB_EPS, 1.0 - PROB_EPS);
                let s = dp[i] * p * (1.0 - p);
                dlogits.set(i, 0, s);
                dlogits.set(i, 1, -s);
            }
            loss
        }
        TargetKind::Satisfiability => {
            let (_, p_g) = cache.pooled.expect("pooled state present");
            let (loss, dp) =
                loss_by_kind(cfg.loss_kind, &[p_g], &[unsat_label], cfg.alpha, cfg.gamma)?;
            let p = p_g.clamp(PROB_EPS, 1.0 - PROB_EPS);
            let s = dp[0] * p * (1.0 - p) / n as f64;
            for i in 0..n {
                dlogits.set(i, 0, s);
                dlogits.set(i, 1, -s);
            }
            loss
        }
    };

    let mut grads = ModelParams::zeros_like(params);
    let two_d = cache.h[0].cols();

    // Head backward.
    let mut dh_last = Mat::zeros(cache.h[0].rows(), two_d);
    for i in 0..n {
        let dz = dlogits.row(i).to_vec();
        outer_acc(&mut grads.w2, cache.r.row(i), &dz);
        for (g, &v) in grads.b2.iter_mut().zip(&dz) {
            *g += v;
        }
        let dr = vecmat_t(&dz, &params.w2);
        let da: Vec<f64> = dr
            .iter()
            .zip(cache.a.row(i))
            .map(|(&g, &z)| if z > 0.0 { g } else { 0.0 })
            .collect();
        outer_acc(&mut grads.w1, cache.u.row(i), &da);
        for (g, &v) in grads.b1.iter_mut().zip(&da) {
            *g += v;
        }
        let du = vecmat_t(&da, &params.w1);
        let (pos, neg) = input.head_pairs[i];
        for (d, &v) in dh_last.row_mut(pos as usize).iter_mut().zip(&du[..two_d]) {
            *d += v;
        }
        for (d, &v) in dh_last.row_mut(neg as usize).iter_mut().zip(&du[two_d..]) {
            *d += v;
        }
    }

    // Convolution backward, deepest iteration first.
    let mut dh = dh_last;
    for l in (0..cfg.iterations).rev() {
        let dz = dh.relu_backward(&cache.z[l]);
        let (dw, db) = grads.w_out_for_mut(l);
        dw.add_assign(&cache.c[l].t_matmul(&dz));
        for (g, v) in db.iter_mut().zip(dz.col_sums()) {
            *g += v;
        }
        let (w, _) = params.w_out_for(l);
        let dc = dz.matmul_t(w);
        let dm = dc.col_slice(0, two_d);
        let dflip = dc.col_slice(two_d, 2 * two_d);
        // d/dH of A'·H is A'ᵀ·dM; d/dH of permute(H) is the inverse
        // permutation (flip is an involution, so it is its own inverse).
        let mut dh_prev = spmm_t(&input.adj, &dm);
        dh_prev.add_assign(&dflip.permute_rows(&input.flip));
        dh = dh_prev;
    }

    // Embedding backward.
    grads.w_init.add_assign(&cache.x.t_matmul(&dh));
    for (g, v) in grads.b_init.iter_mut().zip(dh.col_sums()) {
        *g += v;
    }

    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Pairing;

    #[test]
    fn flip_examples() {
        let h = Mat::from_rows(&[&[1.0], &[2.0], &[3.0], &[4.0]]);
        let f = flip_rows(&h).unwrap();
        assert_eq!(f, Mat::from_rows(&[&[3.0], &[4.0], &[1.0], &[2.0]]));
        assert_eq!(flip_rows(&f).unwrap(), h);

        let two = Mat::from_rows(&[&[7.0, 8.0], &[9.0, 10.0]]);
        assert_eq!(
            flip_rows(&two).unwrap(),
            Mat::from_rows(&[&[9.0, 10.0], &[7.0, 8.0]])
        );

        let odd = Mat::zeros(3, 1);
        assert!(matches!(
            flip_rows(&odd),
            Err(ModelError::OddRowCount { rows: 3 })
        ));
    }

    #[test]
    fn softmax_pins() {
        assert_eq!(softmax_first(0.0, 0.0), 0.5);
        assert!((softmax_first(3f64.ln(), 0.0) - 0.75).abs() < 1e-15);
        // Shift invariance.
        let a = softmax_first(1.3, -0.4);
        let b = softmax_first(1.3 + 100.0, -0.4 + 100.0);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn focal_loss_hand_values() {
        // y=1, p=0.9, alpha=0.25, gamma=2.
        let (loss, _) = focal_loss(&[0.9], &[true], 0.25, 2.0).unwrap();
        let expected = -0.25 * 0.1f64.powi(2) * 0.9f64.ln();
        assert!((loss - expected).abs() < 1e-15);
        assert!((loss - 2.634e-4).abs() < 1e-6);

        // Perfectly confident and correct: term tends to zero.
        let (tiny, _) = focal_loss(&[1.0 - 1e-9], &[true], 0.25, 2.0).unwrap();
        assert!(tiny < 1e-15);
    }

    #[test]
    fn focal_with_gamma_zero_is_scaled_cross_entropy() {
        let probs = [0.3, 0.8, 0.51, 0.02];
        let labels = [true, false, true, false];
        let (fl, fg) = focal_loss(&probs, &labels, 0.5, 0.0).unwrap();
        let (ce, cg) = cross_entropy_loss(&probs, &labels).unwrap();
        assert!((fl - 0.5 * ce).abs() < 1e-12);
        for (a, b) in fg.iter().zip(&cg) {
            assert!((a - 0.5 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn kl_equals_cross_entropy_on_hard_labels() {
        let probs = [0.2, 0.7];
        let labels = [false, true];
        assert_eq!(
            kl_loss(&probs, &labels).unwrap(),
            cross_entropy_loss(&probs, &labels).unwrap()
        );
    }

    #[test]
    fn loss_rejects_length_mismatch() {
        assert!(matches!(
            focal_loss(&[0.5], &[true, false], 0.25, 2.0),
            Err(ModelError::LabelLength { .. })
        ));
    }

    #[test]
    fn focal_gradient_matches_finite_difference_in_p() {
        let h = 1e-6;
        for &y in &[true, false] {
            for &p in &[0.1, 0.4, 0.9] {
                let (_, g) = focal_loss(&[p], &[y], 0.25, 2.0).unwrap();
                let (lp, _) = focal_loss(&[p + h], &[y], 0.25, 2.0).unwrap();
                let (lm, _) = focal_loss(&[p - h], &[y], 0.25, 2.0).unwrap();
                let fd = (lp - lm) / (2.0 * h);
                assert!(
                    (g[0] - fd).abs() / fd.abs().max(1.0) < 1e-6,
                    "y={y} p={p}: analytic {} vs fd {fd}",
                    g[0]
                );
            }
        }
    }

    #[test]
    fn hand_computed_single_iteration() {
        // n=1 (N=2), d=1, adjacency from the tautological clause (x1 ∨ ¬x1):
        // one edge, both normalized entries 0.5. Hand-set weights; every
        // number below is pencil-and-paper arithmetic.
        let cnf = crate::cnf::Cnf::from_dimacs_clauses(1, &[&[1, -1]]);
        let cfg = ModelConfig {
            d: 1,
            iterations: 1,
            hidden: 2,
            ..ModelConfig::default()
        };
        let input = GraphInput::from_cnf(&cnf, &cfg).unwrap();
        assert_eq!(input.features, vec![(1.0, 1.0), (1.0, -1.0)]);

        let mut params = ModelParams::zeros(&cfg);
        // W_init = identity: H0 rows equal the raw features.
        params.w_init.set(0, 0, 1.0);
        params.w_init.set(1, 1, 1.0);
        params.w_out[0] = Mat::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0], &[0.0, 0.0]]);
        params.b_out[0] = vec![0.1, -0.2];

        let h0 = embed_nodes(&params, &input.features);
        assert_eq!(h0, Mat::from_rows(&[&[1.0, 1.0], &[1.0, -1.0]]));

        let (h, _, _) = wgcn_forward(&params, &input, h0, &cfg).unwrap();
        // M = A'H0 = [[0.5, -0.5], [0.5, 0.5]]; Flip(H0) swaps the rows.
        // C row0 = (0.5, -0.5, 1, -1) → Z row0 = (0.5+1+0.1, -0.5+1-0.2).
        let h1 = &h[1];
        assert!((h1.get(0, 0) - 1.6).abs() < 1e-15);
        assert!((h1.get(0, 1) - 0.3).abs() < 1e-15);
        assert!((h1.get(1, 0) - 1.6).abs() < 1e-15);
        assert!((h1.get(1, 1) - 1.3).abs() < 1e-15);
    }

    #[test]
    fn zero_convolution_weights_zero_the_state() {
        let cnf = crate::cnf::Cnf::from_dimacs_clauses(2, &[&[1, 2], &[-1, 2]]);
        let cfg = ModelConfig {
            d: 2,
            iterations: 1,
            hidden: 3,
            ..ModelConfig::default()
        };
        let input = GraphInput::from_cnf(&cnf, &cfg).unwrap();
        let mut params = ModelParams::zeros(&cfg);
        // Nonzero embedding, all-zero W_out: H1 must still be all zero.
        params.w_init.set(0, 0, 2.0);
        params.w_init.set(1, 1, -1.5);
        let h0 = embed_nodes(&params, &input.features);
        let (h, _, _) = wgcn_forward(&params, &input, h0, &cfg).unwrap();
        assert!(h[1].data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn uniform_head_gives_half() {
        let cnf = crate::cnf::Cnf::from_dimacs_clauses(2, &[&[1, -2], &[1, 2]]);
        let cfg = ModelConfig {
            d: 2,
            iterations: 2,
            hidden: 3,
            ..ModelConfig::default()
        };
        let input = GraphInput::from_cnf(&cnf, &cfg).unwrap();
        let mut params = ModelParams::glorot(&cfg, 11);
        // Zero last layer: both logits identical, softmax uniform.
        params.w2 = Mat::zeros(params.w2.rows(), params.w2.cols());
        params.b2 = vec![0.0, 0.0];
        let cache = forward(&params, &input, &cfg).unwrap();
        for &p in &cache.probs {
            assert_eq!(p, 0.5);
        }
        // Adding one bias of ln 3 to the core channel makes them 0.75.
        params.b2 = vec![3f64.ln(), 0.0];
        let cache = forward(&params, &input, &cfg).unwrap();
        for &p in &cache.probs {
            assert!((p - 0.75).abs() < 1e-15);
        }
    }

    #[test]
    fn head_pairs_cover_every_row_once() {
        for pairing in [Pairing::Half, Pairing::Mirror] {
            let cnf = crate::cnf::Cnf::from_dimacs_clauses(3, &[&[1, 2, 3]]);
            let cfg = ModelConfig {
                pairing,
                ..ModelConfig::default()
            };
            let input = GraphInput::from_cnf(&cnf, &cfg).unwrap();
            let mut used = vec![0usize; 6];
            for &(a, b) in &input.head_pairs {
                used[a as usize] += 1;
                used[b as usize] += 1;
            }
            assert_eq!(used, vec![1; 6], "pairing {pairing:?}");
        }
    }

    #[test]
    fn symmetric_start_gives_opposite_b2_gradients() {
        let cnf = crate::cnf::Cnf::from_dimacs_clauses(2, &[&[1, 2], &[-1, 2]]);
        let cfg = ModelConfig {
            d: 2,
            iterations: 1,
            hidden: 3,
            ..ModelConfig::default()
        };
        let input = GraphInput::from_cnf(&cnf, &cfg).unwrap();
        let params = ModelParams::glorot(&cfg, 3);
        let labels = vec![false; 2];
        let (_, grads) = forward_backward(&params, &input, &labels, true, &cfg).unwrap();
        assert!((grads.b2[0] + grads.b2[1]).abs() < 1e-12);
        assert!(grads.b2[0].abs() > 0.0);
    }

    #[test]
    fn overflow_reports_the_offending_tensor() {
        let cnf = crate::cnf::Cnf::from_dimacs_clauses(2, &[&[1, 2]]);
        let cfg = ModelConfig {
            d: 1,
            iterations: 1,
            hidden: 2,
            ..ModelConfig::default()
        };
        let input = GraphInput::from_cnf(&cnf, &cfg).unwrap();
        let mut params = ModelParams::glorot(&cfg, 5);
        for v in params.w_init.data_mut() {
            *v = 1e200;
        }
        for v in params.w_out[0].data_mut() {
            *v = 1e200;
        }
        match forward(&params, &input, &cfg) {
            Err(ModelError::NumericalOverflow { tensor }) => {
                assert_eq!(tensor, "z1");
            }
            other => panic!("expected overflow, got {:?}", other.map(|_| ())),
        }
    }
}
