//! Training losses: reconstruction (L1 + SSIM), style triplet, lip-sync
//! log-cosine, style cross-entropy, and the hinge adversarial pair.
//!
//! Every loss is built on the tape so its gradient comes from the same
//! reverse sweep as the model's. All -log terms share a common floor so
//! they stay finite for any input.


use serde::{Deserialize, Serialize};

use crate::disc::LOG_EPS;
use crate::error::{CoreError, Result};
use crate::real::Real;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// SSIM window side for clip reconstruction (clamped to the clip dims).
pub const SSIM_WINDOW: usize = 7;
/// Dynamic range of expression coefficients (they are clipped to [-3,3]).
pub const SSIM_RANGE: f64 = 6.0;

/// Objective weights. Defaults follow the reference recipe: reconstruction
/// dominates at 88, everything else at 1; the L1/SSIM mix is 0.1/0.9 and
/// the triplet margin is 5.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub rec: f64,
    pub trip: f64,
    pub sync: f64,
    pub tem: f64,
    pub style: f64,
    /// L1 share inside the reconstruction term.
    pub mu: f64,
    /// Triplet margin.
    pub gamma: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            rec: 88.0,
            trip: 1.0,
            sync: 1.0,
            tem: 1.0,
            style: 1.0,
            mu: 0.1,
            gamma: 5.0,
        }
    }
}

/// Mean absolute difference of two same-shape vars.
pub fn l1_mean<R: Real>(tape: &mut Tape<R>, a: Var, b: Var) -> Var {
    let d = tape.sub(a, b);
    let d = tape.abs(d);
    tape.mean_all(d)
}

/// Mean SSIM of two same-shape 2-D signals using a uniform window and the
/// standard stabilizers C1=(0.01 R)^2, C2=(0.03 R)^2. The window shrinks
/// to fit signals smaller than the default 7x7.
pub fn ssim_mean<R: Real>(tape: &mut Tape<R>, a: Var, b: Var) -> Var {
    let (rows, cols) = tape.value(a).shape();
    assert_eq!(tape.value(b).shape(), (rows, cols), "ssim shape mismatch");
    let win = SSIM_WINDOW.min(rows).min(cols);
    let c1 = R::from_f64((0.01 * SSIM_RANGE) * (0.01 * SSIM_RANGE));
    let c2 = R::from_f64((0.03 * SSIM_RANGE) * (0.03 * SSIM_RANGE));

    let mu_a = tape.box_filter(a, win);
    let mu_b = tape.box_filter(b, win);
    let aa = tape.mul_elem(a, a);
    let bb = tape.mul_elem(b, b);
    let ab = tape.mul_elem(a, b);
    let e_aa = tape.box_filter(aa, win);
    let e_bb = tape.box_filter(bb, win);
    let e_ab = tape.box_filter(ab, win);
    let mu_aa = tape.mul_elem(mu_a, mu_a);
    let mu_bb = tape.mul_elem(mu_b, mu_b);
    let mu_ab = tape.mul_elem(mu_a, mu_b);
    let var_a = tape.sub(e_aa, mu_aa);
    let var_b = tape.sub(e_bb, mu_bb);
    let cov = tape.sub(e_ab, mu_ab);

    // ((2 mu_a mu_b + C1)(2 cov + C2)) / ((mu_a^2 + mu_b^2 + C1)(var_a + var_b + C2))
    let two = R::from_f64(2.0);
    let n1 = tape.affine(mu_ab, two, c1);
    let n2 = tape.affine(cov, two, c2);
    let num = tape.mul_elem(n1, n2);
    let d1s = tape.add(mu_aa, mu_bb);
    let d1 = tape.affine(d1s, R::one(), c1);
    let d2s = tape.add(var_a, var_b);
    let d2 = tape.affine(d2s, R::one(), c2);
    let den = tape.mul_elem(d1, d2);
    let map = tape.div_elem(num, den);
    tape.mean_all(map)
}

/// Reconstruction loss: mu * L1 + (1 - mu) * (1 - SSIM).
pub fn rec_loss<R: Real>(tape: &mut Tape<R>, gt: Var, pred: Var, mu: f64) -> Var {
    let l1 = l1_mean(tape, gt, pred);
    let ssim = ssim_mean(tape, gt, pred);
    combine_rec_terms(tape, l1, ssim, mu)
}

/// Weighted mix of precomputed L1 and SSIM scalars (split out so the
/// weighting itself is testable in isolation).
pub fn combine_rec_terms<R: Real>(tape: &mut Tape<R>, l1: Var, ssim: Var, mu: f64) -> Var {
    let m = R::from_f64(mu);
    let rest = R::one() - m;
    let a = tape.affine(l1, m, R::zero());
    // (1 - mu) * (1 - ssim) = -(1-mu)*ssim + (1-mu)
    let b = tape.affine(ssim, -rest, rest);
    tape.add(a, b)
}

/// Triplet hinge on style-code distances:
/// max(||c - p|| - ||c - n|| + gamma, 0).
pub fn triplet_loss<R: Real>(tape: &mut Tape<R>, c: Var, p: Var, n: Var, gamma: f64) -> Var {
    let dp = l2_distance(tape, c, p);
    let dn = l2_distance(tape, c, n);
    let diff = tape.sub(dp, dn);
    let shifted = tape.affine(diff, R::one(), R::from_f64(gamma));
    tape.relu(shifted)
}

fn l2_distance<R: Real>(tape: &mut Tape<R>, a: Var, b: Var) -> Var {
    let d = tape.sub(a, b);
    let sq = tape.mul_elem(d, d);
    let sum = tape.sum_all(sq);
    tape.sqrt(sum)
}

/// Mean of -log over per-frame sync probabilities, floored so any
/// nonpositive cosine still yields a finite value.
pub fn sync_clip_loss<R: Real>(tape: &mut Tape<R>, frame_probs: &[Var]) -> Var {
    assert!(!frame_probs.is_empty(), "sync loss needs >= 1 frame");
    let row = tape.concat_cols(frame_probs);
    neg_log_mean(tape, row)
}

/// Cross-entropy of a simplex row against one label: -log(P[label]).
pub fn class_nll<R: Real>(tape: &mut Tape<R>, probs: Var, label: usize) -> Result<Var> {
    let c = tape.value(probs).cols();
    if label >= c {
        return Err(CoreError::Vocab {
            label: label as u32,
            vocab: c as u32,
        });
    }
    let onehot = tape.constant(Tensor::from_fn(1, c, |_, j| {
        if j == label {
            R::one()
        } else {
            R::zero()
        }
    }));
    let picked = tape.mul_elem(probs, onehot);
    let p = tape.sum_all(picked);
    let row = tape.reshape(p, 1, 1);
    Ok(neg_log_mean(tape, row))
}

fn neg_log_mean<R: Real>(tape: &mut Tape<R>, row: Var) -> Var {
    let clamped = tape.clamp(row, R::from_f64(LOG_EPS), R::one());
    let logs = tape.ln(clamped);
    let mean = tape.mean_all(logs);
    tape.neg(mean)
}

/// Binary cross-entropy on a cosine score mapped to (1+p)/2, used to
/// pretrain the sync discriminator.
pub fn bce_from_cosine<R: Real>(tape: &mut Tape<R>, cosine: Var, positive: bool) -> Var {
    let half = R::from_f64(0.5);
    let q = tape.affine(cosine, half, half);
    let q = tape.clamp(q, R::from_f64(LOG_EPS), R::from_f64(1.0 - LOG_EPS));
    let target = if positive {
        q
    } else {
        tape.affine(q, -R::one(), R::one()) // 1 - q
    };
    let l = tape.ln(target);
    tape.neg(l)
}

/// Critic side of the hinge GAN objective:
/// mean(max(0, 1 - D(real))) + mean(max(0, 1 + D(fake))).
pub fn hinge_critic_loss<R: Real>(tape: &mut Tape<R>, real_scores: Var, fake_scores: Var) -> Var {
    let r = tape.affine(real_scores, -R::one(), R::one());
    let r = tape.relu(r);
    let r = tape.mean_all(r);
    let f = tape.affine(fake_scores, R::one(), R::one());
    let f = tape.relu(f);
    let f = tape.mean_all(f);
    tape.add(r, f)
}

/// Generator side of the hinge objective: -mean(D(fake)).
pub fn hinge_generator_loss<R: Real>(tape: &mut Tape<R>, fake_scores: Var) -> Var {
    let m = tape.mean_all(fake_scores);
    tape.neg(m)
}

/// The five loss components of one training step, as tape vars.
#[derive(Debug, Clone, Copy)]
pub struct LossTerms {
    pub rec: Var,
    pub trip: Var,
    pub sync: Var,
    pub tem: Var,
    pub style: Var,
}

/// Weighted total objective.
pub fn total_loss<R: Real>(tape: &mut Tape<R>, terms: &LossTerms, w: &LossWeights) -> Var {
    let mut acc = tape.affine(terms.rec, R::from_f64(w.rec), R::zero());
    for (v, lambda) in [
        (terms.trip, w.trip),
        (terms.sync, w.sync),
        (terms.tem, w.tem),
        (terms.style, w.style),
    ] {
        let t = tape.affine(v, R::from_f64(lambda), R::zero());
        acc = tape.add(acc, t);
    }
    acc
}

/// Loss component values of one step, for logging and NaN diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossValues {
    pub rec: f64,
    pub trip: f64,
    pub sync: f64,
    pub tem: f64,
    pub style: f64,
    pub total: f64,
}

impl LossValues {
    /// Error naming the first non-finite component, if any.
    pub fn check_finite(&self) -> Result<()> {
        let entries: [(&'static str, f64); 6] = [
            ("rec", self.rec),
            ("trip", self.trip),
            ("sync", self.sync),
            ("tem", self.tem),
            ("style", self.style),
            ("total", self.total),
        ];
        for (name, v) in entries {
            if !v.is_finite() {
                return Err(CoreError::Numeric { component: name });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use alloc::vec;

    fn row(tape: &mut Tape<f64>, v: Vec<f64>) -> Var {
        tape.input(Tensor::row_vec(v))
    }

    #[test]
    fn rec_identity_is_zero() {
        let mut tape: Tape<f64> = Tape::new();
        let x = tape.input(Tensor::from_fn(8, 64, |r, c| ((r * c) as f64 * 0.05).sin()));
        let loss = rec_loss(&mut tape, x, x, 0.1);
        assert!(tape.value(loss).item().abs() < 1e-12);
    }

    #[test]
    fn rec_weighting_is_mu() {
        // forced terms: L1 = 1, SSIM = 0 -> loss = mu*1 + (1-mu)*1... with
        // SSIM=0 the structural term contributes (1-mu); use SSIM=1 for 0.
        let mut tape: Tape<f64> = Tape::new();
        let l1 = tape.input(Tensor::scalar(1.0));
        let ssim = tape.input(Tensor::scalar(1.0));
        let loss = combine_rec_terms(&mut tape, l1, ssim, 0.1);
        assert!((tape.value(loss).item() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn rec_constant_offset_closed_form() {
        // gt = zeros, pred = ones: L1 = 1. Both signals are constant, so
        // mu/var/cov windows give SSIM = C1/(1+C1) everywhere.
        let mut tape: Tape<f64> = Tape::new();
        let gt = tape.input(Tensor::zeros(8, 64));
        let pred = tape.input(Tensor::from_fn(8, 64, |_, _| 1.0));
        let loss = rec_loss(&mut tape, gt, pred, 0.1);
        let c1 = 0.0036f64;
        let ssim = c1 / (1.0 + c1);
        let want = 0.1 * 1.0 + 0.9 * (1.0 - ssim);
        assert!((tape.value(loss).item() - want).abs() < 1e-12);
    }

    #[test]
    fn triplet_margin_satisfied_is_zero() {
        let mut tape: Tape<f64> = Tape::new();
        let c = row(&mut tape, vec![0.0, 0.0]);
        let p = row(&mut tape, vec![0.0, 0.0]);
        let n = row(&mut tape, vec![10.0, 0.0]);
        let loss = triplet_loss(&mut tape, c, p, n, 5.0);
        assert_eq!(tape.value(loss).item(), 0.0);
    }

    #[test]
    fn triplet_degenerate_equality_is_margin() {
        let mut tape: Tape<f64> = Tape::new();
        let c = row(&mut tape, vec![0.3, -0.4]);
        let loss = triplet_loss(&mut tape, c, c, c, 5.0);
        assert_eq!(tape.value(loss).item(), 5.0);
    }

    #[test]
    fn triplet_hinge_arithmetic() {
        // d_p = 3, d_n = 4 -> max(3 - 4 + 5, 0) = 4
        let mut tape: Tape<f64> = Tape::new();
        let c = row(&mut tape, vec![0.0, 0.0]);
        let p = row(&mut tape, vec![3.0, 0.0]);
        let n = row(&mut tape, vec![0.0, 4.0]);
        let loss = triplet_loss(&mut tape, c, p, n, 5.0);
        assert!((tape.value(loss).item() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn sync_loss_of_perfect_probs_is_zero() {
        let mut tape: Tape<f64> = Tape::new();
        let probs: Vec<Var> = (0..4).map(|_| tape.input(Tensor::scalar(1.0))).collect();
        let loss = sync_clip_loss(&mut tape, &probs);
        assert_eq!(tape.value(loss).item(), 0.0);
    }

    #[test]
    fn sync_loss_of_inv_e_is_one() {
        let mut tape: Tape<f64> = Tape::new();
        let p = (-1.0f64).exp();
        let probs: Vec<Var> = (0..3).map(|_| tape.input(Tensor::scalar(p))).collect();
        let loss = sync_clip_loss(&mut tape, &probs);
        assert!((tape.value(loss).item() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sync_loss_floors_nonpositive_probs() {
        let mut tape: Tape<f64> = Tape::new();
        let probs = vec![tape.input(Tensor::scalar(-0.3))];
        let loss = sync_clip_loss(&mut tape, &probs);
        let want = -(1e-7f64).ln(); // ≈ 16.118
        assert!((tape.value(loss).item() - want).abs() < 1e-9);
        assert!((want - 16.118).abs() < 1e-3);
    }

    #[test]
    fn class_nll_certain_prediction_is_zero() {
        let mut tape: Tape<f64> = Tape::new();
        let p = row(&mut tape, vec![0.0, 1.0, 0.0]);
        let loss = class_nll(&mut tape, p, 1).unwrap();
        assert_eq!(tape.value(loss).item(), 0.0);
    }

    #[test]
    fn class_nll_uniform_four_way() {
        let mut tape: Tape<f64> = Tape::new();
        let p = row(&mut tape, vec![0.25; 4]);
        let loss = class_nll(&mut tape, p, 2).unwrap();
        assert!((tape.value(loss).item() - 0.25f64.ln().abs()).abs() < 1e-12);
        assert!((tape.value(loss).item() - 1.3863).abs() < 1e-4);
    }

    #[test]
    fn class_nll_zero_prob_uses_floor() {
        let mut tape: Tape<f64> = Tape::new();
        let p = row(&mut tape, vec![1.0, 0.0]);
        let loss = class_nll(&mut tape, p, 1).unwrap();
        assert!((tape.value(loss).item() - -(1e-7f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn class_nll_rejects_bad_label() {
        let mut tape: Tape<f64> = Tape::new();
        let p = row(&mut tape, vec![0.5, 0.5]);
        assert!(class_nll(&mut tape, p, 2).is_err());
    }

    #[test]
    fn hinge_satisfied_critic_is_zero() {
        let mut tape: Tape<f64> = Tape::new();
        let real = row(&mut tape, vec![1.0, 1.0]);
        let fake = row(&mut tape, vec![-1.0, -1.0]);
        let loss = hinge_critic_loss(&mut tape, real, fake);
        assert_eq!(tape.value(loss).item(), 0.0);
    }

    #[test]
    fn hinge_generator_zero_scores() {
        let mut tape: Tape<f64> = Tape::new();
        let fake = row(&mut tape, vec![0.0, 0.0, 0.0]);
        let loss = hinge_generator_loss(&mut tape, fake);
        assert_eq!(tape.value(loss).item(), 0.0);
    }

    #[test]
    fn hinge_critic_half_scores() {
        // D(real) = D(fake) = 0.5 on one patch: (1-0.5) + (1+0.5) = 2.0
        let mut tape: Tape<f64> = Tape::new();
        let real = row(&mut tape, vec![0.5]);
        let fake = row(&mut tape, vec![0.5]);
        let loss = hinge_critic_loss(&mut tape, real, fake);
        assert!((tape.value(loss).item() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn total_weighting() {
        let w = LossWeights::default();
        let mut tape: Tape<f64> = Tape::new();
        let zero = tape.input(Tensor::scalar(0.0));
        let one = tape.input(Tensor::scalar(1.0));

        let t0 = total_loss(
            &mut tape,
            &LossTerms {
                rec: zero,
                trip: zero,
                sync: zero,
                tem: zero,
                style: zero,
            },
            &w,
        );
        assert_eq!(tape.value(t0).item(), 0.0);

        let t_rec = total_loss(
            &mut tape,
            &LossTerms {
                rec: one,
                trip: zero,
                sync: zero,
                tem: zero,
                style: zero,
            },
            &w,
        );
        assert_eq!(tape.value(t_rec).item(), 88.0);

        let t_all = total_loss(
            &mut tape,
            &LossTerms {
                rec: one,
                trip: one,
                sync: one,
                tem: one,
                style: one,
            },
            &w,
        );
        assert_eq!(tape.value(t_all).item(), 92.0);
    }

    #[test]
    fn total_linear_in_each_component() {
        let w = LossWeights::default();
        let mut tape: Tape<f64> = Tape::new();
        let zero = tape.input(Tensor::scalar(0.0));
        let x = tape.input(Tensor::scalar(0.37));
        let terms = LossTerms {
            rec: zero,
            trip: x,
            sync: zero,
            tem: zero,
            style: zero,
        };
        let t = total_loss(&mut tape, &terms, &w);
        assert!((tape.value(t).item() - 0.37).abs() < 1e-12);
    }

    #[test]
    fn nan_component_detected_by_name() {
        let v = LossValues {
            rec: 1.0,
            trip: f64::NAN,
            sync: 0.0,
            tem: 0.0,
            style: 0.0,
            total: f64::NAN,
        };
        let err = v.check_finite().unwrap_err();
        match err {
            CoreError::Numeric { component } => assert_eq!(component, "trip"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn bce_prefers_high_cosine_for_positives() {
        let mut tape: Tape<f64> = Tape::new();
        let hi = tape.input(Tensor::scalar(0.9));
        let lo = tape.input(Tensor::scalar(-0.9));
        let l_hi = bce_from_cosine(&mut tape, hi, true);
        let l_lo = bce_from_cosine(&mut tape, lo, true);
        assert!(tape.value(l_hi).item() < tape.value(l_lo).item());
        let l_neg = bce_from_cosine(&mut tape, lo, false);
        assert!(tape.value(l_neg).item() < tape.value(l_hi).item() + 1.0);
    }
}
