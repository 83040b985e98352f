//! Style encoder: expression sequence -> style code.
//!
//! Frames are embedded, position-tagged, run through a transformer encoder,
//! and reduced to a single code by self-attention pooling: a learnable row
//! scores every token, the softmax of those scores weights the tokens, and
//! the code is the weighted sum.

use alloc::vec::Vec;

use crate::config::ModelConfig;
use crate::error::{CoreError, Result};
use crate::motion::MotionSequence;
use crate::nn::{glorot, sin_position_table, EncoderStack, Linear, ParamId, ParamStore};
use crate::real::Real;
use crate::rng::SeedRng;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct StyleEncoder {
    embed: Linear,
    enc: EncoderStack,
    /// 1 x d_s scoring row of the pooling head.
    pool_w: ParamId,
    d_s: usize,
}

impl StyleEncoder {
    pub fn new<R: Real>(ps: &mut ParamStore<R>, rng: &mut SeedRng, cfg: &ModelConfig) -> Self {
        let embed = Linear::new(ps, rng, "style.embed", cfg.expr_dim, cfg.d_s, true);
        let enc = EncoderStack::new(
            ps,
            rng,
            "style.enc",
            cfg.style_layers,
            cfg.d_s,
            cfg.n_heads,
            cfg.ff_width,
        );
        let pool_w = ps.register("style.pool.w", glorot(rng, 1, cfg.d_s));
        StyleEncoder {
            embed,
            enc,
            pool_w,
            d_s: cfg.d_s,
        }
    }

    pub fn code_dim(&self) -> usize {
        self.d_s
    }

    /// Per-frame style tokens: (N x d_s), one row per input frame.
    pub fn encode_tokens<R: Real>(
        &self,
        ps: &ParamStore<R>,
        tape: &mut Tape<R>,
        m: &MotionSequence,
    ) -> Var {
        let x = tape.constant(m.to_matrix());
        let e = self.embed.forward(ps, tape, x);
        let pe = tape.constant(sin_position_table(m.len(), self.d_s));
        let e = tape.add(e, pe);
        self.enc.forward(ps, tape, e)
    }

    /// Pool tokens into a 1 x d_s code with this encoder's scoring row.
    pub fn pool<R: Real>(&self, ps: &ParamStore<R>, tape: &mut Tape<R>, tokens: Var) -> Var {
        let w = ps.lease(tape, self.pool_w);
        attention_pool(tape, tokens, w)
    }

    /// Full path: tokens then pooling. Returns a 1 x d_s code on the tape.
    pub fn extract<R: Real>(
        &self,
        ps: &ParamStore<R>,
        tape: &mut Tape<R>,
        m: &MotionSequence,
    ) -> Var {
        let tokens = self.encode_tokens(ps, tape, m);
        self.pool(ps, tape, tokens)
    }

    /// Inference convenience: run on a private tape, return plain values.
    pub fn extract_values<R: Real>(&self, ps: &ParamStore<R>, m: &MotionSequence) -> Tensor<R> {
        let mut tape = Tape::new();
        let code = self.extract(ps, &mut tape, m);
        tape.value(code).clone()
    }
}

/// Self-attention pooling: tokens (N x d), scores (1 x d) -> code (1 x d).
/// The code is sum_i alpha_i * token_i with alpha = softmax of the scalar
/// scores w . token_i, so it always lies in the tokens' convex hull.
pub fn attention_pool<R: Real>(tape: &mut Tape<R>, tokens: Var, w: Var) -> Var {
    let scores = tape.matmul_nt(w, tokens); // 1 x N
    let alpha = tape.softmax_rows(scores);
    tape.matmul(alpha, tokens) // 1 x d
}

/// Validate a style-code value buffer against the model width.
pub fn check_code_dim(values: &[f32], d_s: usize) -> Result<()> {
    if values.len() != d_s {
        return Err(CoreError::contract("style code width does not match model"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::contract("style code must be finite"));
    }
    Ok(())
}

/// Linear interpolation between two style codes. The endpoints are returned
/// verbatim (bit-identical), not recomputed through the arithmetic.
pub fn lerp_codes(a: &[f32], b: &[f32], alpha: f32) -> Result<Vec<f32>> {
    if a.len() != b.len() {
        return Err(CoreError::contract(
            "style codes must have the same width to interpolate",
        ));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(CoreError::contract(
            "interpolation weight must lie in [0, 1]",
        ));
    }
    if alpha == 0.0 {
        return Ok(a.to_vec());
    }
    if alpha == 1.0 {
        return Ok(b.to_vec());
    }
    Ok(a.iter()
        .zip(b)
        .map(|(&x, &y)| (1.0 - alpha) * x + alpha * y)
        .collect())
}
