//! Style-controllable dynamic decoder.
//!
//! Style tokens (the style code repeated across the window, plus position
//! encodings) query the articulation features through standard decoder
//! blocks whose feed-forward layers are *adaptive*: each holds K parallel
//! weight kernels, and a softmax head maps the style code to blend weights
//! over the kernels. The blended weight matrix is applied once — blending
//! happens in weight space, before the nonlinearity, never by averaging K
//! separate outputs.
//!
//! Two decoder instances run in parallel per frame, one emitting the 13
//! lower-face coefficients, the other the 51 upper-face ones.

use alloc::format;
use alloc::vec::Vec;

use crate::config::ModelConfig;
use crate::error::{CoreError, Result};
use crate::nn::{
    glorot, sin_position_table, LayerNorm, Linear, MultiHeadAttention, ParamId, ParamStore,
};
use crate::real::Real;
use crate::rng::SeedRng;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Softmax blend weights over K kernels from a style code: pi = softmax(s A + b).
/// Returns a 1 x K var on the simplex.
pub fn kernel_attention<R: Real>(
    ps: &ParamStore<R>,
    tape: &mut Tape<R>,
    head: &Linear,
    style: Var,
) -> Var {
    let scores = head.forward(ps, tape, style);
    tape.softmax_rows(scores)
}

/// One adaptive feed-forward layer: K weight kernels with a style-driven
/// softmax over them. In static mode (the ablation) it is a plain dense
/// layer and the style code is ignored.
#[derive(Debug, Clone)]
pub enum AdaptiveFF {
    Dynamic {
        /// K kernels, each (in x out).
        kernels: Vec<ParamId>,
        /// K bias rows, each (1 x out).
        biases: Vec<ParamId>,
        /// Style -> K scores head.
        attn: Linear,
    },
    Static(Linear),
}

/// The style-independent-per-frame pieces of one adaptive layer, computed
/// once per decoded sequence: the blended weight matrix and bias row.
#[derive(Debug, Clone, Copy)]
pub struct BlendedFF {
    pub w: Var,
    pub b: Var,
}

impl AdaptiveFF {
    pub fn new<R: Real>(
        ps: &mut ParamStore<R>,
        rng: &mut SeedRng,
        name: &str,
        cfg: &ModelConfig,
        in_dim: usize,
        out_dim: usize,
    ) -> Self {
        if !cfg.dynamic_ffn {
            return AdaptiveFF::Static(Linear::new(ps, rng, name, in_dim, out_dim, true));
        }
        let kernels = (0..cfg.kernels)
            .map(|k| ps.register(&format!("{name}.k{k}.w"), glorot(rng, in_dim, out_dim)))
            .collect();
        let biases = (0..cfg.kernels)
            .map(|k| ps.register(&format!("{name}.k{k}.b"), Tensor::zeros(1, out_dim)))
            .collect();
        let attn = Linear::new(ps, rng, &format!("{name}.attn"), cfg.d_s, cfg.kernels, true);
        AdaptiveFF::Dynamic {
            kernels,
            biases,
            attn,
        }
    }

    /// Resolve the layer against a style code: blend kernels by the style's
    /// softmax weights (dynamic) or lease the single kernel (static).
    pub fn blend<R: Real>(
        &self,
        ps: &ParamStore<R>,
        tape: &mut Tape<R>,
        style: Var,
    ) -> BlendedFF {
        match self {
            AdaptiveFF::Dynamic {
                kernels,
                biases,
                attn,
            } => {
                let pi = kernel_attention(ps, tape, attn, style);
                let kvars: Vec<Var> = kernels.iter().map(|&k| ps.lease(tape, k)).collect();
                let bvars: Vec<Var> = biases.iter().map(|&b| ps.lease(tape, b)).collect();
                let w = tape.blend_stack(pi, &kvars);
                let b = tape.blend_stack(pi, &bvars);
                BlendedFF { w, b }
            }
            AdaptiveFF::Static(lin) => {
                let w = ps.lease(tape, lin.w);
                let b = ps.lease(tape, lin.b.expect("static layer has a bias"));
                BlendedFF { w, b }
            }
        }
    }

    /// Apply a previously blended layer: x W~ + b~.
    pub fn apply<R: Real>(&self, tape: &mut Tape<R>, blended: BlendedFF, x: Var) -> Var {
        let y = tape.matmul(x, blended.w);
        tape.add_row(y, blended.b)
    }

    /// Blend weights for a style code as plain values (diagnostics/tests).
    pub fn attention_values<R: Real>(&self, ps: &ParamStore<R>, style: &Tensor<R>) -> Option<Tensor<R>> {
        match self {
            AdaptiveFF::Dynamic { attn, .. } => {
                let mut tape = Tape::new();
                let s = tape.constant(style.clone());
                let pi = kernel_attention(ps, &mut tape, attn, s);
                Some(tape.value(pi).clone())
            }
            AdaptiveFF::Static(_) => None,
        }
    }
}

/// One decoder block: self-attention over style tokens, cross-attention
/// into the window's articulation features, then two adaptive feed-forward
/// layers with a ReLU between them. Pre-norm residual wiring throughout.
#[derive(Debug, Clone)]
pub struct DecoderBlock {
    ln1: LayerNorm,
    self_attn: MultiHeadAttention,
    ln2: LayerNorm,
    cross_attn: MultiHeadAttention,
    ln3: LayerNorm,
    ff1: AdaptiveFF,
    ff2: AdaptiveFF,
}

impl DecoderBlock {
    fn new<R: Real>(
        ps: &mut ParamStore<R>,
        rng: &mut SeedRng,
        name: &str,
        cfg: &ModelConfig,
    ) -> Self {
        DecoderBlock {
            ln1: LayerNorm::new(ps, &format!("{name}.ln1"), cfg.d_s),
            self_attn: MultiHeadAttention::new(
                ps,
                rng,
                &format!("{name}.self"),
                cfg.d_s,
                cfg.d_s,
                cfg.d_s,
                cfg.n_heads,
            ),
            ln2: LayerNorm::new(ps, &format!("{name}.ln2"), cfg.d_s),
            cross_attn: MultiHeadAttention::new(
                ps,
                rng,
                &format!("{name}.cross"),
                cfg.d_s,
                cfg.d_a,
                cfg.d_s,
                cfg.n_heads,
            ),
            ln3: LayerNorm::new(ps, &format!("{name}.ln3"), cfg.d_s),
            ff1: AdaptiveFF::new(ps, rng, &format!("{name}.ff1"), cfg, cfg.d_s, cfg.ff_width),
            ff2: AdaptiveFF::new(ps, rng, &format!("{name}.ff2"), cfg, cfg.ff_width, cfg.d_s),
        }
    }
}

/// Per-sequence prepared state: initial style tokens plus each block's
/// blended feed-forward weights. All of it depends only on the style code,
/// so it is computed once and shared across every frame of a sequence.
pub struct PreparedStyle {
    pub tokens: Var,
    blended: Vec<(BlendedFF, BlendedFF)>,
}

/// Decoder for one face group (13 lower or 51 upper coefficients).
#[derive(Debug, Clone)]
pub struct GroupDecoder {
    blocks: Vec<DecoderBlock>,
    final_ln: LayerNorm,
    readout: Linear,
    group_dim: usize,
    window: usize,
    d_s: usize,
}

impl GroupDecoder {
    pub fn new<R: Real>(
        ps: &mut ParamStore<R>,
        rng: &mut SeedRng,
        name: &str,
        cfg: &ModelConfig,
        group_dim: usize,
    ) -> Self {
        let blocks = (0..cfg.decoder_blocks)
            .map(|i| DecoderBlock::new(ps, rng, &format!("{name}.block{i}"), cfg))
            .collect();
        GroupDecoder {
            blocks,
            final_ln: LayerNorm::new(ps, &format!("{name}.ln_out"), cfg.d_s),
            readout: Linear::new(ps, rng, &format!("{name}.readout"), cfg.d_s, group_dim, true),
            group_dim,
            window: cfg.window,
            d_s: cfg.d_s,
        }
    }

    pub fn group_dim(&self) -> usize {
        self.group_dim
    }

    /// Style tokens for a code: the code repeated 2w+1 times, plus the
    /// sinusoidal position row for each slot.
    pub fn make_style_tokens<R: Real>(&self, tape: &mut Tape<R>, style: Var) -> Var {
        let n = 2 * self.window + 1;
        let rep = tape.repeat_row(style, n);
        let pe = tape.constant(sin_position_table(n, self.d_s));
        tape.add(rep, pe)
    }

    /// Resolve everything that depends only on the style code.
    pub fn prepare<R: Real>(
        &self,
        ps: &ParamStore<R>,
        tape: &mut Tape<R>,
        style: Var,
    ) -> PreparedStyle {
        let tokens = self.make_style_tokens(tape, style);
        let blended = self
            .blocks
            .iter()
            .map(|b| {
                (
                    b.ff1.blend(ps, tape, style),
                    b.ff2.blend(ps, tape, style),
                )
            })
            .collect();
        PreparedStyle { tokens, blended }
    }

    /// Decode one frame: run the prepared style tokens against this frame's
    /// articulation features and read the middle token out as the group's
    /// coefficients (1 x group_dim).
    pub fn decode_frame<R: Real>(
        &self,
        ps: &ParamStore<R>,
        tape: &mut Tape<R>,
        prep: &PreparedStyle,
        audio: Var,
    ) -> Result<Var> {
        let expected = 2 * self.window + 1;
        if tape.value(audio).rows() != expected {
            return Err(CoreError::contract(
                "articulation features must cover the full window",
            ));
        }
        let mut x = prep.tokens;
        for (block, (b1, b2)) in self.blocks.iter().zip(&prep.blended) {
            let n1 = block.ln1.forward(ps, tape, x);
            let a = block.self_attn.forward(ps, tape, n1, n1);
            x = tape.add(x, a);
            let n2 = block.ln2.forward(ps, tape, x);
            let c = block.cross_attn.forward(ps, tape, n2, audio);
            x = tape.add(x, c);
            let n3 = block.ln3.forward(ps, tape, x);
            let h = block.ff1.apply(tape, *b1, n3);
            let h = tape.relu(h);
            let h = block.ff2.apply(tape, *b2, h);
            x = tape.add(x, h);
        }
        let x = self.final_ln.forward(ps, tape, x);
        let middle = tape.select_row(x, self.window);
        Ok(self.readout.forward(ps, tape, middle))
    }
}

/// Reference formula for one adaptive layer, used as an independent oracle
/// in tests: y = g(x (sum_k pi_k W_k) + sum_k pi_k b_k). Weights are blended
/// first; g is applied once to the single blended result.
pub fn dynamic_ffn_reference<R: Real>(
    x: &[R],
    pi: &[R],
    kernels: &[Tensor<R>],
    biases: &[Tensor<R>],
    g: impl Fn(R) -> R,
) -> Vec<R> {
    let out_dim = kernels[0].cols();
    let mut y = Vec::with_capacity(out_dim);
    for o in 0..out_dim {
        let mut acc = R::zero();
        for (k, w) in kernels.iter().enumerate() {
            let mut term = biases[k].data()[o];
            for (i, &xi) in x.iter().enumerate() {
                term = term + xi * w.get(i, o);
            }
            acc = acc + pi[k] * term;
        }
        y.push(g(acc));
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn kernel_attention_uniform_for_zero_head() {
        let mut ps: ParamStore<f64> = ParamStore::new();
        let mut rng = SeedRng::new(1);
        let head = Linear::new(&mut ps, &mut rng, "ka", 4, 8, true);
        *ps.get_mut(head.w) = Tensor::zeros(4, 8);
        let mut tape = Tape::new();
        let s = tape.input(Tensor::row_vec(vec![0.3, -0.2, 0.9, 0.1]));
        let pi = kernel_attention(&ps, &mut tape, &head, s);
        for &p in tape.value(pi).data() {
            assert!((p - 0.125).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_attention_single_kernel_is_one() {
        let mut ps: ParamStore<f64> = ParamStore::new();
        let mut rng = SeedRng::new(2);
        let head = Linear::new(&mut ps, &mut rng, "ka", 4, 1, true);
        let mut tape = Tape::new();
        let s = tape.input(Tensor::row_vec(vec![1.0, 2.0, 3.0, 4.0]));
        let pi = kernel_attention(&ps, &mut tape, &head, s);
        assert_eq!(tape.value(pi).item(), 1.0);
    }

    #[test]
    fn kernel_attention_hand_softmax() {
        // scores (0, ln 3) -> pi = (1/4, 3/4)
        let mut ps: ParamStore<f64> = ParamStore::new();
        let mut rng = SeedRng::new(3);
        let head = Linear::new(&mut ps, &mut rng, "ka", 1, 2, true);
        *ps.get_mut(head.w) = Tensor::from_vec(1, 2, vec![0.0, (3.0f64).ln()]);
        *ps.get_mut(head.b.unwrap()) = Tensor::zeros(1, 2);
        let mut tape = Tape::new();
        let s = tape.input(Tensor::scalar(1.0));
        let pi = kernel_attention(&ps, &mut tape, &head, s);
        let v = tape.value(pi);
        assert!((v.get(0, 0) - 0.25).abs() < 1e-12);
        assert!((v.get(0, 1) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn blend_matches_hand_example() {
        // K=2, scalar kernels 2 and 4, biases 0 and 1, pi=(0.5,0.5), x=1:
        // blended weight 3, blended bias 0.5, y = 3*1 + 0.5 = 3.5
        let mut tape: Tape<f64> = Tape::new();
        let pi = tape.input(Tensor::row_vec(vec![0.5, 0.5]));
        let k1 = tape.input(Tensor::scalar(2.0));
        let k2 = tape.input(Tensor::scalar(4.0));
        let b1 = tape.input(Tensor::scalar(0.0));
        let b2 = tape.input(Tensor::scalar(1.0));
        let w = tape.blend_stack(pi, &[k1, k2]);
        let b = tape.blend_stack(pi, &[b1, b2]);
        let x = tape.input(Tensor::scalar(1.0));
        let y = tape.matmul(x, w);
        let y = tape.add_row(y, b);
        assert_eq!(tape.value(y).item(), 3.5);
    }

    #[test]
    fn one_hot_blend_selects_single_kernel() {
        let mut tape: Tape<f64> = Tape::new();
        let pi = tape.input(Tensor::row_vec(vec![0.0, 1.0]));
        let k1 = tape.input(Tensor::from_vec(2, 2, vec![1., 2., 3., 4.]));
        let k2 = tape.input(Tensor::from_vec(2, 2, vec![5., 6., 7., 8.]));
        let w = tape.blend_stack(pi, &[k1, k2]);
        assert_eq!(tape.value(w).data(), &[5., 6., 7., 8.]);
    }

    #[test]
    fn reference_oracle_agrees_with_tape_blend() {
        let mut rng = SeedRng::new(17);
        for _ in 0..20 {
            let (din, dout, k) = (3usize, 2usize, 4usize);
            let kernels: Vec<Tensor<f64>> = (0..k)
                .map(|_| Tensor::from_fn(din, dout, |_, _| rng.normal()))
                .collect();
            let biases: Vec<Tensor<f64>> = (0..k)
                .map(|_| Tensor::from_fn(1, dout, |_, _| rng.normal()))
                .collect();
            // random simplex point
            let raw: Vec<f64> = (0..k).map(|_| rng.uniform() + 1e-3).collect();
            let norm: f64 = raw.iter().sum();
            let pi: Vec<f64> = raw.iter().map(|v| v / norm).collect();
            let x: Vec<f64> = (0..din).map(|_| rng.normal()).collect();

            let mut tape = Tape::new();
            let pi_v = tape.input(Tensor::row_vec(pi.clone()));
            let kv: Vec<Var> = kernels.iter().map(|t| tape.input(t.clone())).collect();
            let bv: Vec<Var> = biases.iter().map(|t| tape.input(t.clone())).collect();
            let w = tape.blend_stack(pi_v, &kv);
            let b = tape.blend_stack(pi_v, &bv);
            let xv = tape.input(Tensor::row_vec(x.clone()));
            let y = tape.matmul(xv, w);
            let y = tape.add_row(y, b);
            let y = tape.relu(y);

            let want = dynamic_ffn_reference(&x, &pi, &kernels, &biases, |v| v.max(0.0));
            for (got, want) in tape.value(y).data().iter().zip(&want) {
                let rel = (got - want).abs() / want.abs().max(1e-12);
                assert!(rel < 1e-6, "blend mismatch: {got} vs {want}");
            }
        }
    }

    #[test]
    fn style_tokens_have_window_rows_and_differ() {
        let cfg = ModelConfig::tiny();
        let mut ps: ParamStore<f32> = ParamStore::new();
        let mut rng = SeedRng::new(5);
        let dec = GroupDecoder::new(&mut ps, &mut rng, "dec", &cfg, 13);
        let mut tape: Tape<f32> = Tape::new();
        let s = tape.input(Tensor::zeros(1, cfg.d_s));
        let tokens = dec.make_style_tokens(&mut tape, s);
        let v = tape.value(tokens);
        assert_eq!(v.shape(), (cfg.window_len(), cfg.d_s));
        // with s = 0, rows are exactly the position encodings: pairwise distinct
        for a in 0..v.rows() {
            for b in a + 1..v.rows() {
                assert_ne!(v.row(a), v.row(b), "rows {a} and {b} coincide");
            }
        }
    }

    #[test]
    fn decode_frame_output_dims() {
        let cfg = ModelConfig::tiny();
        let mut ps: ParamStore<f32> = ParamStore::new();
        let mut rng = SeedRng::new(6);
        let lower = GroupDecoder::new(&mut ps, &mut rng, "lower", &cfg, 13);
        let upper = GroupDecoder::new(&mut ps, &mut rng, "upper", &cfg, 51);
        let mut tape = Tape::new();
        let s = tape.input(Tensor::from_fn(1, cfg.d_s, |_, c| c as f32 * 0.1));
        let audio = tape.input(Tensor::from_fn(cfg.window_len(), cfg.d_a, |r, c| {
            (r * c) as f32 * 0.01
        }));
        let prep_l = lower.prepare(&ps, &mut tape, s);
        let prep_u = upper.prepare(&ps, &mut tape, s);
        let lo = lower.decode_frame(&ps, &mut tape, &prep_l, audio).unwrap();
        let up = upper.decode_frame(&ps, &mut tape, &prep_u, audio).unwrap();
        assert_eq!(tape.value(lo).shape(), (1, 13));
        assert_eq!(tape.value(up).shape(), (1, 51));
        assert!(tape.value(lo).all_finite());
        assert!(tape.value(up).all_finite());
    }

    #[test]
    fn wrong_audio_rows_rejected() {
        let cfg = ModelConfig::tiny();
        let mut ps: ParamStore<f32> = ParamStore::new();
        let mut rng = SeedRng::new(7);
        let dec = GroupDecoder::new(&mut ps, &mut rng, "dec", &cfg, 13);
        let mut tape = Tape::new();
        let s = tape.input(Tensor::zeros(1, cfg.d_s));
        let audio = tape.input(Tensor::zeros(cfg.window_len() + 1, cfg.d_a));
        let prep = dec.prepare(&ps, &mut tape, s);
        assert!(dec.decode_frame(&ps, &mut tape, &prep, audio).is_err());
    }
}
