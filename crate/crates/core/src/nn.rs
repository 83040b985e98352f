//! Network building blocks on top of the autodiff tape.
//!
//! Layers are plain structs of [`ParamId`]s — they own no tensors. All
//! weights live in a [`ParamStore`], which makes checkpointing, casting to
//! a wider float for gradient checks, and optimizer bookkeeping uniform.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;

use crate::real::Real;
use crate::rng::SeedRng;
use crate::tape::{Grads, Tape, Var};
use crate::tensor::Tensor;

/// Index of a parameter tensor inside its store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// Named, ordered collection of parameter tensors.
pub struct ParamStore<R> {
    names: Vec<String>,
    tensors: Vec<Tensor<R>>,
}

impl<R: Real> Default for ParamStore<R> {
    fn default() -> Self {
        Self::new()
    }
}

impl<R: Real> ParamStore<R> {
    pub fn new() -> Self {
        ParamStore {
            names: Vec::new(),
            tensors: Vec::new(),
        }
    }

    pub fn register(&mut self, name: &str, tensor: Tensor<R>) -> ParamId {
        assert!(
            !self.names.iter().any(|n| n == name),
            "duplicate parameter name: {name}"
        );
        self.names.push(String::from(name));
        self.tensors.push(tensor);
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<R> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<R> {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor<R>)> {
        self.names
            .iter()
            .zip(&self.tensors)
            .enumerate()
            .map(|(i, (n, t))| (ParamId(i), n.as_str(), t))
    }

    /// Total scalar count across all tensors.
    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    /// Put parameter `id` on the tape (differentiable leaf).
    pub fn lease(&self, tape: &mut Tape<R>, id: ParamId) -> Var {
        tape.param(id.0, || self.tensors[id.0].clone())
    }

    /// Put parameter `id` on the tape as a non-differentiable constant
    /// (frozen discriminators, inference).
    pub fn lease_frozen(&self, tape: &mut Tape<R>, id: ParamId) -> Var {
        tape.constant(self.tensors[id.0].clone())
    }

    /// Same parameters converted to another float width; ids are preserved.
    pub fn cast<S: Real>(&self) -> ParamStore<S> {
        ParamStore {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(|t| t.cast()).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.all_finite())
    }
}

/// Collects parameter gradients from a backward pass, keyed by [`ParamId`].
pub fn param_grads<R: Real>(grads: &Grads<R>) -> Vec<(ParamId, Tensor<R>)> {
    grads
        .params()
        .map(|(id, g)| (ParamId(id), g.clone()))
        .collect()
}

/// Uniform Glorot initialization: U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
pub fn glorot<R: Real>(rng: &mut SeedRng, rows: usize, cols: usize) -> Tensor<R> {
    let a = Float::sqrt(6.0 / (rows + cols) as f64);
    Tensor::from_fn(rows, cols, |_, _| R::from_f64(rng.uniform_in(-a, a)))
}

/// Gaussian initialization with the given standard deviation.
pub fn gaussian<R: Real>(rng: &mut SeedRng, rows: usize, cols: usize, std: f64) -> Tensor<R> {
    Tensor::from_fn(rows, cols, |_, _| R::from_f64(rng.normal() * std))
}

/// Sinusoidal position table: row t holds the encoding of position t.
/// Even columns carry sin(t / 10000^(c/d)), odd columns the matching cos.
pub fn sin_position_table<R: Real>(n_pos: usize, dim: usize) -> Tensor<R> {
    Tensor::from_fn(n_pos, dim, |t, c| {
        let pair = (c / 2) * 2; // exponent shared by the sin/cos pair
        let rate = Float::powf(10000f64, pair as f64 / dim as f64);
        let angle = t as f64 / rate;
        let v = if c % 2 == 0 {
            Float::sin(angle)
        } else {
            Float::cos(angle)
        };
        R::from_f64(v)
    })
}

/// How a layer's weights go onto the tape: as differentiable parameters or
/// as constants. Frozen leases are what let a discriminator judge the
/// generator without collecting gradients of its own — and, because frozen
/// weights never claim a parameter id, they are also how tensors from a
/// *second* store share a tape safely (ids are only unique per store).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lease {
    Train,
    Frozen,
}

impl<R: Real> ParamStore<R> {
    pub fn lease_mode(&self, tape: &mut Tape<R>, id: ParamId, mode: Lease) -> Var {
        match mode {
            Lease::Train => self.lease(tape, id),
            Lease::Frozen => self.lease_frozen(tape, id),
        }
    }
}

/// Dense affine layer: y = x W + b.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: Option<ParamId>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new<R: Real>(
        ps: &mut ParamStore<R>,
        rng: &mut SeedRng,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        bias: bool,
    ) -> Self {
        let w = ps.register(&format!("{name}.w"), glorot(rng, in_dim, out_dim));
        let b = bias.then(|| ps.register(&format!("{name}.b"), Tensor::zeros(1, out_dim)));
        Linear {
            w,
            b,
            in_dim,
            out_dim,
        }
    }

    pub fn forward<R: Real>(&self, ps: &ParamStore<R>, tape: &mut Tape<R>, x: Var) -> Var {
        self.forward_mode(ps, tape, x, Lease::Train)
    }

    pub fn forward_mode<R: Real>(
        &self,
        ps: &ParamStore<R>,
        tape: &mut Tape<R>,
        x: Var,
        mode: Lease,
    ) -> Var {
        let w = ps.lease_mode(tape, self.w, mode);
        let y = tape.matmul(x, w);
        match self.b {
            Some(b) => {
                let bv = ps.lease_mode(tape, b, mode);
                tape.add_row(y, bv)
            }
            None => y,
        }
    }
}

/// 1-D convolution over time with zero padding. Input (L x Cin), output
/// (Lout x Cout); weights are stored kernel-major as (Cout x k*Cin).
#[derive(Debug, Clone)]
pub struct Conv1dLayer {
    pub w: ParamId,
    pub b: ParamId,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Conv1dLayer {
    pub fn new<R: Real>(
        ps: &mut ParamStore<R>,
        rng: &mut SeedRng,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
    ) -> Self {
        let w = ps.register(&format!("{name}.w"), glorot(rng, cout, kernel * cin));
        let b = ps.register(&format!("{name}.b"), Tensor::zeros(1, cout));
        Conv1dLayer {
            w,
            b,
            kernel,
            stride,
            pad,
        }
    }

    pub fn forward_mode<R: Real>(
        &self,
        ps: &ParamStore<R>,
        tape: &mut Tape<R>,
        x: Var,
        mode: Lease,
    ) -> Var {
        let w = ps.lease_mode(tape, self.w, mode);
        let b = ps.lease_mode(tape, self.b, mode);
        tape.conv1d(x, w, b, self.kernel, self.stride, self.pad)
    }
}

/// Layer normalization with learnable scale and shift.
#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub eps: f64,
}

impl LayerNorm {
    pub fn new<R: Real>(ps: &mut ParamStore<R>, name: &str, dim: usize) -> Self {
        let gamma = ps.register(
            &format!("{name}.gamma"),
            Tensor::from_fn(1, dim, |_, _| R::one()),
        );
        let beta = ps.register(&format!("{name}.beta"), Tensor::zeros(1, dim));
        LayerNorm {
            gamma,
            beta,
            eps: 1e-5,
        }
    }

    pub fn forward<R: Real>(&self, ps: &ParamStore<R>, tape: &mut Tape<R>, x: Var) -> Var {
        let g = ps.lease(tape, self.gamma);
        let b = ps.lease(tape, self.beta);
        tape.layer_norm(x, g, b, R::from_f64(self.eps))
    }
}

#[derive(Debug, Clone)]
struct AttentionHead {
    q: Linear,
    k: Linear,
    v: Linear,
}

/// Multi-head scaled dot-product attention with separate per-head
/// projections. Queries may come from a different stream (and width) than
/// keys/values, which covers both self- and cross-attention.
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    heads: Vec<AttentionHead>,
    out: Linear,
    d_head: usize,
}

impl MultiHeadAttention {
    pub fn new<R: Real>(
        ps: &mut ParamStore<R>,
        rng: &mut SeedRng,
        name: &str,
        q_dim: usize,
        kv_dim: usize,
        d_model: usize,
        n_heads: usize,
    ) -> Self {
        assert!(
            d_model % n_heads == 0,
            "model width {d_model} not divisible by {n_heads} heads"
        );
        let d_head = d_model / n_heads;
        let heads = (0..n_heads)
            .map(|h| AttentionHead {
                q: Linear::new(ps, rng, &format!("{name}.h{h}.q"), q_dim, d_head, true),
                k: Linear::new(ps, rng, &format!("{name}.h{h}.k"), kv_dim, d_head, true),
                v: Linear::new(ps, rng, &format!("{name}.h{h}.v"), kv_dim, d_head, true),
            })
            .collect();
        let out = Linear::new(ps, rng, &format!("{name}.out"), d_model, d_model, true);
        MultiHeadAttention { heads, out, d_head }
    }

    pub fn forward<R: Real>(
        &self,
        ps: &ParamStore<R>,
        tape: &mut Tape<R>,
        queries: Var,
        keys_values: Var,
    ) -> Var {
        let scale = R::from_f64(1.0 / Float::sqrt(self.d_head as f64));
        let mut contexts = Vec::with_capacity(self.heads.len());
        for head in &self.heads {
            let q = head.q.forward(ps, tape, queries);
            let k = head.k.forward(ps, tape, keys_values);
            let v = head.v.forward(ps, tape, keys_values);
            let scores = tape.matmul_nt(q, k);
            let scaled = tape.affine(scores, scale, R::zero());
            let attn = tape.softmax_rows(scaled);
            contexts.push(tape.matmul(attn, v));
        }
        let cat = tape.concat_cols(&contexts);
        self.out.forward(ps, tape, cat)
    }
}

/// Pre-norm transformer encoder block: self-attention then a two-layer
/// feed-forward, each behind a residual connection.
#[derive(Debug, Clone)]
pub struct EncoderBlock {
    ln1: LayerNorm,
    attn: MultiHeadAttention,
    ln2: LayerNorm,
    ff1: Linear,
    ff2: Linear,
}

impl EncoderBlock {
    pub fn new<R: Real>(
        ps: &mut ParamStore<R>,
        rng: &mut SeedRng,
        name: &str,
        d_model: usize,
        n_heads: usize,
        ff_width: usize,
    ) -> Self {
        EncoderBlock {
            ln1: LayerNorm::new(ps, &format!("{name}.ln1"), d_model),
            attn: MultiHeadAttention::new(
                ps,
                rng,
                &format!("{name}.attn"),
                d_model,
                d_model,
                d_model,
                n_heads,
            ),
            ln2: LayerNorm::new(ps, &format!("{name}.ln2"), d_model),
            ff1: Linear::new(ps, rng, &format!("{name}.ff1"), d_model, ff_width, true),
            ff2: Linear::new(ps, rng, &format!("{name}.ff2"), ff_width, d_model, true),
        }
    }

    pub fn forward<R: Real>(&self, ps: &ParamStore<R>, tape: &mut Tape<R>, x: Var) -> Var {
        let n1 = self.ln1.forward(ps, tape, x);
        let a = self.attn.forward(ps, tape, n1, n1);
        let x = tape.add(x, a);
        let n2 = self.ln2.forward(ps, tape, x);
        let h = self.ff1.forward(ps, tape, n2);
        let h = tape.relu(h);
        let h = self.ff2.forward(ps, tape, h);
        tape.add(x, h)
    }
}

/// Stack of encoder blocks with a closing layer norm (pre-norm convention).
#[derive(Debug, Clone)]
pub struct EncoderStack {
    blocks: Vec<EncoderBlock>,
    final_ln: LayerNorm,
}

impl EncoderStack {
    pub fn new<R: Real>(
        ps: &mut ParamStore<R>,
        rng: &mut SeedRng,
        name: &str,
        n_layers: usize,
        d_model: usize,
        n_heads: usize,
        ff_width: usize,
    ) -> Self {
        let blocks = (0..n_layers)
            .map(|i| EncoderBlock::new(ps, rng, &format!("{name}.block{i}"), d_model, n_heads, ff_width))
            .collect();
        EncoderStack {
            blocks,
            final_ln: LayerNorm::new(ps, &format!("{name}.ln_out"), d_model),
        }
    }

    pub fn forward<R: Real>(&self, ps: &ParamStore<R>, tape: &mut Tape<R>, mut x: Var) -> Var {
        for block in &self.blocks {
            x = block.forward(ps, tape, x);
        }
        self.final_ln.forward(ps, tape, x)
    }
}

/// Adam optimizer with bias correction. Moment buffers are keyed by
/// parameter id, so one optimizer instance serves exactly one store.
pub struct Adam<R> {
    pub lr: R,
    pub beta1: R,
    pub beta2: R,
    pub eps: R,
    t: u64,
    m: Vec<Tensor<R>>,
    v: Vec<Tensor<R>>,
}

impl<R: Real> Adam<R> {
    pub fn new(store: &ParamStore<R>, lr: R) -> Self {
        let m = store
            .iter()
            .map(|(_, _, t)| Tensor::zeros(t.rows(), t.cols()))
            .collect::<Vec<_>>();
        let v = m.clone();
        Adam {
            lr,
            beta1: R::from_f64(0.9),
            beta2: R::from_f64(0.999),
            eps: R::from_f64(1e-8),
            t: 0,
            m,
            v,
        }
    }

    /// Apply one update from collected gradients. Parameters without a
    /// gradient this step are left untouched (their moments do not decay).
    pub fn step(&mut self, store: &mut ParamStore<R>, grads: &[(ParamId, Tensor<R>)]) {
        self.t += 1;
        let t = self.t as i32;
        let bc1 = R::one() - self.beta1.powi(t);
        let bc2 = R::one() - self.beta2.powi(t);
        for (id, g) in grads {
            let m = &mut self.m[id.0];
            let v = &mut self.v[id.0];
            let p = store.get_mut(*id);
            debug_assert_eq!(p.shape(), g.shape(), "gradient shape for param {}", id.0);
            for i in 0..p.len() {
                let gi = g.data()[i];
                let mi = self.beta1 * m.data()[i] + (R::one() - self.beta1) * gi;
                let vi = self.beta2 * v.data()[i] + (R::one() - self.beta2) * gi * gi;
                m.data_mut()[i] = mi;
                v.data_mut()[i] = vi;
                let mhat = mi / bc1;
                let vhat = vi / bc2;
                let cur = p.data()[i];
                p.data_mut()[i] = cur - self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }
}
