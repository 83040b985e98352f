//! The three critics.
//!
//! * Lip-sync: two towers embed a frame's mouth point cloud and its phoneme
//!   window; their cosine similarity is the sync probability. Pretrained,
//!   then frozen.
//! * Style: a 1-D convolutional patch classifier over a whole clip, patch
//!   logits averaged before the class softmax. Pretrained, then frozen.
//! * Temporal: the same patch topology emitting one realism score per
//!   patch, trained jointly with the generator under a hinge objective.
//!
//! Patch critics follow the PatchGAN recipe translated to 1-D time:
//! stride-2 width-4 convolutions with LeakyReLU(0.2), so each score sees a
//! local temporal window of about 22 frames rather than the whole clip.

use alloc::format;
use alloc::vec::Vec;

use crate::config::ModelConfig;
use crate::error::{CoreError, Result};
use crate::motion::{ExpressionFrame, FaceBasis, EXPR_DIM};
use crate::nn::{gaussian, Conv1dLayer, Lease, Linear, ParamId, ParamStore};
use crate::real::Real;
use crate::rng::SeedRng;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Norm-product floor of the cosine in the sync probability.
pub const SYNC_EPS: f64 = 1e-8;
/// Floor inside -log terms; makes log losses total.
pub const LOG_EPS: f64 = 1e-7;
/// Negative slope of the patch critics' activations.
pub const LEAKY_SLOPE: f64 = 0.2;

/// Mouth vertex coordinates of one frame: mean + basis rows * coeffs,
/// flattened x0,y0,z0,x1,... (length 3M).
pub fn mouth_points(f: &ExpressionFrame, basis: &FaceBasis) -> Vec<f32> {
    let (rows, mean) = basis.mouth_rows();
    let mut out = mean;
    for (r, o) in out.iter_mut().enumerate() {
        let row = rows.row(r);
        let mut acc = 0.0f32;
        for (c, &b) in row.iter().enumerate() {
            acc += b * f.coeffs()[c];
        }
        *o += acc;
    }
    out
}

/// Precomputed tape constants for projecting frames to mouth geometry.
pub struct MouthProjector {
    /// (3M x 64) basis rows restricted to mouth coordinates.
    rows: Var,
    /// (1 x 3M) mean coordinates.
    mean: Var,
    n_points: usize,
}

impl MouthProjector {
    /// Stage the basis onto a tape once per tape.
    pub fn new<R: Real>(tape: &mut Tape<R>, basis: &FaceBasis) -> Self {
        let (rows, mean) = basis.mouth_rows();
        let n_points = basis.mouth_vertex_ids.len();
        let rows = tape.constant(rows.cast());
        let mean_t: Tensor<R> = Tensor::row_vec(mean).cast();
        let mean = tape.constant(mean_t);
        MouthProjector {
            rows,
            mean,
            n_points,
        }
    }

    /// Project one frame row (1 x 64) to its mouth cloud (M x 3).
    pub fn project<R: Real>(&self, tape: &mut Tape<R>, frame: Var) -> Var {
        let flat = tape.matmul_nt(frame, self.rows); // 1 x 3M
        let flat = tape.add(flat, self.mean);
        tape.reshape(flat, self.n_points, 3)
    }
}

/// Lip-sync discriminator: point-cloud tower + phoneme-window tower.
/// The mouth tower is a shared per-point MLP followed by a max-pool, so
/// it is invariant to point order.
#[derive(Debug, Clone)]
pub struct SyncDisc {
    point1: Linear,
    point2: Linear,
    mouth_head: Linear,
    embed: ParamId,
    fc1: Linear,
    fc2: Linear,
    vocab: usize,
    window_len: usize,
    emb_dim: usize,
}

impl SyncDisc {
    pub fn new<R: Real>(ps: &mut ParamStore<R>, rng: &mut SeedRng, cfg: &ModelConfig) -> Self {
        let h = cfg.sync_hidden;
        let emb_dim = cfg.sync_hidden.min(32);
        let point1 = Linear::new(ps, rng, "sync.point1", 3, h, true);
        let point2 = Linear::new(ps, rng, "sync.point2", h, h, true);
        let mouth_head = Linear::new(ps, rng, "sync.mouth_head", h, cfg.sync_dim, true);
        let embed = ps.register("sync.embed", gaussian(rng, cfg.vocab, emb_dim, 0.05));
        let fc1 = Linear::new(
            ps,
            rng,
            "sync.fc1",
            cfg.window_len() * emb_dim,
            h,
            true,
        );
        let fc2 = Linear::new(ps, rng, "sync.fc2", h, cfg.sync_dim, true);
        SyncDisc {
            point1,
            point2,
            mouth_head,
            embed,
            fc1,
            fc2,
            vocab: cfg.vocab,
            window_len: cfg.window_len(),
            emb_dim,
        }
    }

    /// Embed a mouth point cloud (M x 3) into 1 x d_e.
    pub fn mouth_embed<R: Real>(
        &self,
        ps: &ParamStore<R>,
        tape: &mut Tape<R>,
        points: Var,
        mode: Lease,
    ) -> Var {
        let h = self.point1.forward_mode(ps, tape, points, mode);
        let h = tape.relu(h);
        let h = self.point2.forward_mode(ps, tape, h, mode);
        let h = tape.relu(h);
        let pooled = tape.max_pool_rows(h); // 1 x hidden
        self.mouth_head.forward_mode(ps, tape, pooled, mode)
    }

    /// Embed a phoneme window into 1 x d_e.
    pub fn audio_embed<R: Real>(
        &self,
        ps: &ParamStore<R>,
        tape: &mut Tape<R>,
        window: &[u32],
        mode: Lease,
    ) -> Result<Var> {
        if window.len() != self.window_len {
            return Err(CoreError::contract("sync window has the wrong length"));
        }
        let mut indices = Vec::with_capacity(window.len());
        for &label in window {
            if label as usize >= self.vocab {
                return Err(CoreError::Vocab {
                    label,
                    vocab: self.vocab as u32,
                });
            }
            indices.push(label as usize);
        }
        let table = ps.lease_mode(tape, self.embed, mode);
        let e = tape.embed(table, &indices); // (2w+1) x emb
        let flat = tape.reshape(e, 1, self.window_len * self.emb_dim);
        let h = self.fc1.forward_mode(ps, tape, flat, mode);
        let h = tape.relu(h);
        Ok(self.fc2.forward_mode(ps, tape, h, mode))
    }

    /// Cosine sync probability of two embeddings, with the norm floor.
    pub fn sync_prob<R: Real>(tape: &mut Tape<R>, e_m: Var, e_a: Var) -> Var {
        tape.cosine_sim(e_m, e_a, R::from_f64(SYNC_EPS))
    }
}

/// Shared patch backbone of the two convolutional critics.
#[derive(Debug, Clone)]
struct PatchStack {
    convs: Vec<Conv1dLayer>,
}

impl PatchStack {
    fn new<R: Real>(
        ps: &mut ParamStore<R>,
        rng: &mut SeedRng,
        name: &str,
        base_channels: usize,
    ) -> Self {
        let c = base_channels;
        let widths = [(EXPR_DIM, c), (c, 2 * c), (2 * c, 4 * c)];
        let convs = widths
            .iter()
            .enumerate()
            .map(|(i, &(cin, cout))| {
                Conv1dLayer::new(ps, rng, &format!("{name}.conv{i}"), cin, cout, 4, 2, 1)
            })
            .collect();
        PatchStack { convs }
    }

    fn out_channels(&self, base_channels: usize) -> usize {
        4 * base_channels
    }

    /// (L x 64) clip -> (P x 4c) patch features. Needs L >= 8 so every
    /// stride-2 stage keeps at least one position.
    fn forward<R: Real>(
        &self,
        ps: &ParamStore<R>,
        tape: &mut Tape<R>,
        clip: Var,
        mode: Lease,
    ) -> Result<Var> {
        let (rows, cols) = tape.value(clip).shape();
        if cols != EXPR_DIM {
            return Err(CoreError::contract("patch critics expect 64 channels"));
        }
        if rows < 8 {
            return Err(CoreError::contract("patch critics need clips of >= 8 frames"));
        }
        let mut x = clip;
        for conv in &self.convs {
            x = conv.forward_mode(ps, tape, x, mode);
            x = tape.leaky_relu(x, R::from_f64(LEAKY_SLOPE));
        }
        Ok(x)
    }
}

/// Style discriminator: patch features -> per-patch class logits, averaged
/// over patches, softmaxed into a C-way probability.
#[derive(Debug, Clone)]
pub struct StyleDisc {
    stack: PatchStack,
    head: Linear,
    n_classes: usize,
}

impl StyleDisc {
    pub fn new<R: Real>(
        ps: &mut ParamStore<R>,
        rng: &mut SeedRng,
        cfg: &ModelConfig,
        n_classes: usize,
    ) -> Self {
        assert!(n_classes >= 2, "style discrimination needs >= 2 classes");
        let stack = PatchStack::new(ps, rng, "styled", cfg.disc_channels);
        let head = Linear::new(
            ps,
            rng,
            "styled.head",
            stack.out_channels(cfg.disc_channels),
            n_classes,
            true,
        );
        StyleDisc {
            stack,
            head,
            n_classes,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Average of per-patch logits: 1 x C.
    pub fn mean_logits<R: Real>(
        &self,
        ps: &ParamStore<R>,
        tape: &mut Tape<R>,
        clip: Var,
        mode: Lease,
    ) -> Result<Var> {
        let feats = self.stack.forward(ps, tape, clip, mode)?;
        let logits = self.head.forward_mode(ps, tape, feats, mode); // P x C
        let n = tape.value(logits).rows();
        let avg_row = tape.constant(Tensor::from_fn(1, n, |_, _| {
            R::from_usize(n).recip()
        }));
        Ok(tape.matmul(avg_row, logits))
    }

    /// Class probabilities on the simplex: 1 x C.
    pub fn prob<R: Real>(
        &self,
        ps: &ParamStore<R>,
        tape: &mut Tape<R>,
        clip: Var,
        mode: Lease,
    ) -> Result<Var> {
        let logits = self.mean_logits(ps, tape, clip, mode)?;
        Ok(tape.softmax_rows(logits))
    }
}

/// Temporal critic: patch features -> one realism score per patch (P x 1).
#[derive(Debug, Clone)]
pub struct TemporalDisc {
    stack: PatchStack,
    head: Linear,
}

impl TemporalDisc {
    pub fn new<R: Real>(ps: &mut ParamStore<R>, rng: &mut SeedRng, cfg: &ModelConfig) -> Self {
        let stack = PatchStack::new(ps, rng, "tem", cfg.disc_channels);
        let head = Linear::new(
            ps,
            rng,
            "tem.head",
            stack.out_channels(cfg.disc_channels),
            1,
            true,
        );
        TemporalDisc { stack, head }
    }

    pub fn scores<R: Real>(
        &self,
        ps: &ParamStore<R>,
        tape: &mut Tape<R>,
        clip: Var,
        mode: Lease,
    ) -> Result<Var> {
        let feats = self.stack.forward(ps, tape, clip, mode)?;
        Ok(self.head.forward_mode(ps, tape, feats, mode))
    }
}
