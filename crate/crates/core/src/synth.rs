//! Seeded synthetic corpus generation.
//!
//! Stands in for real capture data at desk scale. Each style is a fixed
//! random recipe: per-coefficient gains, a phoneme-to-mouth-shape response
//! table, and upper-face oscillators. Clips sample a phoneme stream and
//! render both face groups from the recipe, so lower-face motion is a
//! deterministic function of phonemes (up to optional noise) — which is
//! exactly what makes the corpus learnable for the sync discriminator.
//!
//! Everything derives from one seed; identical seeds give bit-identical
//! corpora regardless of generation order.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{CoreError, Result};
use crate::motion::{
    ExpressionFrame, FaceBasis, MotionSequence, PhonemeSequence, TrainingClip, EXPR_DIM,
    LOWER_DIM, UPPER_DIM,
};
use crate::rng::SeedRng;
use crate::tensor::Tensor;

/// Coefficients are clipped to this symmetric range.
pub const COEFF_LIMIT: f32 = 3.0;
/// Mean phoneme dwell time in frames (geometric distribution).
pub const MEAN_DWELL: f64 = 4.0;

/// Generation settings for a synthetic corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub seed: u64,
    pub n_styles: usize,
    pub clips_per_style: usize,
    pub clip_len: usize,
    pub vocab: usize,
    /// Standard deviation of additive Gaussian noise; 0 disables noise.
    pub noise_scale: f32,
    pub fps: f32,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            seed: 0,
            n_styles: 4,
            clips_per_style: 20,
            clip_len: 64,
            vocab: 44,
            noise_scale: 0.05,
            fps: 30.0,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_styles < 2 {
            return Err(CoreError::contract("need at least 2 styles"));
        }
        if self.clips_per_style < 2 {
            return Err(CoreError::contract("need at least 2 clips per style"));
        }
        if self.clip_len == 0 {
            return Err(CoreError::contract("clip length must be positive"));
        }
        if self.vocab < 2 {
            return Err(CoreError::contract("vocabulary must have >= 2 labels"));
        }
        if !(self.fps > 0.0) {
            return Err(CoreError::contract("fps must be positive"));
        }
        if self.noise_scale < 0.0 {
            return Err(CoreError::contract("noise scale must be >= 0"));
        }
        Ok(())
    }
}

/// One style's generation recipe.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticStyle {
    pub style_id: u32,
    /// Positive per-coefficient amplitude gains (64).
    pub gains: Vec<f32>,
    /// Phoneme -> lower-face shape targets (vocab x 13).
    pub mouth_response: Tensor<f32>,
    /// Oscillation frequency per upper-face channel, Hz (51).
    pub upper_freq: Vec<f32>,
    /// Oscillation phase per upper-face channel, radians (51).
    pub upper_phase: Vec<f32>,
    pub noise_scale: f32,
}

impl SyntheticStyle {
    fn generate(seed: u64, style_id: u32, vocab: usize, noise_scale: f32) -> Self {
        let mut rng = SeedRng::derive(seed, style_id as u64);
        let gains = (0..EXPR_DIM)
            .map(|_| rng.uniform_in(0.6, 1.6) as f32)
            .collect();
        let mouth_response = Tensor::from_fn(vocab, LOWER_DIM, |_, _| {
            rng.uniform_in(-1.8, 1.8) as f32
        });
        let upper_freq = (0..UPPER_DIM)
            .map(|_| rng.uniform_in(0.3, 3.0) as f32)
            .collect();
        let upper_phase = (0..UPPER_DIM)
            .map(|_| rng.uniform_in(0.0, core::f64::consts::TAU) as f32)
            .collect();
        SyntheticStyle {
            style_id,
            gains,
            mouth_response,
            upper_freq,
            upper_phase,
            noise_scale,
        }
    }
}

/// A generated corpus: the style recipes and their clips.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub styles: Vec<SyntheticStyle>,
    pub clips: Vec<TrainingClip>,
    pub seed: u64,
}

impl SyntheticCorpus {
    pub fn n_styles(&self) -> usize {
        self.styles.len()
    }

    pub fn clip_indices_of_style(&self, label: u32) -> Vec<usize> {
        self.clips
            .iter()
            .enumerate()
            .filter(|(_, c)| c.style_label == label)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Orthonormal synthetic face basis. The first 13 expression columns are
/// constructed to act almost entirely on mouth vertices (the first ceil(P/4)
/// vertices), so lower-face coefficients drive mouth geometry.
pub fn gen_basis(seed: u64, p: usize) -> Result<FaceBasis> {
    if p < EXPR_DIM {
        return Err(CoreError::contract("basis needs at least 64 vertices"));
    }
    let n_mouth = p.div_ceil(4);
    let rows = 3 * p;
    let mouth_coord_limit = 3 * n_mouth; // coords 0..limit belong to mouth vertices

    let mut rng = SeedRng::derive(seed, 0);
    // Column-wise sampling in f64: mouth-dominant for the 13 lower columns,
    // mouth-weak for the rest.
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(EXPR_DIM);
    for c in 0..EXPR_DIM {
        let lower = c < LOWER_DIM;
        let mut col = Vec::with_capacity(rows);
        for r in 0..rows {
            let mouth = r < mouth_coord_limit;
            let sigma = if mouth == lower { 1.0 } else { 0.05 };
            col.push(rng.normal() * sigma);
        }
        cols.push(col);
    }

    // Modified Gram-Schmidt orthonormalization in f64.
    for j in 0..EXPR_DIM {
        for i in 0..j {
            let dot: f64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
            for r in 0..rows {
                cols[j][r] -= dot * cols[i][r];
            }
        }
        let norm: f64 = Float::sqrt(cols[j].iter().map(|v| v * v).sum::<f64>());
        if norm < 1e-9 {
            return Err(CoreError::Numeric {
                component: "basis orthonormalization",
            });
        }
        for v in cols[j].iter_mut() {
            *v /= norm;
        }
    }

    let vertex_basis = Tensor::from_fn(rows, EXPR_DIM, |r, c| cols[c][r] as f32);
    let mut mean_rng = SeedRng::derive(seed, 1);
    let mean_shape = (0..rows).map(|_| mean_rng.normal() as f32).collect();
    let basis = FaceBasis {
        vertex_basis,
        mean_shape,
        mouth_vertex_ids: (0..n_mouth).collect(),
    };
    basis.validate()?;
    Ok(basis)
}

/// Fraction of a basis column's squared norm carried by mouth coordinates.
pub fn mouth_energy_ratio(basis: &FaceBasis, col: usize) -> f32 {
    let limit = 3 * basis.mouth_vertex_ids.len();
    let b = &basis.vertex_basis;
    let mut mouth = 0.0f32;
    let mut total = 0.0f32;
    for r in 0..b.rows() {
        let v = b.get(r, col);
        total += v * v;
        if r < limit {
            mouth += v * v;
        }
    }
    mouth / total
}

/// Generate a full corpus from a spec. Pure in the seed: clip k of style s
/// derives its own streams, so results do not depend on generation order.
pub fn gen_corpus(spec: &CorpusSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let styles: Vec<SyntheticStyle> = (0..spec.n_styles)
        .map(|s| SyntheticStyle::generate(spec.seed, s as u32, spec.vocab, spec.noise_scale))
        .collect();

    // targets[s][k] = motion for clip k of style s
    let mut phoneme_streams = vec![Vec::new(); spec.n_styles];
    let mut targets: Vec<Vec<MotionSequence>> = vec![Vec::new(); spec.n_styles];
    for (s, style) in styles.iter().enumerate() {
        for k in 0..spec.clips_per_style {
            let clip_uid = (s * spec.clips_per_style + k) as u64;
            let phonemes = gen_phoneme_stream(spec, clip_uid);
            let motion = render_clip(spec, style, &phonemes, clip_uid)?;
            phoneme_streams[s].push(phonemes);
            targets[s].push(motion);
        }
    }

    let mut clips = Vec::with_capacity(spec.n_styles * spec.clips_per_style);
    for s in 0..spec.n_styles {
        for k in 0..spec.clips_per_style {
            // style reference: the next same-style clip (cyclic), never itself
            let ref_k = (k + 1) % spec.clips_per_style;
            let clip = TrainingClip {
                phonemes: PhonemeSequence::new(
                    phoneme_streams[s][k].clone(),
                    spec.vocab,
                    spec.fps,
                )?,
                target: targets[s][k].clone(),
                style_label: s as u32,
                style_ref: targets[s][ref_k].clone(),
            };
            clip.validate()?;
            clips.push(clip);
        }
    }
    Ok(SyntheticCorpus {
        styles,
        clips,
        seed: spec.seed,
    })
}

/// Phoneme stream with geometric dwell times (mean 4 frames).
fn gen_phoneme_stream(spec: &CorpusSpec, clip_uid: u64) -> Vec<u32> {
    let mut rng = SeedRng::derive(spec.seed, 1_000_000 + clip_uid);
    let mut labels = Vec::with_capacity(spec.clip_len);
    while labels.len() < spec.clip_len {
        let label = rng.below(spec.vocab) as u32;
        let dwell = rng.geometric(1.0 / MEAN_DWELL);
        for _ in 0..dwell {
            if labels.len() == spec.clip_len {
                break;
            }
            labels.push(label);
        }
    }
    labels
}

/// Render one clip's motion from a style recipe and its phoneme stream.
/// Lower face: gain-scaled viseme targets, box-smoothed over two frames.
/// Upper face: per-channel sinusoids. Optional Gaussian noise on top, then
/// a hard clip to the coefficient range.
fn render_clip(
    spec: &CorpusSpec,
    style: &SyntheticStyle,
    phonemes: &[u32],
    clip_uid: u64,
) -> Result<MotionSequence> {
    let mut noise = SeedRng::derive(spec.seed, 2_000_000 + clip_uid);
    let mut frames = Vec::with_capacity(phonemes.len());
    for (t, &label) in phonemes.iter().enumerate() {
        let mut coeffs = [0.0f32; EXPR_DIM];
        // lower face: two-frame box filter over the raw viseme response
        for j in 0..LOWER_DIM {
            let cur = style.mouth_response.get(label as usize, j) * style.gains[j];
            let prev_label = phonemes[t.saturating_sub(1)];
            let prev = style.mouth_response.get(prev_label as usize, j) * style.gains[j];
            coeffs[j] = 0.5 * (cur + prev);
        }
        // upper face: sinusoids
        let t_sec = t as f32 / spec.fps;
        for j in 0..UPPER_DIM {
            let idx = LOWER_DIM + j;
            let angle =
                core::f32::consts::TAU * style.upper_freq[j] * t_sec + style.upper_phase[j];
            coeffs[idx] = style.gains[idx] * Float::sin(angle);
        }
        if spec.noise_scale > 0.0 {
            for c in coeffs.iter_mut() {
                *c += noise.normal() as f32 * spec.noise_scale;
            }
        }
        for c in coeffs.iter_mut() {
            *c = c.clamp(-COEFF_LIMIT, COEFF_LIMIT);
        }
        frames.push(ExpressionFrame::new(coeffs)?);
    }
    MotionSequence::new(frames, spec.fps)
}

/// Per-coefficient standard deviation over time: the raw motion statistic
/// used to audit style separability.
pub fn motion_feature(m: &MotionSequence) -> Vec<f32> {
    let n = m.len() as f32;
    let mut mean = [0.0f32; EXPR_DIM];
    for f in m.frames() {
        for (acc, &v) in mean.iter_mut().zip(f.coeffs()) {
            *acc += v;
        }
    }
    for v in mean.iter_mut() {
        *v /= n;
    }
    let mut var = [0.0f32; EXPR_DIM];
    for f in m.frames() {
        for ((acc, &v), &mu) in var.iter_mut().zip(f.coeffs()).zip(&mean) {
            let d = v - mu;
            *acc += d * d;
        }
    }
    var.iter().map(|v| Float::sqrt(v / n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_is_orthonormal() {
        let basis = gen_basis(7, 80).unwrap();
        assert!(basis.orthonormality_error() <= 1e-5);
    }

    #[test]
    fn basis_deterministic() {
        let a = gen_basis(3, 96).unwrap();
        let b = gen_basis(3, 96).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn basis_lower_columns_are_mouth_dominant() {
        let basis = gen_basis(11, 120).unwrap();
        for col in 0..LOWER_DIM {
            let ratio = mouth_energy_ratio(&basis, col);
            assert!(
                ratio >= 0.8,
                "column {col} carries only {ratio} of its energy on mouth vertices"
            );
        }
    }

    #[test]
    fn basis_rejects_too_few_vertices() {
        assert!(gen_basis(0, 63).is_err());
    }

    #[test]
    fn corpus_counts_and_balance() {
        let spec = CorpusSpec {
            n_styles: 4,
            clips_per_style: 20,
            ..CorpusSpec::default()
        };
        let corpus = gen_corpus(&spec).unwrap();
        assert_eq!(corpus.clips.len(), 80);
        for s in 0..4 {
            assert_eq!(corpus.clip_indices_of_style(s).len(), 20);
        }
    }

    #[test]
    fn corpus_deterministic() {
        let spec = CorpusSpec {
            n_styles: 2,
            clips_per_style: 3,
            clip_len: 16,
            ..CorpusSpec::default()
        };
        let a = gen_corpus(&spec).unwrap();
        let b = gen_corpus(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn coefficients_stay_in_range() {
        let spec = CorpusSpec {
            n_styles: 2,
            clips_per_style: 2,
            clip_len: 32,
            noise_scale: 0.5, // exaggerated noise to provoke the clip
            ..CorpusSpec::default()
        };
        let corpus = gen_corpus(&spec).unwrap();
        for clip in &corpus.clips {
            for f in clip.target.frames() {
                for &c in f.coeffs() {
                    assert!((-COEFF_LIMIT..=COEFF_LIMIT).contains(&c));
                }
            }
        }
    }

    #[test]
    fn noise_free_lower_face_is_function_of_phonemes() {
        // two clips of the same style with identical phoneme prefixes must
        // agree on lower-face coefficients over that prefix
        let spec = CorpusSpec {
            noise_scale: 0.0,
            n_styles: 2,
            clips_per_style: 2,
            clip_len: 24,
            ..CorpusSpec::default()
        };
        let corpus = gen_corpus(&spec).unwrap();
        let style = &corpus.styles[0];
        let clip = &corpus.clips[0];
        // re-render through the same recipe and compare lower channels
        let rerendered = render_clip(&spec, style, clip.phonemes.labels(), 999).unwrap();
        for (t, f) in rerendered.frames().iter().enumerate() {
            for j in 0..LOWER_DIM {
                assert_eq!(
                    f.coeffs()[j],
                    clip.target.frame(t).coeffs()[j],
                    "lower channel {j} at frame {t} must depend on phonemes only"
                );
            }
        }
    }

    #[test]
    fn style_ref_is_same_style_different_clip() {
        let spec = CorpusSpec {
            n_styles: 3,
            clips_per_style: 4,
            clip_len: 16,
            ..CorpusSpec::default()
        };
        let corpus = gen_corpus(&spec).unwrap();
        for clip in &corpus.clips {
            assert_ne!(clip.style_ref, clip.target, "reference must differ");
            // the reference is some same-style clip's target
            let mates = corpus.clip_indices_of_style(clip.style_label);
            assert!(mates
                .iter()
                .any(|&i| corpus.clips[i].target == clip.style_ref));
        }
    }

    #[test]
    fn phoneme_dwell_mean_near_four() {
        let spec = CorpusSpec {
            n_styles: 2,
            clips_per_style: 10,
            clip_len: 256,
            ..CorpusSpec::default()
        };
        let corpus = gen_corpus(&spec).unwrap();
        let mut runs = 0usize;
        let mut frames = 0usize;
        for clip in &corpus.clips {
            let labels = clip.phonemes.labels();
            frames += labels.len();
            runs += 1;
            for t in 1..labels.len() {
                if labels[t] != labels[t - 1] {
                    runs += 1;
                }
            }
        }
        let mean_dwell = frames as f64 / runs as f64;
        assert!(
            (2.5..6.0).contains(&mean_dwell),
            "mean dwell {mean_dwell} far from 4"
        );
    }

    #[test]
    fn nearest_centroid_separates_styles() {
        let spec = CorpusSpec::default(); // 4 styles x 20 clips
        let corpus = gen_corpus(&spec).unwrap();
        let feats: Vec<Vec<f32>> = corpus
            .clips
            .iter()
            .map(|c| motion_feature(&c.target))
            .collect();
        let mut centroids = vec![vec![0.0f32; EXPR_DIM]; 4];
        let mut counts = [0usize; 4];
        for (clip, f) in corpus.clips.iter().zip(&feats) {
            let s = clip.style_label as usize;
            counts[s] += 1;
            for (acc, &v) in centroids[s].iter_mut().zip(f) {
                *acc += v;
            }
        }
        for (c, &n) in centroids.iter_mut().zip(&counts) {
            for v in c.iter_mut() {
                *v /= n as f32;
            }
        }
        let mut correct = 0usize;
        for (clip, f) in corpus.clips.iter().zip(&feats) {
            let mut best = 0usize;
            let mut best_d = f32::INFINITY;
            for (s, c) in centroids.iter().enumerate() {
                let d: f32 = c.iter().zip(f).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best_d {
                    best_d = d;
                    best = s;
                }
            }
            if best == clip.style_label as usize {
                correct += 1;
            }
        }
        let acc = correct as f64 / corpus.clips.len() as f64;
        assert!(acc >= 0.95, "centroid accuracy {acc} below 0.95");
    }

    #[test]
    fn inter_style_distance_exceeds_intra_style_scatter() {
        let spec = CorpusSpec::default();
        let corpus = gen_corpus(&spec).unwrap();
        let feats: Vec<Vec<f32>> = corpus
            .clips
            .iter()
            .map(|c| motion_feature(&c.target))
            .collect();
        let n_styles = corpus.n_styles();
        let mut centroids = vec![vec![0.0f32; EXPR_DIM]; n_styles];
        let mut counts = vec![0usize; n_styles];
        for (clip, f) in corpus.clips.iter().zip(&feats) {
            let s = clip.style_label as usize;
            counts[s] += 1;
            for (acc, &v) in centroids[s].iter_mut().zip(f) {
                *acc += v;
            }
        }
        for (c, &n) in centroids.iter_mut().zip(&counts) {
            for v in c.iter_mut() {
                *v /= n as f32;
            }
        }
        let dist = |a: &[f32], b: &[f32]| -> f64 {
            a.iter()
                .zip(b)
                .map(|(x, y)| ((x - y) * (x - y)) as f64)
                .sum::<f64>()
                .sqrt()
        };
        let mut intra = 0.0f64;
        for (clip, f) in corpus.clips.iter().zip(&feats) {
            intra += dist(f, &centroids[clip.style_label as usize]);
        }
        intra /= corpus.clips.len() as f64;
        let mut inter = 0.0f64;
        let mut pairs = 0usize;
        for a in 0..n_styles {
            for b in a + 1..n_styles {
                inter += dist(&centroids[a], &centroids[b]);
                pairs += 1;
            }
        }
        inter /= pairs as f64;
        assert!(
            inter > intra,
            "styles not separable: inter {inter} <= intra {intra}"
        );
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = CorpusSpec::default();
        spec.n_styles = 1;
        assert!(gen_corpus(&spec).is_err());
        let mut spec = CorpusSpec::default();
        spec.clips_per_style = 1;
        assert!(gen_corpus(&spec).is_err());
    }
}
