//! Training loops: discriminator pretraining and the adversarial main loop.
//!
//! The main loop holds two trainable parameter stores — the generator's and
//! the temporal critic's — plus two frozen stores for the pretrained sync
//! and style discriminators. Each step runs three phases:
//!
//! 1. build the generator tape: style codes, decoded clips, and the
//!    reconstruction / triplet / sync / style terms (discriminators leased
//!    frozen, so only generator parameters collect gradients);
//! 2. update the temporal critic on its own tape against the detached fakes
//!    (a critic detaches generator outputs regardless, so values suffice);
//! 3. score the still-live fakes with the freshly updated, frozen critic,
//!    finish the weighted total, and step the generator.
//!
//! Every random choice flows from seeded streams, so a (seed, corpus) pair
//! reproduces bit-identical parameter trajectories.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::disc::{mouth_points, MouthProjector, StyleDisc, SyncDisc, TemporalDisc};
use crate::error::{CoreError, Result};
use crate::loss::{
    bce_from_cosine, class_nll, hinge_critic_loss, hinge_generator_loss, rec_loss,
    sync_clip_loss, total_loss, triplet_loss, LossTerms, LossValues, LossWeights,
};
use crate::model::Generator;
use crate::motion::{extract_window, ExpressionFrame, FaceBasis};
use crate::nn::{param_grads, Adam, Lease, ParamStore};
use crate::rng::SeedRng;
use crate::synth::SyntheticCorpus;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Knobs of the main training loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub critic_learning_rate: f64,
    pub weights: LossWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 300,
            batch_size: 4,
            seed: 0,
            learning_rate: 1e-4,
            critic_learning_rate: 1e-4,
            weights: LossWeights::default(),
        }
    }
}

/// Outcome of one training step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub losses: LossValues,
    /// Hinge loss of the temporal critic's own update this step.
    pub critic: f64,
}

/// Main-loop state: generator and temporal critic train; the sync and style
/// discriminators stay frozen after pretraining.
pub struct Trainer {
    pub cfg: ModelConfig,
    pub tcfg: TrainConfig,
    pub gen: Generator,
    pub gen_ps: ParamStore<f32>,
    pub tem: TemporalDisc,
    pub tem_ps: ParamStore<f32>,
    pub sync: SyncDisc,
    pub sync_ps: ParamStore<f32>,
    pub style_disc: StyleDisc,
    pub style_ps: ParamStore<f32>,
    pub basis: FaceBasis,
    pub step: u64,
    gen_opt: Adam<f32>,
    tem_opt: Adam<f32>,
    rng: SeedRng,
}

impl Trainer {
    /// Fresh trainer with newly initialized networks. The pretrained sync
    /// and style discriminator weights can be swapped in afterwards with
    /// [`Trainer::install_sync`] / [`Trainer::install_style`].
    pub fn new(
        cfg: &ModelConfig,
        tcfg: &TrainConfig,
        n_styles: usize,
        basis: FaceBasis,
    ) -> Result<Self> {
        cfg.validate()?;
        if tcfg.batch_size == 0 {
            return Err(CoreError::contract("batch size must be positive"));
        }
        basis.validate()?;
        let mut gen_ps = ParamStore::new();
        let gen = Generator::new(&mut gen_ps, &mut SeedRng::derive(tcfg.seed, 10), cfg)?;
        let mut tem_ps = ParamStore::new();
        let tem = TemporalDisc::new(&mut tem_ps, &mut SeedRng::derive(tcfg.seed, 11), cfg);
        let mut sync_ps = ParamStore::new();
        let sync = SyncDisc::new(&mut sync_ps, &mut SeedRng::derive(tcfg.seed, 12), cfg);
        let mut style_ps = ParamStore::new();
        let style_disc = StyleDisc::new(
            &mut style_ps,
            &mut SeedRng::derive(tcfg.seed, 13),
            cfg,
            n_styles,
        );
        let gen_opt = Adam::new(&gen_ps, tcfg.learning_rate as f32);
        let tem_opt = Adam::new(&tem_ps, tcfg.critic_learning_rate as f32);
        Ok(Trainer {
            cfg: cfg.clone(),
            tcfg: tcfg.clone(),
            gen,
            gen_ps,
            tem,
            tem_ps,
            sync,
            sync_ps,
            style_disc,
            style_ps,
            basis,
            step: 0,
            gen_opt,
            tem_opt,
            rng: SeedRng::derive(tcfg.seed, 14),
        })
    }

    /// Replace the frozen sync discriminator with pretrained weights.
    pub fn install_sync(&mut self, disc: SyncDisc, ps: ParamStore<f32>) -> Result<()> {
        if ps.scalar_count() != self.sync_ps.scalar_count() {
            return Err(CoreError::contract(
                "pretrained sync discriminator does not match the configuration",
            ));
        }
        self.sync = disc;
        self.sync_ps = ps;
        Ok(())
    }

    /// Replace the frozen style discriminator with pretrained weights.
    pub fn install_style(&mut self, disc: StyleDisc, ps: ParamStore<f32>) -> Result<()> {
        if ps.scalar_count() != self.style_ps.scalar_count() {
            return Err(CoreError::contract(
                "pretrained style discriminator does not match the configuration",
            ));
        }
        self.style_disc = disc;
        self.style_ps = ps;
        Ok(())
    }

    /// Draw a batch of distinct clip indices (partial Fisher-Yates).
    fn sample_batch(&mut self, n_clips: usize) -> Result<Vec<usize>> {
        if self.tcfg.batch_size > n_clips {
            return Err(CoreError::data("batch size exceeds corpus size"));
        }
        let mut pool: Vec<usize> = (0..n_clips).collect();
        let mut batch = Vec::with_capacity(self.tcfg.batch_size);
        for k in 0..self.tcfg.batch_size {
            let j = k + self.rng.below(n_clips - k);
            pool.swap(k, j);
            batch.push(pool[k]);
        }
        Ok(batch)
    }

    /// One adversarial step over a sampled batch. Aborts with a named
    /// component if any loss value leaves the finite range.
    pub fn train_step(&mut self, corpus: &SyntheticCorpus) -> Result<StepReport> {
        let batch = self.sample_batch(corpus.clips.len())?;
        let triplets: Vec<(usize, usize)> = batch
            .iter()
            .map(|&i| sample_triplet(corpus, i, &mut self.rng))
            .collect::<Result<_>>()?;
        let w = self.tcfg.weights.clone();

        // Phase 1: generator tape with all non-adversarial terms.
        let mut tape: Tape<f32> = Tape::new();
        let projector = MouthProjector::new(&mut tape, &self.basis);
        let mut rec_terms = Vec::with_capacity(batch.len());
        let mut trip_terms = Vec::with_capacity(batch.len());
        let mut sync_terms = Vec::with_capacity(batch.len());
        let mut style_terms = Vec::with_capacity(batch.len());
        let mut fakes = Vec::with_capacity(batch.len());
        // phoneme windows repeat across frames and clips; embed each once
        let mut audio_cache: BTreeMap<Vec<u32>, Var> = BTreeMap::new();
        for (&ci, &(pi, ni)) in batch.iter().zip(&triplets) {
            let clip = &corpus.clips[ci];
            clip.validate()?;
            let s_c = self
                .gen
                .style_enc
                .extract(&self.gen_ps, &mut tape, &clip.style_ref);
            let pred =
                self.gen
                    .decode_sequence_on_tape(&self.gen_ps, &mut tape, &clip.phonemes, s_c)?;
            let gt = tape.constant(clip.target.to_matrix());
            rec_terms.push(rec_loss(&mut tape, gt, pred, w.mu));

            let s_p = self
                .gen
                .style_enc
                .extract(&self.gen_ps, &mut tape, &corpus.clips[pi].style_ref);
            let s_n = self
                .gen
                .style_enc
                .extract(&self.gen_ps, &mut tape, &corpus.clips[ni].style_ref);
            trip_terms.push(triplet_loss(&mut tape, s_c, s_p, s_n, w.gamma));

            let mut probs = Vec::with_capacity(clip.phonemes.len());
            for t in 0..clip.phonemes.len() {
                let frame = tape.select_row(pred, t);
                let pts = projector.project(&mut tape, frame);
                let e_m = self
                    .sync
                    .mouth_embed(&self.sync_ps, &mut tape, pts, Lease::Frozen);
                let window = extract_window(&clip.phonemes, t, self.cfg.window)?;
                let e_a = match audio_cache.get(&window) {
                    Some(&v) => v,
                    None => {
                        let v = self.sync.audio_embed(
                            &self.sync_ps,
                            &mut tape,
                            &window,
                            Lease::Frozen,
                        )?;
                        audio_cache.insert(window, v);
                        v
                    }
                };
                probs.push(SyncDisc::sync_prob(&mut tape, e_m, e_a));
            }
            sync_terms.push(sync_clip_loss(&mut tape, &probs));

            let prob = self
                .style_disc
                .prob(&self.style_ps, &mut tape, pred, Lease::Frozen)?;
            style_terms.push(class_nll(&mut tape, prob, clip.style_label as usize)?);
            fakes.push(pred);
        }

        // Phase 2: temporal critic update against detached fakes.
        let mut ctape: Tape<f32> = Tape::new();
        let mut real_scores = Vec::with_capacity(batch.len());
        let mut fake_scores = Vec::with_capacity(batch.len());
        for (&ci, &fake) in batch.iter().zip(&fakes) {
            let real = ctape.constant(corpus.clips[ci].target.to_matrix());
            let detached = ctape.constant(tape.value(fake).clone());
            real_scores.push(self.tem.scores(&self.tem_ps, &mut ctape, real, Lease::Train)?);
            fake_scores.push(self.tem.scores(&self.tem_ps, &mut ctape, detached, Lease::Train)?);
        }
        let real_all = ctape.concat_rows(&real_scores);
        let fake_all = ctape.concat_rows(&fake_scores);
        let critic_loss = hinge_critic_loss(&mut ctape, real_all, fake_all);
        let critic_value = ctape.value(critic_loss).item() as f64;
        if !critic_value.is_finite() {
            return Err(CoreError::Numeric {
                component: "temporal critic loss",
            });
        }
        let critic_grads = ctape.backward(critic_loss);
        self.tem_opt
            .step(&mut self.tem_ps, &param_grads(&critic_grads));

        // Phase 3: adversarial term against the updated, frozen critic.
        let mut gen_fake_scores = Vec::with_capacity(batch.len());
        for &fake in &fakes {
            gen_fake_scores.push(self.tem.scores(&self.tem_ps, &mut tape, fake, Lease::Frozen)?);
        }
        let all_fake = tape.concat_rows(&gen_fake_scores);
        let tem_term = hinge_generator_loss(&mut tape, all_fake);

        let terms = LossTerms {
            rec: mean_of(&mut tape, &rec_terms),
            trip: mean_of(&mut tape, &trip_terms),
            sync: mean_of(&mut tape, &sync_terms),
            tem: tem_term,
            style: mean_of(&mut tape, &style_terms),
        };
        let total = total_loss(&mut tape, &terms, &w);
        let values = LossValues {
            rec: tape.value(terms.rec).item() as f64,
            trip: tape.value(terms.trip).item() as f64,
            sync: tape.value(terms.sync).item() as f64,
            tem: tape.value(terms.tem).item() as f64,
            style: tape.value(terms.style).item() as f64,
            total: tape.value(total).item() as f64,
        };
        values.check_finite()?;
        let grads = tape.backward(total);
        self.gen_opt.step(&mut self.gen_ps, &param_grads(&grads));
        if !self.gen_ps.all_finite() {
            return Err(CoreError::Numeric {
                component: "generator parameters",
            });
        }
        self.step += 1;
        Ok(StepReport {
            losses: values,
            critic: critic_value,
        })
    }

    /// Run `n` steps, returning every step's report.
    pub fn train(&mut self, corpus: &SyntheticCorpus, n: usize) -> Result<Vec<StepReport>> {
        let mut reports = Vec::with_capacity(n);
        for _ in 0..n {
            reports.push(self.train_step(corpus)?);
        }
        Ok(reports)
    }
}

/// Mean of scalar loss terms as a tape var.
fn mean_of<R: crate::real::Real>(tape: &mut Tape<R>, terms: &[Var]) -> Var {
    let row = tape.concat_cols(terms);
    tape.mean_all(row)
}

/// Pick a positive (same style, different clip) and a negative (different
/// style) for the triplet term.
pub fn sample_triplet(
    corpus: &SyntheticCorpus,
    anchor: usize,
    rng: &mut SeedRng,
) -> Result<(usize, usize)> {
    let label = corpus.clips[anchor].style_label;
    let mates: Vec<usize> = corpus
        .clip_indices_of_style(label)
        .into_iter()
        .filter(|&i| i != anchor)
        .collect();
    let others: Vec<usize> = corpus
        .clips
        .iter()
        .enumerate()
        .filter(|(_, c)| c.style_label != label)
        .map(|(i, _)| i)
        .collect();
    if mates.is_empty() {
        return Err(CoreError::data(
            "triplet sampling needs a second clip of the anchor style",
        ));
    }
    if others.is_empty() {
        return Err(CoreError::data(
            "triplet sampling needs a clip of a different style",
        ));
    }
    Ok((mates[rng.below(mates.len())], others[rng.below(others.len())]))
}

/// Forward-only sync score for one (frame, window) pair.
pub fn sync_score(
    sync: &SyncDisc,
    ps: &ParamStore<f32>,
    basis: &FaceBasis,
    frame: &ExpressionFrame,
    window: &[u32],
) -> Result<f32> {
    let mut tape: Tape<f32> = Tape::new();
    let flat = mouth_points(frame, basis);
    let m = flat.len() / 3;
    let pts = tape.constant(Tensor::from_vec(m, 3, flat));
    let e_m = sync.mouth_embed(ps, &mut tape, pts, Lease::Frozen);
    let e_a = sync.audio_embed(ps, &mut tape, window, Lease::Frozen)?;
    let cos = SyncDisc::sync_prob(&mut tape, e_m, e_a);
    Ok(tape.value(cos).item())
}

/// Forward-only style class probabilities for a clip.
pub fn style_prob_values(
    disc: &StyleDisc,
    ps: &ParamStore<f32>,
    clip: &crate::motion::MotionSequence,
) -> Result<Vec<f32>> {
    let mut tape: Tape<f32> = Tape::new();
    let x = tape.constant(clip.to_matrix());
    let prob = disc.prob(ps, &mut tape, x, Lease::Frozen)?;
    Ok(tape.value(prob).data().to_vec())
}

/// Outcome of a discriminator pretraining run.
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainReport {
    pub steps: usize,
    pub final_loss: f64,
}

/// Pretrain the sync discriminator with binary cross-entropy on matched and
/// mismatched (mouth cloud, phoneme window) pairs. Negatives split evenly
/// between same-clip temporal offsets (at least a full window away) and
/// cross-clip windows.
pub fn pretrain_sync_disc(
    corpus: &SyntheticCorpus,
    cfg: &ModelConfig,
    basis: &FaceBasis,
    steps: usize,
    batch_size: usize,
    lr: f64,
    seed: u64,
) -> Result<(SyncDisc, ParamStore<f32>, PretrainReport)> {
    cfg.validate()?;
    if corpus.clips.len() < 2 {
        return Err(CoreError::data("sync pretraining needs at least 2 clips"));
    }
    let mut ps = ParamStore::new();
    let disc = SyncDisc::new(&mut ps, &mut SeedRng::derive(seed, 20), cfg);
    let mut opt = Adam::new(&ps, lr as f32);
    let mut rng = SeedRng::derive(seed, 21);
    let window_len = cfg.window_len();
    let mut final_loss = f64::NAN;
    for step in 0..steps {
        let mut tape: Tape<f32> = Tape::new();
        let mut terms = Vec::with_capacity(2 * batch_size);
        for _ in 0..batch_size {
            let ci = rng.below(corpus.clips.len());
            let clip = &corpus.clips[ci];
            let t = rng.below(clip.phonemes.len());
            let flat = mouth_points(clip.target.frame(t), basis);
            let m = flat.len() / 3;
            let pts = tape.constant(Tensor::from_vec(m, 3, flat));
            let e_m = disc.mouth_embed(&ps, &mut tape, pts, Lease::Train);

            // positive: the window aligned with the frame
            let pos_window = extract_window(&clip.phonemes, t, cfg.window)?;
            let e_a = disc.audio_embed(&ps, &mut tape, &pos_window, Lease::Train)?;
            let cos = SyncDisc::sync_prob(&mut tape, e_m, e_a);
            terms.push(bce_from_cosine(&mut tape, cos, true));

            // negative: offset within the clip, or a window from another clip
            let neg_window = if rng.below(2) == 0 {
                let far: Vec<usize> = (0..clip.phonemes.len())
                    .filter(|&u| u.abs_diff(t) >= window_len)
                    .collect();
                match far.as_slice() {
                    [] => cross_clip_window(corpus, ci, cfg.window, &mut rng)?,
                    far => extract_window(&clip.phonemes, far[rng.below(far.len())], cfg.window)?,
                }
            } else {
                cross_clip_window(corpus, ci, cfg.window, &mut rng)?
            };
            let e_n = disc.audio_embed(&ps, &mut tape, &neg_window, Lease::Train)?;
            let cos_n = SyncDisc::sync_prob(&mut tape, e_m, e_n);
            terms.push(bce_from_cosine(&mut tape, cos_n, false));
        }
        let loss = mean_of(&mut tape, &terms);
        final_loss = tape.value(loss).item() as f64;
        if !final_loss.is_finite() {
            return Err(CoreError::Numeric {
                component: "sync pretraining loss",
            });
        }
        let grads = tape.backward(loss);
        opt.step(&mut ps, &param_grads(&grads));
        let _ = step;
    }
    Ok((disc, ps, PretrainReport { steps, final_loss }))
}

fn cross_clip_window(
    corpus: &SyntheticCorpus,
    exclude: usize,
    w: usize,
    rng: &mut SeedRng,
) -> Result<Vec<u32>> {
    let mut cj = rng.below(corpus.clips.len() - 1);
    if cj >= exclude {
        cj += 1;
    }
    let other = &corpus.clips[cj];
    let u = rng.below(other.phonemes.len());
    extract_window(&other.phonemes, u, w)
}

/// Pretrain the style discriminator as a plain classifier on real clips.
pub fn pretrain_style_disc(
    corpus: &SyntheticCorpus,
    cfg: &ModelConfig,
    steps: usize,
    batch_size: usize,
    lr: f64,
    seed: u64,
) -> Result<(StyleDisc, ParamStore<f32>, PretrainReport)> {
    cfg.validate()?;
    let n_classes = corpus.n_styles();
    if n_classes < 2 {
        return Err(CoreError::data("style pretraining needs >= 2 styles"));
    }
    let mut ps = ParamStore::new();
    let disc = StyleDisc::new(&mut ps, &mut SeedRng::derive(seed, 30), cfg, n_classes);
    let mut opt = Adam::new(&ps, lr as f32);
    let mut rng = SeedRng::derive(seed, 31);
    let mut final_loss = f64::NAN;
    for _ in 0..steps {
        let mut tape: Tape<f32> = Tape::new();
        let mut terms = Vec::with_capacity(batch_size);
        for _ in 0..batch_size {
            let ci = rng.below(corpus.clips.len());
            let clip = &corpus.clips[ci];
            let x = tape.constant(clip.target.to_matrix());
            let prob = disc.prob(&ps, &mut tape, x, Lease::Train)?;
            terms.push(class_nll(&mut tape, prob, clip.style_label as usize)?);
        }
        let loss = mean_of(&mut tape, &terms);
        final_loss = tape.value(loss).item() as f64;
        if !final_loss.is_finite() {
            return Err(CoreError::Numeric {
                component: "style pretraining loss",
            });
        }
        let grads = tape.backward(loss);
        opt.step(&mut ps, &param_grads(&grads));
    }
    Ok((disc, ps, PretrainReport { steps, final_loss }))
}

/// Fraction of clips the style discriminator classifies correctly.
pub fn style_accuracy(
    disc: &StyleDisc,
    ps: &ParamStore<f32>,
    corpus: &SyntheticCorpus,
    indices: &[usize],
) -> Result<f64> {
    let mut correct = 0usize;
    for &i in indices {
        let clip = &corpus.clips[i];
        let probs = style_prob_values(disc, ps, &clip.target)?;
        let argmax = probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(k, _)| k)
            .unwrap();
        if argmax == clip.style_label as usize {
            correct += 1;
        }
    }
    Ok(correct as f64 / indices.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_basis, gen_corpus, CorpusSpec};

    fn small_corpus(clip_len: usize) -> SyntheticCorpus {
        let spec = CorpusSpec {
            n_styles: 2,
            clips_per_style: 3,
            clip_len,
            vocab: 6,
            seed: 5,
            ..CorpusSpec::default()
        };
        gen_corpus(&spec).unwrap()
    }

    fn tiny_trainer(corpus: &SyntheticCorpus, seed: u64) -> Trainer {
        let mut cfg = ModelConfig::tiny();
        cfg.vocab = 6;
        let tcfg = TrainConfig {
            batch_size: 2,
            seed,
            learning_rate: 1e-3,
            critic_learning_rate: 1e-3,
            ..TrainConfig::default()
        };
        let basis = gen_basis(7, 64).unwrap();
        Trainer::new(&cfg, &tcfg, corpus.n_styles(), basis).unwrap()
    }

    #[test]
    fn step_produces_finite_losses() {
        let corpus = small_corpus(16);
        let mut tr = tiny_trainer(&corpus, 0);
        let report = tr.train_step(&corpus).unwrap();
        assert!(report.losses.check_finite().is_ok());
        assert!(report.critic.is_finite());
        assert_eq!(tr.step, 1);
    }

    #[test]
    fn losses_move_parameters() {
        let corpus = small_corpus(16);
        let mut tr = tiny_trainer(&corpus, 0);
        let before: Vec<f32> = tr
            .gen_ps
            .iter()
            .flat_map(|(_, _, t)| t.data().to_vec())
            .collect();
        tr.train_step(&corpus).unwrap();
        let after: Vec<f32> = tr
            .gen_ps
            .iter()
            .flat_map(|(_, _, t)| t.data().to_vec())
            .collect();
        assert_ne!(before, after, "a step must move generator parameters");
    }

    #[test]
    fn training_is_bit_deterministic() {
        let corpus = small_corpus(16);
        let mut a = tiny_trainer(&corpus, 3);
        let mut b = tiny_trainer(&corpus, 3);
        let ra = a.train(&corpus, 3).unwrap();
        let rb = b.train(&corpus, 3).unwrap();
        assert_eq!(ra, rb, "same seed must replay the same losses");
        for ((_, _, ta), (_, _, tb)) in a.gen_ps.iter().zip(b.gen_ps.iter()) {
            assert_eq!(ta.data(), tb.data(), "same seed must replay parameters");
        }
    }

    #[test]
    fn different_seed_changes_trajectory() {
        let corpus = small_corpus(16);
        let mut a = tiny_trainer(&corpus, 3);
        let mut b = tiny_trainer(&corpus, 4);
        let ra = a.train(&corpus, 2).unwrap();
        let rb = b.train(&corpus, 2).unwrap();
        assert_ne!(ra, rb);
    }

    #[test]
    fn triplet_sampling_respects_labels() {
        let corpus = small_corpus(16);
        let mut rng = SeedRng::new(0);
        for anchor in 0..corpus.clips.len() {
            for _ in 0..10 {
                let (p, n) = sample_triplet(&corpus, anchor, &mut rng).unwrap();
                assert_ne!(p, anchor);
                assert_eq!(
                    corpus.clips[p].style_label,
                    corpus.clips[anchor].style_label
                );
                assert_ne!(
                    corpus.clips[n].style_label,
                    corpus.clips[anchor].style_label
                );
            }
        }
    }

    #[test]
    fn triplet_sampling_needs_both_sides() {
        let spec = CorpusSpec {
            n_styles: 2,
            clips_per_style: 2,
            clip_len: 8,
            vocab: 6,
            ..CorpusSpec::default()
        };
        let mut corpus = gen_corpus(&spec).unwrap();
        // orphan the anchor's style
        corpus.clips.remove(1);
        let mut rng = SeedRng::new(0);
        assert!(sample_triplet(&corpus, 0, &mut rng).is_err());
    }

    #[test]
    fn batch_larger_than_corpus_is_rejected() {
        let corpus = small_corpus(16);
        let mut cfg = ModelConfig::tiny();
        cfg.vocab = 6;
        let tcfg = TrainConfig {
            batch_size: 100,
            ..TrainConfig::default()
        };
        let basis = gen_basis(7, 64).unwrap();
        let mut tr = Trainer::new(&cfg, &tcfg, 2, basis).unwrap();
        assert!(tr.train_step(&corpus).is_err());
    }

    #[test]
    fn sync_pretraining_reduces_loss() {
        let spec = CorpusSpec {
            n_styles: 2,
            clips_per_style: 4,
            clip_len: 32,
            vocab: 6,
            noise_scale: 0.0,
            seed: 9,
            ..CorpusSpec::default()
        };
        let corpus = gen_corpus(&spec).unwrap();
        let mut cfg = ModelConfig::tiny();
        cfg.vocab = 6;
        let basis = gen_basis(2, 64).unwrap();
        let (_, _, early) = pretrain_sync_disc(&corpus, &cfg, &basis, 1, 8, 3e-3, 7).unwrap();
        let (_, _, late) = pretrain_sync_disc(&corpus, &cfg, &basis, 60, 8, 3e-3, 7).unwrap();
        assert!(
            late.final_loss < early.final_loss,
            "sync loss should fall: {} -> {}",
            early.final_loss,
            late.final_loss
        );
    }

    #[test]
    fn style_pretraining_classifies_training_clips() {
        let spec = CorpusSpec {
            n_styles: 2,
            clips_per_style: 4,
            clip_len: 16,
            vocab: 6,
            seed: 11,
            ..CorpusSpec::default()
        };
        let corpus = gen_corpus(&spec).unwrap();
        let mut cfg = ModelConfig::tiny();
        cfg.vocab = 6;
        let (disc, ps, report) = pretrain_style_disc(&corpus, &cfg, 80, 4, 3e-3, 1).unwrap();
        assert!(report.final_loss.is_finite());
        let all: Vec<usize> = (0..corpus.clips.len()).collect();
        let acc = style_accuracy(&disc, &ps, &corpus, &all).unwrap();
        assert!(acc >= 0.75, "style accuracy {acc} too low after pretraining");
    }

    #[test]
    fn sync_score_is_forward_only_and_bounded() {
        let corpus = small_corpus(16);
        let cfg = {
            let mut c = ModelConfig::tiny();
            c.vocab = 6;
            c
        };
        let basis = gen_basis(2, 64).unwrap();
        let mut ps = ParamStore::new();
        let disc = SyncDisc::new(&mut ps, &mut SeedRng::new(1), &cfg);
        let clip = &corpus.clips[0];
        let window = extract_window(&clip.phonemes, 3, cfg.window).unwrap();
        let s = sync_score(&disc, &ps, &basis, clip.target.frame(3), &window).unwrap();
        assert!((-1.0..=1.0).contains(&s));
    }
}
