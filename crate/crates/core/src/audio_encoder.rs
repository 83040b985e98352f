//! Audio encoder: a phoneme window -> per-position articulation features.
//!
//! Labels are looked up in a learned embedding table, tagged with position
//! encodings, and contextualized by a transformer encoder. No acoustic
//! features are involved; input is frame-aligned phoneme labels only.

use alloc::vec::Vec;

use crate::config::ModelConfig;
use crate::error::{CoreError, Result};
use crate::nn::{gaussian, sin_position_table, EncoderStack, ParamId, ParamStore};
use crate::real::Real;
use crate::rng::SeedRng;
use crate::tape::{Tape, Var};

#[derive(Debug, Clone)]
pub struct AudioEncoder {
    /// V x d_a embedding table.
    table: ParamId,
    enc: EncoderStack,
    vocab: usize,
    d_a: usize,
    window_len: usize,
}

impl AudioEncoder {
    pub fn new<R: Real>(ps: &mut ParamStore<R>, rng: &mut SeedRng, cfg: &ModelConfig) -> Self {
        let table = ps.register("audio.embed", gaussian(rng, cfg.vocab, cfg.d_a, 0.02));
        let enc = EncoderStack::new(
            ps,
            rng,
            "audio.enc",
            cfg.audio_layers,
            cfg.d_a,
            cfg.n_heads,
            cfg.ff_width,
        );
        AudioEncoder {
            table,
            enc,
            vocab: cfg.vocab,
            d_a: cfg.d_a,
            window_len: cfg.window_len(),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.d_a
    }

    /// Encode one phoneme window into (2w+1) x d_a features on the tape.
    pub fn encode_window<R: Real>(
        &self,
        ps: &ParamStore<R>,
        tape: &mut Tape<R>,
        window: &[u32],
    ) -> Result<Var> {
        if window.len() != self.window_len {
            return Err(CoreError::contract("phoneme window has the wrong length"));
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
        let table = ps.lease(tape, self.table);
        let e = tape.embed(table, &indices);
        let pe = tape.constant(sin_position_table(self.window_len, self.d_a));
        let e = tape.add(e, pe);
        Ok(self.enc.forward(ps, tape, e))
    }
}
