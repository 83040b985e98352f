//! The full generator: style encoder, audio encoder, and the two parallel
//! group decoders behind a single parameter store.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::audio_encoder::AudioEncoder;
use crate::config::ModelConfig;
use crate::decoder::GroupDecoder;
use crate::error::Result;
use crate::motion::{
    extract_window, FaceSplit, MotionSequence, PhonemeSequence, EXPR_DIM, LOWER_DIM, UPPER_DIM,
};
use crate::nn::ParamStore;
use crate::real::Real;
use crate::rng::SeedRng;
use crate::style_encoder::StyleEncoder;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

pub struct Generator {
    pub style_enc: StyleEncoder,
    pub audio_enc: AudioEncoder,
    pub lower_dec: GroupDecoder,
    pub upper_dec: GroupDecoder,
    pub split: FaceSplit,
    pub cfg: ModelConfig,
}

impl Generator {
    pub fn new<R: Real>(
        ps: &mut ParamStore<R>,
        rng: &mut SeedRng,
        cfg: &ModelConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let split = FaceSplit::new(&cfg.lower_indices)?;
        Ok(Generator {
            style_enc: StyleEncoder::new(ps, rng, cfg),
            audio_enc: AudioEncoder::new(ps, rng, cfg),
            lower_dec: GroupDecoder::new(ps, rng, "lower", cfg, LOWER_DIM),
            upper_dec: GroupDecoder::new(ps, rng, "upper", cfg, UPPER_DIM),
            split,
            cfg: cfg.clone(),
        })
    }

    /// Decode a whole sequence on an existing tape, with gradients flowing
    /// into every leased parameter and into `style`. Returns an L x 64 var
    /// (one row per frame).
    ///
    /// Identical phoneme windows within the sequence are encoded once and
    /// shared; the forward values are bit-identical to re-encoding.
    pub fn decode_sequence_on_tape<R: Real>(
        &self,
        ps: &ParamStore<R>,
        tape: &mut Tape<R>,
        phonemes: &PhonemeSequence,
        style: Var,
    ) -> Result<Var> {
        let w = self.cfg.window;
        let prep_l = self.lower_dec.prepare(ps, tape, style);
        let prep_u = self.upper_dec.prepare(ps, tape, style);
        let lower_cols: Vec<usize> = self.split.lower().to_vec();
        let upper_cols: Vec<usize> = self.split.upper().to_vec();
        let mut window_cache: BTreeMap<Vec<u32>, Var> = BTreeMap::new();
        let mut rows = Vec::with_capacity(phonemes.len());
        for t in 0..phonemes.len() {
            let window = extract_window(phonemes, t, w)?;
            let audio = match window_cache.get(&window) {
                Some(&v) => v,
                None => {
                    let v = self.audio_enc.encode_window(ps, tape, &window)?;
                    window_cache.insert(window, v);
                    v
                }
            };
            let lo = self.lower_dec.decode_frame(ps, tape, &prep_l, audio)?;
            let up = self.upper_dec.decode_frame(ps, tape, &prep_u, audio)?;
            rows.push(tape.scatter_cols(lo, up, &lower_cols, &upper_cols));
        }
        Ok(tape.concat_rows(&rows))
    }

    /// Inference: decode with a fixed style code, off any caller tape.
    pub fn infer_sequence(
        &self,
        ps: &ParamStore<f32>,
        phonemes: &PhonemeSequence,
        style_code: &[f32],
    ) -> Result<MotionSequence> {
        crate::style_encoder::check_code_dim(style_code, self.cfg.d_s)?;
        let mut tape: Tape<f32> = Tape::new();
        let style = tape.constant(Tensor::row_vec(style_code.to_vec()));
        let out = self.decode_sequence_on_tape(ps, &mut tape, phonemes, style)?;
        MotionSequence::from_matrix(tape.value(out), phonemes.fps())
    }

    /// Inference: style code of a reference clip as plain values.
    pub fn extract_style_values(&self, ps: &ParamStore<f32>, m: &MotionSequence) -> Vec<f32> {
        self.style_enc.extract_values(ps, m).into_data()
    }

    /// Expression dimension of decoded frames (always 64).
    pub fn frame_dim(&self) -> usize {
        EXPR_DIM
    }
}
