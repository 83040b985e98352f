//! Core algorithms for stylized talking-face motion generation.
//!
//! The pipeline turns frame-aligned phoneme labels into sequences of 64-dim
//! 3DMM expression parameters, conditioned on a speaking-style code extracted
//! from a reference motion clip. Everything in this crate is pure computation
//! over `alloc` containers: domain types, a small reverse-mode autodiff tape,
//! the three network branches (style encoder, audio encoder, dynamic decoder),
//! the discriminators, the loss stack, the training loop, and a seeded
//! synthetic-data generator. File formats and the CLI live in the companion
//! `visage` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod audio_encoder;
pub mod config;
pub mod decoder;
pub mod disc;
pub mod error;
pub mod gradcheck;
pub mod loss;
pub mod model;
pub mod motion;
pub mod nn;
pub mod real;
pub mod rng;
pub mod style_encoder;
pub mod synth;
pub mod tape;
pub mod tensor;
pub mod train;

pub use config::ModelConfig;
pub use error::CoreError;
pub use motion::{
    ExpressionFrame, FaceBasis, FaceSplit, MotionSequence, PhonemeSequence, TrainingClip,
    EXPR_DIM, LOWER_DIM, UPPER_DIM,
};
pub use real::Real;
pub use tensor::Tensor;
