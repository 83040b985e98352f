//! Scalar abstraction over `f32` and `f64`.
//!
//! Training runs in `f32`; gradient verification instantiates the same code
//! in `f64`. Motion data on disk is always `f32` (see the `visage` crate),
//! so conversions to and from `f32` are part of the contract.

use core::fmt::{Debug, Display};

/// Floating-point scalar used by tensors, the tape, and all model math.
pub trait Real:
    num_traits::Float + Debug + Display + Copy + 'static
{
    fn from_f64(x: f64) -> Self;
    fn from_f32(x: f32) -> Self;
    fn to_f64(self) -> f64;
    fn to_f32(self) -> f32;
    fn from_usize(x: usize) -> Self {
        Self::from_f64(x as f64)
    }
}

impl Real for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn from_f32(x: f32) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn to_f32(self) -> f32 {
        self
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn from_f32(x: f32) -> Self {
        x as f64
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn to_f32(self) -> f32 {
        self as f32
    }
}
