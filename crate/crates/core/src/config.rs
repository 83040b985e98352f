//! Model hyperparameters.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::motion::{EXPR_DIM, LOWER_DIM};

/// Architecture configuration shared by every component. Defaults follow
/// the reference setup; the `tiny` preset shrinks everything for gradient
/// checks and fast tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Expression coefficient count per frame (fixed 64 by the motion format).
    pub expr_dim: usize,
    /// Style code width d_s.
    pub d_s: usize,
    /// Articulation feature width per window position.
    pub d_a: usize,
    /// Attention heads in every transformer block.
    pub n_heads: usize,
    /// Feed-forward width inside encoder blocks.
    pub ff_width: usize,
    /// Transformer layers in the style encoder.
    pub style_layers: usize,
    /// Transformer layers in the audio encoder.
    pub audio_layers: usize,
    /// Blocks per group decoder.
    pub decoder_blocks: usize,
    /// Kernel count K of each adaptive feed-forward layer.
    pub kernels: usize,
    /// When false, adaptive layers collapse to ordinary ones (ablation mode).
    pub dynamic_ffn: bool,
    /// Phoneme window half-width w; windows span 2w+1 frames.
    pub window: usize,
    /// Phoneme vocabulary size V.
    pub vocab: usize,
    /// Lip-sync embedding width d_e.
    pub sync_dim: usize,
    /// Hidden width of the sync discriminator towers.
    pub sync_hidden: usize,
    /// Base channel count of the convolutional discriminators.
    pub disc_channels: usize,
    /// Frame rate of all motion data.
    pub fps: f32,
    /// The 13 expression indices assigned to the lower-face group.
    pub lower_indices: Vec<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            expr_dim: EXPR_DIM,
            d_s: 256,
            d_a: 256,
            n_heads: 4,
            ff_width: 1024,
            style_layers: 3,
            audio_layers: 2,
            decoder_blocks: 3,
            kernels: 8,
            dynamic_ffn: true,
            window: 5,
            vocab: 44,
            sync_dim: 128,
            sync_hidden: 128,
            disc_channels: 64,
            fps: 30.0,
            lower_indices: (0..LOWER_DIM).collect(),
        }
    }
}

impl ModelConfig {
    /// Miniature configuration for gradient checks and quick tests:
    /// d_s=8, K=2, w=1, single layers everywhere.
    pub fn tiny() -> Self {
        ModelConfig {
            expr_dim: EXPR_DIM,
            d_s: 8,
            d_a: 8,
            n_heads: 2,
            ff_width: 16,
            style_layers: 1,
            audio_layers: 1,
            decoder_blocks: 1,
            kernels: 2,
            dynamic_ffn: true,
            window: 1,
            vocab: 6,
            sync_dim: 8,
            sync_hidden: 8,
            disc_channels: 8,
            fps: 30.0,
            lower_indices: (0..LOWER_DIM).collect(),
        }
    }

    /// Small-but-trainable configuration for single-core training runs.
    pub fn desk() -> Self {
        ModelConfig {
            d_s: 32,
            d_a: 32,
            n_heads: 4,
            ff_width: 64,
            style_layers: 2,
            audio_layers: 1,
            decoder_blocks: 2,
            kernels: 8,
            window: 2,
            sync_dim: 32,
            sync_hidden: 32,
            disc_channels: 16,
            ..ModelConfig::default()
        }
    }

    /// Length of one phoneme window: 2w+1.
    pub fn window_len(&self) -> usize {
        2 * self.window + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.expr_dim != EXPR_DIM {
            return Err(CoreError::contract("expr_dim is fixed at 64"));
        }
        if self.d_s == 0 || self.d_a == 0 {
            return Err(CoreError::contract("model widths must be positive"));
        }
        if self.n_heads == 0 || self.d_s % self.n_heads != 0 {
            return Err(CoreError::contract(
                "d_s must be a positive multiple of n_heads",
            ));
        }
        if self.d_a % self.n_heads != 0 {
            return Err(CoreError::contract(
                "d_a must be a positive multiple of n_heads",
            ));
        }
        if self.kernels == 0 {
            return Err(CoreError::contract("kernel count must be >= 1"));
        }
        if self.vocab == 0 {
            return Err(CoreError::contract("vocabulary must be nonempty"));
        }
        if self.fps <= 0.0 {
            return Err(CoreError::contract("fps must be positive"));
        }
        if self.lower_indices.len() != LOWER_DIM {
            return Err(CoreError::contract("exactly 13 lower-face indices required"));
        }
        let mut seen = [false; EXPR_DIM];
        for &i in &self.lower_indices {
            if i >= EXPR_DIM {
                return Err(CoreError::contract("lower-face index out of range"));
            }
            if seen[i] {
                return Err(CoreError::contract("duplicate lower-face index"));
            }
            seen[i] = true;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ModelConfig::default().validate().unwrap();
        ModelConfig::tiny().validate().unwrap();
        ModelConfig::desk().validate().unwrap();
    }

    #[test]
    fn default_sizes_match_reference() {
        let c = ModelConfig::default();
        assert_eq!(c.d_s, 256);
        assert_eq!(c.d_a, 256);
        assert_eq!(c.kernels, 8);
        assert_eq!(c.window, 5);
        assert_eq!(c.window_len(), 11);
        assert_eq!(c.vocab, 44);
        assert_eq!(c.fps, 30.0);
    }

    #[test]
    fn bad_split_rejected() {
        let mut c = ModelConfig::default();
        c.lower_indices[0] = c.lower_indices[1];
        assert!(c.validate().is_err());
        let mut c = ModelConfig::default();
        c.lower_indices[12] = 64;
        assert!(c.validate().is_err());
    }
}
