//! Motion-domain types: expression frames, sequences, phoneme streams,
//! the lower/upper face split, and the synthetic face basis.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::real::Real;
use crate::tensor::Tensor;

/// Expression coefficients per frame.
pub const EXPR_DIM: usize = 64;
/// Size of the lower-face (mouth) coefficient group.
pub const LOWER_DIM: usize = 13;
/// Size of the upper-face coefficient group.
pub const UPPER_DIM: usize = EXPR_DIM - LOWER_DIM;

/// One frame of 3DMM expression coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionFrame {
    coeffs: [f32; EXPR_DIM],
}

impl ExpressionFrame {
    pub fn new(coeffs: [f32; EXPR_DIM]) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(CoreError::contract("expression coefficients must be finite"));
        }
        Ok(ExpressionFrame { coeffs })
    }

    pub fn from_slice(coeffs: &[f32]) -> Result<Self> {
        let arr: [f32; EXPR_DIM] = coeffs
            .try_into()
            .map_err(|_| CoreError::contract("expression frame needs exactly 64 coefficients"))?;
        Self::new(arr)
    }

    pub fn zeros() -> Self {
        ExpressionFrame {
            coeffs: [0.0; EXPR_DIM],
        }
    }

    pub fn coeffs(&self) -> &[f32; EXPR_DIM] {
        &self.coeffs
    }
}

/// A finite sequence of expression frames at a fixed frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence {
    frames: Vec<ExpressionFrame>,
    fps: f32,
}

impl MotionSequence {
    pub fn new(frames: Vec<ExpressionFrame>, fps: f32) -> Result<Self> {
        if frames.is_empty() {
            return Err(CoreError::contract("motion sequence must have >= 1 frame"));
        }
        if !(fps > 0.0) || !fps.is_finite() {
            return Err(CoreError::contract("fps must be positive and finite"));
        }
        Ok(MotionSequence { frames, fps })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction requires >= 1 frame
    }

    pub fn fps(&self) -> f32 {
        self.fps
    }

    pub fn frames(&self) -> &[ExpressionFrame] {
        &self.frames
    }

    pub fn frame(&self, t: usize) -> &ExpressionFrame {
        &self.frames[t]
    }

    /// Frames as an N x 64 matrix in the requested float width.
    pub fn to_matrix<R: Real>(&self) -> Tensor<R> {
        Tensor::from_fn(self.frames.len(), EXPR_DIM, |r, c| {
            R::from_f32(self.frames[r].coeffs[c])
        })
    }

    /// Rebuild a sequence from an N x 64 matrix.
    pub fn from_matrix(m: &Tensor<f32>, fps: f32) -> Result<Self> {
        if m.cols() != EXPR_DIM {
            return Err(CoreError::contract("motion matrix must have 64 columns"));
        }
        let frames = (0..m.rows())
            .map(|r| ExpressionFrame::from_slice(m.row(r)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(frames, fps)
    }
}

/// Frame-aligned phoneme labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PhonemeSequence {
    labels: Vec<u32>,
    vocab: usize,
    fps: f32,
}

impl PhonemeSequence {
    pub fn new(labels: Vec<u32>, vocab: usize, fps: f32) -> Result<Self> {
        if labels.is_empty() {
            return Err(CoreError::contract("phoneme sequence must have >= 1 label"));
        }
        if !(fps > 0.0) || !fps.is_finite() {
            return Err(CoreError::contract("fps must be positive and finite"));
        }
        for &l in &labels {
            if l as usize >= vocab {
                return Err(CoreError::Vocab {
                    label: l,
                    vocab: vocab as u32,
                });
            }
        }
        Ok(PhonemeSequence { labels, vocab, fps })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn fps(&self) -> f32 {
        self.fps
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }
}

/// Assignment of the 64 expression indices to lower/upper face groups.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceSplit {
    lower: Vec<usize>,
    upper: Vec<usize>,
}

impl FaceSplit {
    /// Build from the 13 lower-face indices; the upper group is the sorted
    /// complement.
    pub fn new(lower_indices: &[usize]) -> Result<Self> {
        if lower_indices.len() != LOWER_DIM {
            return Err(CoreError::contract("face split needs exactly 13 lower indices"));
        }
        let mut seen = [false; EXPR_DIM];
        for &i in lower_indices {
            if i >= EXPR_DIM {
                return Err(CoreError::contract("lower-face index out of range"));
            }
            if seen[i] {
                return Err(CoreError::contract("duplicate lower-face index"));
            }
            seen[i] = true;
        }
        let upper = (0..EXPR_DIM).filter(|&i| !seen[i]).collect();
        Ok(FaceSplit {
            lower: lower_indices.to_vec(),
            upper,
        })
    }

    pub fn lower(&self) -> &[usize] {
        &self.lower
    }

    pub fn upper(&self) -> &[usize] {
        &self.upper
    }
}

impl Default for FaceSplit {
    fn default() -> Self {
        let lower: Vec<usize> = (0..LOWER_DIM).collect();
        FaceSplit::new(&lower).expect("default split is valid")
    }
}

/// Linear face model: vertex offsets are `vertex_basis * coeffs` around
/// `mean_shape`. Coordinates are stored x0,y0,z0,x1,... per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceBasis {
    /// (3P x 64), columns orthonormal.
    pub vertex_basis: Tensor<f32>,
    /// 3P mean coordinates.
    pub mean_shape: Vec<f32>,
    /// Indices of mouth vertices in [0, P).
    pub mouth_vertex_ids: Vec<usize>,
}

impl FaceBasis {
    pub fn vertex_count(&self) -> usize {
        self.vertex_basis.rows() / 3
    }

    /// Max deviation of basis^T basis from the identity.
    pub fn orthonormality_error(&self) -> f32 {
        let b = &self.vertex_basis;
        let mut worst = 0.0f32;
        for i in 0..b.cols() {
            for j in i..b.cols() {
                let mut acc = 0.0f32;
                for r in 0..b.rows() {
                    acc += b.get(r, i) * b.get(r, j);
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((acc - target).abs());
            }
        }
        worst
    }

    pub fn validate(&self) -> Result<()> {
        if self.vertex_basis.rows() % 3 != 0 || self.vertex_basis.cols() != EXPR_DIM {
            return Err(CoreError::contract("basis must be (3P x 64)"));
        }
        if self.mean_shape.len() != self.vertex_basis.rows() {
            return Err(CoreError::contract("mean shape length must equal 3P"));
        }
        if self.mouth_vertex_ids.is_empty() {
            return Err(CoreError::contract("mouth vertex set must be nonempty"));
        }
        let p = self.vertex_count();
        if self.mouth_vertex_ids.iter().any(|&v| v >= p) {
            return Err(CoreError::contract("mouth vertex id out of range"));
        }
        if self.orthonormality_error() > 1e-5 {
            return Err(CoreError::contract("basis columns are not orthonormal"));
        }
        Ok(())
    }

    /// Rows of the basis (and mean entries) belonging to mouth-vertex
    /// coordinates, as a dense (3M x 64) matrix plus the 3M mean slice.
    pub fn mouth_rows(&self) -> (Tensor<f32>, Vec<f32>) {
        let m = self.mouth_vertex_ids.len();
        let mut rows = Tensor::zeros(3 * m, EXPR_DIM);
        let mut mean = vec![0.0f32; 3 * m];
        for (k, &v) in self.mouth_vertex_ids.iter().enumerate() {
            for d in 0..3 {
                let src = 3 * v + d;
                let dst = 3 * k + d;
                rows.row_mut(dst).copy_from_slice(self.vertex_basis.row(src));
                mean[dst] = self.mean_shape[src];
            }
        }
        (rows, mean)
    }
}

/// One training example: an aligned phoneme/motion pair with its style
/// label and a same-style reference clip for the style encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingClip {
    pub phonemes: PhonemeSequence,
    pub target: MotionSequence,
    pub style_label: u32,
    pub style_ref: MotionSequence,
}

impl TrainingClip {
    pub fn validate(&self) -> Result<()> {
        if self.phonemes.len() != self.target.len() {
            return Err(CoreError::contract(
                "phoneme and target lengths must match",
            ));
        }
        Ok(())
    }
}

/// Labels at indices t-w..t+w with out-of-range indices clamped to the
/// nearest valid frame (edge replication). Always 2w+1 labels.
pub fn extract_window(p: &PhonemeSequence, t: usize, w: usize) -> Result<Vec<u32>> {
    let n = p.len();
    if t >= n {
        return Err(CoreError::Range { index: t, len: n });
    }
    let labels = p.labels();
    let mut out = Vec::with_capacity(2 * w + 1);
    for off in -(w as isize)..=(w as isize) {
        let idx = (t as isize + off).clamp(0, n as isize - 1) as usize;
        out.push(labels[idx]);
    }
    Ok(out)
}

/// Route a frame's coefficients into (lower, upper) groups.
pub fn split_expression(f: &ExpressionFrame, s: &FaceSplit) -> (Vec<f32>, Vec<f32>) {
    let lower = s.lower().iter().map(|&i| f.coeffs()[i]).collect();
    let upper = s.upper().iter().map(|&i| f.coeffs()[i]).collect();
    (lower, upper)
}

/// Inverse of [`split_expression`].
pub fn merge_expression(lower: &[f32], upper: &[f32], s: &FaceSplit) -> Result<ExpressionFrame> {
    if lower.len() != LOWER_DIM || upper.len() != UPPER_DIM {
        return Err(CoreError::contract("merge needs 13 lower + 51 upper values"));
    }
    let mut coeffs = [0.0f32; EXPR_DIM];
    for (v, &i) in lower.iter().zip(s.lower()) {
        coeffs[i] = *v;
    }
    for (v, &i) in upper.iter().zip(s.upper()) {
        coeffs[i] = *v;
    }
    ExpressionFrame::new(coeffs)
}
