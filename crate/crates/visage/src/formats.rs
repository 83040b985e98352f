//! On-disk formats for single artifacts: motion clips, phoneme tracks,
//! style codes, and face splits.
//!
//! Motion is binary: `"MVEC"` magic, then u32 version (=1), u32 frame count
//! N, u32 coefficient count D (=64), f32 fps — all little-endian — followed
//! by N·D little-endian f32 coefficients in row-major frame order. The
//! header is exactly 20 bytes. Everything else is JSON with unknown keys
//! rejected. All readers validate through the core constructors, so a file
//! that parses always yields a usable value.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use visage_core::motion::{ExpressionFrame, MotionSequence, PhonemeSequence, EXPR_DIM};

use crate::error::{bad_file, io_at, Result};

pub const MOTION_MAGIC: [u8; 4] = *b"MVEC";
pub const MOTION_VERSION: u32 = 1;
/// Magic + version + N + D + fps, each four bytes.
pub const MOTION_HEADER_LEN: usize = 20;

/// Serialize a motion sequence to the binary layout.
pub fn motion_to_bytes(m: &MotionSequence) -> Vec<u8> {
    let n = m.len();
    let mut out = Vec::with_capacity(MOTION_HEADER_LEN + n * EXPR_DIM * 4);
    out.extend_from_slice(&MOTION_MAGIC);
    out.extend_from_slice(&MOTION_VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&(EXPR_DIM as u32).to_le_bytes());
    out.extend_from_slice(&m.fps().to_le_bytes());
    for frame in m.frames() {
        for c in frame.coeffs() {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    out
}

/// Parse the binary layout; every header field and the payload length are
/// checked before any frame is built.
pub fn motion_from_bytes(bytes: &[u8]) -> std::result::Result<MotionSequence, String> {
    if bytes.len() < MOTION_HEADER_LEN {
        return Err(format!(
            "motion file truncated: {} bytes, header needs {MOTION_HEADER_LEN}",
            bytes.len()
        ));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    if bytes[..4] != MOTION_MAGIC {
        return Err("not a motion file (bad magic)".into());
    }
    let version = word(4);
    if version != MOTION_VERSION {
        return Err(format!(
            "unsupported motion version {version} (expected {MOTION_VERSION})"
        ));
    }
    let n = word(8) as usize;
    let d = word(12) as usize;
    if d != EXPR_DIM {
        return Err(format!("motion file has {d} coefficients per frame, expected {EXPR_DIM}"));
    }
    let fps = f32::from_le_bytes(bytes[16..20].try_into().unwrap());
    let expected = MOTION_HEADER_LEN + n * EXPR_DIM * 4;
    if bytes.len() != expected {
        return Err(format!(
            "motion payload is {} bytes, header promises {}",
            bytes.len() - MOTION_HEADER_LEN,
            expected - MOTION_HEADER_LEN
        ));
    }
    let mut frames = Vec::with_capacity(n);
    for f in 0..n {
        let mut coeffs = [0.0f32; EXPR_DIM];
        for (c, v) in coeffs.iter_mut().enumerate() {
            let at = MOTION_HEADER_LEN + (f * EXPR_DIM + c) * 4;
            *v = f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        }
        frames.push(ExpressionFrame::new(coeffs).map_err(|e| e.to_string())?);
    }
    MotionSequence::new(frames, fps).map_err(|e| e.to_string())
}

pub fn write_motion(path: &Path, m: &MotionSequence) -> Result<()> {
    fs::write(path, motion_to_bytes(m)).map_err(|e| io_at(path, e))
}

pub fn read_motion(path: &Path) -> Result<MotionSequence> {
    let bytes = fs::read(path).map_err(|e| io_at(path, e))?;
    motion_from_bytes(&bytes).map_err(|e| bad_file(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhonemeFile {
    fps: f32,
    vocab: usize,
    labels: Vec<u32>,
}

pub fn write_phonemes(path: &Path, p: &PhonemeSequence) -> Result<()> {
    let file = PhonemeFile {
        fps: p.fps(),
        vocab: p.vocab(),
        labels: p.labels().to_vec(),
    };
    write_json(path, &file)
}

pub fn read_phonemes(path: &Path) -> Result<PhonemeSequence> {
    let file: PhonemeFile = read_json(path)?;
    PhonemeSequence::new(file.labels, file.vocab, file.fps)
        .map_err(|e| bad_file(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StyleCodeFile {
    dim: usize,
    values: Vec<f32>,
}

pub fn write_style_code(path: &Path, values: &[f32]) -> Result<()> {
    let file = StyleCodeFile {
        dim: values.len(),
        values: values.to_vec(),
    };
    write_json(path, &file)
}

pub fn read_style_code(path: &Path) -> Result<Vec<f32>> {
    let file: StyleCodeFile = read_json(path)?;
    if file.dim != file.values.len() {
        return Err(bad_file(
            path,
            format!(
                "style code declares dim {} but carries {} values",
                file.dim,
                file.values.len()
            ),
        ));
    }
    if file.values.iter().any(|v| !v.is_finite()) {
        return Err(bad_file(path, "style code values must be finite"));
    }
    Ok(file.values)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplitFile {
    lower: Vec<usize>,
}

pub fn write_split(path: &Path, lower: &[usize]) -> Result<()> {
    write_json(
        path,
        &SplitFile {
            lower: lower.to_vec(),
        },
    )
}

/// Read and validate a face split; returns the lower-face indices.
pub fn read_split(path: &Path) -> Result<Vec<usize>> {
    let file: SplitFile = read_json(path)?;
    visage_core::motion::FaceSplit::new(&file.lower).map_err(|e| bad_file(path, e))?;
    Ok(file.lower)
}

/// Pretty-printed JSON with a trailing newline; used by every JSON writer
/// in this crate so identical values always produce identical bytes.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| io_at(path, format!("serialize: {e}")))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_at(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| io_at(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| bad_file(path, e))
}
