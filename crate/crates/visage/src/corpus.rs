//! Corpus directory layout: per-clip motion, phoneme, and style-reference
//! files under `clips/`, tied together by `index.json`.
//!
//! The index carries the generator seed, the full style recipes, and one
//! record per clip: {clip_id, style_label, motion, phonemes, style_ref},
//! with paths relative to the corpus root. Reading validates every record
//! and names the offending clip_id on failure; a written corpus reads back
//! equal to the original, bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use visage_core::motion::{TrainingClip, EXPR_DIM, LOWER_DIM, UPPER_DIM};
use visage_core::synth::{SyntheticCorpus, SyntheticStyle};
use visage_core::tensor::Tensor;

use crate::error::{bad_file, io_at, CliError, Result};
use crate::formats::{read_json, read_motion, read_phonemes, write_json, write_motion, write_phonemes};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Index {
    seed: u64,
    styles: Vec<StyleRecord>,
    clips: Vec<ClipRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StyleRecord {
    style_id: u32,
    gains: Vec<f32>,
    mouth_response: TensorRecord,
    upper_freq: Vec<f32>,
    upper_phase: Vec<f32>,
    noise_scale: f32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorRecord {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClipRecord {
    clip_id: u32,
    style_label: u32,
    motion: String,
    phonemes: String,
    style_ref: String,
}

fn style_to_record(s: &SyntheticStyle) -> StyleRecord {
    StyleRecord {
        style_id: s.style_id,
        gains: s.gains.clone(),
        mouth_response: TensorRecord {
            rows: s.mouth_response.rows(),
            cols: s.mouth_response.cols(),
            data: s.mouth_response.data().to_vec(),
        },
        upper_freq: s.upper_freq.clone(),
        upper_phase: s.upper_phase.clone(),
        noise_scale: s.noise_scale,
    }
}

fn style_from_record(pos: usize, r: StyleRecord) -> std::result::Result<SyntheticStyle, String> {
    if r.style_id as usize != pos {
        return Err(format!("style {} is stored at position {pos}", r.style_id));
    }
    if r.gains.len() != EXPR_DIM {
        return Err(format!("style {}: gains must have {EXPR_DIM} entries", r.style_id));
    }
    if r.mouth_response.cols != LOWER_DIM
        || r.mouth_response.rows == 0
        || r.mouth_response.data.len() != r.mouth_response.rows * r.mouth_response.cols
    {
        return Err(format!("style {}: malformed mouth response matrix", r.style_id));
    }
    if r.upper_freq.len() != UPPER_DIM || r.upper_phase.len() != UPPER_DIM {
        return Err(format!(
            "style {}: upper-face arrays must have {UPPER_DIM} entries",
            r.style_id
        ));
    }
    let all = r
        .gains
        .iter()
        .chain(&r.mouth_response.data)
        .chain(&r.upper_freq)
        .chain(&r.upper_phase);
    if all.chain([&r.noise_scale]).any(|v| !v.is_finite()) {
        return Err(format!("style {}: non-finite values", r.style_id));
    }
    Ok(SyntheticStyle {
        style_id: r.style_id,
        gains: r.gains,
        mouth_response: Tensor::from_vec(r.mouth_response.rows, r.mouth_response.cols, r.mouth_response.data),
        upper_freq: r.upper_freq,
        upper_phase: r.upper_phase,
        noise_scale: r.noise_scale,
    })
}

/// Write the corpus under `dir` (created if needed): clip files plus
/// `index.json`. Equal corpora produce byte-identical directory trees.
pub fn write_corpus(dir: &Path, corpus: &SyntheticCorpus) -> Result<()> {
    let clips_dir = dir.join("clips");
    fs::create_dir_all(&clips_dir).map_err(|e| io_at(&clips_dir, e))?;
    let mut records = Vec::with_capacity(corpus.clips.len());
    for (i, clip) in corpus.clips.iter().enumerate() {
        let motion = format!("clips/clip_{i:04}.mvec");
        let phonemes = format!("clips/clip_{i:04}.phon.json");
        let style_ref = format!("clips/clip_{i:04}.ref.mvec");
        write_motion(&dir.join(&motion), &clip.target)?;
        write_phonemes(&dir.join(&phonemes), &clip.phonemes)?;
        write_motion(&dir.join(&style_ref), &clip.style_ref)?;
        records.push(ClipRecord {
            clip_id: i as u32,
            style_label: clip.style_label,
            motion,
            phonemes,
            style_ref,
        });
    }
    let index = Index {
        seed: corpus.seed,
        styles: corpus.styles.iter().map(style_to_record).collect(),
        clips: records,
    };
    write_json(&dir.join("index.json"), &index)
}

/// Read a corpus directory back; every index record is validated and
/// failures name the clip (or style) they belong to.
pub fn read_corpus(dir: &Path) -> Result<SyntheticCorpus> {
    let index_path = dir.join("index.json");
    let index: Index = read_json(&index_path)?;

    let styles = index
        .styles
        .into_iter()
        .enumerate()
        .map(|(pos, r)| style_from_record(pos, r).map_err(|e| bad_file(&index_path, e)))
        .collect::<Result<Vec<_>>>()?;

    if styles.is_empty() {
        return Err(bad_file(&index_path, "corpus has no styles"));
    }

    let mut clips = Vec::with_capacity(index.clips.len());
    for (pos, record) in index.clips.into_iter().enumerate() {
        let cid = record.clip_id;
        let clip_err =
            |what: String| bad_file(&index_path, format!("clip {cid}: {what}"));
        if cid as usize != pos {
            return Err(clip_err(format!("stored at position {pos}")));
        }
        if record.style_label as usize >= styles.len() {
            return Err(clip_err(format!(
                "style label {} exceeds the {} styles",
                record.style_label,
                styles.len()
            )));
        }
        let target = read_motion(&dir.join(&record.motion))
            .map_err(|e| clip_err(e.to_string()))?;
        let phonemes = read_phonemes(&dir.join(&record.phonemes))
            .map_err(|e| clip_err(e.to_string()))?;
        let style_ref = read_motion(&dir.join(&record.style_ref))
            .map_err(|e| clip_err(e.to_string()))?;
        let clip = TrainingClip {
            phonemes,
            target,
            style_label: record.style_label,
            style_ref,
        };
        clip.validate().map_err(|e| clip_err(e.to_string()))?;
        clips.push(clip);
    }
    if clips.is_empty() {
        return Err(bad_file(&index_path, "corpus has no clips"));
    }
    Ok(SyntheticCorpus {
        styles,
        clips,
        seed: index.seed,
    })
}

/// Map of relative path -> file bytes for a corpus directory; the
/// determinism oracle compares two trees for byte equality.
pub fn corpus_tree_bytes(dir: &Path) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = vec!["index.json".to_string()];
    let clips_dir = dir.join("clips");
    let mut names: Vec<String> = fs::read_dir(&clips_dir)
        .map_err(|e| io_at(&clips_dir, e))?
        .map(|entry| {
            entry
                .map(|d| format!("clips/{}", d.file_name().to_string_lossy()))
                .map_err(|e| io_at(&clips_dir, e))
        })
        .collect::<Result<_>>()?;
    names.sort();
    files.extend(names);
    files
        .into_iter()
        .map(|rel| {
            let bytes = fs::read(dir.join(&rel)).map_err(|e| CliError::io(format!("{rel}: {e}")))?;
            Ok((rel, bytes))
        })
        .collect()
}
