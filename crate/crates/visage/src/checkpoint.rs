//! Checkpoint container: one file holding a JSON manifest and a flat
//! little-endian f32 tensor blob.
//!
//! Layout: `"VCKP"` magic, u32 version (=1), u64 manifest length, the
//! manifest bytes, then the blob. The manifest echoes the model
//! configuration plus a small state record, and lists every tensor as
//! {name, shape, dtype, byte_offset} grouped into named sections
//! ("generator", "sync", "style", "temporal"). Offsets index into the blob
//! and must tile it exactly — a checkpoint either loads bit-exact or fails
//! with an error naming the offending tensor.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use visage_core::config::ModelConfig;
use visage_core::nn::ParamStore;
use visage_core::tensor::Tensor;

use crate::error::{bad_file, io_at, CliError, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"VCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Training progress and role metadata carried next to the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointState {
    /// Optimizer steps completed when the checkpoint was written.
    pub step: u64,
    /// True for pretrained discriminators that must not be trained further.
    pub frozen: bool,
    /// Style class count the style discriminator was built for.
    pub n_styles: usize,
}

/// An in-memory checkpoint: config echo, state, and named tensor sections.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub state: CheckpointState,
    sections: BTreeMap<String, Vec<(String, Tensor<f32>)>>,
}

impl Checkpoint {
    pub fn new(config: ModelConfig, state: CheckpointState) -> Self {
        Checkpoint {
            config,
            state,
            sections: BTreeMap::new(),
        }
    }

    /// Snapshot a parameter store as a section, in registration order.
    pub fn insert_section(&mut self, name: &str, ps: &ParamStore<f32>) {
        let tensors = ps
            .iter()
            .map(|(_, n, t)| (n.to_string(), t.clone()))
            .collect();
        self.sections.insert(name.to_string(), tensors);
    }

    pub fn has_section(&self, name: &str) -> bool {
        self.sections.contains_key(name)
    }

    pub fn section_names(&self) -> Vec<&str> {
        self.sections.keys().map(String::as_str).collect()
    }

    /// Overwrite every tensor of `store` from the named section, matching
    /// by name and validating shapes. The section must cover the store
    /// exactly: a missing or extra tensor is an error naming it.
    pub fn restore_section(&self, name: &str, store: &mut ParamStore<f32>) -> Result<()> {
        let section = self.sections.get(name).ok_or_else(|| {
            CliError::io(format!("checkpoint has no \"{name}\" section"))
        })?;
        let by_name: BTreeMap<&str, &Tensor<f32>> = section
            .iter()
            .map(|(n, t)| (n.as_str(), t))
            .collect();
        for (id, pname, current) in store.iter() {
            let stored = *by_name.get(pname).ok_or_else(|| {
                CliError::io(format!("checkpoint section \"{name}\" is missing tensor \"{pname}\""))
            })?;
            if stored.shape() != current.shape() {
                return Err(CliError::io(format!(
                    "checkpoint tensor \"{pname}\" has shape {:?}, model expects {:?}",
                    stored.shape(),
                    current.shape()
                )));
            }
            let _ = id;
        }
        let known: BTreeMap<&str, ()> = store.iter().map(|(_, n, _)| (n, ())).collect();
        if let Some((extra, _)) = section.iter().find(|(n, _)| !known.contains_key(n.as_str())) {
            return Err(CliError::io(format!(
                "checkpoint section \"{name}\" carries unknown tensor \"{extra}\""
            )));
        }
        // All names and shapes verified; copy in a second pass.
        let ids: Vec<_> = store.iter().map(|(id, n, _)| (id, n.to_string())).collect();
        for (id, pname) in ids {
            *store.get_mut(id) = (*by_name[pname.as_str()]).clone();
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    config: ModelConfig,
    state: CheckpointState,
    sections: Vec<ManifestSection>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestSection {
    name: String,
    tensors: Vec<ManifestTensor>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestTensor {
    name: String,
    shape: [usize; 2],
    dtype: String,
    byte_offset: u64,
}

/// Serialize to the container bytes. Sections are written in name order,
/// tensors in their stored order, so equal checkpoints produce equal bytes.
pub fn checkpoint_to_bytes(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let mut blob: Vec<u8> = Vec::new();
    let mut sections = Vec::with_capacity(ckpt.sections.len());
    for (sname, tensors) in &ckpt.sections {
        let mut entries = Vec::with_capacity(tensors.len());
        for (tname, t) in tensors {
            entries.push(ManifestTensor {
                name: tname.clone(),
                shape: [t.rows(), t.cols()],
                dtype: "f32".to_string(),
                byte_offset: blob.len() as u64,
            });
            for v in t.data() {
                blob.extend_from_slice(&v.to_le_bytes());
            }
        }
        sections.push(ManifestSection {
            name: sname.clone(),
            tensors: entries,
        });
    }
    let manifest = Manifest {
        config: ckpt.config.clone(),
        state: ckpt.state.clone(),
        sections,
    };
    let manifest_json = serde_json::to_vec(&manifest)
        .map_err(|e| CliError::run(format!("serialize checkpoint manifest: {e}")))?;

    let mut out = Vec::with_capacity(16 + manifest_json.len() + blob.len());
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(manifest_json.len() as u64).to_le_bytes());
    out.extend_from_slice(&manifest_json);
    out.extend_from_slice(&blob);
    Ok(out)
}

/// Parse and validate container bytes. Every tensor is checked for a known
/// dtype, in-bounds offsets, and finite values; offsets must tile the blob
/// exactly, in order, with no gaps or trailing bytes.
pub fn checkpoint_from_bytes(bytes: &[u8]) -> std::result::Result<Checkpoint, String> {
    if bytes.len() < 16 {
        return Err(format!("checkpoint truncated: {} bytes", bytes.len()));
    }
    if bytes[..4] != CHECKPOINT_MAGIC {
        return Err("not a checkpoint file (bad magic)".into());
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(format!(
            "unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
        ));
    }
    let manifest_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let blob_start = 16usize
        .checked_add(manifest_len)
        .filter(|&end| end <= bytes.len())
        .ok_or_else(|| "manifest length exceeds file size".to_string())?;
    let manifest: Manifest = serde_json::from_slice(&bytes[16..blob_start])
        .map_err(|e| format!("checkpoint manifest: {e}"))?;
    let blob = &bytes[blob_start..];

    let mut sections = BTreeMap::new();
    let mut cursor = 0u64;
    for section in &manifest.sections {
        let mut tensors = Vec::with_capacity(section.tensors.len());
        for entry in &section.tensors {
            if entry.dtype != "f32" {
                return Err(format!(
                    "tensor \"{}\" has unsupported dtype \"{}\"",
                    entry.name, entry.dtype
                ));
            }
            let [rows, cols] = entry.shape;
            let count = rows
                .checked_mul(cols)
                .filter(|&n| n > 0)
                .ok_or_else(|| format!("tensor \"{}\" has invalid shape {:?}", entry.name, entry.shape))?;
            let nbytes = count
                .checked_mul(4)
                .ok_or_else(|| format!("tensor \"{}\" is too large", entry.name))?;
            if entry.byte_offset != cursor {
                return Err(format!(
                    "tensor \"{}\" offset {} does not follow the previous tensor (expected {cursor})",
                    entry.name, entry.byte_offset
                ));
            }
            let start = cursor as usize;
            let end = start
                .checked_add(nbytes)
                .filter(|&e| e <= blob.len())
                .ok_or_else(|| format!("tensor \"{}\" runs past the end of the blob", entry.name))?;
            let data: Vec<f32> = blob[start..end]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let t = Tensor::from_vec(rows, cols, data);
            if !t.all_finite() {
                return Err(format!("tensor \"{}\" holds non-finite values", entry.name));
            }
            if tensors.iter().any(|(n, _): &(String, _)| n == &entry.name) {
                return Err(format!(
                    "tensor \"{}\" appears twice in section \"{}\"",
                    entry.name, section.name
                ));
            }
            tensors.push((entry.name.clone(), t));
            cursor = end as u64;
        }
        if sections.insert(section.name.clone(), tensors).is_some() {
            return Err(format!("section \"{}\" appears twice", section.name));
        }
    }
    if cursor as usize != blob.len() {
        return Err(format!(
            "blob holds {} bytes but the manifest accounts for {cursor}",
            blob.len()
        ));
    }
    Ok(Checkpoint {
        config: manifest.config,
        state: manifest.state,
        sections,
    })
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let bytes = checkpoint_to_bytes(ckpt)?;
    fs::write(path, bytes).map_err(|e| io_at(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| io_at(path, e))?;
    checkpoint_from_bytes(&bytes).map_err(|e| bad_file(path, e))
}
