//! Flat parameter storage, update magnitudes, top-k core regions, freeze
//! masks, masked updates, and checkpoint / region-file persistence.
//!
//! All arithmetic is 64-bit. Values are immutable once constructed; every
//! operation returns a new value, so sharing across threads is safe.

use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::fnv1a64;

/// Identifier of a task within a suite. Ordering-sensitive comparisons in the
/// pipeline go through suite indices, not through this label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaskId(pub String);

impl TaskId {
    pub fn new(s: impl Into<String>) -> Self {
        TaskId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Flat vector of all model parameters. Entries are always finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    values: Vec<f64>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::non_finite("parameter vector", idx));
        }
        Ok(ParamVector { values })
    }

    pub fn zeros(dim: usize) -> Self {
        ParamVector {
            values: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, j: usize) -> f64 {
        self.values[j]
    }

    /// Bit-level equality on the full vector (distinguishes -0.0 from 0.0).
    pub fn bits_eq(&self, other: &ParamVector) -> bool {
        self.dim() == other.dim()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Non-negative per-coordinate update magnitudes |theta_i - theta_0|.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeVector {
    values: Vec<f64>,
}

impl MagnitudeVector {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if let Some(idx) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::non_finite("magnitude vector (negative or non-finite)", idx));
        }
        Ok(MagnitudeVector { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Sorted set of parameter indices holding a task's core region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreRegion {
    indices: Vec<usize>,
    dim: usize,
    task_id: TaskId,
}

impl CoreRegion {
    /// Builds a region from an index list, enforcing the invariants
    /// (non-empty, strictly increasing, all indices below `dim`).
    pub fn new(mut indices: Vec<usize>, dim: usize, task_id: TaskId) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() {
            return Err(Error::config("indices", "core region may not be empty"));
        }
        if let Some(&max) = indices.last() {
            if max >= dim {
                return Err(Error::config(
                    "indices",
                    format!("index {max} out of range for dim {dim}"),
                ));
            }
        }
        Ok(CoreRegion {
            indices,
            dim,
            task_id,
        })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn task_id(&self) -> &TaskId {
        &self.task_id
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }
}

/// Binary trainability mask: `true` = trainable, `false` = frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct FreezeMask {
    bits: Vec<bool>,
}

impl FreezeMask {
    pub fn all_trainable(dim: usize) -> Self {
        FreezeMask {
            bits: vec![true; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.bits.len()
    }

    pub fn is_trainable(&self, j: usize) -> bool {
        self.bits[j]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn trainable_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn frozen_count(&self) -> usize {
        self.dim() - self.trainable_count()
    }
}

/// Absolute per-coordinate update magnitudes between a probe result and the
/// starting parameters. Symmetric in its arguments.
pub fn delta_magnitude(theta_i: &ParamVector, theta_0: &ParamVector) -> Result<MagnitudeVector> {
    if theta_i.dim() != theta_0.dim() {
        return Err(Error::DimensionMismatch {
            expected: theta_0.dim(),
            got: theta_i.dim(),
        });
    }
    let values = theta_i
        .values()
        .iter()
        .zip(theta_0.values())
        .map(|(a, b)| (a - b).abs())
        .collect();
    Ok(MagnitudeVector { values })
}

/// Number of indices a core region holds for a given percentage and dimension:
/// `max(1, floor(p * D / 100))`. The small guard absorbs float error when the
/// exact product is an integer.
pub fn core_region_size(p: f64, dim: usize) -> usize {
    let k = (p * dim as f64 / 100.0 + 1e-9).floor() as usize;
    k.max(1)
}

/// Extracts the indices with the largest magnitudes. Ties break toward the
/// smaller index; the result is sorted ascending. An all-zero magnitude
/// vector is valid (everything ties) and logs a warning.
pub fn top_k_region(mags: &MagnitudeVector, p: f64, task_id: TaskId) -> Result<CoreRegion> {
    if mags.dim() == 0 {
        return Err(Error::config("mags", "magnitude vector is empty"));
    }
    if !(p > 0.0 && p <= 100.0) {
        return Err(Error::config(
            "p",
            format!("core percentage must lie in (0, 100], got {p}"),
        ));
    }
    if mags.values().iter().all(|&m| m == 0.0) {
        log::warn!(
            "top_k_region: all-zero magnitudes for task {task_id}; region selected by index order"
        );
    }
    let k = core_region_size(p, mags.dim());
    let mut order: Vec<usize> = (0..mags.dim()).collect();
    // Descending by magnitude, ascending by index among ties.
    order.sort_by(|&a, &b| {
        mags.values()[b]
            .total_cmp(&mags.values()[a])
            .then(a.cmp(&b))
    });
    order.truncate(k);
    CoreRegion::new(order, mags.dim(), task_id)
}

/// Builds the trainability mask for a set of frozen indices.
pub fn mask_from_frozen(frozen: &[usize], dim: usize) -> Result<FreezeMask> {
    let mut bits = vec![true; dim];
    for &j in frozen {
        if j >= dim {
            return Err(Error::config(
                "frozen",
                format!("frozen index {j} out of range for dim {dim}"),
            ));
        }
        bits[j] = false;
    }
    if dim > 0 && bits.iter().all(|&b| !b) {
        log::warn!("mask_from_frozen: mask is fully frozen (no trainable coordinates)");
    }
    Ok(FreezeMask { bits })
}

/// Applies `theta + delta` on trainable coordinates only. Frozen coordinates
/// of the result are bit-identical to the input.
pub fn apply_masked_update(
    theta: &ParamVector,
    delta: &[f64],
    mask: &FreezeMask,
) -> Result<ParamVector> {
    if delta.len() != theta.dim() || mask.dim() != theta.dim() {
        return Err(Error::DimensionMismatch {
            expected: theta.dim(),
            got: if delta.len() != theta.dim() {
                delta.len()
            } else {
                mask.dim()
            },
        });
    }
    if let Some(idx) = delta.iter().position(|d| !d.is_finite()) {
        return Err(Error::non_finite("update delta", idx));
    }
    let mut values = theta.values().to_vec();
    for (j, v) in values.iter_mut().enumerate() {
        if mask.is_trainable(j) {
            *v += delta[j];
        }
    }
    if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::non_finite("updated parameters", idx));
    }
    Ok(ParamVector { values })
}

// ---------------------------------------------------------------------------
// Checkpoint persistence
// ---------------------------------------------------------------------------

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DPICKPT\0";
pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

/// Checkpoint metadata carried alongside the parameter payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub model_spec_hash: u64,
    pub seed: u64,
    pub stage_index: u32,
    pub schema_version: u32,
}

/// A parameter snapshot plus metadata. Round-trips through disk bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ParamVector,
    pub meta: CheckpointMeta,
}

impl Checkpoint {
    pub fn new(params: ParamVector, model_spec_hash: u64, seed: u64, stage_index: u32) -> Self {
        Checkpoint {
            params,
            meta: CheckpointMeta {
                model_spec_hash,
                seed,
                stage_index,
                schema_version: CHECKPOINT_SCHEMA_VERSION,
            },
        }
    }
}

/// Binary layout, all little-endian:
/// magic (8) | schema_version u32 | dim u64 | model_spec_hash u64 |
/// seed u64 | stage_index u32 | payload dim*f64 | fnv1a64(payload) u64
pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let mut buf: Vec<u8> = Vec::with_capacity(40 + ckpt.params.dim() * 8 + 8);
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&ckpt.meta.schema_version.to_le_bytes());
    buf.extend_from_slice(&(ckpt.params.dim() as u64).to_le_bytes());
    buf.extend_from_slice(&ckpt.meta.model_spec_hash.to_le_bytes());
    buf.extend_from_slice(&ckpt.meta.seed.to_le_bytes());
    buf.extend_from_slice(&ckpt.meta.stage_index.to_le_bytes());
    let payload_start = buf.len();
    for v in ckpt.params.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let checksum = fnv1a64(&buf[payload_start..]);
    buf.extend_from_slice(&checksum.to_le_bytes());
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut off = 0usize;

    let take = |off: &mut usize, n: usize| -> Result<&[u8]> {
        if *off + n > bytes.len() {
            return Err(Error::CheckpointTruncated);
        }
        let s = &bytes[*off..*off + n];
        *off += n;
        Ok(s)
    };

    let magic = take(&mut off, 8)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::CheckpointBadMagic);
    }
    let schema_version = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap());
    if schema_version != CHECKPOINT_SCHEMA_VERSION {
        return Err(Error::CheckpointSchemaVersion {
            found: schema_version,
            expected: CHECKPOINT_SCHEMA_VERSION,
        });
    }
    let dim = u64::from_le_bytes(take(&mut off, 8)?.try_into().unwrap()) as usize;
    let model_spec_hash = u64::from_le_bytes(take(&mut off, 8)?.try_into().unwrap());
    let seed = u64::from_le_bytes(take(&mut off, 8)?.try_into().unwrap());
    let stage_index = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap());

    let payload_len = dim
        .checked_mul(8)
        .ok_or(Error::CheckpointTruncated)?;
    let payload = take(&mut off, payload_len)?.to_vec();
    let stored_checksum = u64::from_le_bytes(take(&mut off, 8)?.try_into().unwrap());
    if fnv1a64(&payload) != stored_checksum {
        return Err(Error::CheckpointChecksum);
    }

    let mut values = Vec::with_capacity(dim);
    for chunk in payload.chunks_exact(8) {
        values.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    Ok(Checkpoint {
        params: ParamVector { values },
        meta: CheckpointMeta {
            model_spec_hash,
            seed,
            stage_index,
            schema_version,
        },
    })
}

// ---------------------------------------------------------------------------
// Region text format
// ---------------------------------------------------------------------------

/// Writes a core region in the line-oriented text format:
/// `#dpi-region v1 dim=D task=ID p=P` followed by one index per line.
pub fn save_region(region: &CoreRegion, p: f64, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!(
        "#dpi-region v1 dim={} task={} p={}\n",
        region.dim(),
        region.task_id(),
        p
    ));
    for j in region.indices() {
        out.push_str(&format!("{j}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a region file written by [`save_region`]; returns the region and
/// the core percentage recorded in the header.
pub fn load_region(path: &Path) -> Result<(CoreRegion, f64)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::RegionFormat("empty file".into()))?;
    let rest = header
        .strip_prefix("#dpi-region v1 ")
        .ok_or_else(|| Error::RegionFormat(format!("bad header: {header}")))?;
    let mut dim = None;
    let mut task = None;
    let mut p = None;
    for field in rest.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::RegionFormat(format!("bad header field: {field}")))?;
        match key {
            "dim" => {
                dim = Some(value.parse::<usize>().map_err(|e| {
                    Error::RegionFormat(format!("bad dim `{value}`: {e}"))
                })?)
            }
            "task" => task = Some(TaskId::new(value)),
            "p" => {
                p = Some(value.parse::<f64>().map_err(|e| {
                    Error::RegionFormat(format!("bad p `{value}`: {e}"))
                })?)
            }
            _ => return Err(Error::RegionFormat(format!("unknown header key: {key}"))),
        }
    }
    let dim = dim.ok_or_else(|| Error::RegionFormat("header missing dim".into()))?;
    let task = task.ok_or_else(|| Error::RegionFormat("header missing task".into()))?;
    let p = p.ok_or_else(|| Error::RegionFormat("header missing p".into()))?;
    let mut indices = Vec::new();
    for line in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        indices.push(
            line.parse::<usize>()
                .map_err(|e| Error::RegionFormat(format!("bad index `{line}`: {e}")))?,
        );
    }
    let region = CoreRegion::new(indices, dim, task)?;
    Ok((region, p))
}
