//! Per-tensor Linear and SLERP interpolation between two checkpoints.
//!
//! Elements are decoded to `f32` and blended in `f64`, then rounded once to
//! `f32`. SLERP reductions (dot product, squared norms) accumulate in `f64`
//! in element order, so the whole-array functions and the chunked streaming
//! path produce bit-identical tensors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtype::{decode_into, encode_into, Dtype};
use crate::store::{Checkpoint, CheckpointFile, CheckpointWriter, StoreError, Tensor, TensorSource};

pub const DEFAULT_DEGENERACY_EPS: f64 = 1e-6;

/// Elements processed per chunk by the streaming kernel.
const CHUNK: usize = 1 << 16;

#[derive(Debug, Error)]
pub enum MergeError {
    #[error("input lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("inputs are empty")]
    Empty,
    #[error("both inputs are all-zero, SLERP direction is undefined")]
    BothZero,
    #[error("tensor name sets differ: only in first [{}], only in second [{}]", .only_first.join(", "), .only_second.join(", "))]
    NameMismatch {
        only_first: Vec<String>,
        only_second: Vec<String>,
    },
    #[error("tensor `{name}` shape mismatch: {first:?} vs {second:?}")]
    ShapeMismatch {
        name: String,
        first: Vec<usize>,
        second: Vec<usize>,
    },
    #[error("invalid recipe: {0}")]
    InvalidRecipe(String),
    #[error("tensor `{name}`: {source}")]
    Tensor { name: String, source: StoreError },
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MergeMethod {
    Linear,
    Slerp,
}

impl MergeMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            MergeMethod::Linear => "linear",
            MergeMethod::Slerp => "slerp",
        }
    }
}

impl fmt::Display for MergeMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MergeMethod {
    type Err = MergeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(MergeMethod::Linear),
            "slerp" => Ok(MergeMethod::Slerp),
            _ => Err(MergeError::InvalidRecipe(format!("unknown merge method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputDtype {
    /// Each output tensor takes the dtype of the first input's tensor.
    #[default]
    SameAsFirstInput,
    F32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeRecipe {
    pub method: MergeMethod,
    /// Linear alpha or SLERP t; 0 selects the first checkpoint.
    pub weight: f64,
    /// SLERP falls back to Linear when sin of the inter-vector angle is below this.
    pub degeneracy_eps: f64,
    pub output_dtype: OutputDtype,
}

impl MergeRecipe {
    pub fn new(method: MergeMethod, weight: f64) -> Result<Self, MergeError> {
        let recipe = MergeRecipe {
            method,
            weight,
            degeneracy_eps: DEFAULT_DEGENERACY_EPS,
            output_dtype: OutputDtype::default(),
        };
        recipe.validate()?;
        Ok(recipe)
    }

    pub fn with_degeneracy_eps(mut self, eps: f64) -> Result<Self, MergeError> {
        self.degeneracy_eps = eps;
        self.validate()?;
        Ok(self)
    }

    pub fn with_output_dtype(mut self, output_dtype: OutputDtype) -> Self {
        self.output_dtype = output_dtype;
        self
    }

    pub fn validate(&self) -> Result<(), MergeError> {
        if !(0.0..=1.0).contains(&self.weight) {
            return Err(MergeError::InvalidRecipe(format!(
                "weight {} is outside [0, 1]",
                self.weight
            )));
        }
        if !(self.degeneracy_eps > 0.0 && self.degeneracy_eps.is_finite()) {
            return Err(MergeError::InvalidRecipe(format!(
                "degeneracy_eps {} must be positive",
                self.degeneracy_eps
            )));
        }
        Ok(())
    }

    /// Deterministic name encoding method and weight, e.g. `slerp-0.4`.
    pub fn checkpoint_name(&self) -> String {
        format!("{}-{}", self.method, format_weight(self.weight))
    }
}

/// Formats a weight with at most nine decimals and at least one.
pub fn format_weight(w: f64) -> String {
    let s = format!("{w:.9}");
    let trimmed = s.trim_end_matches('0');
    if trimmed.ends_with('.') {
        format!("{trimmed}0")
    } else {
        trimmed.to_string()
    }
}

#[inline]
fn lerp_elem(a: f32, b: f32, w: f64) -> f32 {
    ((1.0 - w) * a as f64 + w * b as f64) as f32
}

/// Element-wise `(1 - alpha) * a + alpha * b`.
pub fn lerp_tensor(a: &[f32], b: &[f32], alpha: f64) -> Result<Vec<f32>, MergeError> {
    if a.len() != b.len() {
        return Err(MergeError::LengthMismatch(a.len(), b.len()));
    }
    Ok(a.iter().zip(b).map(|(&x, &y)| lerp_elem(x, y, alpha)).collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct PairStats {
    dot: f64,
    norm_a2: f64,
    norm_b2: f64,
}

impl PairStats {
    fn accumulate(&mut self, a: &[f32], b: &[f32]) {
        for (&x, &y) in a.iter().zip(b) {
            let (x, y) = (x as f64, y as f64);
            self.dot += x * y;
            self.norm_a2 += x * x;
            self.norm_b2 += y * y;
        }
    }
}

/// How one tensor pair is combined.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Blend {
    Linear(f64),
    Spherical { ca: f64, cb: f64 },
}

impl Blend {
    #[inline]
    fn apply(self, a: &[f32], b: &[f32], out: &mut [f32]) {
        match self {
            Blend::Linear(w) => {
                for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
                    *o = lerp_elem(x, y, w);
                }
            }
            Blend::Spherical { ca, cb } => {
                for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
                    *o = (ca * x as f64 + cb * y as f64) as f32;
                }
            }
        }
    }

    fn is_fallback(self) -> bool {
        matches!(self, Blend::Linear(_))
    }
}

/// SLERP coefficients for the pair summarized by `stats`, or `None` when
/// both inputs are zero.
fn slerp_blend(stats: PairStats, t: f64, eps: f64) -> Option<Blend> {
    if stats.norm_a2 == 0.0 && stats.norm_b2 == 0.0 {
        return None;
    }
    if stats.norm_a2 == 0.0 || stats.norm_b2 == 0.0 {
        return Some(Blend::Linear(t));
    }
    let cos = stats.dot / (stats.norm_a2.sqrt() * stats.norm_b2.sqrt());
    if !cos.is_finite() {
        return Some(Blend::Linear(t));
    }
    let omega = cos.clamp(-1.0, 1.0).acos();
    let sin_omega = omega.sin();
    // covers both colinear (omega ~ 0) and antipodal (omega ~ pi) pairs
    if sin_omega < eps {
        return Some(Blend::Linear(t));
    }
    Some(Blend::Spherical {
        ca: ((1.0 - t) * omega).sin() / sin_omega,
        cb: (t * omega).sin() / sin_omega,
    })
}

/// Spherical interpolation of `a` toward `b`. Coefficients come from the
/// normalized directions and are applied to the raw inputs. The flag is
/// true when the pair was too close to colinear (or one side was zero) and
/// the Linear result was returned instead.
pub fn slerp_tensor(a: &[f32], b: &[f32], t: f64, eps: f64) -> Result<(Vec<f32>, bool), MergeError> {
    if a.len() != b.len() {
        return Err(MergeError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MergeError::Empty);
    }
    let mut stats = PairStats::default();
    stats.accumulate(a, b);
    let blend = slerp_blend(stats, t, eps).ok_or(MergeError::BothZero)?;
    let mut out = vec![0.0f32; a.len()];
    blend.apply(a, b, &mut out);
    Ok((out, blend.is_fallback()))
}

/// One output tensor of a merge plan.
#[derive(Debug, Clone)]
struct PlannedTensor {
    name: String,
    shape: Vec<usize>,
    numel: usize,
    dtype_c: Dtype,
    dtype_i: Dtype,
    dtype_out: Dtype,
}

fn plan<A, B>(first: &A, second: &B, recipe: &MergeRecipe) -> Result<Vec<PlannedTensor>, MergeError>
where
    A: TensorSource + ?Sized,
    B: TensorSource + ?Sized,
{
    recipe.validate()?;
    let names_c: BTreeSet<&str> = first.tensor_names().into_iter().collect();
    let names_i: BTreeSet<&str> = second.tensor_names().into_iter().collect();
    if names_c != names_i {
        return Err(MergeError::NameMismatch {
            only_first: names_c.difference(&names_i).map(|s| s.to_string()).collect(),
            only_second: names_i.difference(&names_c).map(|s| s.to_string()).collect(),
        });
    }
    names_c
        .into_iter()
        .map(|name| {
            let (dtype_c, shape_c) = first.tensor_info(name).expect("name listed by source");
            let (dtype_i, shape_i) = second.tensor_info(name).expect("name listed by source");
            if shape_c != shape_i {
                return Err(MergeError::ShapeMismatch {
                    name: name.to_string(),
                    first: shape_c.to_vec(),
                    second: shape_i.to_vec(),
                });
            }
            let dtype_out = match recipe.output_dtype {
                OutputDtype::SameAsFirstInput => dtype_c,
                OutputDtype::F32 => Dtype::F32,
            };
            Ok(PlannedTensor {
                name: name.to_string(),
                shape: shape_c.to_vec(),
                numel: shape_c.iter().product(),
                dtype_c,
                dtype_i,
                dtype_out,
            })
        })
        .collect()
}

struct Scratch {
    raw_c: Vec<u8>,
    raw_i: Vec<u8>,
    vals_c: Vec<f32>,
    vals_i: Vec<f32>,
    out: Vec<f32>,
    encoded: Vec<u8>,
}

impl Scratch {
    fn new(numel: usize) -> Self {
        let n = numel.min(CHUNK);
        Scratch {
            raw_c: Vec::with_capacity(n * 4),
            raw_i: Vec::with_capacity(n * 4),
            vals_c: Vec::with_capacity(n),
            vals_i: Vec::with_capacity(n),
            out: Vec::with_capacity(n),
            encoded: Vec::with_capacity(n * 4),
        }
    }

    /// Decodes elements `start..start + len` of both inputs.
    fn load<A, B>(&mut self, first: &A, second: &B, t: &PlannedTensor, start: usize, len: usize) -> Result<(), MergeError>
    where
        A: TensorSource + ?Sized,
        B: TensorSource + ?Sized,
    {
        let wrap = |source| MergeError::Tensor {
            name: t.name.clone(),
            source,
        };
        self.raw_c.resize(len * t.dtype_c.size(), 0);
        self.raw_i.resize(len * t.dtype_i.size(), 0);
        first
            .read_bytes(&t.name, start * t.dtype_c.size(), &mut self.raw_c)
            .map_err(wrap)?;
        second
            .read_bytes(&t.name, start * t.dtype_i.size(), &mut self.raw_i)
            .map_err(wrap)?;
        self.vals_c.resize(len, 0.0);
        self.vals_i.resize(len, 0.0);
        decode_into(t.dtype_c, &self.raw_c, &mut self.vals_c);
        decode_into(t.dtype_i, &self.raw_i, &mut self.vals_i);
        Ok(())
    }
}

/// Merges one tensor chunk by chunk, handing encoded output bytes to `sink`
/// in order. Returns the fallback flag.
fn merge_tensor<A, B, F>(
    first: &A,
    second: &B,
    t: &PlannedTensor,
    recipe: &MergeRecipe,
    mut sink: F,
) -> Result<bool, MergeError>
where
    A: TensorSource + ?Sized,
    B: TensorSource + ?Sized,
    F: FnMut(&[u8]) -> Result<(), MergeError>,
{
    let mut scratch = Scratch::new(t.numel);
    let chunks = (0..t.numel).step_by(CHUNK).map(|s| (s, CHUNK.min(t.numel - s)));

    let blend = match recipe.method {
        MergeMethod::Linear => Blend::Linear(recipe.weight),
        MergeMethod::Slerp => {
            let mut stats = PairStats::default();
            for (start, len) in chunks.clone() {
                scratch.load(first, second, t, start, len)?;
                stats.accumulate(&scratch.vals_c, &scratch.vals_i);
            }
            // all-zero pairs (including empty tensors) merge linearly
            slerp_blend(stats, recipe.weight, recipe.degeneracy_eps)
                .unwrap_or(Blend::Linear(recipe.weight))
        }
    };

    // a single-chunk SLERP tensor is still decoded from the stats pass
    let reuse = recipe.method == MergeMethod::Slerp && t.numel <= CHUNK;
    for (start, len) in chunks {
        if !reuse {
            scratch.load(first, second, t, start, len)?;
        }
        scratch.out.resize(len, 0.0);
        blend.apply(&scratch.vals_c, &scratch.vals_i, &mut scratch.out);
        scratch.encoded.clear();
        encode_into(&scratch.out, t.dtype_out, &mut scratch.encoded);
        sink(&scratch.encoded)?;
    }
    Ok(recipe.method == MergeMethod::Slerp && blend.is_fallback())
}

fn merge_metadata(recipe: &MergeRecipe) -> BTreeMap<String, String> {
    BTreeMap::from([
        ("merge_method".to_string(), recipe.method.to_string()),
        ("merge_weight".to_string(), format_weight(recipe.weight)),
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeReport {
    pub checkpoint: Checkpoint,
    /// Per tensor: true when SLERP fell back to Linear.
    pub fallbacks: BTreeMap<String, bool>,
}

impl MergeReport {
    pub fn fallback_count(&self) -> usize {
        self.fallbacks.values().filter(|&&f| f).count()
    }
}

/// Merges two in-memory checkpoints. Tensors are processed in parallel on
/// the current rayon pool and assembled in name order.
pub fn merge_checkpoints(
    ckpt_c: &Checkpoint,
    ckpt_i: &Checkpoint,
    recipe: &MergeRecipe,
) -> Result<MergeReport, MergeError> {
    let planned = plan(ckpt_c, ckpt_i, recipe)?;
    let merged: Vec<(Vec<u8>, bool)> = planned
        .par_iter()
        .map(|t| {
            let mut data = Vec::with_capacity(t.numel * t.dtype_out.size());
            let fallback = merge_tensor(ckpt_c, ckpt_i, t, recipe, |bytes| {
                data.extend_from_slice(bytes);
                Ok(())
            })?;
            Ok((data, fallback))
        })
        .collect::<Result<_, MergeError>>()?;

    let mut checkpoint = Checkpoint::new();
    let mut fallbacks = BTreeMap::new();
    for (t, (data, fallback)) in planned.into_iter().zip(merged) {
        let tensor = Tensor::new(t.dtype_out, t.shape, data)?;
        checkpoint.insert(t.name.clone(), tensor)?;
        fallbacks.insert(t.name, fallback);
    }
    *checkpoint.metadata_mut() = merge_metadata(recipe);
    Ok(MergeReport {
        checkpoint,
        fallbacks,
    })
}

/// Streams a merge of two sources into `out` in container format. Memory
/// use is bounded by a fixed chunk size, independent of tensor sizes.
pub fn merge_to_writer<A, B, W>(
    first: &A,
    second: &B,
    recipe: &MergeRecipe,
    out: W,
) -> Result<(W, BTreeMap<String, bool>), MergeError>
where
    A: TensorSource + ?Sized,
    B: TensorSource + ?Sized,
    W: Write,
{
    let planned = plan(first, second, recipe)?;
    let specs = planned
        .iter()
        .map(|t| (t.name.clone(), t.dtype_out, t.shape.clone()))
        .collect();
    let mut writer = CheckpointWriter::new(out, specs, merge_metadata(recipe))?;
    let mut fallbacks = BTreeMap::new();
    // the plan is already in name order, which is the writer's layout order
    for t in &planned {
        let fallback = merge_tensor(first, second, t, recipe, |bytes| {
            writer.write_data(bytes).map_err(MergeError::from)
        })?;
        fallbacks.insert(t.name.clone(), fallback);
    }
    Ok((writer.finish()?, fallbacks))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeSummary {
    pub recipe: MergeRecipe,
    pub fallbacks: BTreeMap<String, bool>,
    /// Tensor data bytes written, excluding the header.
    pub data_bytes: usize,
}

impl MergeSummary {
    pub fn tensor_count(&self) -> usize {
        self.fallbacks.len()
    }

    pub fn fallback_count(&self) -> usize {
        self.fallbacks.values().filter(|&&f| f).count()
    }
}

/// Merges two checkpoint files into `out` without loading whole tensors.
pub fn merge_files(
    path_c: impl AsRef<Path>,
    path_i: impl AsRef<Path>,
    recipe: &MergeRecipe,
    out: impl AsRef<Path>,
) -> Result<MergeSummary, MergeError> {
    let first = CheckpointFile::open(path_c)?;
    let second = CheckpointFile::open(path_i)?;
    let out = out.as_ref();
    let file_err = |source| {
        MergeError::Store(StoreError::File {
            path: out.to_path_buf(),
            source,
        })
    };
    let file = File::create(out).map_err(file_err)?;
    let (buf, fallbacks) = merge_to_writer(&first, &second, recipe, BufWriter::new(file))?;
    buf.into_inner()
        .map_err(|e| file_err(e.into_error()))?
        .sync_all()
        .map_err(file_err)?;
    let data_bytes = CheckpointFile::open(out)?.header().data_len();
    Ok(MergeSummary {
        recipe: *recipe,
        fallbacks,
        data_bytes,
    })
}
