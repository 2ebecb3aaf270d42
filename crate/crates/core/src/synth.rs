//! Synthetic checkpoint pairs with closed-form score landscapes.
//!
//! Each task has an optimum `mu = (1 - beta) * first + beta * second` on the
//! segment between the two checkpoints and scores a checkpoint `x` as
//! `exp(-|x - mu|^2 / (2 sigma^2))`, with `|.|` the Euclidean norm over all
//! tensors concatenated in name order. Along the Linear path this is
//! `exp(-(alpha - beta)^2 L^2 / (2 sigma^2))` with `L = |second - first|`.
//!
//! Weights come from SplitMix64 (Steele, Lea & Flood 2014; increment
//! `0x9E3779B97F4A7C15`, output mix constants `0xBF58476D1CE4E5B9` and
//! `0x94D049BB133111EB`, shifts 30/27/31) seeded with the world seed. Each
//! draw maps to `2 * ((x >> 40) * 2^-24) - 1`, an exact `f32` in `[-1, 1)`.
//! The first checkpoint's tensors are drawn in name order, then the second's.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtype::Dtype;
use crate::store::{Checkpoint, Tensor};
use crate::sweep::{EvalFailure, EvalScores, Evaluator};

pub const MEDICAL_LABEL: &str = "medical";
pub const INSTRUCTION_LABEL: &str = "instruction";

/// Default sigma as a fraction of the distance between the checkpoints.
pub const DEFAULT_SIGMA_FRACTION: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("checkpoint does not match the world: {0}")]
    ShapeMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform on `[-1, 1)` with 24 bits of resolution.
    pub fn next_weight(&mut self) -> f32 {
        let u = (self.next_u64() >> 40) as f32 * (1.0 / (1u32 << 24) as f32);
        2.0 * u - 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTaskSpec {
    /// Position of the optimum along the first -> second segment.
    pub beta: f64,
    pub sigma: f64,
    pub label: String,
}

/// How the score width is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sigma {
    Absolute(f64),
    /// Fraction of the distance between the two checkpoints.
    SpanFraction(f64),
}

impl Default for Sigma {
    fn default() -> Self {
        Sigma::SpanFraction(DEFAULT_SIGMA_FRACTION)
    }
}

/// Everything needed to rebuild a world; `sigma` is always absolute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldDescriptor {
    pub dim: usize,
    pub n_tensors: usize,
    pub seed: u64,
    pub beta_med: f64,
    pub beta_ins: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub ckpt_c: Checkpoint,
    pub ckpt_i: Checkpoint,
    pub medical: SyntheticTaskSpec,
    pub instruction: SyntheticTaskSpec,
    descriptor: WorldDescriptor,
    names: Vec<String>,
    first: Vec<f64>,
    second: Vec<f64>,
    span: f64,
}

pub fn tensor_name(index: usize) -> String {
    format!("layers.{index:05}.weight")
}

fn draw(rng: &mut SplitMix64, names: &[String], dim: usize) -> (Checkpoint, Vec<f64>) {
    let mut ckpt = Checkpoint::new();
    let mut flat = Vec::with_capacity(names.len() * dim);
    for name in names {
        let vals: Vec<f32> = (0..dim).map(|_| rng.next_weight()).collect();
        flat.extend(vals.iter().map(|&v| v as f64));
        ckpt.insert(name.clone(), Tensor::from_f32(Dtype::F32, vec![dim], &vals).expect("length matches shape"))
            .expect("names are unique");
    }
    (ckpt, flat)
}

fn check_unit(name: &str, v: f64) -> Result<(), SynthError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(SynthError::InvalidArgument(format!("{name} = {v} must lie in [0, 1]")))
    }
}

pub fn make_synthetic_world(
    dim: usize,
    n_tensors: usize,
    seed: u64,
    beta_med: f64,
    beta_ins: f64,
    sigma: Sigma,
) -> Result<SyntheticWorld, SynthError> {
    if dim == 0 || n_tensors == 0 {
        return Err(SynthError::InvalidArgument("dim and n_tensors must be positive".into()));
    }
    check_unit("beta_med", beta_med)?;
    check_unit("beta_ins", beta_ins)?;
    let names: Vec<String> = (0..n_tensors).map(tensor_name).collect();
    let mut rng = SplitMix64::new(seed);
    let (ckpt_c, first) = draw(&mut rng, &names, dim);
    let (ckpt_i, second) = draw(&mut rng, &names, dim);
    let span = first
        .iter()
        .zip(&second)
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt();
    if span == 0.0 {
        return Err(SynthError::InvalidArgument("the two checkpoints coincide".into()));
    }
    let sigma = match sigma {
        Sigma::Absolute(s) => s,
        Sigma::SpanFraction(f) => f * span,
    };
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(SynthError::InvalidArgument(format!("sigma = {sigma} must be positive")));
    }
    let task = |beta, label: &str| SyntheticTaskSpec {
        beta,
        sigma,
        label: label.to_string(),
    };
    Ok(SyntheticWorld {
        ckpt_c,
        ckpt_i,
        medical: task(beta_med, MEDICAL_LABEL),
        instruction: task(beta_ins, INSTRUCTION_LABEL),
        descriptor: WorldDescriptor {
            dim,
            n_tensors,
            seed,
            beta_med,
            beta_ins,
            sigma,
        },
        names,
        first,
        second,
        span,
    })
}

impl SyntheticWorld {
    pub fn from_descriptor(d: &WorldDescriptor) -> Result<Self, SynthError> {
        make_synthetic_world(d.dim, d.n_tensors, d.seed, d.beta_med, d.beta_ins, Sigma::Absolute(d.sigma))
    }

    pub fn descriptor(&self) -> WorldDescriptor {
        self.descriptor
    }

    /// Euclidean distance between the two checkpoints.
    pub fn span(&self) -> f64 {
        self.span
    }

    fn flatten(&self, ckpt: &Checkpoint) -> Result<Vec<f32>, SynthError> {
        if ckpt.len() != self.names.len() {
            return Err(SynthError::ShapeMismatch(format!(
                "expected {} tensors, found {}",
                self.names.len(),
                ckpt.len()
            )));
        }
        let mut flat = Vec::with_capacity(self.first.len());
        for name in &self.names {
            let t = ckpt
                .get(name)
                .ok_or_else(|| SynthError::ShapeMismatch(format!("missing tensor `{name}`")))?;
            if t.shape() != [self.descriptor.dim] {
                return Err(SynthError::ShapeMismatch(format!(
                    "tensor `{name}` has shape {:?}, expected [{}]",
                    t.shape(),
                    self.descriptor.dim
                )));
            }
            flat.extend(t.to_f32());
        }
        Ok(flat)
    }

    fn task_score(&self, flat: &[f32], task: &SyntheticTaskSpec) -> f64 {
        let d2: f64 = flat
            .iter()
            .zip(self.first.iter().zip(&self.second))
            .map(|(&x, (&a, &b))| {
                let mu = (1.0 - task.beta) * a + task.beta * b;
                let d = x as f64 - mu;
                d * d
            })
            .sum();
        (-d2 / (2.0 * task.sigma * task.sigma)).exp()
    }

    /// Closed-form score of the Linear-path point at `alpha`.
    pub fn linear_path_score(&self, alpha: f64, task: &SyntheticTaskSpec) -> f64 {
        let d = (alpha - task.beta) * self.span;
        (-d * d / (2.0 * task.sigma * task.sigma)).exp()
    }
}

/// Scores a checkpoint against both tasks: the instruction score plus a
/// one-entry benchmark map for the medical task.
pub fn synthetic_eval(ckpt: &Checkpoint, world: &SyntheticWorld) -> Result<EvalScores, SynthError> {
    let flat = world.flatten(ckpt)?;
    Ok(EvalScores {
        instruction_score: world.task_score(&flat, &world.instruction),
        per_benchmark: BTreeMap::from([(world.medical.label.clone(), world.task_score(&flat, &world.medical))]),
    })
}

impl Evaluator for SyntheticWorld {
    fn evaluate(&self, _name: &str, ckpt: &Checkpoint) -> Result<EvalScores, EvalFailure> {
        synthetic_eval(ckpt, self).map_err(|e| EvalFailure(e.to_string()))
    }
}
