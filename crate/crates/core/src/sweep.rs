//! Interpolation-weight grids and the merge-then-evaluate sweep.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::merge::{merge_checkpoints, MergeError, MergeMethod, MergeRecipe};
use crate::metrics::{medical_avg, ScoreRecord};
use crate::pareto::Objectives;
use crate::store::{write_checkpoint, Checkpoint, StoreError};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("merge failed for {} weight {}: {source}", .recipe.method, .recipe.weight)]
    Merge { recipe: MergeRecipe, source: MergeError },
    #[error("could not persist {}: {source}", .path.display())]
    Persist { path: PathBuf, source: StoreError },
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub method: MergeMethod,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SweepGrid {
    /// 0.0, 0.1, ..., 1.0
    pub fn unit(method: MergeMethod) -> Self {
        SweepGrid {
            method,
            start: 0.0,
            stop: 1.0,
            step: 0.1,
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let unit = 0.0..=1.0;
        if !unit.contains(&self.start) || !unit.contains(&self.stop) {
            return Err(SweepError::InvalidGrid(format!(
                "start {} and stop {} must lie in [0, 1]",
                self.start, self.stop
            )));
        }
        if self.start > self.stop {
            return Err(SweepError::InvalidGrid(format!(
                "start {} exceeds stop {}",
                self.start, self.stop
            )));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(SweepError::InvalidGrid(format!("step {} must be positive", self.step)));
        }
        Ok(())
    }
}

fn round9(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

/// Recipes at `start + i * step`, rounded to nine decimals, up to and
/// including `stop` when it falls on the grid.
pub fn generate_grid(grid: &SweepGrid) -> Result<Vec<MergeRecipe>, SweepError> {
    grid.validate()?;
    let count = ((grid.stop - grid.start) / grid.step + 1e-9).floor() as usize + 1;
    (0..count)
        .map(|i| {
            let w = round9(grid.start + i as f64 * grid.step).clamp(0.0, 1.0);
            MergeRecipe::new(grid.method, w).map_err(|e| SweepError::InvalidGrid(e.to_string()))
        })
        .collect()
}

/// Scores an evaluator reports for one checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalScores {
    pub instruction_score: f64,
    pub per_benchmark: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{0}")]
pub struct EvalFailure(pub String);

/// Maps a checkpoint to scores. `name` is the recipe's deterministic
/// checkpoint name, for evaluators keyed on names.
pub trait Evaluator: Sync {
    fn evaluate(&self, name: &str, ckpt: &Checkpoint) -> Result<EvalScores, EvalFailure>;

    /// False forces the sweep to run one recipe at a time.
    fn concurrent(&self) -> bool {
        true
    }
}

/// Looks up pre-computed scores by checkpoint name.
#[derive(Debug, Clone, Default)]
pub struct ExternalScores {
    pub records: BTreeMap<String, ScoreRecord>,
}

impl ExternalScores {
    pub fn new(records: BTreeMap<String, ScoreRecord>) -> Self {
        ExternalScores { records }
    }
}

impl Evaluator for ExternalScores {
    fn evaluate(&self, name: &str, _ckpt: &Checkpoint) -> Result<EvalScores, EvalFailure> {
        let rec = self
            .records
            .get(name)
            .ok_or_else(|| EvalFailure(format!("no external scores for checkpoint `{name}`")))?;
        Ok(EvalScores {
            instruction_score: rec.instruction_score(),
            per_benchmark: rec.benchmarks.clone(),
        })
    }
}

/// One evaluated merge in the objective plane.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoint {
    pub recipe: MergeRecipe,
    pub instruction_score: f64,
    pub medical_avg: f64,
    pub per_benchmark: BTreeMap<String, f64>,
    pub checkpoint_path: Option<PathBuf>,
}

impl Objectives for EvalPoint {
    fn instruction(&self) -> f64 {
        self.instruction_score
    }
    fn medical(&self) -> f64 {
        self.medical_avg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepStatus {
    Ok,
    Failed,
}

/// One row of a sweep: the recipe plus its scores, or the failure reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub name: String,
    #[serde(flatten)]
    pub recipe: MergeRecipe,
    pub status: SweepStatus,
    pub instruction_score: Option<f64>,
    pub medical_avg: Option<f64>,
    #[serde(default)]
    pub per_benchmark: BTreeMap<String, f64>,
    pub checkpoint_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SweepEntry {
    pub fn point(&self) -> Option<EvalPoint> {
        match (self.status, self.instruction_score, self.medical_avg) {
            (SweepStatus::Ok, Some(ins), Some(med)) => Some(EvalPoint {
                recipe: self.recipe,
                instruction_score: ins,
                medical_avg: med,
                per_benchmark: self.per_benchmark.clone(),
                checkpoint_path: self.checkpoint_path.clone(),
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub workers: usize,
    /// Merged checkpoints are written here when set.
    pub persist_dir: Option<PathBuf>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            workers: 1,
            persist_dir: None,
        }
    }
}

fn score_entry(name: String, recipe: MergeRecipe, path: Option<PathBuf>, scores: Result<EvalScores, EvalFailure>) -> SweepEntry {
    let checked = scores.and_then(|s| {
        if !(0.0..=1.0).contains(&s.instruction_score) {
            return Err(EvalFailure(format!(
                "instruction score {} is outside [0, 1]",
                s.instruction_score
            )));
        }
        if let Some((b, v)) = s.per_benchmark.iter().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(EvalFailure(format!("benchmark `{b}` score {v} is outside [0, 1]")));
        }
        let med = medical_avg(&s.per_benchmark).map_err(|e| EvalFailure(e.to_string()))?;
        Ok((s, med))
    });
    match checked {
        Ok((s, med)) => SweepEntry {
            name,
            recipe,
            status: SweepStatus::Ok,
            instruction_score: Some(s.instruction_score),
            medical_avg: Some(med),
            per_benchmark: s.per_benchmark,
            checkpoint_path: path,
            error: None,
        },
        Err(e) => SweepEntry {
            name,
            recipe,
            status: SweepStatus::Failed,
            instruction_score: None,
            medical_avg: None,
            per_benchmark: BTreeMap::new(),
            checkpoint_path: path,
            error: Some(e.0),
        },
    }
}

fn run_one(
    ckpt_c: &Checkpoint,
    ckpt_i: &Checkpoint,
    recipe: &MergeRecipe,
    evaluator: &dyn Evaluator,
    persist_dir: Option<&Path>,
) -> Result<SweepEntry, SweepError> {
    let report = merge_checkpoints(ckpt_c, ckpt_i, recipe).map_err(|source| SweepError::Merge {
        recipe: *recipe,
        source,
    })?;
    let name = recipe.checkpoint_name();
    let path = match persist_dir {
        Some(dir) => {
            let path = dir.join(format!("{name}.safetensors"));
            write_checkpoint(&report.checkpoint, &path).map_err(|source| SweepError::Persist {
                path: path.clone(),
                source,
            })?;
            Some(path)
        }
        None => None,
    };
    let scores = evaluator.evaluate(&name, &report.checkpoint);
    Ok(score_entry(name, *recipe, path, scores))
}

/// Merges and scores every recipe. Results come back in recipe order no
/// matter how many workers run; evaluator failures become `Failed` rows,
/// merge and persistence errors abort with the first failing recipe.
pub fn run_sweep(
    ckpt_c: &Checkpoint,
    ckpt_i: &Checkpoint,
    recipes: &[MergeRecipe],
    evaluator: &dyn Evaluator,
    options: &SweepOptions,
) -> Result<Vec<SweepEntry>, SweepError> {
    let workers = if evaluator.concurrent() {
        options.workers.max(1)
    } else {
        1
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SweepError::Pool(e.to_string()))?;
    let persist = options.persist_dir.as_deref();
    let results: Vec<Result<SweepEntry, SweepError>> = pool.install(|| {
        recipes
            .par_iter()
            .map(|r| run_one(ckpt_c, ckpt_i, r, evaluator, persist))
            .collect()
    });
    results.into_iter().collect()
}
