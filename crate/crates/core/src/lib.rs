//! Weight-space merging of two model checkpoints.
//!
//! The crate reads and writes safetensors-layout checkpoints ([`store`]),
//! blends them per tensor with Linear or SLERP interpolation ([`merge`]),
//! sweeps the interpolation weight and scores each merge through an
//! [`sweep::Evaluator`] ([`sweep`]), and picks Pareto-optimal recipes over
//! the (instruction following, medical average) plane ([`pareto`]).
//! [`metrics`] holds score aggregation and native ROUGE/BLEU, [`synth`]
//! builds checkpoint pairs with closed-form score landscapes, and
//! [`report`] writes manifests, CSV and SVG charts.

pub mod dtype;
mod json;
pub mod merge;
pub mod metrics;
pub mod pareto;
pub mod report;
pub mod store;
pub mod sweep;
pub mod synth;

pub use dtype::{f32_to_dtype, Dtype};
pub use merge::{
    lerp_tensor, merge_checkpoints, merge_files, slerp_tensor, MergeError, MergeMethod, MergeRecipe,
    MergeReport, OutputDtype,
};
pub use pareto::{dominates, near_frontier, pareto_frontier, ParetoResult};
pub use report::{emit_tradeoff_svg, ParetoReport};
pub use store::{read_checkpoint, tensor_as_f32, write_checkpoint, Checkpoint, StoreError, Tensor, TensorMeta};
pub use sweep::{generate_grid, run_sweep, EvalPoint, Evaluator, SweepEntry, SweepGrid};
pub use synth::{make_synthetic_world, synthetic_eval, SyntheticWorld};

