//! Directional Gaussian smoothing evolution strategy (DGS-ES).
//!
//! The gradient of an objective is replaced by a surrogate built from `d`
//! one-dimensional Gaussian-smoothed directional derivatives taken along an
//! orthonormal frame. Each directional derivative is a 1-D integral against a
//! Gaussian kernel and is evaluated with a Gauss-Hermite rule, so one gradient
//! costs `M * d` independent objective evaluations that can run on any number
//! of workers.
//!
//! Module map:
//!
//! * [`quadrature`]: Gauss-Hermite nodes and weights.
//! * [`smoothing`]: the DGS estimator and the Monte-Carlo ES baseline.
//! * [`directions`]: the orthonormal frame and smoothing radii.
//! * [`optimizer`]: Adam and the training loops.
//! * [`policy`]: the tanh MLP policy and its flat parameter vector.
//! * [`env`]: classic-control environments and synthetic objectives.
//! * [`parallel`]: task planning, worker pools and deterministic reduction.
//! * [`wire`]: line protocol for out-of-process workers.
//! * [`harness`]: multi-seed experiments, CSV output and plots.
//! * [`plot`]: raster line charts.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod directions;
pub mod env;
pub mod error;
pub mod harness;
pub mod optimizer;
pub mod parallel;
pub mod plot;
pub mod policy;
pub mod quadrature;
pub mod seed;
pub mod smoothing;
pub mod wire;

pub use directions::{DirectionMatrix, FrameUpdate, SmoothingRadii};
pub use env::{EnvKind, EnvSpec, EnvState, EpisodeResult, RolloutObjective, Synthetic, SyntheticKind};
pub use error::{Error, Result};
pub use harness::{ExperimentConfig, Task};
pub use optimizer::{AdamState, Algorithm, IterationRecord, TrainFailure, TrainerConfig, TrainingHistory};
pub use parallel::{EvalResult, EvalTask, Evaluator, LocalPool, TaskId};
pub use policy::{Action, ActionSpec, MlpPolicy, ParameterVector};
pub use quadrature::QuadratureRule;
pub use smoothing::{EstimatorKind, EvalError, FnObjective, GradientEstimate, Objective, SeedSchedule};
