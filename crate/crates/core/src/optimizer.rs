//! Adam and the two training loops (DGS-ES and Monte-Carlo ES).
//!
//! Both loops maximise `J`. One iteration plans every objective evaluation it
//! needs (the gradient points plus `eval_episodes` reporting rollouts at the
//! current parameters), hands the batch to an [`Evaluator`], reduces the
//! results in task order and takes one Adam ascent step. In DGS-ES the frame
//! and radii are regenerated whenever the gradient norm falls below the
//! trigger tolerance; the Adam moments carry over unchanged.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::directions::{init_frame, perturb_frame_with, sample_radii, DirectionMatrix, FrameUpdate, SmoothingRadii};
use crate::error::{invalid, Error, Result};
use crate::parallel::{
    plan_mc_tasks, plan_tasks, reduce_mc, reduce_to_gradient, Broadcast, EvalBatch, EvalResult, EvalTask, Evaluator,
    TaskId,
};
use crate::quadrature::QuadratureRule;
use crate::seed::{self, stream};
use crate::smoothing::{GradientEstimate, Objective, SeedSchedule};

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Adam moments and hyper-parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(dim: usize, learning_rate: f64) -> Result<Self> {
        Self::with_params(dim, learning_rate, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPSILON)
    }

    pub fn with_params(dim: usize, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(invalid(format!("learning rate must be finite and > 0, got {learning_rate}")));
        }
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || beta1 <= 0.0 || beta2 <= 0.0 {
            return Err(invalid(format!("Adam betas must lie in (0, 1), got {beta1}, {beta2}")));
        }
        if !(epsilon > 0.0) {
            return Err(invalid(format!("Adam epsilon must be > 0, got {epsilon}")));
        }
        Ok(Self {
            first_moment: vec![0.0; dim],
            second_moment: vec![0.0; dim],
            step_count: 0,
            learning_rate,
            beta1,
            beta2,
            epsilon,
        })
    }

    /// One bias-corrected ascent step `θ ← θ + λ m̂ / (√v̂ + ε)` in place.
    ///
    /// On error (length mismatch or a non-finite gradient entry) neither the
    /// state nor `theta` is modified.
    pub fn step(&mut self, gradient: &[f64], theta: &mut [f64]) -> Result<()> {
        if gradient.len() != theta.len() || gradient.len() != self.first_moment.len() {
            return Err(invalid(format!(
                "Adam dimension mismatch: gradient {}, θ {}, state {}",
                gradient.len(),
                theta.len(),
                self.first_moment.len()
            )));
        }
        if let Some(k) = gradient.iter().position(|g| !g.is_finite()) {
            return Err(Error::Numerical(format!(
                "gradient entry {k} is {} at Adam step {}",
                gradient[k],
                self.step_count + 1
            )));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for ((m, v), (g, th)) in
            self.first_moment.iter_mut().zip(self.second_moment.iter_mut()).zip(gradient.iter().zip(theta.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *th += self.learning_rate * (*m / c1) / ((*v / c2).sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// Functional form of [`AdamState::step`].
pub fn adam_step(state: &AdamState, gradient: &[f64], theta: &[f64]) -> Result<(Vec<f64>, AdamState)> {
    let mut next = state.clone();
    let mut out = theta.to_vec();
    next.step(gradient, &mut out)?;
    Ok((out, next))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "dgs-es")]
    DgsEs,
    #[serde(rename = "vanilla-es")]
    VanillaEs,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::DgsEs => "dgs-es",
            Algorithm::VanillaEs => "vanilla-es",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dgs-es" | "dgs" => Ok(Algorithm::DgsEs),
            "vanilla-es" | "es" | "vanilla" => Ok(Algorithm::VanillaEs),
            _ => Err(invalid(format!("unknown algorithm '{s}' (expected dgs-es or vanilla-es)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    /// Gauss-Hermite order `M`.
    pub quad_order: usize,
    /// Perturbation scale `α` of the skew-symmetric frame update.
    pub frame_scale: f64,
    /// Mean smoothing radius `r`; also the MC-ES noise scale.
    pub radius_mean: f64,
    /// Half-width `β` of the radius distribution `U(r - β, r + β)`.
    pub radius_spread: f64,
    /// Gradient-norm threshold `γ_tol` that triggers a frame/radius update.
    pub trigger_tol: f64,
    pub learning_rate: f64,
    /// Number of iterations `N`.
    pub max_iterations: usize,
    /// Worker count `L`.
    pub workers: usize,
    pub master_seed: u64,
    /// Use one evaluation seed for every point within an iteration.
    pub crn_mode: bool,
    /// Reporting rollouts per iteration.
    pub eval_episodes: usize,
    pub frame_update: FrameUpdate,
    /// Also trigger after this many iterations without a perturbation.
    pub stagnation_trigger: Option<usize>,
    /// Record per-iteration wall time (otherwise recorded as 0).
    pub record_wall_time: bool,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            quad_order: 7,
            frame_scale: 2.0,
            radius_mean: 1.0,
            radius_spread: 0.2,
            trigger_tol: 0.01,
            learning_rate: 0.1,
            max_iterations: 100,
            workers: 1,
            master_seed: 0,
            crn_mode: false,
            eval_episodes: 10,
            frame_update: FrameUpdate::Replace,
            stagnation_trigger: None,
            record_wall_time: true,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(invalid(msg));
        if self.quad_order == 0 || self.quad_order > crate::quadrature::MAX_ORDER {
            return bad(format!(
                "quadrature order must be in 1..={}, got {}",
                crate::quadrature::MAX_ORDER,
                self.quad_order
            ));
        }
        if !(self.radius_mean.is_finite() && self.radius_spread.is_finite()) || self.radius_spread < 0.0 {
            return bad(format!("invalid radius r = {}, β = {}", self.radius_mean, self.radius_spread));
        }
        if !(self.radius_mean - self.radius_spread > 0.0) {
            return bad(format!("need r - β > 0, got r = {}, β = {}", self.radius_mean, self.radius_spread));
        }
        if !(self.trigger_tol > 0.0) {
            return bad(format!("trigger tolerance must be > 0, got {}", self.trigger_tol));
        }
        if !(self.frame_scale >= 0.0 && self.frame_scale.is_finite()) {
            return bad(format!("frame scale must be finite and >= 0, got {}", self.frame_scale));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be finite and > 0, got {}", self.learning_rate));
        }
        if self.workers == 0 {
            return bad("worker count must be at least 1".into());
        }
        if self.stagnation_trigger == Some(0) {
            return bad("stagnation trigger must be at least 1 iteration".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub mean_return: f64,
    pub min_return: f64,
    pub max_return: f64,
    pub grad_norm: f64,
    /// Objective evaluations spent on the gradient.
    pub evals: usize,
    pub perturbed: bool,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingHistory {
    pub records: Vec<IterationRecord>,
}

impl TrainingHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn mean_returns(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.mean_return).collect()
    }

    /// First iteration whose mean return is at least `threshold`.
    pub fn first_reaching(&self, threshold: f64) -> Option<usize> {
        self.records.iter().find(|r| r.mean_return >= threshold).map(|r| r.iteration)
    }

    pub fn best_mean_return(&self) -> Option<f64> {
        self.records.iter().map(|r| r.mean_return).reduce(f64::max)
    }
}

/// A training run that stopped early. Holds everything completed so far.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainFailure {
    pub error: Error,
    pub theta: Vec<f64>,
    pub history: TrainingHistory,
}

impl fmt::Display for TrainFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "training stopped after {} iteration(s): {}", self.history.len(), self.error)
    }
}

impl std::error::Error for TrainFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

pub type TrainResult = std::result::Result<(Vec<f64>, TrainingHistory), TrainFailure>;

/// Frame, radii and rule of a DGS run at one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct DgsGeometry {
    pub frame: DirectionMatrix,
    pub radii: SmoothingRadii,
    pub rule: QuadratureRule,
}

fn gradient_seed(config: &TrainerConfig, iteration: usize, attempt: usize) -> u64 {
    let tag = if attempt == 0 { stream::GRADIENT } else { stream::RETRY };
    seed::derive(config.master_seed, &[tag, iteration as u64, attempt as u64])
}

fn report_tasks(config: &TrainerConfig, theta: &[f64], iteration: usize) -> Vec<EvalTask> {
    (0..config.eval_episodes)
        .map(|k| EvalTask {
            id: TaskId::Center(k),
            point: theta.to_vec(),
            seed: seed::derive(config.master_seed, &[stream::REPORT, iteration as u64, k as u64]),
        })
        .collect()
}

fn split_reports(results: Vec<EvalResult>) -> (Vec<EvalResult>, Vec<f64>) {
    let (reports, rest): (Vec<_>, Vec<_>) = results.into_iter().partition(|r| matches!(r.id, TaskId::Center(_)));
    (rest, reports.into_iter().map(|r| r.value).collect())
}

fn summarize(values: &[f64], objective: &dyn Objective, theta: &[f64], seed: u64) -> Result<(f64, f64, f64)> {
    if values.is_empty() {
        // No reporting rollouts configured: fall back to one evaluation.
        let v = objective
            .evaluate(theta, seed)
            .map_err(|e| Error::Evaluation { task: Some(TaskId::Center(0)), message: e.0 })?;
        return Ok((v, v, v));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((mean, min, max))
}

struct Step {
    estimate: GradientEstimate,
    reports: Vec<f64>,
}

/// Runs one iteration's batch, retrying once with fresh seeds on failure.
fn with_retry<F>(iteration: usize, mut attempt_fn: F) -> Result<Step>
where
    F: FnMut(usize) -> Result<Step>,
{
    match attempt_fn(0) {
        Ok(step) => Ok(step),
        Err(Error::Evaluation { .. } | Error::IncompleteEvaluation { .. }) => attempt_fn(1).map_err(|e| match e {
            Error::Evaluation { task, message } => {
                Error::Evaluation { task, message: format!("iteration {iteration}, after retry: {message}") }
            }
            other => other,
        }),
        Err(other) => Err(other),
    }
}

fn check_start(objective: &dyn Objective, theta0: &[f64], config: &TrainerConfig) -> Result<()> {
    config.validate()?;
    if objective.dimension() != theta0.len() {
        return Err(invalid(format!(
            "objective dimension {} does not match θ0 length {}",
            objective.dimension(),
            theta0.len()
        )));
    }
    if theta0.is_empty() {
        return Err(invalid("θ0 must be non-empty"));
    }
    if let Some(k) = theta0.iter().position(|t| !t.is_finite()) {
        return Err(Error::Numerical(format!("θ0 entry {k} is not finite")));
    }
    Ok(())
}

fn fail(error: Error, theta: Vec<f64>, history: TrainingHistory) -> TrainFailure {
    TrainFailure { error, theta, history }
}

/// DGS-ES: `N` Adam ascent steps on the DGS gradient.
///
/// The frame starts at the identity and every radius at `r`. After a step
/// whose gradient norm is below `trigger_tol` (or after
/// `stagnation_trigger` quiet iterations, if set) the frame is regenerated
/// with scale `α` and the radii are resampled from `U(r - β, r + β)`.
pub fn dgs_es_train(
    objective: &dyn Objective,
    theta0: &[f64],
    config: &TrainerConfig,
    evaluator: &dyn Evaluator,
) -> TrainResult {
    dgs_es_train_observed(objective, theta0, config, evaluator, |_, _, _| {})
}

/// [`dgs_es_train`] that also reports `(iteration, θ_n, geometry)` before
/// each iteration's evaluations.
pub fn dgs_es_train_observed<O>(
    objective: &dyn Objective,
    theta0: &[f64],
    config: &TrainerConfig,
    evaluator: &dyn Evaluator,
    mut observe: O,
) -> TrainResult
where
    O: FnMut(usize, &[f64], &DgsGeometry),
{
    let mut history = TrainingHistory::default();
    if let Err(e) = check_start(objective, theta0, config) {
        return Err(fail(e, theta0.to_vec(), history));
    }
    let d = theta0.len();
    let setup = || -> Result<(DgsGeometry, AdamState)> {
        let geometry = DgsGeometry {
            frame: init_frame(d),
            radii: SmoothingRadii::constant(d, config.radius_mean)?,
            rule: QuadratureRule::gauss_hermite(config.quad_order)?,
        };
        Ok((geometry, AdamState::new(d, config.learning_rate)?))
    };
    let (mut geo, mut adam) = match setup() {
        Ok(s) => s,
        Err(e) => return Err(fail(e, theta0.to_vec(), history)),
    };
    let budget = config.quad_order * d;
    let mut theta = theta0.to_vec();
    let mut quiet = 0usize;

    for n in 0..config.max_iterations {
        let start = Instant::now();
        observe(n, &theta, &geo);
        let step = with_retry(n, |attempt| {
            let base = gradient_seed(config, n, attempt);
            let schedule = if config.crn_mode { SeedSchedule::Common(base) } else { SeedSchedule::PerNode(base) };
            let mut tasks = plan_tasks(&theta, &geo.frame, &geo.radii, &geo.rule, schedule)?;
            tasks.extend(report_tasks(config, &theta, n));
            let batch = EvalBatch::new(tasks).with_broadcast(Broadcast {
                theta: theta.clone(),
                frame: Some((geo.frame.clone(), geo.radii.clone(), geo.rule.order())),
            });
            let (results, reports) = split_reports(evaluator.execute(&batch, objective)?);
            let estimate = reduce_to_gradient(&results, &geo.frame, &geo.radii, &geo.rule)?;
            Ok(Step { estimate, reports })
        });
        let Step { estimate, reports } = match step {
            Ok(s) => s,
            Err(e) => return Err(fail(e, theta, history)),
        };
        if estimate.evaluations_used != budget {
            let e = Error::ContractViolation(format!(
                "iteration {n} used {} evaluations, expected M·d = {budget}",
                estimate.evaluations_used
            ));
            return Err(fail(e, theta, history));
        }
        let (mean, min, max) = match summarize(&reports, objective, &theta, gradient_seed(config, n, 0)) {
            Ok(s) => s,
            Err(e) => return Err(fail(e, theta, history)),
        };
        if let Err(e) = adam.step(&estimate.gradient, &mut theta) {
            return Err(fail(e, theta, history));
        }

        let grad_norm = estimate.norm();
        quiet += 1;
        let stagnated = config.stagnation_trigger.is_some_and(|k| quiet >= k);
        let perturbed = grad_norm < config.trigger_tol || stagnated;
        if perturbed {
            quiet = 0;
            let frame_seed = seed::derive(config.master_seed, &[stream::FRAME, n as u64]);
            let radii_seed = seed::derive(config.master_seed, &[stream::RADII, n as u64]);
            geo.frame = perturb_frame_with(&geo.frame, config.frame_scale, frame_seed, config.frame_update);
            geo.radii = match sample_radii(d, config.radius_mean, config.radius_spread, radii_seed) {
                Ok(r) => r,
                Err(e) => return Err(fail(e, theta, history)),
            };
        }
        history.records.push(IterationRecord {
            iteration: n,
            mean_return: mean,
            min_return: min,
            max_return: max,
            grad_norm,
            evals: estimate.evaluations_used,
            perturbed,
            wall_ms: if config.record_wall_time { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 },
        });
    }
    Ok((theta, history))
}

/// Monte-Carlo ES with `M · d` samples per iteration and noise scale `r`,
/// so its per-iteration budget matches [`dgs_es_train`].
pub fn vanilla_es_train(
    objective: &dyn Objective,
    theta0: &[f64],
    config: &TrainerConfig,
    evaluator: &dyn Evaluator,
) -> TrainResult {
    let mut history = TrainingHistory::default();
    if let Err(e) = check_start(objective, theta0, config) {
        return Err(fail(e, theta0.to_vec(), history));
    }
    let d = theta0.len();
    let samples = config.quad_order * d;
    let sigma = config.radius_mean;
    let mut adam = match AdamState::new(d, config.learning_rate) {
        Ok(a) => a,
        Err(e) => return Err(fail(e, theta0.to_vec(), history)),
    };
    let mut theta = theta0.to_vec();

    for n in 0..config.max_iterations {
        let start = Instant::now();
        let step = with_retry(n, |attempt| {
            let base = gradient_seed(config, n, attempt);
            let common = config.crn_mode.then_some(base);
            let (mut tasks, u) = plan_mc_tasks(&theta, sigma, samples, base, common);
            tasks.extend(report_tasks(config, &theta, n));
            let batch = EvalBatch::new(tasks).with_broadcast(Broadcast { theta: theta.clone(), frame: None });
            let (results, reports) = split_reports(evaluator.execute(&batch, objective)?);
            let estimate = reduce_mc(&results, &u, sigma)?;
            Ok(Step { estimate, reports })
        });
        let Step { estimate, reports } = match step {
            Ok(s) => s,
            Err(e) => return Err(fail(e, theta, history)),
        };
        let (mean, min, max) = match summarize(&reports, objective, &theta, gradient_seed(config, n, 0)) {
            Ok(s) => s,
            Err(e) => return Err(fail(e, theta, history)),
        };
        if let Err(e) = adam.step(&estimate.gradient, &mut theta) {
            return Err(fail(e, theta, history));
        }
        history.records.push(IterationRecord {
            iteration: n,
            mean_return: mean,
            min_return: min,
            max_return: max,
            grad_norm: estimate.norm(),
            evals: estimate.evaluations_used,
            perturbed: false,
            wall_ms: if config.record_wall_time { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 },
        });
    }
    Ok((theta, history))
}

/// Dispatches to [`dgs_es_train`] or [`vanilla_es_train`].
pub fn train(
    algorithm: Algorithm,
    objective: &dyn Objective,
    theta0: &[f64],
    config: &TrainerConfig,
    evaluator: &dyn Evaluator,
) -> TrainResult {
    match algorithm {
        Algorithm::DgsEs => dgs_es_train(objective, theta0, config, evaluator),
        Algorithm::VanillaEs => vanilla_es_train(objective, theta0, config, evaluator),
    }
}
