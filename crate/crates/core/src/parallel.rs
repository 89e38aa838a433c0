//! Master/worker evaluation of quadrature points.
//!
//! A gradient needs `M · d` independent objective evaluations. They are
//! planned as [`EvalTask`]s, split into `L` contiguous blocks (remainders go
//! to the lowest-index workers), evaluated concurrently, and handed back
//! sorted by [`TaskId`]. Reduction always runs over the sorted results in
//! index order, so the gradient does not depend on `L` or on completion
//! order.

use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::directions::{DirectionMatrix, SmoothingRadii};
use crate::error::{invalid, Error, Result};
use crate::quadrature::QuadratureRule;
use crate::smoothing::{
    assemble_dgs, check_frame_dims, directional_derivative_from_values, mc_from_values, mc_perturbations,
    mc_sample_seed, node_offset, node_point, EstimatorKind, GradientEstimate, Objective, SeedSchedule,
};

/// Identifies one evaluation within a batch. Ordering is the reduction order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TaskId {
    /// Quadrature node `node` on direction `direction`.
    Node { direction: usize, node: usize },
    /// Monte-Carlo sample.
    Sample(usize),
    /// Reporting rollout `k` at the unperturbed parameters.
    Center(usize),
}

impl TaskId {
    pub fn node(direction: usize, node: usize) -> Self {
        TaskId::Node { direction, node }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskId::Node { direction, node } => write!(f, "node ({direction}, {node})"),
            TaskId::Sample(k) => write!(f, "sample {k}"),
            TaskId::Center(k) => write!(f, "center {k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalTask {
    pub id: TaskId,
    pub point: Vec<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub id: TaskId,
    pub value: f64,
    pub wall_time: Duration,
}

/// State shared with every worker before a batch: the current parameters,
/// and for quadrature batches the frame, radii and rule. Out-of-process
/// workers rebuild node points from it, so only scalars travel per task.
#[derive(Debug, Clone, PartialEq)]
pub struct Broadcast {
    pub theta: Vec<f64>,
    pub frame: Option<(DirectionMatrix, SmoothingRadii, usize)>,
}

#[derive(Debug, Clone)]
pub struct EvalBatch {
    pub tasks: Vec<EvalTask>,
    pub broadcast: Option<Arc<Broadcast>>,
}

impl EvalBatch {
    pub fn new(tasks: Vec<EvalTask>) -> Self {
        Self { tasks, broadcast: None }
    }

    pub fn with_broadcast(mut self, b: Broadcast) -> Self {
        self.broadcast = Some(Arc::new(b));
        self
    }
}

/// Executes a batch and returns one result per task, sorted by id.
pub trait Evaluator {
    fn execute(&self, batch: &EvalBatch, objective: &dyn Objective) -> Result<Vec<EvalResult>>;

    fn workers(&self) -> usize;
}

/// In-process pool of `L` scoped worker threads.
#[derive(Debug, Clone, Copy)]
pub struct LocalPool {
    workers: usize,
}

impl LocalPool {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(invalid("worker count must be at least 1"));
        }
        Ok(Self { workers })
    }
}

impl Evaluator for LocalPool {
    fn execute(&self, batch: &EvalBatch, objective: &dyn Objective) -> Result<Vec<EvalResult>> {
        execute(&batch.tasks, objective, self.workers)
    }

    fn workers(&self) -> usize {
        self.workers
    }
}

/// Enumerates the `M · d` quadrature points in `(i, m)` row-major order.
pub fn plan_tasks(
    theta: &[f64],
    frame: &DirectionMatrix,
    radii: &SmoothingRadii,
    rule: &QuadratureRule,
    seeds: SeedSchedule,
) -> Result<Vec<EvalTask>> {
    check_frame_dims(theta, frame, radii)?;
    let mut tasks = Vec::with_capacity(theta.len() * rule.order());
    for (i, (xi, &sigma)) in frame.rows().zip(radii.values()).enumerate() {
        for (m, &v) in rule.nodes().iter().enumerate() {
            tasks.push(EvalTask {
                id: TaskId::node(i, m),
                point: node_point(theta, xi, node_offset(sigma, v)),
                seed: seeds.node_seed(i, m),
            });
        }
    }
    Ok(tasks)
}

/// Plans `samples` Monte-Carlo points `θ + σ u_m` and returns them with the
/// perturbations `u` (row-major), matching [`crate::smoothing::es_gradient_mc`]
/// when `common_seed` is `None`.
pub fn plan_mc_tasks(
    theta: &[f64],
    sigma: f64,
    samples: usize,
    rng_seed: u64,
    common_seed: Option<u64>,
) -> (Vec<EvalTask>, Vec<f64>) {
    let d = theta.len();
    let u = mc_perturbations(d, samples, rng_seed);
    let tasks = u
        .chunks_exact(d.max(1))
        .take(samples)
        .enumerate()
        .map(|(m, um)| EvalTask {
            id: TaskId::Sample(m),
            point: node_point(theta, um, sigma),
            seed: common_seed.unwrap_or_else(|| mc_sample_seed(rng_seed, m)),
        })
        .collect();
    (tasks, u)
}

/// Contiguous block bounds `[start, end)` of worker `w` among `workers`.
pub fn partition(total: usize, workers: usize, w: usize) -> (usize, usize) {
    let base = total / workers;
    let extra = total % workers;
    let start = w * base + w.min(extra);
    let len = base + usize::from(w < extra);
    (start, start + len)
}

fn run_block(tasks: &[&EvalTask], objective: &dyn Objective) -> Vec<(TaskId, std::result::Result<EvalResult, String>)> {
    tasks
        .iter()
        .map(|t| {
            let start = Instant::now();
            let out = objective
                .evaluate(&t.point, t.seed)
                .map(|value| EvalResult { id: t.id, value, wall_time: start.elapsed() })
                .map_err(|e| e.0);
            (t.id, out)
        })
        .collect()
}

fn run_partitioned(
    blocks: Vec<Vec<&EvalTask>>,
    objective: &dyn Objective,
) -> Vec<Vec<(TaskId, std::result::Result<EvalResult, String>)>> {
    if blocks.len() == 1 {
        return vec![run_block(&blocks[0], objective)];
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = blocks.iter().map(|block| scope.spawn(move || run_block(block, objective))).collect();
        handles.into_iter().map(|h| h.join().expect("evaluation worker panicked")).collect()
    })
}

/// Evaluates every task on `workers` threads with a static partition.
///
/// A task that fails is re-queued once on the next worker; a second failure
/// is returned as [`Error::Evaluation`] carrying the task id.
pub fn execute(tasks: &[EvalTask], objective: &dyn Objective, workers: usize) -> Result<Vec<EvalResult>> {
    if workers == 0 {
        return Err(invalid("worker count must be at least 1"));
    }
    let active = workers.min(tasks.len()).max(1);
    let blocks: Vec<Vec<&EvalTask>> = (0..active)
        .map(|w| {
            let (s, e) = partition(tasks.len(), active, w);
            tasks[s..e].iter().collect()
        })
        .collect();

    let mut results = Vec::with_capacity(tasks.len());
    let mut retry: Vec<Vec<&EvalTask>> = vec![Vec::new(); active];
    for (w, block_out) in run_partitioned(blocks, objective).into_iter().enumerate() {
        for (k, (_, out)) in block_out.into_iter().enumerate() {
            match out {
                Ok(r) => results.push(r),
                Err(_) => {
                    let (s, _) = partition(tasks.len(), active, w);
                    retry[(w + 1) % active].push(&tasks[s + k]);
                }
            }
        }
    }
    if retry.iter().any(|b| !b.is_empty()) {
        for block_out in run_partitioned(retry, objective) {
            for (id, out) in block_out {
                match out {
                    Ok(r) => results.push(r),
                    Err(message) => return Err(Error::Evaluation { task: Some(id), message }),
                }
            }
        }
    }
    results.sort_by_key(|r| r.id);
    Ok(results)
}

/// Turns a complete set of node results into the DGS gradient.
///
/// Results may arrive in any order; they are sorted by id and reduced per
/// direction in node order, which makes the output bit-identical to
/// [`crate::smoothing::dgs_gradient`] on the same inputs.
pub fn reduce_to_gradient(
    results: &[EvalResult],
    frame: &DirectionMatrix,
    radii: &SmoothingRadii,
    rule: &QuadratureRule,
) -> Result<GradientEstimate> {
    let d = frame.dim();
    let m = rule.order();
    if radii.len() != d {
        return Err(invalid("radii and frame dimensions differ"));
    }
    let mut values: Vec<Option<f64>> = vec![None; d * m];
    for r in results {
        match r.id {
            TaskId::Node { direction, node } if direction < d && node < m => {
                let slot = &mut values[direction * m + node];
                if slot.is_some() {
                    return Err(invalid(format!("duplicate result for {}", r.id)));
                }
                *slot = Some(r.value);
            }
            other => return Err(invalid(format!("unexpected result id {other} for a {d}x{m} plan"))),
        }
    }
    let missing = values.iter().filter(|v| v.is_none()).count();
    if missing > 0 {
        let first = values.iter().position(|v| v.is_none()).unwrap_or(0);
        return Err(Error::IncompleteEvaluation { missing, first: TaskId::node(first / m, first % m) });
    }
    let values: Vec<f64> = values.into_iter().map(|v| v.unwrap_or_default()).collect();
    let derivs = values
        .chunks_exact(m)
        .zip(radii.values())
        .map(|(vals, &sigma)| directional_derivative_from_values(rule, sigma, vals))
        .collect();
    Ok(assemble_dgs(frame, derivs, values))
}

/// Monte-Carlo counterpart of [`reduce_to_gradient`].
pub fn reduce_mc(results: &[EvalResult], perturbations: &[f64], sigma: f64) -> Result<GradientEstimate> {
    let mut sorted: Vec<&EvalResult> = results.iter().collect();
    sorted.sort_by_key(|r| r.id);
    for (k, r) in sorted.iter().enumerate() {
        if r.id != TaskId::Sample(k) {
            return Err(Error::IncompleteEvaluation { missing: 1, first: TaskId::Sample(k) });
        }
    }
    let values: Vec<f64> = sorted.iter().map(|r| r.value).collect();
    if values.is_empty() || !perturbations.len().is_multiple_of(values.len()) {
        return Err(invalid("perturbation count does not match results"));
    }
    Ok(GradientEstimate {
        kind: EstimatorKind::MonteCarlo,
        gradient: mc_from_values(perturbations, &values, sigma),
        directional_derivatives: Vec::new(),
        evaluations_used: values.len(),
        point_values: values,
    })
}
