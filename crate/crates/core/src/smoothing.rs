//! Gradient estimators built from blackbox objective values.
//!
//! The DGS estimator smooths the objective along each row `ξ_i` of a frame
//! with a 1-D Gaussian of radius `σ_i`, differentiates the smoothed slice at
//! the current point, and evaluates that derivative with a Gauss-Hermite
//! rule:
//!
//! ```text
//! D_i ≈ 1/(√π σ_i) · Σ_m w_m · J(θ + √2 σ_i v_m ξ_i) · √2 v_m
//! ∇ ≈ Ξᵀ [D_1 … D_d]
//! ```
//!
//! The Monte-Carlo baseline is the plain ES estimator
//! `1/(Nσ) · Σ_m J(θ + σ u_m) u_m` with `u_m ~ N(0, I)`.

use std::f64::consts::{PI, SQRT_2};

use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::directions::{DirectionMatrix, SmoothingRadii};
use crate::error::{invalid, Error, Result};
use crate::parallel::TaskId;
use crate::quadrature::QuadratureRule;
use crate::seed::{self, stream};

/// Failure reported by an objective.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct EvalError(pub String);

/// A scalar objective `J(θ)` to be maximised.
///
/// `evaluate` must be deterministic in `(theta, seed)`. The seed drives any
/// randomness inside the objective (e.g. an environment's initial state).
pub trait Objective: Send + Sync {
    fn dimension(&self) -> usize;

    fn evaluate(&self, theta: &[f64], seed: u64) -> Result<f64, EvalError>;
}

impl<T: Objective + ?Sized> Objective for &T {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }

    fn evaluate(&self, theta: &[f64], seed: u64) -> Result<f64, EvalError> {
        (**self).evaluate(theta, seed)
    }
}

/// Wraps a closure `(θ, seed) -> J` as an [`Objective`].
pub struct FnObjective<F> {
    dim: usize,
    f: F,
}

impl<F> FnObjective<F>
where
    F: Fn(&[f64], u64) -> f64 + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> Objective for FnObjective<F>
where
    F: Fn(&[f64], u64) -> f64 + Send + Sync,
{
    fn dimension(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, theta: &[f64], seed: u64) -> Result<f64, EvalError> {
        Ok((self.f)(theta, seed))
    }
}

/// Assigns an evaluation seed to each quadrature point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedSchedule {
    /// Seed for `(i, m)` is derived from the base seed, direction and node.
    PerNode(u64),
    /// Every point shares one seed (common random numbers).
    Common(u64),
}

impl SeedSchedule {
    pub fn node_seed(&self, direction: usize, node: usize) -> u64 {
        match *self {
            SeedSchedule::PerNode(base) => seed::derive(base, &[stream::NODE, direction as u64, node as u64]),
            SeedSchedule::Common(s) => s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Dgs,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub kind: EstimatorKind,
    pub gradient: Vec<f64>,
    /// Per-direction smoothed derivatives `D_i` (DGS only, empty for MC).
    pub directional_derivatives: Vec<f64>,
    /// Raw objective values in evaluation order: `(i, m)` row-major for DGS,
    /// sample order for MC.
    pub point_values: Vec<f64>,
    pub evaluations_used: usize,
}

impl GradientEstimate {
    pub fn norm(&self) -> f64 {
        self.gradient.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Displacement of node `v` along a direction with radius `sigma`.
#[inline]
pub fn node_offset(sigma: f64, v: f64) -> f64 {
    SQRT_2 * sigma * v
}

/// `θ + offset · ξ`.
pub fn node_point(theta: &[f64], direction: &[f64], offset: f64) -> Vec<f64> {
    theta.iter().zip(direction).map(|(t, x)| t + offset * x).collect()
}

/// Applies the GH derivative formula to values already evaluated at the
/// rule's nodes (ascending order).
///
/// Mirror nodes are combined as `w_m v_m (J_+ - J_-)` from the outermost pair
/// inwards, so constants cancel exactly and the summation order is fixed.
pub fn directional_derivative_from_values(rule: &QuadratureRule, sigma: f64, values: &[f64]) -> f64 {
    let n = rule.order();
    debug_assert_eq!(values.len(), n);
    let (nodes, weights) = (rule.nodes(), rule.weights());
    let mut acc = 0.0;
    for m in 0..n / 2 {
        let hi = n - 1 - m;
        acc += weights[hi] * nodes[hi] * (values[hi] - values[m]);
    }
    acc * SQRT_2 / (PI.sqrt() * sigma)
}

fn check_unit(direction: &[f64]) -> Result<()> {
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(invalid(format!("direction must have unit norm, got ‖ξ‖ = {norm}")));
    }
    Ok(())
}

fn check_dims(f: &dyn Objective, theta: &[f64]) -> Result<()> {
    if f.dimension() != theta.len() {
        return Err(invalid(format!(
            "objective dimension {} does not match parameter length {}",
            f.dimension(),
            theta.len()
        )));
    }
    Ok(())
}

fn eval_at(f: &dyn Objective, point: &[f64], seed: u64, task: TaskId) -> Result<f64> {
    f.evaluate(point, seed).map_err(|e| Error::Evaluation { task: Some(task), message: e.0 })
}

fn derivative_along(
    f: &dyn Objective,
    theta: &[f64],
    direction: &[f64],
    sigma: f64,
    rule: &QuadratureRule,
    index: usize,
    seeds: impl Fn(usize) -> u64,
) -> Result<(f64, Vec<f64>)> {
    let values = rule
        .nodes()
        .iter()
        .enumerate()
        .map(|(m, &v)| {
            let point = node_point(theta, direction, node_offset(sigma, v));
            eval_at(f, &point, seeds(m), TaskId::node(index, m))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((directional_derivative_from_values(rule, sigma, &values), values))
}

/// GH estimate of the smoothed derivative of `f` at `θ` along unit `ξ`.
///
/// Returns the derivative and the objective values at the `M` nodes. Errors
/// from the objective carry the node index (`direction` is reported as 0).
pub fn dgs_directional_derivative(
    f: &dyn Objective,
    theta: &[f64],
    direction: &[f64],
    sigma: f64,
    rule: &QuadratureRule,
    seeds: &[u64],
) -> Result<(f64, Vec<f64>)> {
    check_dims(f, theta)?;
    if direction.len() != theta.len() {
        return Err(invalid("direction and parameter lengths differ"));
    }
    check_unit(direction)?;
    if !(sigma > 0.0) {
        return Err(invalid(format!("smoothing radius must be > 0, got {sigma}")));
    }
    if seeds.len() != rule.order() {
        return Err(invalid(format!("expected {} seeds, got {}", rule.order(), seeds.len())));
    }
    derivative_along(f, theta, direction, sigma, rule, 0, |m| seeds[m])
}

pub(crate) fn check_frame_dims(theta: &[f64], frame: &DirectionMatrix, radii: &SmoothingRadii) -> Result<()> {
    if frame.dim() != theta.len() || radii.len() != theta.len() {
        return Err(invalid(format!(
            "dimension mismatch: θ has {}, Ξ is {}x{}, σ has {}",
            theta.len(),
            frame.dim(),
            frame.dim(),
            radii.len()
        )));
    }
    Ok(())
}

/// `Ξᵀ [D_1 … D_d]` wrapped as an estimate.
pub(crate) fn assemble_dgs(
    frame: &DirectionMatrix,
    directional_derivatives: Vec<f64>,
    point_values: Vec<f64>,
) -> GradientEstimate {
    GradientEstimate {
        kind: EstimatorKind::Dgs,
        gradient: frame.transpose_mul(&directional_derivatives),
        evaluations_used: point_values.len(),
        directional_derivatives,
        point_values,
    }
}

/// The full DGS gradient, evaluated serially in `(i, m)` order.
pub fn dgs_gradient(
    f: &dyn Objective,
    theta: &[f64],
    frame: &DirectionMatrix,
    radii: &SmoothingRadii,
    rule: &QuadratureRule,
    seeds: SeedSchedule,
) -> Result<GradientEstimate> {
    check_dims(f, theta)?;
    check_frame_dims(theta, frame, radii)?;
    let d = theta.len();
    let mut derivs = Vec::with_capacity(d);
    let mut values = Vec::with_capacity(d * rule.order());
    for (i, (xi, &sigma)) in frame.rows().zip(radii.values()).enumerate() {
        let (di, vals) = derivative_along(f, theta, xi, sigma, rule, i, |m| seeds.node_seed(i, m))?;
        derivs.push(di);
        values.extend(vals);
    }
    Ok(assemble_dgs(frame, derivs, values))
}

/// Gaussian perturbations `u_1..u_N` (row-major, `N × d`) for the MC estimator.
pub fn mc_perturbations(dim: usize, samples: usize, rng_seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(rng_seed);
    (0..dim * samples).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Evaluation seed for MC sample `m`.
pub fn mc_sample_seed(rng_seed: u64, m: usize) -> u64 {
    seed::derive(rng_seed, &[stream::SAMPLE, m as u64])
}

/// `1/(Nσ) Σ_m J_m u_m` accumulated in sample order.
pub fn mc_from_values(perturbations: &[f64], values: &[f64], sigma: f64) -> Vec<f64> {
    let samples = values.len();
    let dim = perturbations.len() / samples.max(1);
    let mut grad = vec![0.0; dim];
    for (u, &j) in perturbations.chunks_exact(dim).zip(values) {
        for (g, &x) in grad.iter_mut().zip(u) {
            *g += j * x;
        }
    }
    let scale = 1.0 / (samples as f64 * sigma);
    grad.iter_mut().for_each(|g| *g *= scale);
    grad
}

/// Monte-Carlo ES gradient with `samples` evaluations.
pub fn es_gradient_mc(
    f: &dyn Objective,
    theta: &[f64],
    sigma: f64,
    samples: usize,
    rng_seed: u64,
) -> Result<GradientEstimate> {
    check_dims(f, theta)?;
    if samples == 0 {
        return Err(invalid("MC estimator needs at least one sample"));
    }
    if !(sigma > 0.0) {
        return Err(invalid(format!("smoothing radius must be > 0, got {sigma}")));
    }
    let d = theta.len();
    let u = mc_perturbations(d, samples, rng_seed);
    let values = u
        .chunks_exact(d)
        .enumerate()
        .map(|(m, um)| {
            let point = node_point(theta, um, sigma);
            eval_at(f, &point, mc_sample_seed(rng_seed, m), TaskId::Sample(m))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GradientEstimate {
        kind: EstimatorKind::MonteCarlo,
        gradient: mc_from_values(&u, &values, sigma),
        directional_derivatives: Vec::new(),
        evaluations_used: samples,
        point_values: values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::directions::{init_frame, perturb_frame};
    use crate::quadrature::build_gauss_hermite;
    use proptest::prelude::*;

    fn linear(a: Vec<f64>) -> impl Objective {
        FnObjective::new(a.len(), move |t: &[f64], _| t.iter().zip(&a).map(|(x, y)| x * y).sum())
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
        num / den.max(1e-300)
    }

    /// Trapezoid rule for (1/σ) E_{v~N(0,1)}[sin(σv) v] on [-12, 12].
    fn smoothed_sin_derivative_trapezoid(sigma: f64, points: usize) -> f64 {
        let (lo, hi) = (-12.0, 12.0);
        let h = (hi - lo) / (points - 1) as f64;
        let g = |v: f64| (sigma * v).sin() * v * (-0.5 * v * v).exp() / (2.0 * PI).sqrt();
        let inner: f64 = (1..points - 1).map(|k| g(lo + k as f64 * h)).sum();
        h * (inner + 0.5 * (g(lo) + g(hi))) / sigma
    }

    #[test]
    fn linear_directional_derivative_is_exact() {
        let a = vec![0.3, -1.2, 2.5, 0.7];
        let f = linear(a.clone());
        let rule = build_gauss_hermite(7).unwrap();
        let xi = {
            let raw = [1.0, 2.0, -0.5, 0.25];
            let n = raw.iter().map(|x: &f64| x * x).sum::<f64>().sqrt();
            raw.map(|x| x / n)
        };
        let want: f64 = a.iter().zip(&xi).map(|(x, y)| x * y).sum();
        for &sigma in &[0.01, 1.0, 7.5] {
            let (d, vals) = dgs_directional_derivative(&f, &[0.5, -0.1, 3.0, 1.0], &xi, sigma, &rule, &[0; 7]).unwrap();
            assert_eq!(vals.len(), 7);
            assert!(((d - want) / want).abs() < 1e-12, "σ={sigma}: {d} vs {want}");
        }
    }

    #[test]
    fn even_function_has_zero_derivative_at_origin() {
        let f = FnObjective::new(3, |t: &[f64], _| t.iter().map(|x| x * x).sum());
        for m in 2..9 {
            let rule = build_gauss_hermite(m).unwrap();
            let (d, _) = dgs_directional_derivative(&f, &[0.0; 3], &[0.0, 0.6, 0.8], 1.3, &rule, &vec![0; m]).unwrap();
            assert_eq!(d, 0.0);
        }
    }

    #[test]
    fn sin_derivative_matches_closed_form_and_trapezoid() {
        let f = FnObjective::new(1, |t: &[f64], _| t[0].sin());
        let rule = build_gauss_hermite(7).unwrap();
        let (d, _) = dgs_directional_derivative(&f, &[0.0], &[1.0], 1.0, &rule, &[0; 7]).unwrap();
        let trap = smoothed_sin_derivative_trapezoid(1.0, 1_000_001);
        let closed = (-0.5f64).exp();
        assert!((trap - closed).abs() < 1e-10, "oracle disagrees with closed form: {trap}");
        assert!((d - trap).abs() < 1e-6, "{d} vs {trap}");
        assert!((d - 0.606_530_659_7).abs() < 1e-6);
    }

    #[test]
    fn directional_derivative_validates_inputs() {
        let f = linear(vec![1.0, 1.0]);
        let rule = build_gauss_hermite(3).unwrap();
        assert!(dgs_directional_derivative(&f, &[0.0; 2], &[1.0, 1.0], 1.0, &rule, &[0; 3]).is_err());
        assert!(dgs_directional_derivative(&f, &[0.0; 2], &[1.0, 0.0], 0.0, &rule, &[0; 3]).is_err());
        assert!(dgs_directional_derivative(&f, &[0.0; 2], &[1.0, 0.0], 1.0, &rule, &[0; 2]).is_err());
        assert!(dgs_directional_derivative(&f, &[0.0; 3], &[1.0, 0.0, 0.0], 1.0, &rule, &[0; 3]).is_err());
    }

    struct FailsAtNode;
    impl Objective for FailsAtNode {
        fn dimension(&self) -> usize {
            1
        }
        fn evaluate(&self, theta: &[f64], _: u64) -> Result<f64, EvalError> {
            if theta[0] > 1.0 {
                Err(EvalError("boom".into()))
            } else {
                Ok(theta[0])
            }
        }
    }

    #[test]
    fn evaluation_failure_reports_node() {
        let rule = build_gauss_hermite(3).unwrap();
        let err = dgs_directional_derivative(&FailsAtNode, &[0.0], &[1.0], 1.0, &rule, &[0; 3]).unwrap_err();
        assert_eq!(err, Error::Evaluation { task: Some(TaskId::node(0, 2)), message: "boom".into() });
    }

    #[test]
    fn gradient_of_linear_with_identity_frame() {
        let a = vec![1.0, -2.0, 0.5];
        let f = linear(a.clone());
        let rule = build_gauss_hermite(7).unwrap();
        let radii = SmoothingRadii::new(vec![0.3, 1.0, 4.0]).unwrap();
        let g = dgs_gradient(&f, &[1.0, 2.0, 3.0], &init_frame(3), &radii, &rule, SeedSchedule::PerNode(5)).unwrap();
        assert!(rel_err(&g.gradient, &a) < 1e-12);
        assert_eq!(g.evaluations_used, 21);
        assert_eq!(g.kind, EstimatorKind::Dgs);
    }

    #[test]
    fn rotated_frame_recovers_gradient() {
        let f = FnObjective::new(2, |t: &[f64], _| t[0]);
        let frame = DirectionMatrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let rule = build_gauss_hermite(5).unwrap();
        let radii = SmoothingRadii::constant(2, 1.0).unwrap();
        let g = dgs_gradient(&f, &[0.3, -0.4], &frame, &radii, &rule, SeedSchedule::Common(0)).unwrap();
        assert!(g.directional_derivatives[0].abs() < 1e-15);
        assert!((g.directional_derivatives[1] + 1.0).abs() < 1e-12);
        assert!((g.gradient[0] - 1.0).abs() < 1e-12 && g.gradient[1].abs() < 1e-12);
    }

    #[test]
    fn half_sphere_gradient() {
        let f = FnObjective::new(2, |t: &[f64], _| 0.5 * t.iter().map(|x| x * x).sum::<f64>());
        let radii = SmoothingRadii::constant(2, 1.0).unwrap();
        for m in 2..=9 {
            let rule = build_gauss_hermite(m).unwrap();
            let g = dgs_gradient(&f, &[1.0, 2.0], &init_frame(2), &radii, &rule, SeedSchedule::PerNode(0)).unwrap();
            assert!(
                (g.gradient[0] - 1.0).abs() < 1e-12 && (g.gradient[1] - 2.0).abs() < 1e-12,
                "M={m}: {:?}",
                g.gradient
            );
        }
    }

    #[test]
    fn gradient_reconstructs_from_directional_derivatives() {
        let f = FnObjective::new(4, |t: &[f64], _| t.iter().map(|x| x.sin()).sum());
        let frame = perturb_frame(&init_frame(4), 1.0, 8);
        let radii = SmoothingRadii::new(vec![0.5, 0.9, 1.1, 0.2]).unwrap();
        let rule = build_gauss_hermite(7).unwrap();
        let g = dgs_gradient(&f, &[0.1, 0.2, 0.3, 0.4], &frame, &radii, &rule, SeedSchedule::PerNode(1)).unwrap();
        assert_eq!(g.gradient, frame.transpose_mul(&g.directional_derivatives));
        assert_eq!(g.point_values.len(), 28);
    }

    #[test]
    fn gradient_rejects_mismatched_dims() {
        let f = linear(vec![1.0, 2.0]);
        let rule = build_gauss_hermite(3).unwrap();
        let r3 = SmoothingRadii::constant(3, 1.0).unwrap();
        let r2 = SmoothingRadii::constant(2, 1.0).unwrap();
        assert!(dgs_gradient(&f, &[0.0; 2], &init_frame(2), &r3, &rule, SeedSchedule::Common(0)).is_err());
        assert!(dgs_gradient(&f, &[0.0; 2], &init_frame(3), &r2, &rule, SeedSchedule::Common(0)).is_err());
    }

    #[test]
    fn mc_on_zero_and_constants() {
        let zero = FnObjective::new(4, |_: &[f64], _| 0.0);
        let g = es_gradient_mc(&zero, &[0.0; 4], 0.1, 50, 3).unwrap();
        assert!(g.gradient.iter().all(|&x| x == 0.0));
        assert_eq!(g.evaluations_used, 50);
        assert_eq!(g.kind, EstimatorKind::MonteCarlo);

        let c = FnObjective::new(4, |_: &[f64], _| 3.0);
        let small = es_gradient_mc(&c, &[0.0; 4], 0.5, 100, 3).unwrap().norm();
        let large = es_gradient_mc(&c, &[0.0; 4], 0.5, 10_000, 3).unwrap().norm();
        assert!(large < small);
        // ‖g‖ ≈ c √d / (σ √N)
        assert!(large < 5.0 * 3.0 * 2.0 / (0.5 * 100.0));
    }

    #[test]
    fn mc_on_linear_within_three_standard_errors() {
        let a = vec![1.0, -0.5, 2.0, 0.0, 3.0];
        let f = linear(a.clone());
        let (sigma, n, seed) = (0.1, 100_000, 17);
        let g = es_gradient_mc(&f, &[0.2; 5], sigma, n, seed).unwrap();
        let u = mc_perturbations(5, n, seed);
        for j in 0..5 {
            let terms: Vec<f64> = u.chunks_exact(5).zip(&g.point_values).map(|(um, v)| v * um[j] / sigma).collect();
            let mean = terms.iter().sum::<f64>() / n as f64;
            let var = terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            assert!((mean - g.gradient[j]).abs() < 1e-9);
            assert!((g.gradient[j] - a[j]).abs() < 3.0 * se, "j={j}: {} vs {} (se {se})", g.gradient[j], a[j]);
        }
    }

    #[test]
    fn consistency_as_sigma_shrinks() {
        let f = FnObjective::new(5, |t: &[f64], _| t.iter().map(|x| x.sin()).sum());
        let theta: [f64; 5] = [0.3, -1.1, 2.0, 0.7, -0.4];
        let truth: Vec<f64> = theta.iter().map(|x| x.cos()).collect();
        let rule = build_gauss_hermite(7).unwrap();
        let errs: Vec<f64> = [0.4, 0.2, 0.1, 0.05]
            .iter()
            .map(|&s| {
                let r = SmoothingRadii::constant(5, s).unwrap();
                let g = dgs_gradient(&f, &theta, &init_frame(5), &r, &rule, SeedSchedule::Common(0)).unwrap();
                g.gradient.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
            })
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 4.0).abs() < 0.5, "halving σ should quarter the error: {errs:?}");
        }
    }

    #[test]
    fn spectral_decay_at_moderate_radius() {
        // At σ = 0.5 the GH error of the sin slice falls by orders of magnitude per node.
        let f = FnObjective::new(1, |t: &[f64], _| t[0].sin());
        let sigma: f64 = 0.5;
        let exact = (-sigma * sigma / 2.0).exp();
        let errs: Vec<f64> = (1..=8)
            .map(|m| {
                let rule = build_gauss_hermite(m).unwrap();
                let (d, _) = dgs_directional_derivative(&f, &[0.0], &[1.0], sigma, &rule, &vec![0; m]).unwrap();
                (d - exact).abs()
            })
            .collect();
        for w in errs.windows(2) {
            assert!(w[1] < w[0] || w[1] < 1e-15, "{errs:?}");
        }
        assert!(errs[7] < 1e-8, "{errs:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn frame_invariance_on_linear(seed in any::<u64>(), d in 1usize..12) {
            let a: Vec<f64> = (0..d).map(|j| ((j as f64 + 1.0) * 1.3).sin() * 3.0).collect();
            let f = linear(a.clone());
            let frame = perturb_frame(&init_frame(d), 2.0, seed);
            let radii = SmoothingRadii::constant(d, 0.8).unwrap();
            let rule = build_gauss_hermite(7).unwrap();
            let g = dgs_gradient(&f, &vec![0.5; d], &frame, &radii, &rule, SeedSchedule::PerNode(seed)).unwrap();
            for (x, y) in g.gradient.iter().zip(&a) {
                prop_assert!((x - y).abs() < 1e-10);
            }
        }

        #[test]
        fn quadratic_exact_for_any_radius(sigma in 0.005f64..2.0, m in 2usize..10, seed in any::<u64>()) {
            // f = -½ θᵀ diag(h) θ + b·θ
            let h = [1.0, 3.0, 0.5, 2.0];
            let b = [0.1, -0.4, 2.0, 1.0];
            let f = FnObjective::new(4, move |t: &[f64], _| {
                (0..4).map(|j| -0.5 * h[j] * t[j] * t[j] + b[j] * t[j]).sum()
            });
            let theta = [0.7, -0.2, 1.5, -3.0];
            let truth: Vec<f64> = (0..4).map(|j| -h[j] * theta[j] + b[j]).collect();
            let frame = perturb_frame(&init_frame(4), 2.0, seed);
            let radii = SmoothingRadii::constant(4, sigma).unwrap();
            let rule = build_gauss_hermite(m).unwrap();
            let g = dgs_gradient(&f, &theta, &frame, &radii, &rule, SeedSchedule::Common(0)).unwrap();
            for (x, y) in g.gradient.iter().zip(&truth) {
                prop_assert!((x - y).abs() < 1e-10, "{} vs {}", x, y);
            }
        }

        #[test]
        fn estimates_are_deterministic(seed in any::<u64>()) {
            let f = FnObjective::new(3, |t: &[f64], s| t.iter().sum::<f64>() + (s % 7) as f64);
            let frame = perturb_frame(&init_frame(3), 1.0, seed);
            let radii = SmoothingRadii::new(vec![0.9, 1.0, 1.1]).unwrap();
            let rule = build_gauss_hermite(5).unwrap();
            let a = dgs_gradient(&f, &[0.1, 0.2, 0.3], &frame, &radii, &rule, SeedSchedule::PerNode(seed)).unwrap();
            let b = dgs_gradient(&f, &[0.1, 0.2, 0.3], &frame, &radii, &rule, SeedSchedule::PerNode(seed)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
