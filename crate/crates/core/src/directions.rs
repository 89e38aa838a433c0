//! The orthonormal search frame `Ξ` and the per-direction smoothing radii.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::seed;

/// `d` orthonormal directions stored row-major; row `i` is direction `ξ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionMatrix {
    dim: usize,
    rows: Vec<f64>,
}

/// Maximum tolerated `|ΞΞᵀ - I|` entry when accepting a user-supplied frame.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

impl DirectionMatrix {
    pub fn identity(dim: usize) -> Self {
        let mut rows = vec![0.0; dim * dim];
        for i in 0..dim {
            rows[i * dim + i] = 1.0;
        }
        Self { dim, rows }
    }

    /// Builds a frame from row vectors, checking orthonormality.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(invalid("direction matrix needs at least one row"));
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
            return Err(invalid(format!("row {bad} has length {}, expected {dim}", rows[bad].len())));
        }
        let frame = Self { dim, rows: rows.concat() };
        let err = frame.orthonormality_error();
        if !(err < ORTHONORMAL_TOL) {
            return Err(invalid(format!("rows are not orthonormal (max |ΞΞᵀ - I| = {err:e})")));
        }
        Ok(frame)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.rows.chunks_exact(self.dim)
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.rows
    }

    /// `Ξᵀ c`, accumulated over rows in index order.
    pub fn transpose_mul(&self, coeffs: &[f64]) -> Vec<f64> {
        debug_assert_eq!(coeffs.len(), self.dim);
        let mut out = vec![0.0; self.dim];
        for (row, &c) in self.rows().zip(coeffs) {
            for (o, &x) in out.iter_mut().zip(row) {
                *o += x * c;
            }
        }
        out
    }

    /// `max |ΞΞᵀ - I|` over all entries.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                let dot: f64 = self.row(i).iter().zip(self.row(j)).map(|(a, b)| a * b).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.rows)
    }

    fn from_matrix(m: &DMatrix<f64>) -> Self {
        let dim = m.nrows();
        let mut rows = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            rows.extend(m.row(i).iter().copied());
        }
        Self { dim, rows }
    }
}

/// How a triggered perturbation relates to the current frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameUpdate {
    /// `Ξ ← orth(I + ΔΞ)`, discarding the current frame.
    #[default]
    Replace,
    /// `Ξ ← orth(I + ΔΞ) · Ξ`, a small rotation of the current frame.
    Compose,
}

pub fn init_frame(dim: usize) -> DirectionMatrix {
    DirectionMatrix::identity(dim)
}

/// Random skew-symmetric `d×d` matrix (row-major): strict upper triangle
/// uniform in `[-α, α]`, lower triangle its negation, zero diagonal.
pub fn skew_perturbation(dim: usize, alpha: f64, rng_seed: u64) -> Vec<f64> {
    let mut delta = vec![0.0; dim * dim];
    if alpha <= 0.0 {
        return delta;
    }
    let mut rng = seed::rng(rng_seed);
    for i in 0..dim {
        for j in (i + 1)..dim {
            let c = rng.random_range(-alpha..=alpha);
            delta[i * dim + j] = c;
            delta[j * dim + i] = -c;
        }
    }
    delta
}

/// Regenerates the frame from `I + ΔΞ` (see [`FrameUpdate::Replace`]).
pub fn perturb_frame(frame: &DirectionMatrix, alpha: f64, rng_seed: u64) -> DirectionMatrix {
    perturb_frame_with(frame, alpha, rng_seed, FrameUpdate::Replace)
}

pub fn perturb_frame_with(frame: &DirectionMatrix, alpha: f64, rng_seed: u64, update: FrameUpdate) -> DirectionMatrix {
    let dim = frame.dim();
    let mut a = skew_perturbation(dim, alpha, rng_seed);
    for i in 0..dim {
        a[i * dim + i] += 1.0;
    }
    let rotation = orthonormalize(DMatrix::from_row_slice(dim, dim, &a));
    match update {
        FrameUpdate::Replace => DirectionMatrix::from_matrix(&rotation),
        FrameUpdate::Compose => DirectionMatrix::from_matrix(&(rotation * frame.to_matrix())),
    }
}

/// Q factor of a Householder QR with the sign convention `diag(R) > 0`,
/// which makes the result unique for nonsingular input.
fn orthonormalize(a: DMatrix<f64>) -> DMatrix<f64> {
    let qr = a.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..q.ncols() {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Per-direction smoothing radii `σ_1..σ_d`, all strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingRadii(Vec<f64>);

impl SmoothingRadii {
    pub fn constant(dim: usize, radius: f64) -> Result<Self> {
        Self::new(vec![radius; dim])
    }

    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(invalid(format!("smoothing radius {bad} is {} (must be finite and > 0)", values[bad])));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `d` independent draws from `U(r - β, r + β)`.
pub fn sample_radii(dim: usize, mean: f64, spread: f64, rng_seed: u64) -> Result<SmoothingRadii> {
    if !(spread >= 0.0) || !spread.is_finite() {
        return Err(invalid(format!("radius spread must be finite and >= 0, got {spread}")));
    }
    if !(mean - spread > 0.0) || !mean.is_finite() {
        return Err(invalid(format!("need r - β > 0, got r = {mean}, β = {spread}")));
    }
    if spread == 0.0 {
        return SmoothingRadii::constant(dim, mean);
    }
    let dist = Uniform::new_inclusive(mean - spread, mean + spread)
        .map_err(|e| invalid(format!("radius distribution: {e}")))?;
    let mut rng = seed::rng(rng_seed);
    SmoothingRadii::new((0..dim).map(|_| dist.sample(&mut rng)).collect())
}
