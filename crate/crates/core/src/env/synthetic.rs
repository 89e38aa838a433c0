//! Analytic objectives with known maximisers.
//!
//! * `sphere`: `-‖θ‖²`, maximum 0 at the origin.
//! * `shifted-quadratic`: `-‖θ - c‖²` with `c_i = (-1)^i (1 + i/d)`.
//! * `multimodal-2d`: negated Ackley function in two variables,
//!   `A e^{-B √(‖θ‖²/2)} + e^{(cos 2πθ₁ + cos 2πθ₂)/2} - A - e`,
//!   with a lattice of local maxima near integer points and the global
//!   maximum 0 at the origin.

use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::smoothing::{EvalError, Objective};

pub const ACKLEY_A: f64 = 20.0;
pub const ACKLEY_B: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SyntheticKind {
    Sphere,
    ShiftedQuadratic,
    Multimodal2d,
}

impl SyntheticKind {
    pub const ALL: [SyntheticKind; 3] =
        [SyntheticKind::Sphere, SyntheticKind::ShiftedQuadratic, SyntheticKind::Multimodal2d];

    pub fn name(self) -> &'static str {
        match self {
            SyntheticKind::Sphere => "sphere",
            SyntheticKind::ShiftedQuadratic => "shifted-quadratic",
            SyntheticKind::Multimodal2d => "multimodal-2d",
        }
    }
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SyntheticKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| invalid(format!("unknown synthetic objective '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    kind: SyntheticKind,
    center: Vec<f64>,
}

impl Synthetic {
    /// The objective of `kind` in dimension `dim` (`multimodal-2d` needs `dim == 2`).
    pub fn new(kind: SyntheticKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("synthetic objectives need dimension >= 1"));
        }
        let center = match kind {
            SyntheticKind::Sphere => vec![0.0; dim],
            SyntheticKind::ShiftedQuadratic => default_shift(dim),
            SyntheticKind::Multimodal2d => {
                if dim != 2 {
                    return Err(invalid(format!("multimodal-2d is two-dimensional, got dimension {dim}")));
                }
                vec![0.0; 2]
            }
        };
        Ok(Self { kind, center })
    }

    /// `-‖θ - c‖²` for an arbitrary shift `c`.
    pub fn shifted_quadratic(center: Vec<f64>) -> Result<Self> {
        if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
            return Err(invalid("shift must be non-empty and finite"));
        }
        Ok(Self { kind: SyntheticKind::ShiftedQuadratic, center })
    }

    pub fn kind(&self) -> SyntheticKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// The global maximiser.
    pub fn argmax(&self) -> &[f64] {
        &self.center
    }

    pub fn max_value(&self) -> f64 {
        0.0
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        match self.kind {
            SyntheticKind::Sphere | SyntheticKind::ShiftedQuadratic => {
                -theta.iter().zip(&self.center).map(|(t, c)| (t - c) * (t - c)).sum::<f64>()
            }
            SyntheticKind::Multimodal2d => ackley(theta[0], theta[1]),
        }
    }

    /// Analytic gradient; for `multimodal-2d` it is undefined at the origin
    /// and reported as zero there.
    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        match self.kind {
            SyntheticKind::Sphere | SyntheticKind::ShiftedQuadratic => {
                theta.iter().zip(&self.center).map(|(t, c)| -2.0 * (t - c)).collect()
            }
            SyntheticKind::Multimodal2d => {
                let (x, y) = (theta[0], theta[1]);
                let rho = (0.5 * (x * x + y * y)).sqrt();
                let ripple = (0.5 * ((2.0 * PI * x).cos() + (2.0 * PI * y).cos())).exp();
                let bowl = |t: f64| {
                    if rho == 0.0 {
                        0.0
                    } else {
                        -ACKLEY_A * ACKLEY_B * (-ACKLEY_B * rho).exp() * t / (2.0 * rho)
                    }
                };
                [x, y].iter().map(|&t| bowl(t) - ripple * PI * (2.0 * PI * t).sin()).collect()
            }
        }
    }
}

fn default_shift(dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            sign * (1.0 + i as f64 / dim as f64)
        })
        .collect()
}

fn ackley(x: f64, y: f64) -> f64 {
    let rho = (0.5 * (x * x + y * y)).sqrt();
    let ripple = 0.5 * ((2.0 * PI * x).cos() + (2.0 * PI * y).cos());
    ACKLEY_A * (-ACKLEY_B * rho).exp() + ripple.exp() - ACKLEY_A - E
}

impl Objective for Synthetic {
    fn dimension(&self) -> usize {
        self.dim()
    }

    fn evaluate(&self, theta: &[f64], _seed: u64) -> Result<f64, EvalError> {
        if theta.len() != self.dim() {
            return Err(EvalError(format!("expected {} parameters, got {}", self.dim(), theta.len())));
        }
        Ok(self.value(theta))
    }
}
