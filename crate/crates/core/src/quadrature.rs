//! Gauss-Hermite quadrature: `∫ g(v) e^{-v²} dv ≈ Σ w_m g(v_m)`.
//!
//! Nodes are the roots of the physicists' Hermite polynomial `H_M`, found by
//! Newton iteration on the three-term recurrence from asymptotic starting
//! guesses. Weights use the closed form `2^{M+1} M! √π / H'_M(v_m)²`,
//! evaluated in log space so that `M!` never materialises.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

/// Largest supported rule order.
pub const MAX_ORDER: usize = 64;

const NEWTON_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn gauss_hermite(order: usize) -> Result<Self> {
        build_gauss_hermite(order)
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes in ascending order. Mirror pairs are exact negations.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// Approximates `∫ g(v) e^{-v²} dv`, summing mirror pairs
    /// `w_m (g(v_m) + g(-v_m))` from the outside in, so odd integrands
    /// vanish exactly.
    pub fn integrate<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        let n = self.order();
        let mut acc = if n % 2 == 1 { self.weights[n / 2] * g(self.nodes[n / 2]) } else { 0.0 };
        for m in 0..n / 2 {
            let hi = n - 1 - m;
            acc += self.weights[hi] * (g(self.nodes[hi]) + g(self.nodes[m]));
        }
        acc
    }
}

/// Physicists' Hermite polynomial and its derivative at `v`.
///
/// Uses `H_{k+1} = 2v H_k - 2k H_{k-1}` and `H'_M = 2M H_{M-1}`.
pub fn hermite_eval(order: usize, v: f64) -> (f64, f64) {
    if order == 0 {
        return (1.0, 0.0);
    }
    let mut prev = 1.0;
    let mut cur = 2.0 * v;
    for k in 1..order {
        let next = 2.0 * v * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    (cur, 2.0 * order as f64 * prev)
}

pub fn build_gauss_hermite(order: usize) -> Result<QuadratureRule> {
    if order == 0 || order > MAX_ORDER {
        return Err(invalid(format!("Gauss-Hermite order must be in 1..={MAX_ORDER}, got {order}")));
    }
    let n = order;
    let half = n / 2;

    // Positive roots, largest first.
    let mut positive: Vec<f64> = Vec::with_capacity(half);
    for i in 0..half {
        let mut z = match i {
            0 => {
                let s = (2 * n + 1) as f64;
                s.sqrt() - 1.85575 * s.powf(-1.0 / 6.0)
            }
            1 => {
                let z0 = positive[0];
                z0 - 1.14 * (n as f64).powf(0.426) / z0
            }
            2 => 1.86 * positive[1] - 0.86 * positive[0],
            3 => 1.91 * positive[2] - 0.91 * positive[1],
            _ => 2.0 * positive[i - 1] - positive[i - 2],
        };
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITERS {
            let (h, dh) = hermite_eval(n, z);
            let dz = h / dh;
            z -= dz;
            if dz.abs() <= 4.0 * f64::EPSILON * z.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged || !z.is_finite() || z <= 0.0 {
            return Err(Error::Numerical(format!(
                "Newton iteration for Hermite root {i} of order {n} did not converge"
            )));
        }
        positive.push(z);
    }

    // ln(2^{n+1} n! √π)
    let log_numer =
        (n + 1) as f64 * std::f64::consts::LN_2 + (2..=n).map(|k| (k as f64).ln()).sum::<f64>() + 0.5 * PI.ln();
    let weight_at = |v: f64| {
        let (_, dh) = hermite_eval(n, v);
        (log_numer - 2.0 * dh.abs().ln()).exp()
    };

    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for &z in &positive {
        nodes.push(-z);
        weights.push(weight_at(z));
    }
    if n % 2 == 1 {
        nodes.push(0.0);
        weights.push(weight_at(0.0));
    }
    for &z in positive.iter().rev() {
        nodes.push(z);
        weights.push(weight_at(z));
    }
    // The mirrored half reuses the same weights bit for bit.
    for m in 0..half {
        weights[n - 1 - m] = weights[m];
    }
    Ok(QuadratureRule { nodes, weights })
}
