//! Torque-limited pendulum swing-up.

use std::f64::consts::PI;

pub const MAX_SPEED: f64 = 8.0;
pub const MAX_TORQUE: f64 = 2.0;
pub const DT: f64 = 0.05;
pub const G: f64 = 10.0;
pub const MASS: f64 = 1.0;
pub const LENGTH: f64 = 1.0;
pub const MAX_STEPS: usize = 200;

/// Wraps an angle into `[-π, π)`.
pub fn angle_normalize(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// State `[φ, φ̇]`; returns the reward for applying torque `u`.
pub fn advance(s: &mut [f64], u: f64) -> f64 {
    let (th, thdot) = (s[0], s[1]);
    let u = u.clamp(-MAX_TORQUE, MAX_TORQUE);
    let cost = angle_normalize(th).powi(2) + 0.1 * thdot * thdot + 0.001 * u * u;

    let new_thdot = thdot + (-3.0 * G / (2.0 * LENGTH) * (th + PI).sin() + 3.0 / (MASS * LENGTH * LENGTH) * u) * DT;
    s[0] = th + new_thdot * DT;
    s[1] = new_thdot.clamp(-MAX_SPEED, MAX_SPEED);
    -cost
}

pub fn observe(s: &[f64], obs: &mut [f64]) {
    obs[0] = s[0].cos();
    obs[1] = s[0].sin();
    obs[2] = s[1];
}
