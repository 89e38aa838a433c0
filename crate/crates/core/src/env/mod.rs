//! Classic-control environments and synthetic objectives.
//!
//! The three control tasks are native ports of the usual reference dynamics
//! (explicit Euler, same constants, same reward definitions). Initial states
//! are drawn from the reference distributions using a ChaCha8 stream keyed
//! by the episode seed, so a `(seed, θ)` pair fixes the whole trajectory on
//! every platform. Returns are undiscounted sums of rewards.

pub mod cartpole;
pub mod mountain_car;
pub mod pendulum;
pub mod synthetic;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::policy::{Action, ActionSpec, MlpPolicy};
use crate::seed::{self, stream};
use crate::smoothing::{EvalError, Objective};

pub use synthetic::{Synthetic, SyntheticKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvKind {
    CartPole,
    MountainCarContinuous,
    Pendulum,
}

impl EnvKind {
    pub const ALL: [EnvKind; 3] = [EnvKind::CartPole, EnvKind::MountainCarContinuous, EnvKind::Pendulum];

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::CartPole => "cartpole",
            EnvKind::MountainCarContinuous => "mountaincar",
            EnvKind::Pendulum => "pendulum",
        }
    }

    pub fn spec(self) -> EnvSpec {
        EnvSpec::new(self)
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cartpole" | "cartpole-v0" => Ok(EnvKind::CartPole),
            "mountaincar" | "mountaincarcontinuous" | "mountaincarcontinuous-v0" => Ok(EnvKind::MountainCarContinuous),
            "pendulum" | "pendulum-v0" => Ok(EnvKind::Pendulum),
            _ => Err(invalid(format!("unknown environment '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub kind: EnvKind,
    pub obs_dim: usize,
    pub state_dim: usize,
    pub action_spec: ActionSpec,
    pub max_steps: usize,
}

impl EnvSpec {
    pub fn new(kind: EnvKind) -> Self {
        let continuous = |lo: f64, hi: f64| ActionSpec::Continuous { low: vec![lo], high: vec![hi] };
        match kind {
            EnvKind::CartPole => Self {
                kind,
                obs_dim: 4,
                state_dim: 4,
                action_spec: ActionSpec::Discrete { actions: 2 },
                max_steps: cartpole::MAX_STEPS,
            },
            EnvKind::MountainCarContinuous => Self {
                kind,
                obs_dim: 2,
                state_dim: 2,
                action_spec: continuous(mountain_car::MIN_ACTION, mountain_car::MAX_ACTION),
                max_steps: mountain_car::MAX_STEPS,
            },
            EnvKind::Pendulum => Self {
                kind,
                obs_dim: 3,
                state_dim: 2,
                action_spec: continuous(-pendulum::MAX_TORQUE, pendulum::MAX_TORQUE),
                max_steps: pendulum::MAX_STEPS,
            },
        }
    }

    /// The tanh MLP policy sized for this environment.
    pub fn policy(&self, hidden: usize) -> Result<MlpPolicy> {
        MlpPolicy::new(self.obs_dim, hidden, self.action_spec.clone())
    }
}

/// Physical state plus episode bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvState {
    values: [f64; 4],
    len: usize,
    pub steps: usize,
    pub done: bool,
}

impl EnvState {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() || values.len() > 4 {
            return Err(invalid(format!("state must have 1 to 4 components, got {}", values.len())));
        }
        let mut buf = [0.0; 4];
        buf[..values.len()].copy_from_slice(values);
        Ok(Self { values: buf, len: values.len(), steps: 0, done: false })
    }

    pub fn values(&self) -> &[f64] {
        &self.values[..self.len]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeResult {
    pub total_return: f64,
    pub steps: usize,
    /// The task's own terminal condition fired before the step limit.
    pub terminated_early: bool,
}

/// Initial state for episode `seed`.
///
/// CartPole: all components `U(-0.05, 0.05)`. MountainCar: position
/// `U(-0.6, -0.4)`, velocity 0. Pendulum: angle `U(-π, π)`, velocity `U(-1, 1)`.
pub fn reset(spec: &EnvSpec, seed: u64) -> EnvState {
    let mut rng = seed::rng(seed::derive(seed, &[stream::ENV]));
    let mut values = [0.0; 4];
    match spec.kind {
        EnvKind::CartPole => {
            let b = cartpole::INIT_BOUND;
            for v in &mut values {
                *v = rng.random_range(-b..b);
            }
        }
        EnvKind::MountainCarContinuous => {
            values[0] = rng.random_range(-0.6..-0.4);
        }
        EnvKind::Pendulum => {
            values[0] = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            values[1] = rng.random_range(-1.0..1.0);
        }
    }
    EnvState { values, len: spec.state_dim, steps: 0, done: false }
}

/// Writes the policy observation for `state` into `obs`.
pub fn observe(spec: &EnvSpec, state: &EnvState, obs: &mut [f64]) {
    match spec.kind {
        EnvKind::Pendulum => pendulum::observe(state.values(), obs),
        _ => obs.copy_from_slice(state.values()),
    }
}

fn scalar_action(action: &Action) -> Result<f64> {
    match action {
        Action::Continuous(v) if v.len() == 1 && v[0].is_finite() => Ok(v[0]),
        other => Err(invalid(format!("expected one finite continuous action, got {other:?}"))),
    }
}

/// Advances `state` by one step in place and returns the reward.
pub fn step_in_place(spec: &EnvSpec, state: &mut EnvState, action: &Action) -> Result<f64> {
    if state.done {
        return Err(Error::ContractViolation(format!(
            "step called on a finished {} episode (after {} steps)",
            spec.kind, state.steps
        )));
    }
    if state.len != spec.state_dim {
        return Err(invalid(format!("state has {} components, {} expects {}", state.len, spec.kind, spec.state_dim)));
    }
    let s = &mut state.values[..state.len];
    let (reward, terminal) = match spec.kind {
        EnvKind::CartPole => {
            let push_right = match action {
                Action::Discrete(0) => false,
                Action::Discrete(1) => true,
                other => return Err(invalid(format!("cart-pole action must be 0 or 1, got {other:?}"))),
            };
            (1.0, cartpole::advance(s, push_right))
        }
        EnvKind::MountainCarContinuous => mountain_car::advance(s, scalar_action(action)?),
        EnvKind::Pendulum => (pendulum::advance(s, scalar_action(action)?), false),
    };
    state.steps += 1;
    state.done = terminal || state.steps >= spec.max_steps;
    Ok(reward)
}

pub fn step(spec: &EnvSpec, state: &EnvState, action: &Action) -> Result<(EnvState, f64)> {
    let mut next = *state;
    let reward = step_in_place(spec, &mut next, action)?;
    Ok((next, reward))
}

/// Runs one episode of `policy` with parameters `theta` from `reset(spec, seed)`.
pub fn rollout(spec: &EnvSpec, policy: &MlpPolicy, theta: &[f64], seed: u64) -> Result<EpisodeResult> {
    if policy.obs_dim() != spec.obs_dim || policy.action_spec() != &spec.action_spec {
        return Err(invalid(format!("policy shape does not fit the {} environment", spec.kind)));
    }
    if theta.len() != policy.param_count() {
        return Err(invalid(format!("expected {} parameters, got {}", policy.param_count(), theta.len())));
    }
    let mut state = reset(spec, seed);
    let mut obs = vec![0.0; spec.obs_dim];
    let mut hidden = vec![0.0; policy.hidden_dim()];
    let mut out = vec![0.0; policy.output_dim()];
    let mut action = Action::Discrete(0);
    let mut total = 0.0;
    let mut terminated_early = false;
    while !state.done {
        observe(spec, &state, &mut obs);
        policy.forward_into(theta, &obs, &mut hidden, &mut out)?;
        policy.select_into(&out, &mut action);
        total += step_in_place(spec, &mut state, &action)?;
        if state.done && state.steps < spec.max_steps {
            terminated_early = true;
        }
    }
    Ok(EpisodeResult { total_return: total, steps: state.steps, terminated_early })
}

/// `J(θ)` = return of one episode seeded by the evaluation seed.
#[derive(Debug, Clone)]
pub struct RolloutObjective {
    spec: EnvSpec,
    policy: MlpPolicy,
}

impl RolloutObjective {
    pub fn new(spec: EnvSpec, policy: MlpPolicy) -> Result<Self> {
        if policy.obs_dim() != spec.obs_dim || policy.action_spec() != &spec.action_spec {
            return Err(invalid(format!("policy shape does not fit the {} environment", spec.kind)));
        }
        Ok(Self { spec, policy })
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn policy(&self) -> &MlpPolicy {
        &self.policy
    }
}

impl Objective for RolloutObjective {
    fn dimension(&self) -> usize {
        self.policy.param_count()
    }

    fn evaluate(&self, theta: &[f64], seed: u64) -> Result<f64, EvalError> {
        rollout(&self.spec, &self.policy, theta, seed).map(|r| r.total_return).map_err(|e| EvalError(e.to_string()))
    }
}
