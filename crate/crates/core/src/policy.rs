//! Two-layer tanh MLP policy over a flat parameter vector.
//!
//! Parameter layout (layer-major, weights then bias, weights row-major):
//!
//! ```text
//! [ W1 (hidden × obs) | b1 (hidden) | W2 (out × hidden) | b2 (out) ]
//! ```

use std::io::{Read, Write};
use std::ops::Deref;
use std::path::Path;

use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Error, Result};
use crate::seed;

pub const DEFAULT_HIDDEN: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub enum ActionSpec {
    Discrete { actions: usize },
    Continuous { low: Vec<f64>, high: Vec<f64> },
}

impl ActionSpec {
    pub fn continuous(low: Vec<f64>, high: Vec<f64>) -> Result<Self> {
        if low.len() != high.len() || low.is_empty() {
            return Err(invalid("continuous action bounds must be non-empty and equal length"));
        }
        if low.iter().zip(&high).any(|(l, h)| !(l < h)) {
            return Err(invalid("continuous action bounds need low < high elementwise"));
        }
        Ok(Self::Continuous { low, high })
    }

    /// Width of the network's output layer.
    pub fn output_dim(&self) -> usize {
        match self {
            ActionSpec::Discrete { actions } => *actions,
            ActionSpec::Continuous { low, .. } => low.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpPolicy {
    obs_dim: usize,
    hidden_dim: usize,
    action_spec: ActionSpec,
}

impl MlpPolicy {
    pub fn new(obs_dim: usize, hidden_dim: usize, action_spec: ActionSpec) -> Result<Self> {
        if obs_dim == 0 || hidden_dim == 0 || action_spec.output_dim() == 0 {
            return Err(invalid("policy dimensions must be positive"));
        }
        Ok(Self { obs_dim, hidden_dim, action_spec })
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn action_spec(&self) -> &ActionSpec {
        &self.action_spec
    }

    pub fn output_dim(&self) -> usize {
        self.action_spec.output_dim()
    }

    pub fn param_count(&self) -> usize {
        (self.obs_dim + 1) * self.hidden_dim + (self.hidden_dim + 1) * self.output_dim()
    }

    fn check(&self, theta: &[f64], obs: &[f64]) -> Result<()> {
        if theta.len() != self.param_count() {
            return Err(invalid(format!("expected {} parameters, got {}", self.param_count(), theta.len())));
        }
        if obs.len() != self.obs_dim {
            return Err(invalid(format!("expected observation of length {}, got {}", self.obs_dim, obs.len())));
        }
        Ok(())
    }

    /// Splits `θ` into `(W1, b1, W2, b2)` views.
    pub fn layers<'a>(&self, theta: &'a [f64]) -> Result<Layers<'a>> {
        if theta.len() != self.param_count() {
            return Err(invalid(format!("expected {} parameters, got {}", self.param_count(), theta.len())));
        }
        let h = self.hidden_dim;
        let (w1, rest) = theta.split_at(h * self.obs_dim);
        let (b1, rest) = rest.split_at(h);
        let (w2, b2) = rest.split_at(self.output_dim() * h);
        Ok(Layers { w1, b1, w2, b2 })
    }

    /// Raw network output `W2 tanh(W1 obs + b1) + b2` written into `out`.
    /// `hidden` is scratch space of length `hidden_dim`.
    pub fn forward_into(&self, theta: &[f64], obs: &[f64], hidden: &mut [f64], out: &mut [f64]) -> Result<()> {
        self.check(theta, obs)?;
        let h = self.hidden_dim;
        let Layers { w1, b1, w2, b2 } = self.layers(theta)?;
        for ((hk, row), b) in hidden.iter_mut().zip(w1.chunks_exact(self.obs_dim)).zip(b1) {
            let z: f64 = row.iter().zip(obs).map(|(w, x)| w * x).sum::<f64>() + b;
            *hk = z.tanh();
        }
        for ((ok, row), b) in out.iter_mut().zip(w2.chunks_exact(h)).zip(b2) {
            *ok = row.iter().zip(hidden.iter()).map(|(w, x)| w * x).sum::<f64>() + b;
        }
        Ok(())
    }

    /// Maps raw outputs to an action: argmax (lowest index wins ties) for
    /// discrete specs, `low + (tanh(out) + 1)/2 · (high - low)` otherwise.
    pub fn select_into(&self, out: &[f64], action: &mut Action) {
        match &self.action_spec {
            ActionSpec::Discrete { .. } => {
                let mut best = 0;
                for (k, &v) in out.iter().enumerate().skip(1) {
                    if v > out[best] {
                        best = k;
                    }
                }
                *action = Action::Discrete(best);
            }
            ActionSpec::Continuous { low, high } => {
                let squash = |(z, (l, h)): (&f64, (&f64, &f64))| l + (z.tanh() + 1.0) * 0.5 * (h - l);
                match action {
                    Action::Continuous(buf) if buf.len() == out.len() => {
                        for (b, v) in buf.iter_mut().zip(out.iter().zip(low.iter().zip(high)).map(squash)) {
                            *b = v;
                        }
                    }
                    _ => *action = Action::Continuous(out.iter().zip(low.iter().zip(high)).map(squash).collect()),
                }
            }
        }
    }

    pub fn act(&self, theta: &[f64], obs: &[f64]) -> Result<Action> {
        let mut hidden = vec![0.0; self.hidden_dim];
        let mut out = vec![0.0; self.output_dim()];
        self.forward_into(theta, obs, &mut hidden, &mut out)?;
        let mut action = Action::Discrete(0);
        self.select_into(&out, &mut action);
        Ok(action)
    }

    /// Entries of each layer drawn from `N(0, 1/fan_in)`.
    pub fn init_params(&self, seed: u64) -> ParameterVector {
        let mut rng = seed::rng(seed::derive(seed, &[seed::stream::INIT]));
        let first = Normal::new(0.0, (1.0 / self.obs_dim as f64).sqrt()).expect("finite std");
        let second = Normal::new(0.0, (1.0 / self.hidden_dim as f64).sqrt()).expect("finite std");
        let split = (self.obs_dim + 1) * self.hidden_dim;
        let values = (0..self.param_count())
            .map(|k| if k < split { first.sample(&mut rng) } else { second.sample(&mut rng) })
            .collect();
        ParameterVector(values)
    }
}

/// Borrowed per-layer views of a parameter vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layers<'a> {
    pub w1: &'a [f64],
    pub b1: &'a [f64],
    pub w2: &'a [f64],
    pub b2: &'a [f64],
}

impl Layers<'_> {
    pub fn flatten(&self) -> Vec<f64> {
        [self.w1, self.b1, self.w2, self.b2].concat()
    }
}

/// The flat parameter vector `θ`. All entries are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector(Vec<f64>);

const CHECKPOINT_MAGIC: &[u8; 4] = b"DGSP";
const CHECKPOINT_VERSION: u32 = 1;

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("parameter {k} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Binary checkpoint: magic `DGSP`, then little-endian `u32` version,
    /// obs, hidden and output dims, `u64` count, and the values as `f64`.
    pub fn write_checkpoint<W: Write>(&self, policy: &MlpPolicy, mut w: W) -> Result<()> {
        if self.0.len() != policy.param_count() {
            return Err(invalid("parameter count does not match policy"));
        }
        w.write_all(CHECKPOINT_MAGIC)?;
        for v in [CHECKPOINT_VERSION, policy.obs_dim as u32, policy.hidden_dim as u32, policy.output_dim() as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(self.0.len() as u64).to_le_bytes())?;
        for v in &self.0 {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a binary checkpoint, returning `(obs, hidden, out)` and the vector.
    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<((usize, usize, usize), Self)> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(invalid("not a parameter checkpoint"));
        }
        let mut u32s = [0u32; 4];
        for slot in &mut u32s {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            *slot = u32::from_le_bytes(b);
        }
        if u32s[0] != CHECKPOINT_VERSION {
            return Err(invalid(format!("unsupported checkpoint version {}", u32s[0])));
        }
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        let count = u64::from_le_bytes(b) as usize;
        let (obs, hidden, out) = (u32s[1] as usize, u32s[2] as usize, u32s[3] as usize);
        if count != (obs + 1) * hidden + (hidden + 1) * out {
            return Err(invalid("checkpoint shape and count disagree"));
        }
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            r.read_exact(&mut b)?;
            values.push(f64::from_le_bytes(b));
        }
        Ok(((obs, hidden, out), Self::new(values)?))
    }

    /// CSV checkpoint: a `# dgs-params v1 obs=.. hidden=.. out=..` line, then `index,value` rows.
    pub fn write_csv(&self, policy: &MlpPolicy, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        writeln!(
            file,
            "# dgs-params v1 obs={} hidden={} out={}",
            policy.obs_dim,
            policy.hidden_dim,
            policy.output_dim()
        )?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(["index", "value"])?;
        for (k, v) in self.0.iter().enumerate() {
            w.write_record([k.to_string(), format!("{v:?}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl Deref for ParameterVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ParameterVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}
