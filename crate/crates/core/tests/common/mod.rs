//! Reference-trajectory replay shared by the fixture and acceptance tests.

#![allow(dead_code)]

use std::path::PathBuf;

use dgs_core::env::{step_in_place, EnvKind, EnvState};
use dgs_core::Action;

pub const FIXTURE_TOL: f64 = 1e-10;

pub const FIXTURE_SETS: [(EnvKind, &str); 3] = [
    (EnvKind::CartPole, "cartpole"),
    (EnvKind::Pendulum, "pendulum"),
    (EnvKind::MountainCarContinuous, "mountain_car"),
];

struct Row {
    state: Vec<f64>,
    action: Option<f64>,
    reward: Option<f64>,
}

fn load(name: &str) -> Vec<Row> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    let mut rd = csv::Reader::from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let width = rd.headers().unwrap().len();
    rd.records()
        .map(|rec| {
            let rec = rec.unwrap();
            let num = |k: usize| rec.get(k).filter(|s| !s.is_empty()).map(|s| s.parse::<f64>().unwrap());
            Row {
                state: (1..width - 2).map(|k| num(k).unwrap()).collect(),
                action: num(width - 2),
                reward: num(width - 1),
            }
        })
        .collect()
}

/// Largest per-component deviation over the whole trajectory.
pub fn replay(kind: EnvKind, name: &str) -> f64 {
    let spec = kind.spec();
    let rows = load(name);
    assert_eq!(rows.len(), 21, "{name}");
    let mut state = EnvState::from_values(&rows[0].state).unwrap();
    let mut worst: f64 = 0.0;
    for row in &rows[1..] {
        let a = row.action.unwrap();
        let action = match kind {
            EnvKind::CartPole => Action::Discrete(a as usize),
            _ => Action::Continuous(vec![a]),
        };
        let reward = step_in_place(&spec, &mut state, &action).unwrap();
        for (got, want) in state.values().iter().zip(&row.state) {
            worst = worst.max((got - want).abs());
        }
        worst = worst.max((reward - row.reward.unwrap()).abs());
    }
    worst
}
