#!/usr/bin/env python3
"""Record reference trajectories from gym 0.17.3 classic-control environments.

Each fixture starts from the environment's own seeded reset, then applies a
fixed action sequence for 20 steps. Row 0 holds the initial state with empty
action/reward fields; row t holds the state after the t-th step together with
the action applied and the reward received.

    python3 -m venv env && . env/bin/activate && pip install numpy gym==0.17.3
    python3 scripts/gen_fixtures.py crates/core/tests/fixtures
"""
import csv
import math
import os
import sys

import gym
import numpy as np

STEPS = 20


def cartpole_actions(k):
    patterns = [
        lambda t: t % 2,
        lambda t: 1 if (t // 2) % 2 == 0 else 0,
        lambda t: 0 if t in (0, 1, 5, 6, 9, 13, 14, 18) else 1,
    ]
    return [patterns[k](t) for t in range(STEPS)]


def pendulum_actions(k):
    return [[2.0 * math.sin(0.7 * t + k)] for t in range(STEPS)]


def mountain_car_actions(k):
    return [[math.cos(0.45 * t + 1.3 * k)] for t in range(STEPS)]


ENVS = [
    ("cartpole", "CartPole-v0", ["x", "x_dot", "theta", "theta_dot"], cartpole_actions),
    ("pendulum", "Pendulum-v0", ["theta", "theta_dot"], pendulum_actions),
    ("mountain_car", "MountainCarContinuous-v0", ["position", "velocity"], mountain_car_actions),
]


def fmt(v):
    return repr(float(v))


def main(out_dir):
    os.makedirs(out_dir, exist_ok=True)
    for name, env_id, state_names, actions_for in ENVS:
        for k in range(3):
            env = gym.make(env_id).unwrapped
            env.seed(1000 + k)
            env.reset()
            path = os.path.join(out_dir, "%s_%d.csv" % (name, k))
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["step"] + state_names + ["action", "reward"])
                w.writerow([0] + [fmt(s) for s in np.asarray(env.state)] + ["", ""])
                for t, a in enumerate(actions_for(k)):
                    _, reward, done, _ = env.step(a if isinstance(a, int) else np.array(a))
                    act = a if isinstance(a, int) else a[0]
                    w.writerow([t + 1] + [fmt(s) for s in np.asarray(env.state)] + [fmt(act), fmt(reward)])
                    assert not done, "%s fixture %d terminated at step %d" % (name, k, t + 1)
            print("wrote", path)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/core/tests/fixtures")
