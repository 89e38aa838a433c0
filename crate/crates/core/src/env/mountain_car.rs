//! Continuous-action mountain car.

pub const MIN_ACTION: f64 = -1.0;
pub const MAX_ACTION: f64 = 1.0;
pub const MIN_POSITION: f64 = -1.2;
pub const MAX_POSITION: f64 = 0.6;
pub const MAX_SPEED: f64 = 0.07;
pub const GOAL_POSITION: f64 = 0.45;
pub const GOAL_VELOCITY: f64 = 0.0;
pub const POWER: f64 = 0.0015;
pub const MAX_STEPS: usize = 999;
pub const GOAL_REWARD: f64 = 100.0;

/// State `[position, velocity]`. Returns `(reward, reached_goal)`.
///
/// The force is clipped to the action bounds; the action cost uses the raw
/// action, as in the reference implementation.
pub fn advance(s: &mut [f64], action: f64) -> (f64, bool) {
    let (mut position, mut velocity) = (s[0], s[1]);
    let force = action.clamp(MIN_ACTION, MAX_ACTION);

    velocity += force * POWER - 0.0025 * (3.0 * position).cos();
    velocity = velocity.clamp(-MAX_SPEED, MAX_SPEED);
    position += velocity;
    position = position.clamp(MIN_POSITION, MAX_POSITION);
    if position == MIN_POSITION && velocity < 0.0 {
        velocity = 0.0;
    }
    s[0] = position;
    s[1] = velocity;

    let done = position >= GOAL_POSITION && velocity >= GOAL_VELOCITY;
    let mut reward = if done { GOAL_REWARD } else { 0.0 };
    reward -= action * action * 0.1;
    (reward, done)
}
