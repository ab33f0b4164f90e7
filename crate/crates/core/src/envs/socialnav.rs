//! Social-force crowd in a walled square. The ego agent's position five
//! steps ahead is forecast from its last ten positions while the radius of
//! social interaction grows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ramp, Environment, Predictor};
use crate::error::{Error, Result};
use crate::geometry::{dot, norm, sub, Point};
use crate::score::Observation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SocialNavConfig {
    pub steps: usize,
    pub dt: f64,
    pub agents: usize,
    /// The workspace is `[0, width]^2`.
    pub width: f64,
    /// Relaxation time.
    pub tau: f64,
    pub v0_mean: f64,
    pub v0_std: f64,
    /// Maximum speed as a multiple of the desired speed.
    pub vmax_factor: f64,
    pub repulsion: f64,
    pub repulsion_range: f64,
    pub anticipation: f64,
    /// Anisotropy of frontal forces.
    pub lambda: f64,
    /// Weight of forces from behind.
    pub rear_weight: f64,
    pub wall_repulsion: f64,
    pub wall_range: f64,
    pub walls: bool,
    /// Standard deviation of the fluctuation term (m/s per sqrt(s)).
    pub noise: f64,
    pub radius_start: f64,
    pub radius_end: f64,
    /// Evaluation step at which the collaboration radius starts to grow.
    pub shift_start: usize,
    pub shift_width: usize,
    /// Goals are drawn at least this far from the walls.
    pub goal_margin: f64,
    pub arrival: f64,
    /// Draw a new goal on arrival; otherwise the agent comes to rest.
    pub reassign_goals: bool,
    /// Minimum spacing of the initial positions.
    pub init_spacing: f64,
    pub history: usize,
    pub horizon: usize,
}

impl Default for SocialNavConfig {
    fn default() -> Self {
        SocialNavConfig {
            steps: 6000,
            dt: 0.1,
            agents: 8,
            width: 10.0,
            tau: 0.5,
            v0_mean: 1.34,
            v0_std: 0.26,
            vmax_factor: 1.3,
            repulsion: 5.0,
            repulsion_range: 2.0,
            anticipation: 2.0,
            lambda: 0.5,
            rear_weight: 0.5,
            wall_repulsion: 10.0,
            wall_range: 0.2,
            walls: true,
            noise: 0.1,
            radius_start: 2.0,
            radius_end: 5.0,
            shift_start: 2000,
            shift_width: 2000,
            goal_margin: 0.5,
            arrival: 0.3,
            reassign_goals: true,
            init_spacing: 0.6,
            history: 10,
            horizon: 5,
        }
    }
}

impl SocialNavConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("env.steps", self.steps as f64),
            ("env.dt", self.dt),
            ("env.width", self.width),
            ("env.tau", self.tau),
            ("env.v0_mean", self.v0_mean),
            ("env.vmax_factor", self.vmax_factor),
            ("env.repulsion_range", self.repulsion_range),
            ("env.wall_range", self.wall_range),
            ("env.arrival", self.arrival),
            ("env.horizon", self.horizon as f64),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, "must be positive"));
            }
        }
        if self.agents < 1 {
            return Err(Error::config("env.agents", "need at least one agent"));
        }
        if self.history < 4 {
            return Err(Error::config(
                "env.history",
                "need at least 4 past positions",
            ));
        }
        if !(self.radius_start >= 0.0 && self.radius_end >= self.radius_start) {
            return Err(Error::config(
                "env.radius_end",
                "radius ramp must be non-decreasing",
            ));
        }
        if !(self.goal_margin >= 0.0 && 2.0 * self.goal_margin < self.width) {
            return Err(Error::config("env.goal_margin", "leaves no room for goals"));
        }
        if !(self.noise >= 0.0 && self.v0_std >= 0.0) {
            return Err(Error::config("env.noise", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.lambda) || !(0.0..=1.0).contains(&self.rear_weight) {
            return Err(Error::config(
                "env.lambda",
                "anisotropy weights must lie in [0, 1]",
            ));
        }
        Ok(())
    }

    /// Collaboration radius at simulation step `t` of the evaluation phase
    /// (negative during calibration).
    pub fn radius(&self, t: i64) -> f64 {
        ramp(
            t as f64,
            self.shift_start as f64,
            self.shift_width as f64,
            self.radius_start,
            self.radius_end,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub position: Point,
    /// Preferred velocity.
    pub preferred: Point,
    /// Actual (speed-clipped) velocity.
    pub velocity: Point,
    pub goal: Point,
    pub v0: f64,
    pub vmax: f64,
    pub arrived: bool,
}

/// Weight of a force on an agent heading along `e`, coming from a source in
/// direction `toward` (frontal sources count fully, rear ones by `c`).
pub fn anisotropy(e: Point, toward: Point, lambda: f64, c: f64) -> f64 {
    let ne = norm(e);
    let nt = norm(toward);
    if ne == 0.0 || nt == 0.0 {
        return 1.0;
    }
    let cos = dot(e, toward) / (ne * nt);
    if cos >= 0.0 {
        lambda + (1.0 - lambda) * (1.0 + cos) / 2.0
    } else {
        c
    }
}

/// Repulsion on an agent at offset `diff = r_a - r_b` from a neighbour
/// moving at speed `speed_b`.
pub fn social_force(diff: Point, speed_b: f64, a: f64, b_range: f64, anticipation: f64) -> Point {
    let d = norm(diff);
    if d == 0.0 {
        return [0.0; 2];
    }
    let s = speed_b * anticipation;
    let b = ((d * d + (d - s) * (d - s)) / 2.0).sqrt().max(1e-6);
    let mag = a / b_range * (-b / b_range).exp() * (d + (d - s).abs()) / (2.0 * b);
    [mag * diff[0] / d, mag * diff[1] / d]
}

/// Multi-agent social-force simulator; agent 0 is the ego agent.
#[derive(Debug, Clone)]
pub struct Crowd {
    config: SocialNavConfig,
    agents: Vec<Agent>,
    rng: ChaCha8Rng,
}

impl Crowd {
    pub fn new(config: SocialNavConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let speed = Normal::new(config.v0_mean, config.v0_std)
            .map_err(|e| Error::invalid(e.to_string()))?;
        let mut agents: Vec<Agent> = Vec::with_capacity(config.agents);
        let m = config.goal_margin;
        let hi = config.width - m;
        while agents.len() < config.agents {
            let p = [rng.random_range(m..=hi), rng.random_range(m..=hi)];
            if agents
                .iter()
                .any(|a| norm(sub(a.position, p)) < config.init_spacing)
            {
                continue;
            }
            let v0 = speed.sample(&mut rng).max(0.1);
            let goal = [rng.random_range(m..=hi), rng.random_range(m..=hi)];
            agents.push(Agent {
                position: p,
                preferred: [0.0; 2],
                velocity: [0.0; 2],
                goal,
                v0,
                vmax: config.vmax_factor * v0,
                arrived: false,
            });
        }
        Ok(Crowd {
            config,
            agents,
            rng,
        })
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn agents_mut(&mut self) -> &mut [Agent] {
        &mut self.agents
    }

    fn desired_velocity(a: &Agent) -> Point {
        let to_goal = sub(a.goal, a.position);
        let d = norm(to_goal);
        if a.arrived || d == 0.0 {
            [0.0; 2]
        } else {
            [a.v0 * to_goal[0] / d, a.v0 * to_goal[1] / d]
        }
    }

    /// Advances every agent by one step with collaboration radius `radius`.
    pub fn step(&mut self, radius: f64) {
        let c = &self.config;
        let dt = c.dt;
        let n = self.agents.len();
        let mut accel = vec![[0.0; 2]; n];
        for (i, acc) in accel.iter_mut().enumerate() {
            let a = &self.agents[i];
            let desired = Self::desired_velocity(a);
            let e = if norm(desired) > 0.0 {
                desired
            } else {
                a.velocity
            };
            let mut f = [
                (desired[0] - a.velocity[0]) / c.tau,
                (desired[1] - a.velocity[1]) / c.tau,
            ];
            for (j, b) in self.agents.iter().enumerate() {
                if i == j {
                    continue;
                }
                let diff = sub(a.position, b.position);
                if norm(diff) >= radius {
                    continue;
                }
                let raw = social_force(
                    diff,
                    norm(b.velocity),
                    c.repulsion,
                    c.repulsion_range,
                    c.anticipation,
                );
                let w = anisotropy(e, [-diff[0], -diff[1]], c.lambda, c.rear_weight);
                f[0] += w * raw[0];
                f[1] += w * raw[1];
            }
            if c.walls {
                let walls = [
                    (a.position[0], [1.0, 0.0]),
                    (c.width - a.position[0], [-1.0, 0.0]),
                    (a.position[1], [0.0, 1.0]),
                    (c.width - a.position[1], [0.0, -1.0]),
                ];
                for (d, normal) in walls {
                    let mag = c.wall_repulsion / c.wall_range * (-d.max(0.0) / c.wall_range).exp();
                    let w = anisotropy(e, [-normal[0], -normal[1]], c.lambda, c.rear_weight);
                    f[0] += w * mag * normal[0];
                    f[1] += w * mag * normal[1];
                }
            }
            *acc = f;
        }
        let kick = c.noise * dt.sqrt();
        for (a, f) in self.agents.iter_mut().zip(&accel) {
            let xi: [f64; 2] = [
                StandardNormal.sample(&mut self.rng),
                StandardNormal.sample(&mut self.rng),
            ];
            for k in 0..2 {
                a.preferred[k] += dt * f[k] + kick * xi[k];
            }
            let speed = norm(a.preferred);
            let scale = if speed > a.vmax { a.vmax / speed } else { 1.0 };
            a.velocity = [a.preferred[0] * scale, a.preferred[1] * scale];
            for k in 0..2 {
                a.position[k] = (a.position[k] + dt * a.velocity[k]).clamp(0.0, c.width);
            }
        }
        let m = c.goal_margin;
        let hi = c.width - m;
        for a in &mut self.agents {
            if !a.arrived && norm(sub(a.goal, a.position)) < c.arrival {
                if c.reassign_goals {
                    a.goal = [self.rng.random_range(m..=hi), self.rng.random_range(m..=hi)];
                } else {
                    a.arrived = true;
                }
            }
        }
    }
}

/// Forecasts the position `horizon` steps ahead from the mean velocity over
/// the last three steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantVelocityPredictor {
    pub dt: f64,
    pub horizon: usize,
    pub history: usize,
}

impl Default for ConstantVelocityPredictor {
    fn default() -> Self {
        ConstantVelocityPredictor {
            dt: 0.1,
            horizon: 5,
            history: 10,
        }
    }
}

impl Predictor for ConstantVelocityPredictor {
    type Input = [Point];

    fn reset(&mut self) {}

    fn predict(&mut self, past: &[Point]) -> Result<Point> {
        let needed = self.history.max(4);
        if past.len() < needed {
            return Err(Error::InsufficientHistory {
                needed,
                available: past.len(),
            });
        }
        let last = past[past.len() - 1];
        let back = past[past.len() - 4];
        let k = self.horizon as f64 / 3.0;
        Ok([
            last[0] + k * (last[0] - back[0]),
            last[1] + k * (last[1] - back[1]),
        ])
    }
}

/// Ego-agent forecasting stream; `x` holds the last ten ego positions
/// (flattened), `y` the position five steps later.
#[derive(Debug, Clone)]
pub struct SocialNavEnv {
    config: SocialNavConfig,
    prefix: usize,
    crowd: Option<Crowd>,
    /// Ego positions from `history` steps back to `horizon` steps ahead.
    track: Vec<Point>,
    predictor: ConstantVelocityPredictor,
    sim_steps: usize,
    pos: usize,
}

impl SocialNavEnv {
    pub fn new(config: SocialNavConfig, prefix: usize) -> Result<Self> {
        config.validate()?;
        let predictor = ConstantVelocityPredictor {
            dt: config.dt,
            horizon: config.horizon,
            history: config.history,
        };
        let mut env = SocialNavEnv {
            config,
            prefix,
            crowd: None,
            track: Vec::new(),
            predictor,
            sim_steps: 0,
            pos: 0,
        };
        env.reset(0);
        Ok(env)
    }

    pub fn crowd(&self) -> Option<&Crowd> {
        self.crowd.as_ref()
    }

    /// Collaboration radius in force at the next simulation step.
    pub fn current_radius(&self) -> f64 {
        self.config.radius(self.eval_time(self.sim_steps))
    }

    fn eval_time(&self, sim_step: usize) -> i64 {
        sim_step as i64 - (self.config.history + self.config.horizon) as i64 - self.prefix as i64
    }

    fn advance(&mut self) {
        let r = self.current_radius();
        let crowd = self.crowd.as_mut().expect("reset before stepping");
        crowd.step(r);
        self.track.push(crowd.agents()[0].position);
        self.sim_steps += 1;
    }
}

impl Environment for SocialNavEnv {
    fn reset(&mut self, seed: u64) {
        let crowd = Crowd::new(self.config.clone(), seed).expect("validated config");
        self.track = vec![crowd.agents()[0].position];
        self.crowd = Some(crowd);
        self.sim_steps = 0;
        self.pos = 0;
        while self.track.len() < self.config.history + self.config.horizon {
            self.advance();
        }
    }

    fn next_observation(&mut self) -> Result<Observation> {
        if self.done() {
            return Err(Error::StreamExhausted);
        }
        let (h, k) = (self.config.history, self.config.horizon);
        let past = &self.track[..h];
        let y_hat = self.predictor.predict(past)?;
        let x = past.iter().flat_map(|p| p.iter().copied()).collect();
        let obs = Observation {
            t: self.pos,
            x,
            y: self.track[h + k - 1],
            y_hat,
        };
        self.track.remove(0);
        self.advance();
        self.pos += 1;
        Ok(obs)
    }

    fn len(&self) -> usize {
        self.prefix + self.config.steps
    }

    fn position(&self) -> usize {
        self.pos
    }
}
