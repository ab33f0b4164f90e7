//! Linearized multirotor tracking a figure-eight under MPPI control while its
//! actuators degrade, with a constant-velocity position forecast.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Environment, Predictor};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::score::Observation;

/// `[x, vx, y, vy, z, vz, yaw, yaw_rate, pitch, pitch_rate, roll, roll_rate]`.
pub type State = [f64; 12];

/// `[thrust, pitch torque, roll torque, yaw torque]`.
pub type Control = [f64; 4];

pub const X: usize = 0;
pub const VX: usize = 1;
pub const Y: usize = 2;
pub const VY: usize = 3;
pub const Z: usize = 4;
pub const VZ: usize = 5;
pub const YAW: usize = 6;
pub const YAW_RATE: usize = 7;
pub const PITCH: usize = 8;
pub const PITCH_RATE: usize = 9;
pub const ROLL: usize = 10;
pub const ROLL_RATE: usize = 11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MultirotorConfig {
    pub steps: usize,
    pub dt: f64,
    pub gravity: f64,
    /// Health drift per second.
    pub drift: f64,
    /// Health diffusion per sqrt(second).
    pub diffusion: f64,
    pub initial_health: f64,
    pub attitude_limit: f64,
    pub amplitude: f64,
    pub omega: f64,
    pub altitude: f64,
    pub thrust_kp: f64,
    pub thrust_kd: f64,
    pub mppi: MppiConfig,
}

impl Default for MultirotorConfig {
    fn default() -> Self {
        MultirotorConfig {
            steps: 6000,
            dt: 0.1,
            gravity: 9.81,
            drift: 5e-4,
            diffusion: 2.5e-4,
            initial_health: 1.0,
            attitude_limit: 0.3,
            amplitude: 3.0,
            omega: 0.25,
            altitude: 2.0,
            thrust_kp: 4.0,
            thrust_kd: 3.0,
            mppi: MppiConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MppiConfig {
    pub samples: usize,
    pub horizon: usize,
    pub position_cost: f64,
    pub velocity_cost: f64,
    pub attitude_cost: f64,
    pub control_cost: f64,
    /// Standard deviation of the torque perturbations.
    pub noise: f64,
    pub temperature: f64,
}

impl Default for MppiConfig {
    fn default() -> Self {
        MppiConfig {
            samples: 30,
            horizon: 35,
            position_cost: 10.0,
            velocity_cost: 1.0,
            attitude_cost: 5.0,
            control_cost: 0.1,
            noise: 0.1,
            temperature: 10.0,
        }
    }
}

impl MultirotorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("env.steps", self.steps as f64),
            ("env.dt", self.dt),
            ("env.gravity", self.gravity),
            ("env.attitude_limit", self.attitude_limit),
            ("env.mppi.samples", self.mppi.samples as f64),
            ("env.mppi.horizon", self.mppi.horizon as f64),
            ("env.mppi.temperature", self.mppi.temperature),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, "must be positive"));
            }
        }
        let non_negative = [
            ("env.drift", self.drift),
            ("env.diffusion", self.diffusion),
            ("env.mppi.noise", self.mppi.noise),
            ("env.mppi.position_cost", self.mppi.position_cost),
            ("env.mppi.velocity_cost", self.mppi.velocity_cost),
            ("env.mppi.attitude_cost", self.mppi.attitude_cost),
            ("env.mppi.control_cost", self.mppi.control_cost),
        ];
        for (key, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(key, "must be non-negative"));
            }
        }
        if !(0.0..=1.0).contains(&self.initial_health) {
            return Err(Error::config("env.initial_health", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Figure-eight position and velocity at time `t` seconds.
    pub fn reference(&self, t: f64) -> (Point, Point) {
        let (a, w) = (self.amplitude, self.omega);
        (
            [a * (w * t).sin(), a * (2.0 * w * t).sin()],
            [a * w * (w * t).cos(), 2.0 * a * w * (2.0 * w * t).cos()],
        )
    }

    /// Hover state on the reference at time zero.
    pub fn initial_state(&self) -> State {
        let mut s = [0.0; 12];
        let (p, _) = self.reference(0.0);
        s[X] = p[0];
        s[Y] = p[1];
        s[Z] = self.altitude;
        s
    }
}

/// One semi-implicit Euler step of the linearized dynamics with effective
/// input `health ⊙ u`: rates are updated first and positions use the new
/// rates. Pitch and roll are clipped, yaw is wrapped.
pub fn dynamics(s: &State, u: &Control, health: &[f64; 4], g: f64, dt: f64, limit: f64) -> State {
    let e = [
        health[0] * u[0],
        health[1] * u[1],
        health[2] * u[2],
        health[3] * u[3],
    ];
    let mut n = *s;
    n[VX] += dt * g * s[PITCH];
    n[VY] -= dt * g * s[ROLL];
    n[VZ] += dt * (e[0] - g);
    n[YAW_RATE] += dt * e[3];
    n[PITCH_RATE] += dt * e[1];
    n[ROLL_RATE] += dt * e[2];
    n[X] += dt * n[VX];
    n[Y] += dt * n[VY];
    n[Z] += dt * n[VZ];
    n[YAW] = wrap_angle(n[YAW] + dt * n[YAW_RATE]);
    for (angle, rate) in [(PITCH, PITCH_RATE), (ROLL, ROLL_RATE)] {
        let a = n[angle] + dt * n[rate];
        if a.abs() > limit {
            n[angle] = a.clamp(-limit, limit);
            n[rate] = 0.0;
        } else {
            n[angle] = a;
        }
    }
    n
}

pub fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

/// Reduced state seen by the planner: planar motion and attitude.
#[derive(Debug, Clone, Copy)]
struct Planar {
    p: Point,
    v: Point,
    /// Pitch, roll, yaw.
    att: [f64; 3],
    rate: [f64; 3],
}

/// Result of one planner update.
#[derive(Debug, Clone, PartialEq)]
pub struct MppiStep {
    /// Torques `[pitch, roll, yaw]` to apply now.
    pub torques: [f64; 3],
    pub costs: Vec<f64>,
    /// First torques of every perturbed sequence.
    pub first_torques: Vec<[f64; 3]>,
}

/// Model-predictive path-integral planner over the torque inputs, rolled
/// out with the healthy nominal model.
#[derive(Debug, Clone, PartialEq)]
pub struct Mppi {
    config: MppiConfig,
    gravity: f64,
    dt: f64,
    limit: f64,
    nominal: Vec<[f64; 3]>,
}

impl Mppi {
    pub fn new(env: &MultirotorConfig) -> Self {
        Mppi {
            config: env.mppi.clone(),
            gravity: env.gravity,
            dt: env.dt,
            limit: env.attitude_limit,
            nominal: vec![[0.0; 3]; env.mppi.horizon],
        }
    }

    pub fn nominal(&self) -> &[[f64; 3]] {
        &self.nominal
    }

    pub fn reset(&mut self) {
        self.nominal.iter_mut().for_each(|u| *u = [0.0; 3]);
    }

    fn rollout_cost(&self, start: Planar, controls: &[[f64; 3]], refs: &[(Point, Point)]) -> f64 {
        let c = &self.config;
        let (g, dt) = (self.gravity, self.dt);
        let mut s = start;
        let mut cost = 0.0;
        for (u, (rp, rv)) in controls.iter().zip(refs) {
            s.v[0] += dt * g * s.att[0];
            s.v[1] -= dt * g * s.att[1];
            for k in 0..3 {
                s.rate[k] += dt * u[k];
            }
            s.p[0] += dt * s.v[0];
            s.p[1] += dt * s.v[1];
            for k in 0..2 {
                let a = s.att[k] + dt * s.rate[k];
                if a.abs() > self.limit {
                    s.att[k] = a.clamp(-self.limit, self.limit);
                    s.rate[k] = 0.0;
                } else {
                    s.att[k] = a;
                }
            }
            s.att[2] = wrap_angle(s.att[2] + dt * s.rate[2]);
            let ep = (s.p[0] - rp[0]).powi(2) + (s.p[1] - rp[1]).powi(2);
            let ev = (s.v[0] - rv[0]).powi(2) + (s.v[1] - rv[1]).powi(2);
            let ea = s.att.iter().map(|a| a * a).sum::<f64>();
            let eu = u.iter().map(|a| a * a).sum::<f64>();
            cost += c.position_cost * ep
                + c.velocity_cost * ev
                + c.attitude_cost * ea
                + c.control_cost * eu;
        }
        cost
    }

    /// Perturbs the nominal sequence, weights the samples by
    /// `exp(-(cost - min) / temperature)`, applies the first input and
    /// shifts the horizon.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        state: &State,
        refs: &[(Point, Point)],
        rng: &mut R,
    ) -> MppiStep {
        let c = &self.config;
        let h = self.nominal.len();
        let start = Planar {
            p: [state[X], state[Y]],
            v: [state[VX], state[VY]],
            att: [state[PITCH], state[ROLL], state[YAW]],
            rate: [state[PITCH_RATE], state[ROLL_RATE], state[YAW_RATE]],
        };
        let mut noises: Vec<Vec<[f64; 3]>> = Vec::with_capacity(c.samples);
        let mut costs = Vec::with_capacity(c.samples);
        let mut controls = vec![[0.0; 3]; h];
        for _ in 0..c.samples {
            let eps: Vec<[f64; 3]> = (0..h)
                .map(|_| {
                    let mut e = [0.0; 3];
                    for v in &mut e {
                        let z: f64 = StandardNormal.sample(rng);
                        *v = c.noise * z;
                    }
                    e
                })
                .collect();
            for (k, out) in controls.iter_mut().enumerate() {
                for j in 0..3 {
                    out[j] = self.nominal[k][j] + eps[k][j];
                }
            }
            costs.push(self.rollout_cost(start, &controls, refs));
            noises.push(eps);
        }
        let base = self.nominal[0];
        let first_torques = noises
            .iter()
            .map(|eps| {
                [
                    base[0] + eps[0][0],
                    base[1] + eps[0][1],
                    base[2] + eps[0][2],
                ]
            })
            .collect();
        let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
        let weights: Vec<f64> = costs
            .iter()
            .map(|c2| (-(c2 - min) / c.temperature).exp())
            .collect();
        let total: f64 = weights.iter().sum();
        for (w, eps) in weights.iter().zip(&noises) {
            let w = w / total;
            for (u, e) in self.nominal.iter_mut().zip(eps) {
                for j in 0..3 {
                    u[j] += w * e[j];
                }
            }
        }
        let torques = self.nominal[0];
        self.nominal.rotate_left(1);
        self.nominal[h - 1] = [0.0; 3];
        MppiStep {
            torques,
            costs,
            first_torques,
        }
    }
}

/// Constant-velocity planar forecast one step ahead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicsPrior {
    pub dt: f64,
}

impl Predictor for PhysicsPrior {
    type Input = State;

    fn reset(&mut self) {}

    fn predict(&mut self, s: &State) -> Result<Point> {
        Ok([s[X] + self.dt * s[VX], s[Y] + self.dt * s[VY]])
    }
}

/// Tracking rollout; `x` holds the 12-dim state, `y` the next planar
/// position and `y_hat` its constant-velocity forecast.
///
/// Actuator health stays at its initial value during the calibration prefix
/// and then follows a drifting, clamped random walk.
#[derive(Debug, Clone)]
pub struct MultirotorEnv {
    config: MultirotorConfig,
    prefix: usize,
    rng: ChaCha8Rng,
    state: State,
    health: [f64; 4],
    mppi: Mppi,
    predictor: PhysicsPrior,
    pos: usize,
}

impl MultirotorEnv {
    pub fn new(config: MultirotorConfig, prefix: usize) -> Result<Self> {
        config.validate()?;
        let mppi = Mppi::new(&config);
        let predictor = PhysicsPrior { dt: config.dt };
        let mut env = MultirotorEnv {
            prefix,
            rng: ChaCha8Rng::seed_from_u64(0),
            state: config.initial_state(),
            health: [config.initial_health; 4],
            mppi,
            predictor,
            pos: 0,
            config,
        };
        env.reset(0);
        Ok(env)
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn health(&self) -> [f64; 4] {
        self.health
    }

    /// Control for the current state at simulation step `self.pos`.
    fn control(&mut self) -> Control {
        let c = &self.config;
        let t0 = self.pos as f64 * c.dt;
        let refs: Vec<(Point, Point)> = (1..=c.mppi.horizon)
            .map(|k| c.reference(t0 + k as f64 * c.dt))
            .collect();
        let step = self.mppi.update(&self.state, &refs, &mut self.rng);
        let thrust =
            c.gravity + c.thrust_kp * (c.altitude - self.state[Z]) - c.thrust_kd * self.state[VZ];
        [thrust, step.torques[0], step.torques[1], step.torques[2]]
    }

    fn degrade(&mut self) {
        let c = &self.config;
        let kick = c.diffusion * c.dt.sqrt();
        for h in &mut self.health {
            let w: f64 = StandardNormal.sample(&mut self.rng);
            *h = (*h - c.drift * c.dt + kick * w).clamp(0.0, 1.0);
        }
    }
}

impl Environment for MultirotorEnv {
    fn reset(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.state = self.config.initial_state();
        self.health = [self.config.initial_health; 4];
        self.mppi.reset();
        self.pos = 0;
    }

    fn next_observation(&mut self) -> Result<Observation> {
        if self.done() {
            return Err(Error::StreamExhausted);
        }
        let y_hat = self.predictor.predict(&self.state)?;
        let x = self.state.to_vec();
        let u = self.control();
        let c = &self.config;
        self.state = dynamics(
            &self.state,
            &u,
            &self.health,
            c.gravity,
            c.dt,
            c.attitude_limit,
        );
        if self.pos >= self.prefix {
            self.degrade();
        }
        let obs = Observation {
            t: self.pos,
            x,
            y: [self.state[X], self.state[Y]],
            y_hat,
        };
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
