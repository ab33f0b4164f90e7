//! Planar RSSI localization: a double integrator under a random bounded
//! policy, four access points with log-distance path loss, Gauss–Markov
//! shadowing and sum-of-sinusoids Rayleigh fading, and a multilateration
//! predictor followed by an alpha-beta filter.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Environment, Predictor};
use crate::error::{Error, Result};
use crate::geometry::{norm, sub, Point};
use crate::score::Observation;

const SPEED_OF_LIGHT: f64 = 299_792_458.0;
const MIN_DISTANCE: f64 = 1e-2;
const FADING_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocalizationConfig {
    pub steps: usize,
    pub dt: f64,
    pub sigma_proc: f64,
    /// The workspace is `[-half_width, half_width]^2`.
    pub half_width: f64,
    pub access_points: Vec<Point>,
    /// Received power at unit distance (dB).
    pub p0: f64,
    pub path_loss_exponent: f64,
    pub sigma_shadow: f64,
    pub rho: f64,
    /// Carrier frequency (Hz).
    pub carrier: f64,
    /// Sinusoids per fading process.
    pub sinusoids: usize,
    pub v_max: f64,
    pub a_max: f64,
    pub filter_alpha: f64,
    pub filter_beta: f64,
    /// Initial agent position; `None` draws it uniformly over the workspace.
    /// The predictor always starts at the origin.
    pub start: Option<Point>,
}

impl Default for LocalizationConfig {
    fn default() -> Self {
        LocalizationConfig {
            steps: 6000,
            dt: 0.1,
            sigma_proc: 0.02,
            half_width: 6.0,
            access_points: vec![[-5.0, -5.0], [5.0, -5.0], [5.0, 5.0], [-5.0, 5.0]],
            p0: -30.0,
            path_loss_exponent: 2.2,
            sigma_shadow: 4.0,
            rho: 0.97,
            carrier: 2.4e9,
            sinusoids: 16,
            v_max: 1.0,
            a_max: 0.5,
            filter_alpha: 0.25,
            filter_beta: 0.05,
            start: None,
        }
    }
}

impl LocalizationConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("env.steps", self.steps as f64),
            ("env.dt", self.dt),
            ("env.half_width", self.half_width),
            ("env.path_loss_exponent", self.path_loss_exponent),
            ("env.carrier", self.carrier),
            ("env.sinusoids", self.sinusoids as f64),
            ("env.v_max", self.v_max),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, "must be positive"));
            }
        }
        let non_negative = [
            ("env.sigma_proc", self.sigma_proc),
            ("env.sigma_shadow", self.sigma_shadow),
            ("env.a_max", self.a_max),
        ];
        for (key, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(key, "must be non-negative"));
            }
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::config("env.rho", "must lie in [0, 1)"));
        }
        if self.access_points.len() < 3 {
            return Err(Error::config("env.access_points", "need at least 3"));
        }
        if !(self.filter_alpha > 0.0 && self.filter_alpha <= 1.0) || !(self.filter_beta >= 0.0) {
            return Err(Error::config(
                "env.filter_alpha",
                "filter gains out of range",
            ));
        }
        if let Some(p) = self.start {
            if p.iter().any(|c| c.abs() > self.half_width) {
                return Err(Error::config("env.start", "outside the workspace"));
            }
        }
        Ok(())
    }
}

/// Noise-free RSSI (dB) at distance `d` from an access point.
pub fn path_loss_rssi(p0: f64, n: f64, d: f64) -> f64 {
    p0 - 10.0 * n * d.max(MIN_DISTANCE).log10()
}

/// Distance implied by an RSSI reading under pure path loss.
pub fn invert_rssi(p0: f64, n: f64, rssi: f64) -> f64 {
    10f64.powf((p0 - rssi) / (10.0 * n)).max(MIN_DISTANCE)
}

/// Sum-of-sinusoids Rayleigh fading process with a time-varying Doppler
/// frequency. Each path keeps its own accumulated phase.
#[derive(Debug, Clone, PartialEq)]
pub struct SumOfSinusoids {
    cos_angles: Vec<f64>,
    phases: Vec<f64>,
}

impl SumOfSinusoids {
    pub fn new<R: Rng + ?Sized>(paths: usize, rng: &mut R) -> Self {
        let cos_angles = (0..paths)
            .map(|_| (2.0 * PI * rng.random::<f64>()).cos())
            .collect();
        let phases = (0..paths).map(|_| 2.0 * PI * rng.random::<f64>()).collect();
        SumOfSinusoids { cos_angles, phases }
    }

    /// Complex gain `(re, im)` with unit mean power.
    pub fn gain(&self) -> (f64, f64) {
        let scale = 1.0 / (self.phases.len() as f64).sqrt();
        let (re, im) = self
            .phases
            .iter()
            .fold((0.0, 0.0), |(re, im), p| (re + p.cos(), im + p.sin()));
        (re * scale, im * scale)
    }

    /// Advances every path by `dt` seconds at Doppler frequency `fd`.
    pub fn advance(&mut self, fd: f64, dt: f64) {
        for (p, c) in self.phases.iter_mut().zip(&self.cos_angles) {
            *p = (*p + 2.0 * PI * fd * c * dt).rem_euclid(2.0 * PI);
        }
    }

    /// Fading contribution in dB.
    pub fn fading_db(&self) -> f64 {
        let (re, im) = self.gain();
        10.0 * (re * re + im * im + FADING_EPS).log10()
    }
}

/// Weighted Gauss–Newton multilateration with damping and clipped steps.
///
/// Minimises `sum_i (||x - a_i|| - d_i)^2 / d_i^2` from `init`.
pub fn multilaterate(anchors: &[Point], distances: &[f64], init: Point) -> Point {
    const DAMPING: f64 = 1e-6;
    const MAX_STEP: f64 = 1.0;
    const ITERATIONS: usize = 20;
    let mut x = init;
    for _ in 0..ITERATIONS {
        let (mut h00, mut h01, mut h11, mut g0, mut g1) = (DAMPING, 0.0, DAMPING, 0.0, 0.0);
        for (a, d) in anchors.iter().zip(distances) {
            let diff = sub(x, *a);
            let range = norm(diff).max(MIN_DISTANCE);
            let j = [diff[0] / range, diff[1] / range];
            let w = 1.0 / (d * d);
            let r = range - d;
            h00 += w * j[0] * j[0];
            h01 += w * j[0] * j[1];
            h11 += w * j[1] * j[1];
            g0 += w * j[0] * r;
            g1 += w * j[1] * r;
        }
        let det = h00 * h11 - h01 * h01;
        let mut step = [-(h11 * g0 - h01 * g1) / det, -(h00 * g1 - h01 * g0) / det];
        let len = norm(step);
        if !len.is_finite() {
            break;
        }
        if len > MAX_STEP {
            step = [step[0] * MAX_STEP / len, step[1] * MAX_STEP / len];
        }
        x = [x[0] + step[0], x[1] + step[1]];
        if len < 1e-10 {
            break;
        }
    }
    x
}

/// Constant-velocity prior, RSSI inversion, multilateration and an
/// alpha-beta filter. Starts at the origin at rest.
#[derive(Debug, Clone, PartialEq)]
pub struct MultilaterationPredictor {
    anchors: Vec<Point>,
    p0: f64,
    n: f64,
    dt: f64,
    alpha: f64,
    beta: f64,
    position: Point,
    velocity: Point,
}

impl MultilaterationPredictor {
    pub fn new(config: &LocalizationConfig) -> Self {
        MultilaterationPredictor {
            anchors: config.access_points.clone(),
            p0: config.p0,
            n: config.path_loss_exponent,
            dt: config.dt,
            alpha: config.filter_alpha,
            beta: config.filter_beta,
            position: [0.0; 2],
            velocity: [0.0; 2],
        }
    }

    pub fn position(&self) -> Point {
        self.position
    }

    pub fn velocity(&self) -> Point {
        self.velocity
    }

    /// Alpha-beta correction of the prior with a position measurement.
    pub fn filter(&mut self, prior: Point, measured: Point) -> Point {
        let e = sub(measured, prior);
        for k in 0..2 {
            self.position[k] = prior[k] + self.alpha * e[k];
            self.velocity[k] += self.beta / self.dt * e[k];
        }
        self.position
    }
}

impl Predictor for MultilaterationPredictor {
    type Input = [f64];

    fn reset(&mut self) {
        self.position = [0.0; 2];
        self.velocity = [0.0; 2];
    }

    fn predict(&mut self, rssi: &[f64]) -> Result<Point> {
        if rssi.len() != self.anchors.len() {
            return Err(Error::invalid("one RSSI reading per access point expected"));
        }
        let prior = [
            self.position[0] + self.dt * self.velocity[0],
            self.position[1] + self.dt * self.velocity[1],
        ];
        let distances: Vec<f64> = rssi
            .iter()
            .map(|r| invert_rssi(self.p0, self.n, *r))
            .collect();
        let measured = multilaterate(&self.anchors, &distances, prior);
        Ok(self.filter(prior, measured))
    }
}

/// Localization rollout; `x` holds the RSSI vector, `y` the true position and
/// `y_hat` the filtered estimate.
#[derive(Debug, Clone)]
pub struct LocalizationEnv {
    config: LocalizationConfig,
    prefix: usize,
    rng: ChaCha8Rng,
    position: Point,
    velocity: Point,
    shadowing: Vec<f64>,
    fading: Vec<SumOfSinusoids>,
    predictor: MultilaterationPredictor,
    pos: usize,
}

impl LocalizationEnv {
    pub fn new(config: LocalizationConfig, prefix: usize) -> Result<Self> {
        config.validate()?;
        let predictor = MultilaterationPredictor::new(&config);
        let mut env = LocalizationEnv {
            prefix,
            rng: ChaCha8Rng::seed_from_u64(0),
            position: [0.0; 2],
            velocity: [0.0; 2],
            shadowing: Vec::new(),
            fading: Vec::new(),
            predictor,
            pos: 0,
            config,
        };
        env.reset(0);
        Ok(env)
    }

    pub fn config(&self) -> &LocalizationConfig {
        &self.config
    }

    /// True position and velocity.
    pub fn state(&self) -> (Point, Point) {
        (self.position, self.velocity)
    }

    pub fn shadowing(&self) -> &[f64] {
        &self.shadowing
    }

    /// RSSI vector at the current position and channel state.
    pub fn rssi(&self) -> Vec<f64> {
        let c = &self.config;
        c.access_points
            .iter()
            .zip(&self.shadowing)
            .zip(&self.fading)
            .map(|((a, s), f)| {
                path_loss_rssi(c.p0, c.path_loss_exponent, norm(sub(self.position, *a)))
                    + s
                    + f.fading_db()
            })
            .collect()
    }

    fn advance(&mut self) {
        let c = &self.config;
        let dt = c.dt;
        let accel: Point = [
            self.rng.random_range(-1.0..=1.0) * c.a_max,
            self.rng.random_range(-1.0..=1.0) * c.a_max,
        ];
        let e0: f64 = StandardNormal.sample(&mut self.rng);
        let e1: f64 = StandardNormal.sample(&mut self.rng);
        let noise = [c.sigma_proc * e0, c.sigma_proc * e1];
        for k in 0..2 {
            self.position[k] += dt * self.velocity[k];
            self.velocity[k] += dt * (accel[k] + noise[k]);
        }
        let speed = norm(self.velocity);
        if speed > c.v_max {
            let s = c.v_max / speed;
            self.velocity = [self.velocity[0] * s, self.velocity[1] * s];
        }
        let h = c.half_width;
        for k in 0..2 {
            if self.position[k] > h {
                self.position[k] = 2.0 * h - self.position[k];
                self.velocity[k] = -self.velocity[k].abs();
            } else if self.position[k] < -h {
                self.position[k] = -2.0 * h - self.position[k];
                self.velocity[k] = self.velocity[k].abs();
            }
            self.position[k] = self.position[k].clamp(-h, h);
        }
        let innovation = (1.0 - c.rho * c.rho).sqrt() * c.sigma_shadow;
        for s in &mut self.shadowing {
            let xi: f64 = StandardNormal.sample(&mut self.rng);
            *s = c.rho * *s + innovation * xi;
        }
        let fd = norm(self.velocity) * c.carrier / SPEED_OF_LIGHT;
        for f in &mut self.fading {
            f.advance(fd, dt);
        }
    }
}

impl Environment for LocalizationEnv {
    fn reset(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let h = self.config.half_width;
        self.position = match self.config.start {
            Some(p) => p,
            None => [self.rng.random_range(-h..=h), self.rng.random_range(-h..=h)],
        };
        self.velocity = [0.0; 2];
        let aps = self.config.access_points.len();
        self.shadowing = vec![0.0; aps];
        let paths = self.config.sinusoids;
        self.fading = (0..aps)
            .map(|_| SumOfSinusoids::new(paths, &mut self.rng))
            .collect();
        self.predictor.reset();
        self.pos = 0;
    }

    fn next_observation(&mut self) -> Result<Observation> {
        if self.done() {
            return Err(Error::StreamExhausted);
        }
        self.advance();
        let rssi = self.rssi();
        let y_hat = self.predictor.predict(&rssi)?;
        let obs = Observation {
            t: self.pos,
            x: rssi,
            y: self.position,
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_loss_example() {
        let d = norm(sub([0.0, 0.0], [5.0, 5.0]));
        let rssi = path_loss_rssi(-30.0, 2.2, d);
        assert!((rssi - (-30.0 - 22.0 * 50f64.sqrt().log10())).abs() < 1e-12);
        assert!((rssi + 48.67).abs() < 0.05);
        assert!((invert_rssi(-30.0, 2.2, rssi) - d).abs() < 1e-12);
    }

    #[test]
    fn noise_free_multilateration_recovers_truth() {
        let cfg = LocalizationConfig::default();
        let truth = [2.0, 1.0];
        let d: Vec<f64> = cfg
            .access_points
            .iter()
            .map(|a| norm(sub(truth, *a)))
            .collect();
        let est = multilaterate(&cfg.access_points, &d, [0.0, 0.0]);
        assert!(norm(sub(est, truth)) < 1e-3, "{est:?}");
    }

    #[test]
    fn shadowing_bias_moves_estimate() {
        let cfg = LocalizationConfig::default();
        let truth = [2.0, 1.0];
        let mut rssi: Vec<f64> = cfg
            .access_points
            .iter()
            .map(|a| path_loss_rssi(cfg.p0, cfg.path_loss_exponent, norm(sub(truth, *a))))
            .collect();
        rssi[0] += 4.0;
        let d: Vec<f64> = rssi
            .iter()
            .map(|r| invert_rssi(cfg.p0, cfg.path_loss_exponent, *r))
            .collect();
        let est = multilaterate(&cfg.access_points, &d, [0.0, 0.0]);
        assert!(norm(sub(est, truth)) > 0.0);
    }

    #[test]
    fn filter_with_zero_innovation_keeps_estimate() {
        let mut p = MultilaterationPredictor::new(&LocalizationConfig::default());
        p.position = [1.0, -2.0];
        p.velocity = [0.3, 0.1];
        let prior = [1.03, -1.99];
        let out = p.filter(prior, prior);
        assert_eq!(out, prior);
        assert_eq!(p.velocity(), [0.3, 0.1]);
    }

    #[test]
    fn speed_and_workspace_bounds() {
        let mut env = LocalizationEnv::new(
            LocalizationConfig {
                steps: 20_000,
                ..Default::default()
            },
            0,
        )
        .unwrap();
        env.reset(3);
        while !env.done() {
            let obs = env.next_observation().unwrap();
            let (p, v) = env.state();
            assert!(norm(v) <= 1.0 + 1e-12);
            assert!(p.iter().all(|c| c.abs() <= 6.0));
            assert_eq!(obs.y, p);
        }
    }

    #[test]
    fn shadowing_lag_one_autocorrelation() {
        let mut env = LocalizationEnv::new(
            LocalizationConfig {
                steps: 100_000,
                ..Default::default()
            },
            0,
        )
        .unwrap();
        env.reset(9);
        let mut xs = Vec::with_capacity(100_000);
        while !env.done() {
            env.next_observation().unwrap();
            xs.push(env.shadowing()[0]);
        }
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
        let cov: f64 = xs.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
        let rho = cov / var;
        assert!((rho - 0.97).abs() < 0.01, "rho {rho}");
    }

    #[test]
    fn deterministic_streams() {
        let cfg = LocalizationConfig {
            steps: 300,
            ..Default::default()
        };
        let mut a = LocalizationEnv::new(cfg.clone(), 50).unwrap();
        let mut b = LocalizationEnv::new(cfg, 50).unwrap();
        let sa = super::super::Stream::collect(&mut a, 4, 50).unwrap();
        let sb = super::super::Stream::collect(&mut b, 4, 50).unwrap();
        assert_eq!(sa, sb);
        assert_eq!(sa.eval.len(), 300);
    }

    /// Asymptotic Kolmogorov p-value for statistic `d` at sample size `n`.
    fn ks_p_value(d: f64, n: usize) -> f64 {
        let lambda = d * ((n as f64).sqrt() + 0.12 + 0.11 / (n as f64).sqrt());
        let p: f64 = (1..100)
            .map(|k| {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                2.0 * sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp()
            })
            .sum();
        p.clamp(0.0, 1.0)
    }

    #[test]
    fn fading_amplitude_is_rayleigh() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 2000;
        let mut amps: Vec<f64> = (0..n)
            .map(|_| {
                let mut f = SumOfSinusoids::new(16, &mut rng);
                f.advance(rng.random_range(1.0..50.0), 1.0);
                let (re, im) = f.gain();
                (re * re + im * im).sqrt()
            })
            .collect();
        amps.sort_by(f64::total_cmp);
        let d = amps
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let cdf = 1.0 - (-a * a).exp();
                (cdf - i as f64 / n as f64)
                    .abs()
                    .max(((i + 1) as f64 / n as f64 - cdf).abs())
            })
            .fold(0.0, f64::max);
        let p = ks_p_value(d, n);
        assert!(p > 0.01, "D {d}, p {p}");
    }
}
