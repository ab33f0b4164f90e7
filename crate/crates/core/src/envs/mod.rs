//! Seeded simulated data streams and their point predictors.
//!
//! Every environment emits a calibration prefix followed by its evaluation
//! steps. Shift schedules are expressed in evaluation time, so the prefix
//! always sees the pre-shift regime.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::score::Observation;

pub mod gmm;
pub mod localization;
pub mod multirotor;
pub mod socialnav;

pub use gmm::{GmmConfig, GmmStream};
pub use localization::{LocalizationConfig, LocalizationEnv};
pub use multirotor::{MultirotorConfig, MultirotorEnv};
pub use socialnav::{SocialNavConfig, SocialNavEnv};

/// A resettable, seeded observation stream.
pub trait Environment {
    /// Restarts the stream; identical seeds give identical streams.
    fn reset(&mut self, seed: u64);

    /// Next observation, or `StreamExhausted` once `len()` steps were taken.
    fn next_observation(&mut self) -> Result<Observation>;

    /// Total number of observations (calibration prefix included).
    fn len(&self) -> usize;

    /// Observations emitted since the last reset.
    fn position(&self) -> usize;

    fn done(&self) -> bool {
        self.position() >= self.len()
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Maps an environment's features to a point forecast of the outcome.
pub trait Predictor {
    type Input: ?Sized;

    /// Clears internal state at the start of a rollout.
    fn reset(&mut self);

    fn predict(&mut self, input: &Self::Input) -> Result<Point>;
}

/// Calibration prefix and evaluation steps of one stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub calibration: Vec<Observation>,
    pub eval: Vec<Observation>,
}

impl Stream {
    /// Drains `env` from a fresh reset.
    pub fn collect(env: &mut dyn Environment, seed: u64, calibration: usize) -> Result<Self> {
        env.reset(seed);
        if calibration > env.len() {
            return Err(Error::invalid("calibration prefix longer than the stream"));
        }
        let mut all = Vec::with_capacity(env.len());
        while !env.done() {
            all.push(env.next_observation()?);
        }
        let eval = all.split_off(calibration);
        Ok(Stream {
            calibration: all,
            eval,
        })
    }

    /// FNV-1a hash over every number in the stream, identifying it across
    /// runs.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |v: f64| {
            for b in v.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for o in self.calibration.iter().chain(&self.eval) {
            feed(o.t as f64);
            o.x.iter().for_each(|v| feed(*v));
            o.y.iter().chain(&o.y_hat).for_each(|v| feed(*v));
        }
        h
    }
}

/// Environment selection and parameters, as read from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvConfig {
    Gmm(GmmConfig),
    Localization(LocalizationConfig),
    Socialnav(SocialNavConfig),
    Multirotor(MultirotorConfig),
}

impl EnvConfig {
    pub fn name(&self) -> &'static str {
        match self {
            EnvConfig::Gmm(_) => "gmm",
            EnvConfig::Localization(_) => "localization",
            EnvConfig::Socialnav(_) => "socialnav",
            EnvConfig::Multirotor(_) => "multirotor",
        }
    }

    /// Evaluation steps after the calibration prefix.
    pub fn steps(&self) -> usize {
        match self {
            EnvConfig::Gmm(c) => c.steps,
            EnvConfig::Localization(c) => c.steps,
            EnvConfig::Socialnav(c) => c.steps,
            EnvConfig::Multirotor(c) => c.steps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EnvConfig::Gmm(c) => c.validate(),
            EnvConfig::Localization(c) => c.validate(),
            EnvConfig::Socialnav(c) => c.validate(),
            EnvConfig::Multirotor(c) => c.validate(),
        }
    }

    /// Builds the environment with a calibration prefix of `calibration`
    /// steps ahead of the evaluation steps.
    pub fn build(&self, calibration: usize) -> Result<Box<dyn Environment + Send>> {
        self.validate()?;
        Ok(match self {
            EnvConfig::Gmm(c) => Box::new(GmmStream::new(c.clone(), calibration)?),
            EnvConfig::Localization(c) => Box::new(LocalizationEnv::new(c.clone(), calibration)?),
            EnvConfig::Socialnav(c) => Box::new(SocialNavEnv::new(c.clone(), calibration)?),
            EnvConfig::Multirotor(c) => Box::new(MultirotorEnv::new(c.clone(), calibration)?),
        })
    }

    /// Generates the full stream for `seed`.
    pub fn stream(&self, calibration: usize, seed: u64) -> Result<Stream> {
        let mut env = self.build(calibration)?;
        Stream::collect(env.as_mut(), seed, calibration)
    }
}

/// Linear ramp from `from` to `to` over `[start, start + width]`.
pub(crate) fn ramp(t: f64, start: f64, width: f64, from: f64, to: f64) -> f64 {
    if t <= start {
        from
    } else if width <= 0.0 || t >= start + width {
        to
    } else {
        from + (to - from) * (t - start) / width
    }
}
