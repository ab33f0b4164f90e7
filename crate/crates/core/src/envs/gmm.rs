//! Two-component Gaussian mixture whose weight ramps from the first
//! component to the second, with a zero predictor.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ramp, Environment};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::score::Observation;

/// Bivariate normal with covariance `[[c00, c01], [c01, c11]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian2 {
    mean: Point,
    /// Cholesky factor `[l11, l21, l22]`.
    chol: [f64; 3],
    log_norm: f64,
}

impl Gaussian2 {
    pub fn new(mean: Point, cov: [f64; 3]) -> Result<Self> {
        let l11 = cov[0].sqrt();
        let l21 = cov[1] / l11;
        let l22 = (cov[2] - l21 * l21).sqrt();
        if !(l11 > 0.0 && l22 > 0.0) {
            return Err(Error::invalid("covariance is not positive definite"));
        }
        Ok(Gaussian2 {
            mean,
            chol: [l11, l21, l22],
            log_norm: (2.0 * std::f64::consts::PI * l11 * l22).ln(),
        })
    }

    pub fn mean(&self) -> Point {
        self.mean
    }

    /// Negative log-density at `z`.
    pub fn nll(&self, z: Point) -> f64 {
        let [l11, l21, l22] = self.chol;
        let u0 = (z[0] - self.mean[0]) / l11;
        let u1 = (z[1] - self.mean[1] - l21 * u0) / l22;
        0.5 * (u0 * u0 + u1 * u1) + self.log_norm
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let [l11, l21, l22] = self.chol;
        let e0: f64 = StandardNormal.sample(rng);
        let e1: f64 = StandardNormal.sample(rng);
        [self.mean[0] + l11 * e0, self.mean[1] + l21 * e0 + l22 * e1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GmmConfig {
    pub steps: usize,
    pub mean1: Point,
    /// `[c00, c01, c11]`.
    pub cov1: [f64; 3],
    pub mean2: Point,
    pub cov2: [f64; 3],
    /// Evaluation step at which the weight on the second component starts to
    /// rise.
    pub shift_start: usize,
    /// Steps taken by the weight to go from 0 to 1.
    pub shift_width: usize,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            steps: 7000,
            mean1: [1.0, -1.2],
            cov1: [1.2, 0.6, 0.9],
            mean2: [-1.0, -1.2],
            cov2: [0.8, -0.3, 1.1],
            shift_start: 2500,
            shift_width: 2000,
        }
    }
}

impl GmmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::config("env.steps", "must be positive"));
        }
        Gaussian2::new(self.mean1, self.cov1)
            .map_err(|_| Error::config("env.cov1", "must be positive definite"))?;
        Gaussian2::new(self.mean2, self.cov2)
            .map_err(|_| Error::config("env.cov2", "must be positive definite"))?;
        Ok(())
    }

    pub fn components(&self) -> Result<(Gaussian2, Gaussian2)> {
        Ok((
            Gaussian2::new(self.mean1, self.cov1)?,
            Gaussian2::new(self.mean2, self.cov2)?,
        ))
    }

    /// Weight on the second component at evaluation step `t` (negative `t`
    /// lies in the calibration prefix).
    pub fn weight(&self, t: i64) -> f64 {
        ramp(
            t as f64,
            self.shift_start as f64,
            self.shift_width as f64,
            0.0,
            1.0,
        )
    }
}

/// Mixture stream; the prediction is always the origin, so the residual is
/// the sample itself. Features are `[w_t]`.
#[derive(Debug, Clone)]
pub struct GmmStream {
    config: GmmConfig,
    n1: Gaussian2,
    n2: Gaussian2,
    prefix: usize,
    rng: ChaCha8Rng,
    pos: usize,
}

impl GmmStream {
    pub fn new(config: GmmConfig, prefix: usize) -> Result<Self> {
        config.validate()?;
        let (n1, n2) = config.components()?;
        Ok(GmmStream {
            config,
            n1,
            n2,
            prefix,
            rng: ChaCha8Rng::seed_from_u64(0),
            pos: 0,
        })
    }
}

impl Environment for GmmStream {
    fn reset(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.pos = 0;
    }

    fn next_observation(&mut self) -> Result<Observation> {
        if self.done() {
            return Err(Error::StreamExhausted);
        }
        let w = self.config.weight(self.pos as i64 - self.prefix as i64);
        let u: f64 = self.rng.random();
        let y = if u < w {
            self.n2.sample(&mut self.rng)
        } else {
            self.n1.sample(&mut self.rng)
        };
        let obs = Observation {
            t: self.pos,
            x: vec![w],
            y,
            y_hat: [0.0, 0.0],
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

/// How the empirical score CDF at step `t` is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdfMode {
    /// All scores observed up to and including `t`.
    Cumulative,
    /// The last `n` scores up to and including `t`.
    Rolling(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaStarTrace {
    pub alpha1: Vec<f64>,
    pub alpha2: Vec<f64>,
}

impl AlphaStarTrace {
    pub fn diff(&self) -> Vec<f64> {
        self.alpha1
            .iter()
            .zip(&self.alpha2)
            .map(|(a, b)| a - b)
            .collect()
    }
}

/// Sorted Monte-Carlo draws of a score under a fixed distribution, used as
/// its CDF.
struct ScoreLaw(Vec<f64>);

impl ScoreLaw {
    fn new(score: &Gaussian2, source: &Gaussian2, n: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut v: Vec<f64> = (0..n).map(|_| score.nll(source.sample(rng))).collect();
        v.sort_by(f64::total_cmp);
        ScoreLaw(v)
    }

    fn cdf(&self, q: f64) -> f64 {
        self.0.partition_point(|s| *s <= q) as f64 / self.0.len() as f64
    }
}

/// Smallest `q` with `(1 - w) F1(q) + w F2(q) >= level`, by bisection.
fn mixture_quantile(f1: &ScoreLaw, f2: &ScoreLaw, w: f64, level: f64) -> f64 {
    let mut lo = f1.0[0].min(f2.0[0]);
    let mut hi = f1.0[f1.0.len() - 1].max(f2.0[f2.0.len() - 1]);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if (1.0 - w) * f1.cdf(mid) + w * f2.cdf(mid) >= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Ideal miscoverage level per step for two negative-log-likelihood scores.
///
/// At each step the exact `(1 - alpha)` quantile of score `j` under the
/// current mixture weight is found (from `mc` Monte-Carlo draws per
/// component), and `alpha*_j = 1 - F_hat(q*)`, where `F_hat` is the
/// empirical CDF of the observed scores under `mode`.
pub fn gmm_alpha_star(
    samples: &[Point],
    weights: &[f64],
    scores: (&Gaussian2, &Gaussian2),
    components: (&Gaussian2, &Gaussian2),
    alpha: f64,
    mode: CdfMode,
    mc: usize,
    seed: u64,
) -> Result<AlphaStarTrace> {
    if samples.len() != weights.len() {
        return Err(Error::invalid("samples and weights differ in length"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha must lie in (0, 1)"));
    }
    if mc < 100 {
        return Err(Error::invalid("need at least 100 Monte-Carlo draws"));
    }
    let mut out = Vec::with_capacity(2);
    for score in [scores.0, scores.1] {
        // The same seed for both scores keeps identical scores identical.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f1 = ScoreLaw::new(score, components.0, mc, &mut rng);
        let f2 = ScoreLaw::new(score, components.1, mc, &mut rng);
        let observed: Vec<f64> = samples.iter().map(|z| score.nll(*z)).collect();
        let mut sorted: Vec<f64> = Vec::with_capacity(samples.len());
        let mut cached: Option<(f64, f64)> = None;
        let mut trace = Vec::with_capacity(samples.len());
        for (t, w) in weights.iter().enumerate() {
            let s = observed[t];
            let pos = sorted.partition_point(|v| *v <= s);
            sorted.insert(pos, s);
            if let CdfMode::Rolling(n) = mode {
                if t >= n {
                    let old = observed[t - n];
                    let pos = sorted.partition_point(|v| v.total_cmp(&old).is_lt());
                    sorted.remove(pos);
                }
            }
            let q = match cached {
                Some((cw, cq)) if cw == *w => cq,
                _ => {
                    let q = mixture_quantile(&f1, &f2, *w, 1.0 - alpha);
                    cached = Some((*w, q));
                    q
                }
            };
            let below = sorted.partition_point(|v| *v <= q);
            trace.push(1.0 - below as f64 / sorted.len() as f64);
        }
        out.push(trace);
    }
    let alpha2 = out.pop().unwrap();
    let alpha1 = out.pop().unwrap();
    Ok(AlphaStarTrace { alpha1, alpha2 })
}
