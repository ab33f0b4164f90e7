//! Weighted Gaussian kernel density estimation and Monte-Carlo extraction of
//! high-density regions.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Smallest kernel scale used when the data are (nearly) degenerate, in the
/// units of the data.
const MIN_BANDWIDTH: f64 = 1e-6;

/// Squared whitened distances are capped here; the kernel term is then below
/// `e^-350` of its peak and contributes nothing representable.
const CUTOFF_SQ: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthMethod {
    #[default]
    Scott,
    Silverman,
}

/// Shape of the kernel covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KernelShape {
    /// `h^2 I`.
    Isotropic,
    /// `h^2` times the weighted covariance of the data.
    #[default]
    DataCovariance,
}

/// Bandwidth factor for `n` samples in `d` dimensions, times `factor`.
pub fn bandwidth(n: usize, d: usize, method: BandwidthMethod, factor: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid(format!("bandwidth needs n >= 2, got {n}")));
    }
    if d == 0 {
        return Err(Error::invalid("bandwidth needs d >= 1"));
    }
    if !(factor > 0.0) {
        return Err(Error::invalid("bandwidth factor must be positive"));
    }
    Ok(bandwidth_real(n as f64, d, method) * factor)
}

fn bandwidth_real(n: f64, d: usize, method: BandwidthMethod) -> f64 {
    let d = d as f64;
    let exponent = -1.0 / (d + 4.0);
    match method {
        BandwidthMethod::Scott => n.powf(exponent),
        BandwidthMethod::Silverman => (n * (d + 2.0) / 4.0).powf(exponent),
    }
}

/// Gaussian mixture with one kernel per data point and a shared covariance
/// `L L^T`.
#[derive(Debug, Clone)]
pub struct WeightedKde {
    points: Vec<Point>,
    weights: Vec<f64>,
    /// Lower-triangular Cholesky factor `[l11, l21, l22]`.
    chol: [f64; 3],
    /// Data points mapped through `L^-1`, split by coordinate.
    white_x: Vec<f64>,
    white_y: Vec<f64>,
    /// `1 / (2 pi det L)`.
    norm: f64,
}

impl WeightedKde {
    /// Isotropic kernel of scale `h`.
    pub fn isotropic(points: Vec<Point>, weights: Vec<f64>, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::invalid("bandwidth must be positive and finite"));
        }
        WeightedKde::with_covariance(points, weights, [h * h, 0.0, h * h])
    }

    /// Kernel covariance `[[c00, c01], [c01, c11]]` given as `[c00, c01, c11]`.
    pub fn with_covariance(points: Vec<Point>, weights: Vec<f64>, cov: [f64; 3]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("kde needs at least one point"));
        }
        if points.len() != weights.len() {
            return Err(Error::invalid("points and weights differ in length"));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("weights sum to zero"));
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();

        let l11 = cov[0].sqrt();
        let l21 = cov[1] / l11;
        let l22 = (cov[2] - l21 * l21).sqrt();
        if !(l11 > 0.0) || !(l22 > 0.0) || !l11.is_finite() || !l22.is_finite() {
            return Err(Error::invalid("kernel covariance is not positive definite"));
        }
        let chol = [l11, l21, l22];
        let (white_x, white_y) = points
            .iter()
            .map(|p| whiten(chol, *p))
            .map(|u| (u[0], u[1]))
            .unzip();
        Ok(WeightedKde {
            points,
            weights,
            chol,
            white_x,
            white_y,
            norm: 1.0 / (2.0 * std::f64::consts::PI * l11 * l22),
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Normalized weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Kernel covariance as `[c00, c01, c11]`.
    pub fn kernel_covariance(&self) -> [f64; 3] {
        let [l11, l21, l22] = self.chol;
        [l11 * l11, l11 * l21, l21 * l21 + l22 * l22]
    }

    /// Density at `z`.
    pub fn eval(&self, z: Point) -> f64 {
        let u = whiten(self.chol, z);
        #[cfg(target_arch = "x86_64")]
        {
            if std::is_x86_feature_detected!("avx2") && std::is_x86_feature_detected!("fma") {
                // SAFETY: the required CPU features were detected at runtime.
                return unsafe { self.kernel_sum_avx2(u) } * self.norm;
            }
        }
        self.kernel_sum(u) * self.norm
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2,fma")]
    unsafe fn kernel_sum_avx2(&self, u: Point) -> f64 {
        self.kernel_sum(u)
    }

    #[inline(always)]
    fn kernel_sum(&self, u: Point) -> f64 {
        // independent lanes let the compiler vectorize the sum
        const LANES: usize = 8;
        let mut acc = [0.0; LANES];
        let xs = self.white_x.chunks_exact(LANES);
        let ys = self.white_y.chunks_exact(LANES);
        let ws = self.weights.chunks_exact(LANES);
        let (rx, ry, rw) = (xs.remainder(), ys.remainder(), ws.remainder());
        for ((cx, cy), cw) in xs.zip(ys).zip(ws) {
            for l in 0..LANES {
                let dx = u[0] - cx[l];
                let dy = u[1] - cy[l];
                let r2 = (dx * dx + dy * dy).min(CUTOFF_SQ);
                acc[l] += cw[l] * exp_neg_half(r2);
            }
        }
        let mut total: f64 = acc.iter().sum();
        for ((px, py), w) in rx.iter().zip(ry).zip(rw) {
            let dx = u[0] - px;
            let dy = u[1] - py;
            total += w * exp_neg_half((dx * dx + dy * dy).min(CUTOFF_SQ));
        }
        total
    }

    /// `m` draws: a data point chosen by weight plus kernel noise.
    pub fn sample(&self, m: usize, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let index = WeightedIndex::new(&self.weights).expect("weights validated on construction");
        let [l11, l21, l22] = self.chol;
        (0..m)
            .map(|_| {
                let p = self.points[index.sample(&mut rng)];
                let e0: f64 = StandardNormal.sample(&mut rng);
                let e1: f64 = StandardNormal.sample(&mut rng);
                [p[0] + l11 * e0, p[1] + l21 * e0 + l22 * e1]
            })
            .collect()
    }
}

/// `exp(-r2 / 2)` for `0 <= r2 <= CUTOFF_SQ`, branch-free so the kernel sum
/// vectorizes. Relative error is below `2e-13`.
#[inline(always)]
fn exp_neg_half(r2: f64) -> f64 {
    const SHIFT: f64 = 6755399441055744.0; // 1.5 * 2^52
    let x = -0.5 * r2 * std::f64::consts::LOG2_E;
    // round to nearest integer n; the low mantissa bits of `shifted` hold n
    let shifted = x + SHIFT;
    let n = shifted - SHIFT;
    let f = (x - n) * std::f64::consts::LN_2; // |f| <= ln(2)/2
                                              // Taylor series of e^f to degree 11
    let mut p = 1.0 / 39916800.0;
    p = p * f + 1.0 / 3628800.0;
    p = p * f + 1.0 / 362880.0;
    p = p * f + 1.0 / 40320.0;
    p = p * f + 1.0 / 5040.0;
    p = p * f + 1.0 / 720.0;
    p = p * f + 1.0 / 120.0;
    p = p * f + 1.0 / 24.0;
    p = p * f + 1.0 / 6.0;
    p = p * f + 0.5;
    p = p * f + 1.0;
    p = p * f + 1.0;
    let bits = shifted.to_bits().wrapping_add(1023) << 52;
    p * f64::from_bits(bits)
}

fn whiten(chol: [f64; 3], z: Point) -> Point {
    let [l11, l21, l22] = chol;
    let u0 = z[0] / l11;
    [u0, (z[1] - l21 * u0) / l22]
}

/// Free-function form of [`WeightedKde::eval`].
pub fn kde_eval(kde: &WeightedKde, z: Point) -> f64 {
    kde.eval(z)
}

/// Free-function form of [`WeightedKde::sample`].
pub fn kde_sample(kde: &WeightedKde, m: usize, seed: u64) -> Vec<Point> {
    kde.sample(m, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MckdeConfig {
    /// Monte-Carlo draws per fit.
    pub samples: usize,
    pub bandwidth: BandwidthMethod,
    /// Multiplier applied to the bandwidth rule.
    pub factor: f64,
    pub kernel: KernelShape,
}

impl Default for MckdeConfig {
    fn default() -> Self {
        MckdeConfig {
            samples: 4000,
            bandwidth: BandwidthMethod::Scott,
            factor: 1.0,
            kernel: KernelShape::DataCovariance,
        }
    }
}

impl MckdeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 100 {
            return Err(Error::config("mckde.samples", "must be at least 100"));
        }
        if !(self.factor > 0.0) || !self.factor.is_finite() {
            return Err(Error::config("mckde.factor", "must be positive"));
        }
        Ok(())
    }
}

/// Monte-Carlo draws whose estimated density is at least `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct HdrSample {
    pub points: Vec<Point>,
    pub tau: f64,
    /// Number of draws before thresholding.
    pub drawn: usize,
}

/// Builds the kernel estimate used by [`mckde_hdr`].
///
/// For [`KernelShape::DataCovariance`] the bandwidth rule is evaluated at the
/// effective sample size `(sum w)^2 / sum w^2`, so heavily concentrated
/// weights widen the kernel the same way a smaller sample would.
pub fn fit_kde(points: &[Point], weights: &[f64], config: &MckdeConfig) -> Result<WeightedKde> {
    if points.len() < 2 {
        return Err(Error::invalid(format!(
            "mckde needs at least 2 points, got {}",
            points.len()
        )));
    }
    if points.len() != weights.len() {
        return Err(Error::invalid("points and weights differ in length"));
    }
    match config.kernel {
        KernelShape::Isotropic => {
            let h = bandwidth(points.len(), 2, config.bandwidth, config.factor)?;
            WeightedKde::isotropic(points.to_vec(), weights.to_vec(), h.max(MIN_BANDWIDTH))
        }
        KernelShape::DataCovariance => {
            let total: f64 = weights.iter().sum();
            let sq: f64 = weights.iter().map(|w| w * w).sum();
            if !(total > 0.0) {
                return Err(Error::invalid("weights sum to zero"));
            }
            let n_eff = (total * total / sq).max(2.0);
            let h = bandwidth_real(n_eff, 2, config.bandwidth) * config.factor;
            let c = weighted_covariance(points, weights);
            let floor = MIN_BANDWIDTH * MIN_BANDWIDTH;
            let trace = c[0] + c[2];
            // Keep the kernel nonsingular when the data are (nearly) collinear.
            let ridge = (1e-9 * trace).max(floor / (h * h));
            let cov = [h * h * (c[0] + ridge), h * h * c[1], h * h * (c[2] + ridge)];
            WeightedKde::with_covariance(points.to_vec(), weights.to_vec(), cov)
        }
    }
}

/// Weighted covariance `[c00, c01, c11]` (weights need not be normalized).
pub fn weighted_covariance(points: &[Point], weights: &[f64]) -> [f64; 3] {
    let total: f64 = weights.iter().sum();
    let mut mean = [0.0; 2];
    for (p, w) in points.iter().zip(weights) {
        mean[0] += w * p[0];
        mean[1] += w * p[1];
    }
    mean[0] /= total;
    mean[1] /= total;
    let mut c = [0.0; 3];
    for (p, w) in points.iter().zip(weights) {
        let dx = p[0] - mean[0];
        let dy = p[1] - mean[1];
        c[0] += w * dx * dx;
        c[1] += w * dx * dy;
        c[2] += w * dy * dy;
    }
    [c[0] / total, c[1] / total, c[2] / total]
}

/// Draws `config.samples` points from the weighted KDE and keeps those whose
/// density reaches the lower `alpha` order statistic of all drawn densities.
pub fn mckde_hdr(
    points: &[Point],
    weights: &[f64],
    alpha: f64,
    config: &MckdeConfig,
    seed: u64,
) -> Result<HdrSample> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if config.samples < 100 {
        return Err(Error::invalid("mckde needs at least 100 samples"));
    }
    let kde = fit_kde(points, weights, config)?;
    let m = config.samples;
    let draws = kde.sample(m, seed);
    let dens: Vec<f64> = draws.par_iter().map(|z| kde.eval(*z)).collect();
    let mut sorted = dens.clone();
    sorted.sort_by(f64::total_cmp);
    let k = ((alpha * m as f64).floor() as usize).max(1);
    let tau = sorted[k - 1];
    let points = draws
        .into_iter()
        .zip(dens)
        .filter(|(_, f)| *f >= tau)
        .map(|(p, _)| p)
        .collect();
    Ok(HdrSample {
        points,
        tau,
        drawn: m,
    })
}
