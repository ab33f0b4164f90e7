//! Core domain types: observations, the polytope nonconformity score, the
//! rolling score window and prediction regions.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, dot, norm, sub, Point};

/// One timestep of a stream: features, true outcome and point prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub t: usize,
    pub x: Vec<f64>,
    pub y: Point,
    pub y_hat: Point,
}

impl Observation {
    pub fn residual(&self) -> Point {
        sub(self.y, self.y_hat)
    }
}

/// Facet normals `A` (unit rows) and offsets `b` of a convex polygon in
/// residual space.
///
/// The score of an outcome is `max_j A_j (y - y_hat) - b_j`, the signed
/// distance (in the units of `y`) to the nearest violated facet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolytopeScore {
    normals: Vec<Point>,
    offsets: Vec<f64>,
}

impl PolytopeScore {
    /// Builds a score from arbitrary nonzero facet rows.
    ///
    /// Each row and its offset are divided by the row norm, which leaves the
    /// set `{z : A z <= b}` unchanged. The set must be nonempty and bounded.
    pub fn new(a: Vec<Point>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::invalid(format!(
                "{} facet normals but {} offsets",
                a.len(),
                b.len()
            )));
        }
        if a.len() < 3 {
            return Err(Error::invalid("a bounded polygon needs at least 3 facets"));
        }
        let mut normals = Vec::with_capacity(a.len());
        let mut offsets = Vec::with_capacity(b.len());
        for (row, off) in a.iter().zip(&b) {
            let n = norm(*row);
            if !(n > 0.0) || !n.is_finite() || !off.is_finite() {
                return Err(Error::invalid("facet rows must be finite and nonzero"));
            }
            normals.push([row[0] / n, row[1] / n]);
            offsets.push(off / n);
        }
        let theta = PolytopeScore { normals, offsets };
        let poly = geometry::halfspace_polygon(&theta.normals, &theta.offsets, 0.0)?;
        if poly.vertices.is_empty() {
            return Err(Error::invalid("facets describe an empty set"));
        }
        Ok(theta)
    }

    /// Rows known to be unit norm and to describe a bounded hull.
    pub(crate) fn from_unit_rows(normals: Vec<Point>, offsets: Vec<f64>) -> Self {
        PolytopeScore { normals, offsets }
    }

    /// Axis-aligned square of side `2 * half` centred at the origin.
    pub fn square(half: f64) -> Self {
        PolytopeScore {
            normals: vec![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]],
            offsets: vec![half; 4],
        }
    }

    pub fn normals(&self) -> &[Point] {
        &self.normals
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// Number of facets.
    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }

    /// Score of a residual `z = y - y_hat`.
    pub fn eval_residual(&self, z: Point) -> f64 {
        self.normals
            .iter()
            .zip(&self.offsets)
            .map(|(n, b)| dot(*n, z) - b)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Score of outcome `y` against prediction `y_hat`.
    pub fn eval(&self, y_hat: Point, y: Point) -> f64 {
        self.eval_residual(sub(y, y_hat))
    }

    /// Area of `{z : A z <= b + q}`.
    ///
    /// Returns `+inf` for `q = +inf` and `0` for an empty intersection.
    pub fn region_volume(&self, q: f64) -> Result<f64> {
        if q.is_nan() {
            return Err(Error::invalid("threshold is NaN"));
        }
        let poly = geometry::halfspace_polygon(&self.normals, &self.offsets, q)?;
        if q > 0.0 && q.is_finite() && poly.vertices.len() < 3 {
            return Err(Error::DegenerateGeometry(format!(
                "inflated polygon has {} vertices at q = {q}",
                poly.vertices.len()
            )));
        }
        Ok(poly.area)
    }
}

/// Free-function form of [`PolytopeScore::eval`].
pub fn score_eval(theta: &PolytopeScore, y_hat: Point, y: Point) -> f64 {
    theta.eval(y_hat, y)
}

/// Free-function form of [`PolytopeScore::region_volume`].
pub fn region_volume(theta: &PolytopeScore, q: f64) -> Result<f64> {
    theta.region_volume(q)
}

/// Rank `ceil(level * n)` with a small slack so that levels like `1 - 0.1`
/// do not round up past an exact integer.
fn order_index(level: f64, n: usize) -> usize {
    let k = (level * n as f64 - 1e-9).ceil();
    (k.max(1.0) as usize).min(n)
}

/// The most recent `capacity` scores, kept both in arrival order and sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct RollingWindow {
    capacity: usize,
    fifo: VecDeque<f64>,
    sorted: Vec<f64>,
    theta_version: u64,
}

impl RollingWindow {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("window capacity must be positive"));
        }
        Ok(RollingWindow {
            capacity,
            fifo: VecDeque::with_capacity(capacity),
            sorted: Vec::with_capacity(capacity),
            theta_version: 0,
        })
    }

    /// Window filled with the last `capacity` entries of `scores`.
    pub fn from_scores(capacity: usize, scores: &[f64], theta_version: u64) -> Result<Self> {
        let mut w = RollingWindow::new(capacity)?;
        w.theta_version = theta_version;
        for &s in &scores[scores.len().saturating_sub(capacity)..] {
            w.push(s);
        }
        Ok(w)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.fifo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fifo.is_empty()
    }

    /// Version of the score function that produced the stored scores.
    pub fn theta_version(&self) -> u64 {
        self.theta_version
    }

    /// Scores in arrival order, oldest first.
    pub fn scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.fifo.iter().copied()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// Appends a score, evicting and returning the oldest one when full.
    pub fn push(&mut self, s: f64) -> Option<f64> {
        let evicted = if self.fifo.len() == self.capacity {
            let old = self.fifo.pop_front().expect("full window is nonempty");
            let pos = self.sorted.partition_point(|v| v.total_cmp(&old).is_lt());
            self.sorted.remove(pos);
            Some(old)
        } else {
            None
        };
        self.fifo.push_back(s);
        let pos = self.sorted.partition_point(|v| v.total_cmp(&s).is_le());
        self.sorted.insert(pos, s);
        evicted
    }

    /// Replaces every stored score, e.g. after the score function changed.
    pub fn rescore(&mut self, scores: &[f64], theta_version: u64) {
        let capacity = self.capacity;
        *self = RollingWindow::from_scores(capacity, scores, theta_version)
            .expect("capacity already validated");
    }

    /// The `ceil(level * n)`-th smallest score; `+inf` for `level >= 1` and
    /// `-inf` for `level <= 0`.
    pub fn quantile(&self, level: f64) -> Result<f64> {
        if level >= 1.0 {
            return Ok(f64::INFINITY);
        }
        if level <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        if level.is_nan() {
            return Err(Error::invalid("quantile level is NaN"));
        }
        let n = self.sorted.len();
        if n == 0 {
            return Err(Error::EmptyWindow);
        }
        Ok(self.sorted[order_index(level, n) - 1])
    }

    /// Fraction of stored scores `<= s`.
    pub fn beta_of(&self, s: f64) -> Result<f64> {
        let n = self.sorted.len();
        if n == 0 {
            return Err(Error::EmptyWindow);
        }
        let count = self.sorted.partition_point(|v| *v <= s);
        Ok(count as f64 / n as f64)
    }
}

/// Free-function form of [`RollingWindow::quantile`].
pub fn empirical_quantile(window: &RollingWindow, level: f64) -> Result<f64> {
    window.quantile(level)
}

/// Free-function form of [`RollingWindow::beta_of`].
pub fn beta_of(window: &RollingWindow, s: f64) -> Result<f64> {
    window.beta_of(s)
}

/// `{y : score(y_hat, y) <= q}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRegion {
    pub theta: PolytopeScore,
    pub center: Point,
    pub q: f64,
}

impl PredictionRegion {
    pub fn contains(&self, y: Point) -> bool {
        self.theta.eval(self.center, y) <= self.q
    }

    pub fn is_vacuous(&self) -> bool {
        self.q == f64::INFINITY
    }

    pub fn volume(&self) -> Result<f64> {
        self.theta.region_volume(self.q)
    }
}
