//! Planar convex geometry: QuickHull, hull-to-halfspace conversion, and
//! halfspace intersection by polygon clipping.
//!
//! Everything here is two-dimensional. Hulls are stored counter-clockwise
//! starting from the lowest (then leftmost) vertex so that the same point set
//! always produces the same vertex sequence.

use crate::error::{Error, Result};
use crate::score::PolytopeScore;

pub type Point = [f64; 2];

/// Relative tolerance for treating a point as lying on a hull edge.
const COLLINEAR_TOL: f64 = 1e-12;

#[inline]
pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

/// z-component of `(b - o) x (c - o)`; positive when `o, b, c` turn left.
#[inline]
pub(crate) fn cross(o: Point, b: Point, c: Point) -> f64 {
    (b[0] - o[0]) * (c[1] - o[1]) - (b[1] - o[1]) * (c[0] - o[0])
}

/// Convex hull of a planar point set.
#[derive(Debug, Clone, PartialEq)]
pub struct Hull2D {
    vertices: Vec<Point>,
}

impl Hull2D {
    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices)
    }

    /// Signed distance from `p` to the hull boundary: negative inside.
    pub fn signed_distance(&self, p: Point) -> f64 {
        let n = self.vertices.len();
        let mut inside_gap = f64::NEG_INFINITY;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let e = sub(b, a);
            let len = norm(e);
            // outward normal of a CCW edge
            let d = (e[1] * (p[0] - a[0]) - e[0] * (p[1] - a[1])) / len;
            inside_gap = inside_gap.max(d);
        }
        if inside_gap <= 0.0 {
            return inside_gap;
        }
        self.distance_to_boundary(p)
    }

    fn distance_to_boundary(&self, p: Point) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| segment_distance(p, self.vertices[i], self.vertices[(i + 1) % n]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Euclidean distance from `p` to the hull as a filled region (0 inside).
    pub fn distance(&self, p: Point) -> f64 {
        self.signed_distance(p).max(0.0)
    }
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let t = if len2 > 0.0 {
        (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    norm(sub(p, [a[0] + t * ab[0], a[1] + t * ab[1]]))
}

/// Hausdorff distance between two filled convex polygons.
///
/// For convex bodies the farthest point of one body from the other is a
/// vertex, so checking vertices of both hulls is exact.
pub fn hausdorff_distance(a: &Hull2D, b: &Hull2D) -> f64 {
    let ab = a
        .vertices
        .iter()
        .map(|&v| b.distance(v))
        .fold(0.0, f64::max);
    let ba = b
        .vertices
        .iter()
        .map(|&v| a.distance(v))
        .fold(0.0, f64::max);
    ab.max(ba)
}

/// Shoelace area of a simple polygon (absolute value).
pub fn polygon_area(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    if n < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        twice += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * twice.abs()
}

enum Task<'a> {
    Emit(Point),
    Segment(Point, Point, Vec<&'a Point>),
}

/// QuickHull on a planar point set.
///
/// Points within a relative `1e-12` of a hull edge are treated as lying on
/// it and dropped, so the result is strictly convex.
pub fn quickhull(points: &[Point]) -> Result<Hull2D> {
    if points.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "quickhull needs at least 3 points, got {}",
            points.len()
        )));
    }
    if points
        .iter()
        .any(|p| !p[0].is_finite() || !p[1].is_finite())
    {
        return Err(Error::DegenerateInput("non-finite point".into()));
    }

    let cmp_xy = |a: &&Point, b: &&Point| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1]));
    let left = *points.iter().min_by(cmp_xy).unwrap();
    let right = *points.iter().max_by(cmp_xy).unwrap();

    let (mut min, mut max) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for k in 0..2 {
            min[k] = min[k].min(p[k]);
            max[k] = max[k].max(p[k]);
        }
    }
    let extent = norm(sub(max, min));
    if extent == 0.0 {
        return Err(Error::DegenerateInput("all points coincide".into()));
    }
    let tol = COLLINEAR_TOL * extent;

    // Points strictly to the right of left->right form the lower chain.
    let base = norm(sub(right, left));
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for p in points {
        let d = cross(left, right, *p) / base;
        if d > tol {
            upper.push(p);
        } else if d < -tol {
            lower.push(p);
        }
    }

    let mut hull = Vec::new();
    let mut stack = vec![
        Task::Segment(right, left, upper),
        Task::Emit(right),
        Task::Segment(left, right, lower),
        Task::Emit(left),
    ];
    while let Some(task) = stack.pop() {
        match task {
            Task::Emit(p) => hull.push(p),
            // Hull vertices strictly right of a->b, in order from a to b.
            Task::Segment(a, b, set) => {
                if set.is_empty() {
                    continue;
                }
                let len = norm(sub(b, a));
                let far = **set
                    .iter()
                    .max_by(|p, q| cross(b, a, ***p).total_cmp(&cross(b, a, ***q)))
                    .unwrap();
                let mut first = Vec::new();
                let mut second = Vec::new();
                for p in set {
                    if cross(far, a, *p) / len.max(norm(sub(far, a))) > tol {
                        first.push(p);
                    } else if cross(b, far, *p) / len.max(norm(sub(b, far))) > tol {
                        second.push(p);
                    }
                }
                stack.push(Task::Segment(far, b, second));
                stack.push(Task::Emit(far));
                stack.push(Task::Segment(a, far, first));
            }
        }
    }

    let hull = drop_collinear(hull, tol);
    if hull.len() < 3 {
        return Err(Error::DegenerateInput("points are collinear".into()));
    }
    Ok(Hull2D {
        vertices: rotate_to_lowest(hull),
    })
}

fn drop_collinear(mut hull: Vec<Point>, tol: f64) -> Vec<Point> {
    loop {
        let n = hull.len();
        if n < 3 {
            return hull;
        }
        let mut keep = Vec::with_capacity(n);
        for i in 0..n {
            let prev = hull[(i + n - 1) % n];
            let cur = hull[i];
            let next = hull[(i + 1) % n];
            let base = norm(sub(next, prev));
            if base == 0.0 || cross(prev, next, cur) / base < -tol {
                keep.push(cur);
            }
        }
        if keep.len() == n {
            return hull;
        }
        hull = keep;
    }
}

fn rotate_to_lowest(mut hull: Vec<Point>) -> Vec<Point> {
    let start = hull
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a[1].total_cmp(&b[1]).then(a[0].total_cmp(&b[0])))
        .map(|(i, _)| i)
        .unwrap_or(0);
    hull.rotate_left(start);
    hull
}

/// One facet per hull edge: outward unit normal and offset `n . v`.
pub fn hull_to_polytope(hull: &Hull2D) -> PolytopeScore {
    let v = hull.vertices();
    let n = v.len();
    let mut normals = Vec::with_capacity(n);
    let mut offsets = Vec::with_capacity(n);
    for i in 0..n {
        let a = v[i];
        let b = v[(i + 1) % n];
        let e = sub(b, a);
        let len = norm(e);
        let normal = [e[1] / len, -e[0] / len];
        normals.push(normal);
        offsets.push(dot(normal, a));
    }
    PolytopeScore::from_unit_rows(normals, offsets)
}

/// Polygon obtained by intersecting halfspaces, with its area.
#[derive(Debug, Clone, PartialEq)]
pub struct ClippedPolygon {
    pub vertices: Vec<Point>,
    pub area: f64,
}

/// Intersection of `{z : n_j . z <= b_j + q}` computed by clipping a large
/// bounding square with each halfspace in turn.
///
/// Rows of `normals` must have unit norm. The square extends `1e4` times the
/// largest inflated offset (at least 1) in every direction, which is far
/// outside any bounded region these facets can describe.
pub fn halfspace_polygon(normals: &[Point], offsets: &[f64], q: f64) -> Result<ClippedPolygon> {
    if normals.len() != offsets.len() {
        return Err(Error::invalid("normals and offsets differ in length"));
    }
    if q == f64::NEG_INFINITY {
        return Ok(ClippedPolygon {
            vertices: Vec::new(),
            area: 0.0,
        });
    }
    if q == f64::INFINITY {
        return Ok(ClippedPolygon {
            vertices: Vec::new(),
            area: f64::INFINITY,
        });
    }
    let scale = offsets
        .iter()
        .map(|b| (b + q).abs())
        .fold(1.0_f64, f64::max);
    let half = 1e4 * scale;
    let poly = clip_all(normals, offsets, q, [-half, -half], [half, half]);
    let touches_box = poly
        .iter()
        .any(|p| p[0].abs() >= half * (1.0 - 1e-12) || p[1].abs() >= half * (1.0 - 1e-12));
    if touches_box {
        return Err(Error::DegenerateGeometry(
            "halfspace intersection is unbounded".into(),
        ));
    }
    if poly.is_empty() {
        return Ok(ClippedPolygon {
            vertices: poly,
            area: 0.0,
        });
    }
    // Intersections against the far box edges lose digits in proportion to
    // the box size; clipping again from a snug box restores them.
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &poly {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let pad = 0.5 * (hi[0] - lo[0]).max(hi[1] - lo[1]) + 1e-9 * scale;
    let poly = clip_all(
        normals,
        offsets,
        q,
        [lo[0] - pad, lo[1] - pad],
        [hi[0] + pad, hi[1] + pad],
    );
    let area = polygon_area(&poly);
    Ok(ClippedPolygon {
        vertices: poly,
        area,
    })
}

fn clip_all(normals: &[Point], offsets: &[f64], q: f64, lo: Point, hi: Point) -> Vec<Point> {
    let mut poly = vec![lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]];
    for (n, b) in normals.iter().zip(offsets) {
        poly = clip(&poly, *n, b + q);
        if poly.is_empty() {
            break;
        }
    }
    poly
}

/// Sutherland–Hodgman step against `n . z <= c`.
fn clip(poly: &[Point], n: Point, c: f64) -> Vec<Point> {
    let m = poly.len();
    let mut out = Vec::with_capacity(m + 1);
    for i in 0..m {
        let cur = poly[i];
        let next = poly[(i + 1) % m];
        let dc = dot(n, cur) - c;
        let dn = dot(n, next) - c;
        if dc <= 0.0 {
            out.push(cur);
        }
        if (dc < 0.0 && dn > 0.0) || (dc > 0.0 && dn < 0.0) {
            let t = dc / (dc - dn);
            out.push([
                cur[0] + t * (next[0] - cur[0]),
                cur[1] + t * (next[1] - cur[1]),
            ]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square_hull() -> Hull2D {
        quickhull(&[
            [-0.5, -0.5],
            [0.5, -0.5],
            [0.5, 0.5],
            [-0.5, 0.5],
            [0.0, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn square_with_interior_point() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]];
        let hull = quickhull(&pts).unwrap();
        assert_eq!(
            hull.vertices(),
            &[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
        );
    }

    #[test]
    fn triangle_is_its_own_hull() {
        let pts = [[2.0, 3.0], [0.0, 0.0], [4.0, 1.0]];
        let hull = quickhull(&pts).unwrap();
        assert_eq!(hull.vertices(), &[[0.0, 0.0], [4.0, 1.0], [2.0, 3.0]]);
    }

    #[test]
    fn collinear_and_duplicate_inputs_are_rejected() {
        assert!(matches!(
            quickhull(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(
            quickhull(&[[1.0, 1.0]; 5]),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(
            quickhull(&[[0.0, 0.0], [1.0, 0.0]]),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn points_on_edges_are_dropped() {
        let pts = [
            [0.0, 0.0],
            [0.5, 0.0],
            [1.0, 0.0],
            [1.0, 0.5],
            [1.0, 1.0],
            [0.0, 1.0],
            [0.0, 0.5],
        ];
        assert_eq!(quickhull(&pts).unwrap().len(), 4);
    }

    #[test]
    fn unit_square_facets() {
        let theta = hull_to_polytope(&unit_square_hull());
        assert_eq!(theta.len(), 4);
        for (n, b) in theta.normals().iter().zip(theta.offsets()) {
            assert!((norm(*n) - 1.0).abs() < 1e-15);
            assert!(n[0].abs() == 1.0 || n[1].abs() == 1.0);
            assert!((b - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn equilateral_triangle_offsets_equal_inradius() {
        let s = 2.0_f64;
        let h = s * 3f64.sqrt() / 2.0;
        // centroid at origin
        let pts = [
            [-s / 2.0, -h / 3.0],
            [s / 2.0, -h / 3.0],
            [0.0, 2.0 * h / 3.0],
        ];
        let theta = hull_to_polytope(&quickhull(&pts).unwrap());
        let inradius = s / (2.0 * 3f64.sqrt());
        assert_eq!(theta.len(), 3);
        for b in theta.offsets() {
            assert!((b - inradius).abs() < 1e-12);
        }
    }

    #[test]
    fn vertices_are_tight_on_two_facets() {
        let hull = quickhull(&[[0.0, 0.0], [3.0, 0.5], [2.0, 2.0], [-1.0, 1.5]]).unwrap();
        let theta = hull_to_polytope(&hull);
        for v in hull.vertices() {
            let tight = theta
                .normals()
                .iter()
                .zip(theta.offsets())
                .filter(|(n, b)| {
                    let slack = dot(**n, *v) - *b;
                    assert!(slack <= 1e-12);
                    slack.abs() < 1e-12
                })
                .count();
            assert_eq!(tight, 2);
        }
    }

    #[test]
    fn square_halfspace_areas() {
        let theta = hull_to_polytope(&unit_square_hull());
        let area = |q| {
            halfspace_polygon(theta.normals(), theta.offsets(), q)
                .unwrap()
                .area
        };
        assert!((area(0.0) - 1.0).abs() < 1e-12);
        assert!((area(0.25) - 2.25).abs() < 1e-12);
        assert_eq!(area(-0.75), 0.0);
        assert_eq!(area(f64::INFINITY), f64::INFINITY);
        assert_eq!(area(f64::NEG_INFINITY), 0.0);
    }

    #[test]
    fn unbounded_facets_are_reported() {
        let normals = [[1.0, 0.0], [0.0, 1.0]];
        assert!(matches!(
            halfspace_polygon(&normals, &[1.0, 1.0], 0.0),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn hausdorff_of_nested_squares() {
        let a = unit_square_hull();
        let b = quickhull(&[[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]).unwrap();
        let d = hausdorff_distance(&a, &b);
        assert!((d - 0.5 * 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(hausdorff_distance(&a, &a), 0.0);
    }
}
