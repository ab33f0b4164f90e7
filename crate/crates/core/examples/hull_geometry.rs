//! Convex hulls, their facet form and inflated areas.
//!
//! Run with `cargo run --release --example hull_geometry`.

use adaptnc::geometry::{halfspace_polygon, hausdorff_distance};
use adaptnc::{hull_to_polytope, quickhull};

fn main() {
    let points = [
        [0.0, 0.0],
        [2.0, 0.0],
        [2.0, 1.0],
        [0.0, 1.0],
        [1.0, 0.5],
        [1.0, 0.0],
        [0.3, 0.7],
    ];
    let hull = quickhull(&points).expect("hull");
    println!(
        "hull vertices {:?}, area {:.3}",
        hull.vertices(),
        hull.area()
    );

    let theta = hull_to_polytope(&hull);
    for (n, b) in theta.normals().iter().zip(theta.offsets()) {
        println!("facet n = [{:+.3}, {:+.3}], b = {:.3}", n[0], n[1], b);
    }

    // Inflating every facet by q grows the rectangle to (2+2q) x (1+2q).
    for q in [-0.25, 0.0, 0.5, 1.0] {
        let poly = halfspace_polygon(theta.normals(), theta.offsets(), q).expect("clip");
        println!(
            "q = {q:+.2}: area {:.3} with {} vertices",
            poly.area,
            poly.vertices.len()
        );
    }

    let shifted: Vec<[f64; 2]> = points.iter().map(|p| [p[0] + 0.3, p[1] - 0.1]).collect();
    let other = quickhull(&shifted).expect("hull");
    println!(
        "Hausdorff distance to the shifted hull: {:.4}",
        hausdorff_distance(&hull, &other)
    );

    match quickhull(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]) {
        Ok(_) => println!("collinear points gave a hull"),
        Err(e) => println!("collinear points: {e}"),
    }
}
