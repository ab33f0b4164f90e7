//! Polytope scores, threshold quantiles and the prediction regions they
//! induce.
//!
//! Run with `cargo run --release --example score_regions`.

use adaptnc::{PolytopeScore, PredictionRegion, RollingWindow};

fn main() {
    // A unit square around the prediction: the score is the distance past
    // the nearest violated edge, negative inside.
    let theta = PolytopeScore::square(1.0);
    let y_hat = [2.0, 3.0];
    for y in [[2.0, 3.0], [2.5, 3.0], [3.0, 3.0], [4.0, 5.0]] {
        println!("score({y:?}) = {:+.3}", theta.eval(y_hat, y));
    }

    // Thresholds come from empirical quantiles of recent scores.
    let mut window = RollingWindow::new(10).expect("window");
    for s in [-0.8, -0.4, -0.1, 0.0, 0.2, 0.3, 0.5, 0.9, 1.4, 2.0] {
        window.push(s);
    }
    for level in [0.5, 0.8, 0.9, 1.0] {
        let q = window.quantile(level).expect("quantile");
        println!(
            "level {level:.1}: q = {q:+.2}, area = {:.3}",
            theta.region_volume(q).expect("area")
        );
    }
    println!(
        "beta of score 0.4: {:.1}",
        window.beta_of(0.4).expect("beta")
    );

    // A region is the score's sublevel set around a prediction.
    let region = PredictionRegion {
        theta: theta.clone(),
        center: y_hat,
        q: 0.5,
    };
    println!(
        "region q=0.5 contains [3.4, 3.0]: {}, [3.6, 3.0]: {}, area {:.2}",
        region.contains([3.4, 3.0]),
        region.contains([3.6, 3.0]),
        region.volume().expect("area")
    );

    // Arbitrary facet rows are normalized; the set itself is unchanged.
    let triangle = PolytopeScore::new(
        vec![[0.0, -2.0], [1.0, 1.0], [-1.0, 1.0]],
        vec![2.0, 1.0, 1.0],
    )
    .expect("triangle");
    println!(
        "triangle offsets {:?}, area at q=0: {:.3}",
        triangle.offsets(),
        triangle.region_volume(0.0).expect("area")
    );
}
