//! Online conformal prediction with adaptive polytope nonconformity scores.
//!
//! The pipeline scores each residual `y - y_hat` by its signed distance to a
//! convex polygon, tracks the conformal threshold with a bank of adaptive
//! conformal experts, and periodically refits the polygon to a
//! recency-weighted high-density region of past residuals.

pub mod adaptnc;
pub mod baselines;
pub mod density;
pub mod dtaci;
pub mod envs;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod metrics;
pub mod score;

pub use adaptnc::{AdaptncConfig, RunOutput, StepRecord};
pub use baselines::Method;
pub use density::{MckdeConfig, WeightedKde};
pub use dtaci::{DtaciConfig, ExpertBank};
pub use error::{Error, Result};
pub use geometry::{hull_to_polytope, quickhull, Hull2D, Point};
pub use metrics::RunSummary;
pub use score::{
    beta_of, empirical_quantile, region_volume, score_eval, Observation, PolytopeScore,
    PredictionRegion, RollingWindow,
};
