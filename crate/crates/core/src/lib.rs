//! Reward-functional tuning for station-time speed planning.
//!
//! The crate learns a trajectory value functional `V(ξ) = Σ_t γ_t R_θ(f_t)` from
//! expert demonstrations by ranking each expert trajectory against randomly
//! sampled siblings of the same scenario, and provides everything needed to
//! exercise that end to end at desk scale:
//!
//! * [`scenario`]: planning problems, ST-graph projection, raw features.
//! * [`sampler`]: candidate sampling, scenario suites, synthetic experts.
//! * [`valuenet`]: the shared-parameter value network with exact gradients.
//! * [`training`]: the pairwise conditional trainer and a pooled
//!   cross-entropy baseline.
//! * [`evaluation`]: online selection, suite metrics, expert-rank statistics.
//! * [`shiftdemo`]: the 2D background-shift illustration.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and plain iterators otherwise. Results are
//! bit-identical either way.

pub mod evaluation;
pub mod par;
pub mod sampler;
pub mod scenario;
pub mod seed;
pub mod shiftdemo;
pub mod training;
pub mod valuenet;

/// Number of evaluation times per trajectory.
pub const NUM_TIMES: usize = 18;
/// Number of raw features per trajectory point.
pub const NUM_FEATURES: usize = 21;
/// Hidden units in the reward encoder.
pub const NUM_HIDDEN: usize = 15;
/// Default spacing of the evaluation time grid (s).
pub const DEFAULT_DT: f64 = 0.5;

pub use evaluation::{evaluate_suite, expert_rank, select_trajectory, MetricReport, RankStats};
pub use sampler::{generate_scenario_suite, sample_trajectories, synthetic_expert, SamplerConfig};
pub use scenario::{FeatureVector, NormTable, Obstacle, PathProfile, Scenario, Trajectory};
pub use training::{pairwise_loss, train_gan_baseline, train_rcirl, Frame, TrainConfig};
pub use valuenet::{FeatureBlock, ValueModel};
