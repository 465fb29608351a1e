//! Candidate generation shared by offline training and online selection,
//! scenario suites, and the synthetic expert.
//!
//! Candidates are piecewise-constant acceleration profiles integrated on the
//! evaluation grid. Each scenario draws from its own RNG stream, keyed by the
//! sampler seed and the scenario id, so sampling a suite in parallel or in
//! any order gives the same trajectories.

mod expert;
mod frames;
mod reward;
mod suite;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{Provenance, Scenario, ScenarioError, Trajectory};
use crate::seed;

pub use expert::{lattice_trajectory, synthetic_expert, DpConfig};
pub use frames::{
    build_frames, read_frame_records, write_frame_records, FeatureBlocks, FrameConfig, FrameRecord,
    Split,
};
pub use reward::{GroundTruthReward, GroundTruthScorer};
pub use suite::{generate_scenario_suite, Family, SuiteConfig};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid suite configuration: {0}")]
    InvalidSuite(String),
    #[error("invalid ground-truth reward: {0}")]
    InvalidReward(String),
    #[error("scenario `{0}` is over-constrained: every lattice path collides")]
    OverConstrained(String),
    #[error("scenario `{0}`: the expert lattice needs a uniform time grid")]
    NonUniformGrid(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub n_samples: usize,
    /// Most negative acceleration drawn (m/s²).
    pub a_min: f64,
    /// Most positive acceleration drawn (m/s²).
    pub a_max: f64,
    /// Bound on the acceleration change between pieces, per second (m/s³).
    pub jerk_max: f64,
    pub seed: u64,
    /// Number of constant-acceleration pieces over the horizon.
    pub pieces: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { n_samples: 100, a_min: -5.0, a_max: 3.0, jerk_max: 8.0, seed: 0, pieces: 4 }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |m: &str| Err(SamplerError::InvalidConfig(m.to_string()));
        if self.n_samples == 0 {
            return bad("n_samples must be at least 1");
        }
        if !(self.a_min < 0.0 && 0.0 < self.a_max) {
            return bad("acceleration bounds must satisfy a_min < 0 < a_max");
        }
        if !(self.jerk_max > 0.0 && self.jerk_max.is_finite()) {
            return bad("jerk_max must be positive");
        }
        if self.pieces == 0 {
            return bad("pieces must be at least 1");
        }
        Ok(())
    }
}

fn draw_accelerations(
    rng: &mut impl Rng,
    config: &SamplerConfig,
    a_initial: f64,
    switch_dt: &[f64],
) -> Vec<f64> {
    let (lo_bound, hi_bound) = (config.a_min, config.a_max.max(config.a_min));
    let mut prev = a_initial;
    let mut out = Vec::with_capacity(config.pieces);
    for dt in switch_dt.iter().take(config.pieces) {
        let raw = if lo_bound < hi_bound { rng.random_range(lo_bound..=hi_bound) } else { lo_bound };
        let step = config.jerk_max * dt;
        let a = raw.max(prev - step).min(prev + step).max(lo_bound).min(hi_bound);
        out.push(a);
        prev = a;
    }
    out
}

/// `config.n_samples` random candidates for `scenario`.
///
/// Each candidate holds `config.pieces` accelerations over equal shares of
/// the grid intervals. Consecutive pieces differ by at most
/// `jerk_max · Δt`. Speed is clamped at zero; an interval that reaches
/// standstill integrates station only up to the stop.
pub fn sample_trajectories(scenario: &Scenario, config: &SamplerConfig) -> Vec<Trajectory> {
    let grid = &scenario.time_grid;
    let intervals = grid.len() - 1;
    let pieces = config.pieces.clamp(1, intervals);
    let config = SamplerConfig { pieces, ..*config };
    let piece_of = |k: usize| k * pieces / intervals;
    // grid step at the start of each piece
    let switch_dt: Vec<f64> = (0..pieces)
        .map(|p| {
            let k = (0..intervals).find(|&k| piece_of(k) == p).unwrap_or(0);
            grid[k + 1] - grid[k]
        })
        .collect();

    let mut rng = seed::stream(config.seed, &format!("sampler/{}", scenario.id));
    (0..config.n_samples)
        .map(|i| {
            let accels = draw_accelerations(&mut rng, &config, scenario.a0, &switch_dt);
            let mut stations = Vec::with_capacity(grid.len());
            let mut speeds = Vec::with_capacity(grid.len());
            let (mut s, mut v) = (scenario.s0_station, scenario.v0);
            stations.push(s);
            speeds.push(v);
            for k in 0..intervals {
                let dt = grid[k + 1] - grid[k];
                let a = accels[piece_of(k)];
                let v_next = v + a * dt;
                if v_next >= 0.0 {
                    s += 0.5 * (v + v_next) * dt;
                    v = v_next;
                } else {
                    // stops after v / |a| seconds
                    s += 0.5 * v * (v / -a);
                    v = 0.0;
                }
                stations.push(s);
                speeds.push(v);
            }
            Trajectory::from_profile(
                format!("{}/s{i:04}", scenario.id),
                Provenance::Sampled,
                scenario,
                &stations,
                &speeds,
            )
        })
        .collect()
}
