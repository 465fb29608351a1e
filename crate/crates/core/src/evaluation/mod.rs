//! Online selection and the planner metric harness.

mod metrics;
mod rank;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sampler::{sample_trajectories, SamplerConfig};
use crate::scenario::{
    channel, project_obstacles, trajectory_features, Provenance, Scenario, ScenarioError, Trajectory,
};
use crate::valuenet::{FeatureBlock, ModelError, ValueModel};
use crate::NUM_FEATURES;

pub use metrics::{comparison_csv, evaluate_suite, metrics_for, Bounds, MetricReport, ScenarioRow};
pub use rank::{expert_percentile, expert_rank, rank_frames, FrameRank, RankStats, TOP_DECILE};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("empty scenario suite")]
    EmptySuite,
    #[error("no holdout frames")]
    EmptyHoldout,
    #[error("frame `{0}` is not in the holdout split")]
    NotHoldout(String),
    #[error("no candidate trajectories")]
    NoCandidates,
}

/// The selector's choice for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub trajectory: Trajectory,
    pub value: f64,
    /// Every candidate collided; the least-colliding one was returned.
    pub all_colliding: bool,
    pub n_candidates: usize,
    pub n_feasible: usize,
}

struct Scored {
    index: usize,
    value: f64,
    min_clearance: f64,
    colliding_points: usize,
}

/// Ranks `candidates` with `model` after discarding colliding ones.
///
/// Ties go to the lexicographically smaller trajectory id. When every
/// candidate collides, the one with the largest minimum clearance wins,
/// then the one with the fewest colliding points.
pub fn select_from_candidates(
    scenario: &Scenario,
    model: &ValueModel,
    candidates: &[Trajectory],
) -> Result<Selection, EvalError> {
    model.check_grid(&scenario.time_grid)?;
    if model.dims().n_features != NUM_FEATURES {
        return Err(ModelError::DimensionMismatch {
            what: "model input".into(),
            expected: NUM_FEATURES,
            got: model.dims().n_features,
        }
        .into());
    }
    if candidates.is_empty() {
        return Err(EvalError::NoCandidates);
    }
    let occupancy = project_obstacles(scenario);
    let mut scored = Vec::with_capacity(candidates.len());
    for (index, t) in candidates.iter().enumerate() {
        let raw = trajectory_features(scenario, &occupancy, t)?;
        let min_clearance =
            raw.iter().map(|f| f[channel::COLLISION]).fold(f64::INFINITY, f64::min);
        let colliding_points = raw.iter().filter(|f| f[channel::COLLISION] == 0.0).count();
        let block = FeatureBlock::normalized(&raw, &model.norm_table);
        let value = crate::valuenet::value(model, &block)?;
        scored.push(Scored { index, value, min_clearance, colliding_points });
    }
    let id = |s: &Scored| candidates[s.index].id.as_str();
    let n_feasible = scored.iter().filter(|s| s.min_clearance > 0.0).count();
    let best = if n_feasible > 0 {
        scored.iter().filter(|s| s.min_clearance > 0.0).reduce(|best, s| {
            if s.value > best.value || (s.value == best.value && id(s) < id(best)) {
                s
            } else {
                best
            }
        })
    } else {
        scored.iter().reduce(|best, s| {
            let key = |c: &Scored| (c.min_clearance, std::cmp::Reverse(c.colliding_points));
            let better = key(s).partial_cmp(&key(best)) == Some(std::cmp::Ordering::Greater)
                || (key(s) == key(best) && id(s) < id(best));
            if better {
                s
            } else {
                best
            }
        })
    }
    .expect("candidates are non-empty");
    let mut trajectory = candidates[best.index].clone();
    trajectory.provenance = Provenance::Selected;
    Ok(Selection {
        trajectory,
        value: best.value,
        all_colliding: n_feasible == 0,
        n_candidates: candidates.len(),
        n_feasible,
    })
}

/// Samples candidates with the shared sampler and selects among them.
pub fn select_trajectory(
    scenario: &Scenario,
    model: &ValueModel,
    sampler: &SamplerConfig,
) -> Result<Selection, EvalError> {
    model.check_grid(&scenario.time_grid)?;
    scenario.validate()?;
    select_from_candidates(scenario, model, &sample_trajectories(scenario, sampler))
}
