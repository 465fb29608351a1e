//! Training frames: one scenario, its expert and a query of samples.
//!
//! Frames are exchanged as JSON lines. Feature blocks are optional and hold
//! raw (un-normalized) features so the consumer applies its own table.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{sample_trajectories, synthetic_expert, DpConfig, GroundTruthReward, SamplerConfig, SamplerError};
use crate::scenario::{project_obstacles, trajectory_features, Scenario, Trajectory};
use crate::{par, seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Holdout,
}

/// Raw 18×21 feature rows for the expert and each sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBlocks {
    pub expert: Vec<Vec<f64>>,
    pub samples: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub scenario_id: String,
    pub split: Split,
    pub n_obstacles: usize,
    pub time_grid: Vec<f64>,
    pub expert: Trajectory,
    pub samples: Vec<Trajectory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<FeatureBlocks>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrameConfig {
    pub sampler: SamplerConfig,
    pub dp: DpConfig,
    /// Number of scenarios assigned to the holdout split.
    pub n_holdout: usize,
    pub include_features: bool,
    /// Seed of the `split` stream.
    pub seed: u64,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            sampler: SamplerConfig::default(),
            dp: DpConfig::default(),
            n_holdout: 50,
            include_features: true,
            seed: 0,
        }
    }
}

/// One frame per scenario, in suite order. A seeded shuffle of the suite
/// picks `n_holdout` scenarios for the holdout split.
pub fn build_frames(
    scenarios: &[Scenario],
    reward: &GroundTruthReward,
    config: &FrameConfig,
) -> Result<Vec<FrameRecord>, SamplerError> {
    config.sampler.validate()?;
    if config.n_holdout > scenarios.len() {
        return Err(SamplerError::InvalidConfig(format!(
            "n_holdout {} exceeds suite size {}",
            config.n_holdout,
            scenarios.len()
        )));
    }
    let mut order: Vec<usize> = (0..scenarios.len()).collect();
    order.shuffle(&mut seed::stream(config.seed, "split"));
    let mut split = vec![Split::Train; scenarios.len()];
    for &i in &order[..config.n_holdout] {
        split[i] = Split::Holdout;
    }

    let built = par::map_range(scenarios.len(), |i| {
        build_one(&scenarios[i], split[i], reward, config)
    });
    built.into_iter().collect()
}

fn build_one(
    scenario: &Scenario,
    split: Split,
    reward: &GroundTruthReward,
    config: &FrameConfig,
) -> Result<FrameRecord, SamplerError> {
    let expert = synthetic_expert(scenario, reward, &config.dp)?;
    let samples = sample_trajectories(scenario, &config.sampler);
    let features = if config.include_features {
        let occupancy = project_obstacles(scenario);
        let rows = |t: &Trajectory| -> Result<Vec<Vec<f64>>, SamplerError> {
            Ok(trajectory_features(scenario, &occupancy, t)?
                .into_iter()
                .map(|f| f.0.to_vec())
                .collect())
        };
        Some(FeatureBlocks {
            expert: rows(&expert)?,
            samples: samples.iter().map(rows).collect::<Result<_, _>>()?,
        })
    } else {
        None
    };
    Ok(FrameRecord {
        scenario_id: scenario.id.clone(),
        split,
        n_obstacles: scenario.obstacles.len(),
        time_grid: scenario.time_grid.clone(),
        expert,
        samples,
        features,
    })
}

pub fn write_frame_records<W: Write>(mut out: W, frames: &[FrameRecord]) -> std::io::Result<()> {
    for frame in frames {
        serde_json::to_writer(&mut out, frame)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Parses JSON lines; blank lines are skipped. Errors carry the 1-based
/// line number.
pub fn read_frame_records<R: BufRead>(input: R) -> Result<Vec<FrameRecord>, (usize, String)> {
    let mut frames = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| (i + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        frames.push(serde_json::from_str(&line).map_err(|e| (i + 1, e.to_string()))?);
    }
    Ok(frames)
}
