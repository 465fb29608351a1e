//! Frame files to normalized training frames.

use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use super::{Frame, TrainError};
use crate::sampler::{read_frame_records, FrameRecord};
use crate::scenario::{project_obstacles, trajectory_features, FeatureVector, NormTable, Scenario, Trajectory};
use crate::valuenet::FeatureBlock;
use crate::NUM_FEATURES;

/// Normalized frames sharing one time grid and one normalization table.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub time_grid: Vec<f64>,
    pub norm_table: NormTable,
    pub frames: Vec<Frame>,
    pub report: IngestReport,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub kept: usize,
    /// Frames with a constant-speed expert and no obstacles.
    pub dropped: usize,
    pub warnings: Vec<String>,
}

impl Dataset {
    pub fn split(&self, split: crate::sampler::Split) -> Vec<Frame> {
        self.frames.iter().filter(|f| f.split == split).cloned().collect()
    }
}

/// Reads a JSON-lines frame file and normalizes it with `norm_table`.
///
/// Records without precomputed features are featurized from the matching
/// scenario in `suite`.
pub fn ingest_frames(
    path: impl AsRef<Path>,
    norm_table: &NormTable,
    suite: Option<&[Scenario]>,
) -> Result<Dataset, TrainError> {
    let file = File::open(path.as_ref()).map_err(|e| TrainError::Io(e.to_string()))?;
    let records = read_frame_records(BufReader::new(file))
        .map_err(|(line, message)| TrainError::Parse { line, message })?;
    frames_from_records(&records, norm_table, suite)
}

/// Validates, filters and normalizes in-memory records.
pub fn frames_from_records(
    records: &[FrameRecord],
    norm_table: &NormTable,
    suite: Option<&[Scenario]>,
) -> Result<Dataset, TrainError> {
    norm_table.validate().map_err(|e| TrainError::Contract(e.to_string()))?;
    if norm_table.len() != NUM_FEATURES {
        return Err(TrainError::Contract(format!(
            "normalization table has {} channels, expected {NUM_FEATURES}",
            norm_table.len()
        )));
    }
    let by_id: HashMap<&str, &Scenario> =
        suite.unwrap_or(&[]).iter().map(|s| (s.id.as_str(), s)).collect();
    let mut report = IngestReport::default();
    if records.is_empty() {
        report.warnings.push("frame file holds no frames".into());
    }
    let time_grid = records.first().map(|r| r.time_grid.clone()).unwrap_or_default();
    let mut frames = Vec::with_capacity(records.len());
    for (i, record) in records.iter().enumerate() {
        if record.time_grid != time_grid {
            return Err(TrainError::Contract(format!(
                "frame {} (`{}`) has a different time grid from the first frame",
                i + 1,
                record.scenario_id
            )));
        }
        if record.samples.is_empty() {
            return Err(TrainError::Contract(format!(
                "frame `{}` has no sampled trajectories",
                record.scenario_id
            )));
        }
        if constant_speed(&record.expert) && record.n_obstacles == 0 {
            report.dropped += 1;
            continue;
        }
        let (expert, samples) = raw_blocks(record, &by_id)?;
        frames.push(Frame {
            scenario_id: record.scenario_id.clone(),
            split: record.split,
            n_obstacles: record.n_obstacles,
            expert: FeatureBlock::normalized(&expert, norm_table),
            samples: samples.iter().map(|s| FeatureBlock::normalized(s, norm_table)).collect(),
        });
    }
    report.kept = frames.len();
    for frame in &frames {
        if !frame.expert.is_finite() || frame.samples.iter().any(|b| !b.is_finite()) {
            return Err(TrainError::NonFinite { frame: frame.scenario_id.clone() });
        }
    }
    Ok(Dataset { time_grid, norm_table: norm_table.clone(), frames, report })
}

fn constant_speed(t: &Trajectory) -> bool {
    t.points.iter().all(|p| p.v == t.points[0].v)
}

type RawRows = Vec<FeatureVector>;

fn raw_blocks(
    record: &FrameRecord,
    suite: &HashMap<&str, &Scenario>,
) -> Result<(RawRows, Vec<RawRows>), TrainError> {
    let n_times = record.time_grid.len();
    if let Some(blocks) = &record.features {
        let convert = |rows: &Vec<Vec<f64>>| -> Result<RawRows, TrainError> {
            if rows.len() != n_times || rows.iter().any(|r| r.len() != NUM_FEATURES) {
                return Err(TrainError::Contract(format!(
                    "frame `{}` has a feature block that is not {n_times}×{NUM_FEATURES}",
                    record.scenario_id
                )));
            }
            Ok(rows
                .iter()
                .map(|r| {
                    let mut f = [0.0; NUM_FEATURES];
                    f.copy_from_slice(r);
                    FeatureVector(f)
                })
                .collect())
        };
        if blocks.samples.len() != record.samples.len() {
            return Err(TrainError::Contract(format!(
                "frame `{}` has {} sample blocks for {} samples",
                record.scenario_id,
                blocks.samples.len(),
                record.samples.len()
            )));
        }
        let samples = blocks.samples.iter().map(convert).collect::<Result<_, _>>()?;
        return Ok((convert(&blocks.expert)?, samples));
    }
    let scenario = suite.get(record.scenario_id.as_str()).ok_or_else(|| {
        TrainError::Contract(format!(
            "frame `{}` has no feature blocks and no matching scenario",
            record.scenario_id
        ))
    })?;
    if scenario.time_grid != record.time_grid {
        return Err(TrainError::Contract(format!(
            "frame `{}` time grid differs from its scenario",
            record.scenario_id
        )));
    }
    let occupancy = project_obstacles(scenario);
    let featurize = |t: &Trajectory| {
        trajectory_features(scenario, &occupancy, t).map_err(|e| TrainError::Contract(e.to_string()))
    };
    let samples = record.samples.iter().map(featurize).collect::<Result<_, _>>()?;
    Ok((featurize(&record.expert)?, samples))
}
