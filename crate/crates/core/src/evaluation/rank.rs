use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::par;
use crate::sampler::Split;
use crate::training::Frame;
use crate::valuenet::BlockScorer;

/// Percentile at or above which the expert counts as top decile.
pub const TOP_DECILE: f64 = 90.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRank {
    pub scenario_id: String,
    pub percentile: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankStats {
    pub n_frames: usize,
    pub top_decile_rate: f64,
    pub median_percentile: f64,
    pub mean_percentile: f64,
    pub frames: Vec<FrameRank>,
}

/// `100 · (below + ties / 2) / n_samples`: 100 when the expert beats every
/// sample, 50 when everything ties.
pub fn expert_percentile(scorer: &dyn BlockScorer, frame: &Frame) -> f64 {
    let expert = scorer.score(&frame.expert);
    let (mut below, mut ties) = (0usize, 0usize);
    for sample in &frame.samples {
        let v = scorer.score(sample);
        if v < expert {
            below += 1;
        } else if v == expert {
            ties += 1;
        }
    }
    100.0 * (below as f64 + 0.5 * ties as f64) / frame.samples.len() as f64
}

/// Rank statistics over any frames; `None` when `frames` is empty.
pub fn rank_frames<S: BlockScorer>(scorer: &S, frames: &[Frame]) -> Option<RankStats> {
    if frames.is_empty() {
        return None;
    }
    let percentiles = par::map(frames, |f| expert_percentile(scorer, f));
    let n = percentiles.len();
    let top = percentiles.iter().filter(|&&p| p >= TOP_DECILE).count();
    let mut sorted = percentiles.clone();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    Some(RankStats {
        n_frames: n,
        top_decile_rate: top as f64 / n as f64,
        median_percentile: median,
        mean_percentile: percentiles.iter().sum::<f64>() / n as f64,
        frames: frames
            .iter()
            .zip(percentiles)
            .map(|(f, percentile)| FrameRank { scenario_id: f.scenario_id.clone(), percentile })
            .collect(),
    })
}

/// Rank statistics over holdout frames; training frames are refused.
pub fn expert_rank<S: BlockScorer>(scorer: &S, holdout: &[Frame]) -> Result<RankStats, EvalError> {
    if let Some(f) = holdout.iter().find(|f| f.split != Split::Holdout) {
        return Err(EvalError::NotHoldout(f.scenario_id.clone()));
    }
    rank_frames(scorer, holdout).ok_or(EvalError::EmptyHoldout)
}
