use serde::{Deserialize, Serialize};

use super::SamplerError;
use crate::scenario::{channel, FeatureVector, NormTable};
use crate::valuenet::{BlockScorer, FeatureBlock};
use crate::NUM_FEATURES;

/// Hidden reward used to synthesize expert demonstrations.
///
/// ```text
/// r(f) = Σ_i linear_i · f̂_i + Σ_i quadratic_i · f̂_i²
///        - overspeed · max(0, v - v_lim)² - limit_tracking · (v - v_lim)²
///        - clearance · max(0, clearance_margin - d_collision)²
/// value = Σ_k decay^k · r(f_k)
/// ```
/// where `f̂` are features normalized with `norm_table`; the speed and
/// clearance terms use raw units. The squared hinge terms keep it outside
/// the span of the learned model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthReward {
    pub linear: Vec<f64>,
    pub quadratic: Vec<f64>,
    pub overspeed: f64,
    pub limit_tracking: f64,
    pub clearance: f64,
    /// Collision distance below which the clearance term applies (m).
    pub clearance_margin: f64,
    pub decay: f64,
    pub norm_table: NormTable,
}

impl Default for GroundTruthReward {
    fn default() -> Self {
        let mut linear = vec![0.0; NUM_FEATURES];
        let mut quadratic = vec![0.0; NUM_FEATURES];
        linear[channel::VELOCITY] = 1.0;
        linear[channel::COLLISION] = 0.4;
        linear[channel::FOLLOW_DIST] = 0.6;
        linear[channel::OVERTAKE_DIST] = 0.3;
        linear[channel::STOP_DIST] = 0.2;
        quadratic[channel::ACCEL] = -1.0;
        quadratic[channel::LATERAL_ACCEL] = -0.5;
        quadratic[channel::LATERAL_JERK] = -0.2;
        Self {
            linear,
            quadratic,
            overspeed: 4.0,
            limit_tracking: 0.0,
            clearance: 1.0,
            clearance_margin: 5.0,
            decay: 0.95,
            norm_table: NormTable::standard(),
        }
    }
}

impl GroundTruthReward {
    /// Rewards only staying close to the speed limit.
    pub fn speed_tracking(decay: f64) -> Self {
        Self {
            linear: vec![0.0; NUM_FEATURES],
            quadratic: vec![0.0; NUM_FEATURES],
            overspeed: 0.0,
            limit_tracking: 1.0,
            clearance: 0.0,
            clearance_margin: 0.0,
            decay,
            norm_table: NormTable::standard(),
        }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |m: &str| Err(SamplerError::InvalidReward(m.to_string()));
        if self.linear.len() != NUM_FEATURES || self.quadratic.len() != NUM_FEATURES {
            return bad("linear and quadratic weights need one entry per feature");
        }
        if self.norm_table.len() != NUM_FEATURES {
            return bad("norm table needs one entry per feature");
        }
        self.norm_table
            .validate()
            .map_err(|e| SamplerError::InvalidReward(e.to_string()))?;
        let weights = self
            .linear
            .iter()
            .chain(&self.quadratic)
            .chain([&self.overspeed, &self.limit_tracking, &self.clearance]);
        let mut any_nonzero = false;
        for &w in weights {
            if !w.is_finite() {
                return bad("weights must be finite");
            }
            any_nonzero |= w != 0.0;
        }
        if !any_nonzero {
            return bad("at least one weight must be nonzero");
        }
        if !(self.clearance_margin >= 0.0 && self.clearance_margin.is_finite()) {
            return bad("clearance_margin must be finite and non-negative");
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return bad("decay must lie in (0, 1]");
        }
        Ok(())
    }

    /// Whether the reward reads the jerk channel, which depends on the
    /// previous interval's acceleration.
    pub fn uses_jerk(&self) -> bool {
        self.linear[channel::JERK] != 0.0 || self.quadratic[channel::JERK] != 0.0
    }

    /// Every weight multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            linear: self.linear.iter().map(|w| w * c).collect(),
            quadratic: self.quadratic.iter().map(|w| w * c).collect(),
            overspeed: self.overspeed * c,
            limit_tracking: self.limit_tracking * c,
            clearance: self.clearance * c,
            ..self.clone()
        }
    }

    pub fn reward(&self, raw: &FeatureVector) -> f64 {
        let mut normalized = [0.0; NUM_FEATURES];
        self.norm_table.apply(raw.as_slice(), &mut normalized);
        self.reward_parts(raw.as_slice(), &normalized)
    }

    fn reward_parts(&self, raw: &[f64], normalized: &[f64]) -> f64 {
        let mut r = 0.0;
        for i in 0..NUM_FEATURES {
            let x = normalized[i];
            r += self.linear[i] * x + self.quadratic[i] * x * x;
        }
        let gap = raw[channel::VELOCITY] - raw[channel::SPEED_LIMIT];
        let over = gap.max(0.0);
        let short = (self.clearance_margin - raw[channel::COLLISION]).max(0.0);
        r - self.overspeed * over * over
            - self.limit_tracking * gap * gap
            - self.clearance * short * short
    }

    pub fn discount(&self, k: usize) -> f64 {
        self.decay.powi(k as i32)
    }

    /// Discounted value of one trajectory's raw features.
    pub fn value(&self, raw_rows: &[FeatureVector]) -> f64 {
        raw_rows
            .iter()
            .enumerate()
            .map(|(k, row)| self.discount(k) * self.reward(row))
            .sum()
    }

    /// Scores blocks that were normalized with `table`.
    pub fn scorer(&self, table: &NormTable) -> GroundTruthScorer<'_> {
        GroundTruthScorer { reward: self, table: table.clone() }
    }
}

/// Adapter that scores normalized feature blocks with the hidden reward.
pub struct GroundTruthScorer<'a> {
    reward: &'a GroundTruthReward,
    table: NormTable,
}

impl BlockScorer for GroundTruthScorer<'_> {
    fn score(&self, block: &FeatureBlock) -> f64 {
        let rows: Vec<FeatureVector> = block
            .rows()
            .map(|row| {
                let mut raw = [0.0; NUM_FEATURES];
                self.table.invert(row, &mut raw);
                FeatureVector(raw)
            })
            .collect();
        self.reward.value(&rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_reward_is_valid() {
        let gt = GroundTruthReward::default();
        gt.validate().unwrap();
        assert!(!gt.uses_jerk());
    }

    #[test]
    fn validation_rejects_degenerate_rewards() {
        let mut gt = GroundTruthReward::speed_tracking(0.9);
        gt.validate().unwrap();
        gt.limit_tracking = 0.0;
        assert!(gt.validate().is_err());
        let mut gt = GroundTruthReward::default();
        gt.decay = 0.0;
        assert!(gt.validate().is_err());
        gt.decay = 1.5;
        assert!(gt.validate().is_err());
    }

    #[test]
    fn overspeed_is_penalized_quadratically() {
        let gt = GroundTruthReward { linear: vec![0.0; 21], quadratic: vec![0.0; 21], overspeed: 2.0, clearance: 0.0, ..Default::default() };
        let mut f = FeatureVector([0.0; NUM_FEATURES]);
        f[channel::SPEED_LIMIT] = 10.0;
        f[channel::VELOCITY] = 9.0;
        assert_eq!(gt.reward(&f), 0.0);
        f[channel::VELOCITY] = 13.0;
        assert_eq!(gt.reward(&f), -18.0);
    }

    #[test]
    fn clearance_hinge() {
        let gt = GroundTruthReward {
            linear: vec![0.0; 21],
            quadratic: vec![0.0; 21],
            overspeed: 0.0,
            clearance: 0.5,
            clearance_margin: 4.0,
            ..Default::default()
        };
        let mut f = FeatureVector([0.0; NUM_FEATURES]);
        f[channel::SPEED_LIMIT] = 10.0;
        assert_eq!(gt.reward(&f), -8.0);
        f[channel::COLLISION] = 3.0;
        assert_eq!(gt.reward(&f), -0.5);
        f[channel::COLLISION] = 4.0;
        assert_eq!(gt.reward(&f), 0.0);
    }

    #[test]
    fn scorer_matches_raw_value() {
        let gt = GroundTruthReward::default();
        let table = NormTable::standard();
        let rows: Vec<FeatureVector> = (0..18)
            .map(|k| {
                let mut f = [1.0; NUM_FEATURES];
                f[channel::VELOCITY] = 5.0 + k as f64;
                f[channel::SPEED_LIMIT] = 12.0;
                FeatureVector(f)
            })
            .collect();
        let block = FeatureBlock::normalized(&rows, &table);
        let a = gt.scorer(&table).score(&block);
        let b = gt.value(&rows);
        assert!((a - b).abs() < 1e-9 * b.abs().max(1.0));
    }
}
