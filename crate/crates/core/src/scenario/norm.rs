use serde::{Deserialize, Serialize};

use super::{FeatureVector, ScenarioError};
use crate::NUM_FEATURES;

/// Per-channel affine normalization `(raw - center) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormTable {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

impl NormTable {
    pub fn identity(n: usize) -> Self {
        Self { center: vec![0.0; n], scale: vec![1.0; n] }
    }

    /// Fixed table sized to the typical ranges of each raw channel.
    pub fn standard() -> Self {
        #[rustfmt::skip]
        let pairs: [(f64, f64); NUM_FEATURES] = [
            (0.0, 1.0),     // l
            (0.0, 0.1),     // dl
            (0.0, 0.01),    // ddl
            (0.0, 0.01),    // curvature
            (60.0, 60.0),   // station
            (4.25, 2.5),    // time
            (10.0, 5.0),    // velocity
            (12.0, 5.0),    // speed limit
            (0.0, 2.0),     // acceleration
            (0.0, 4.0),     // jerk
            (100.0, 100.0), // collision distance
            (100.0, 100.0), // follow distance
            (0.0, 5.0),     // follow speed
            (100.0, 100.0), // overtake distance
            (0.0, 5.0),     // overtake speed
            (100.0, 100.0), // stop distance
            (100.0, 100.0), // virtual distance
            (100.0, 100.0), // nudge lateral
            (0.0, 5.0),     // nudge speed
            (0.0, 2.0),     // lateral acceleration
            (0.0, 3.0),     // lateral jerk
        ];
        Self {
            center: pairs.iter().map(|p| p.0).collect(),
            scale: pairs.iter().map(|p| p.1).collect(),
        }
    }

    /// Mean/standard-deviation table fitted to `rows`; channels with
    /// (near) zero spread get scale 1.
    pub fn fit(rows: &[FeatureVector]) -> Self {
        let n = rows.len().max(1) as f64;
        let mut center = vec![0.0; NUM_FEATURES];
        for row in rows {
            for (c, x) in center.iter_mut().zip(row.as_slice()) {
                *c += x;
            }
        }
        center.iter_mut().for_each(|c| *c /= n);
        let mut scale = vec![0.0; NUM_FEATURES];
        for row in rows {
            for ((s, x), c) in scale.iter_mut().zip(row.as_slice()).zip(&center) {
                *s += (x - c) * (x - c);
            }
        }
        for s in scale.iter_mut() {
            let sd = (*s / n).sqrt();
            *s = if sd > 1e-9 { sd } else { 1.0 };
        }
        Self { center, scale }
    }

    pub fn len(&self) -> usize {
        self.center.len()
    }

    pub fn is_empty(&self) -> bool {
        self.center.is_empty()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.scale.len() != self.center.len() {
            return Err(ScenarioError::NormDimension {
                expected: self.center.len(),
                got: self.scale.len(),
            });
        }
        for (channel, &scale) in self.scale.iter().enumerate() {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(ScenarioError::NonPositiveScale { channel, scale });
            }
        }
        if self.center.iter().any(|c| !c.is_finite()) {
            return Err(ScenarioError::NormDimension { expected: 0, got: 0 });
        }
        Ok(())
    }

    /// Normalizes `raw` into `out`; both must match the table length.
    pub fn apply(&self, raw: &[f64], out: &mut [f64]) {
        for i in 0..self.center.len() {
            out[i] = (raw[i] - self.center[i]) / self.scale[i];
        }
    }

    pub fn invert(&self, normalized: &[f64], out: &mut [f64]) {
        for i in 0..self.center.len() {
            out[i] = normalized[i] * self.scale[i] + self.center[i];
        }
    }
}

/// `out[i] = (raw[i] - center[i]) / scale[i]`.
pub fn normalize_features(
    raw: &FeatureVector,
    table: &NormTable,
) -> Result<FeatureVector, ScenarioError> {
    if table.len() != NUM_FEATURES {
        return Err(ScenarioError::NormDimension { expected: NUM_FEATURES, got: table.len() });
    }
    table.validate()?;
    let mut out = [0.0; NUM_FEATURES];
    table.apply(raw.as_slice(), &mut out);
    Ok(FeatureVector(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arbitrary_row() -> FeatureVector {
        let mut f = [0.0; NUM_FEATURES];
        for (i, x) in f.iter_mut().enumerate() {
            *x = (i as f64 * 1.7).sin() * 30.0 + i as f64;
        }
        FeatureVector(f)
    }

    #[test]
    fn centering_identity() {
        let table = NormTable::standard();
        let raw = FeatureVector(table.center.clone().try_into().unwrap());
        let out = normalize_features(&raw, &table).unwrap();
        assert!(out.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn identity_table_is_identity() {
        let raw = arbitrary_row();
        let out = normalize_features(&raw, &NormTable::identity(NUM_FEATURES)).unwrap();
        assert_eq!(out, raw);
    }

    #[test]
    fn single_channel_arithmetic() {
        let mut table = NormTable::identity(NUM_FEATURES);
        table.center[6] = 10.0;
        table.scale[6] = 5.0;
        let mut raw = arbitrary_row();
        raw[6] = 15.0;
        assert_eq!(normalize_features(&raw, &table).unwrap()[6], 1.0);
    }

    #[test]
    fn rejects_non_positive_scale() {
        let mut table = NormTable::standard();
        table.scale[3] = 0.0;
        assert_eq!(
            normalize_features(&arbitrary_row(), &table),
            Err(ScenarioError::NonPositiveScale { channel: 3, scale: 0.0 })
        );
        table.scale[3] = -1.0;
        assert!(normalize_features(&arbitrary_row(), &table).is_err());
    }

    #[test]
    fn fit_centers_and_scales() {
        let rows: Vec<FeatureVector> = (0..10)
            .map(|i| {
                let mut f = [5.0; NUM_FEATURES];
                f[0] = i as f64;
                FeatureVector(f)
            })
            .collect();
        let table = NormTable::fit(&rows);
        assert!((table.center[0] - 4.5).abs() < 1e-12);
        assert_eq!(table.center[1], 5.0);
        assert_eq!(table.scale[1], 1.0);
        table.validate().unwrap();
    }

    proptest! {
        #[test]
        fn normalization_is_invertible(
            raw in proptest::array::uniform21(-500.0f64..500.0),
            centers in proptest::array::uniform21(-50.0f64..50.0),
            scales in proptest::array::uniform21(0.01f64..100.0),
        ) {
            let table = NormTable { center: centers.to_vec(), scale: scales.to_vec() };
            let out = normalize_features(&FeatureVector(raw), &table).unwrap();
            let mut back = [0.0; NUM_FEATURES];
            table.invert(out.as_slice(), &mut back);
            for i in 0..NUM_FEATURES {
                prop_assert!((back[i] - raw[i]).abs() <= 1e-9 * (1.0 + raw[i].abs()));
            }
        }
    }
}
