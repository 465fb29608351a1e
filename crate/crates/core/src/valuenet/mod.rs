//! The value network: a per-time reward encoder with shared parameters and a
//! learnable weight per evaluation time.
//!
//! ```text
//! R_θ(f) = w2 · act(W1 f + b1) + b2        act = leaky rectifier
//! V(ξ)   = Σ_k γ_k R_θ(f_k)
//! ```
//!
//! Parameters are addressed through one flat vector laid out as
//! `W1 (row-major) | b1 | w2 | b2 | γ`, which is also the layout of every
//! gradient returned here.

mod io;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{FeatureVector, NormTable};
use crate::{seed, NUM_FEATURES, NUM_HIDDEN, NUM_TIMES};

pub use io::{load_model, save_model, FORMAT_VERSION};

/// Default hidden-unit leak.
pub const DEFAULT_SLOPE: f64 = 0.05;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{what}: expected {expected} entries, got {got}")]
    DimensionMismatch { what: String, expected: usize, got: usize },
    #[error("non-finite value in {what}")]
    NonFinite { what: String },
    #[error("unsupported model format version {found} (this build reads {supported})")]
    VersionMismatch { found: u64, supported: u64 },
    #[error("model time grid does not match the scenario time grid")]
    GridMismatch,
    #[error("malformed model file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub n_features: usize,
    pub n_hidden: usize,
    pub n_times: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self { n_features: NUM_FEATURES, n_hidden: NUM_HIDDEN, n_times: NUM_TIMES }
    }
}

impl ModelDims {
    pub fn param_count(&self) -> usize {
        self.n_hidden * self.n_features + 2 * self.n_hidden + 1 + self.n_times
    }

    fn b1_offset(&self) -> usize {
        self.n_hidden * self.n_features
    }

    fn w2_offset(&self) -> usize {
        self.b1_offset() + self.n_hidden
    }

    fn b2_offset(&self) -> usize {
        self.w2_offset() + self.n_hidden
    }

    fn gamma_offset(&self) -> usize {
        self.b2_offset() + 1
    }
}

/// Normalized features of one trajectory, one row per evaluation time.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBlock {
    n_features: usize,
    data: Vec<f64>,
}

impl FeatureBlock {
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let n_features = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * n_features);
        for row in rows {
            assert_eq!(row.as_ref().len(), n_features, "ragged feature block");
            data.extend_from_slice(row.as_ref());
        }
        Self { n_features, data }
    }

    /// Normalizes raw feature vectors with `table`.
    pub fn normalized(raw: &[FeatureVector], table: &NormTable) -> Self {
        let mut data = vec![0.0; raw.len() * NUM_FEATURES];
        for (row, out) in raw.iter().zip(data.chunks_exact_mut(NUM_FEATURES)) {
            table.apply(row.as_slice(), out);
        }
        Self { n_features: NUM_FEATURES, data }
    }

    pub fn n_times(&self) -> usize {
        self.data.len().checked_div(self.n_features).unwrap_or(0)
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.n_features..(k + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_features.max(1))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// A copy with one extra channel holding `value` in every row.
    pub fn with_constant_channel(&self, value: f64) -> Self {
        let mut data = Vec::with_capacity(self.data.len() + self.n_times());
        for row in self.rows() {
            data.extend_from_slice(row);
            data.push(value);
        }
        Self { n_features: self.n_features + 1, data }
    }
}

impl Serialize for FeatureBlock {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.rows())
    }
}

impl<'de> Deserialize<'de> for FeatureBlock {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        if let Some(first) = rows.first() {
            if rows.iter().any(|r| r.len() != first.len()) {
                return Err(serde::de::Error::custom("ragged feature block"));
            }
        }
        Ok(Self::from_rows(&rows))
    }
}

/// Anything that assigns a scalar value to a feature block.
pub trait BlockScorer: Sync {
    fn score(&self, block: &FeatureBlock) -> f64;
}

/// Reward encoder parameters θ, per-time weights γ, and the metadata the
/// model was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueModel {
    dims: ModelDims,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    pub gamma: Vec<f64>,
    pub slope: f64,
    pub time_grid: Vec<f64>,
    pub norm_table: NormTable,
}

impl ValueModel {
    /// All-zero encoder with γ = 1.
    pub fn zeros(dims: ModelDims, time_grid: Vec<f64>, norm_table: NormTable) -> Self {
        Self {
            w1: vec![0.0; dims.n_hidden * dims.n_features],
            b1: vec![0.0; dims.n_hidden],
            w2: vec![0.0; dims.n_hidden],
            b2: 0.0,
            gamma: vec![1.0; dims.n_times],
            slope: DEFAULT_SLOPE,
            dims,
            time_grid,
            norm_table,
        }
    }

    /// Fan-in scaled uniform θ from the `"init"` stream of `seed`, zero
    /// biases, γ = 1.
    pub fn init(dims: ModelDims, seed: u64, time_grid: Vec<f64>, norm_table: NormTable) -> Self {
        let mut rng = seed::stream(seed, "init");
        let mut model = Self::zeros(dims, time_grid, norm_table);
        let bound1 = 1.0 / (dims.n_features as f64).sqrt();
        let bound2 = 1.0 / (dims.n_hidden as f64).sqrt();
        for w in model.w1.iter_mut() {
            *w = rng.random_range(-bound1..bound1);
        }
        for w in model.w2.iter_mut() {
            *w = rng.random_range(-bound2..bound2);
        }
        model
    }

    /// The standard 21-feature, 15-hidden, 18-time model.
    pub fn standard(seed: u64, time_grid: Vec<f64>, norm_table: NormTable) -> Self {
        Self::init(ModelDims::default(), seed, time_grid, norm_table)
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub fn param_count(&self) -> usize {
        self.dims.param_count()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        p.extend_from_slice(&self.w1);
        p.extend_from_slice(&self.b1);
        p.extend_from_slice(&self.w2);
        p.push(self.b2);
        p.extend_from_slice(&self.gamma);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let d = self.dims;
        assert_eq!(p.len(), d.param_count());
        self.w1.copy_from_slice(&p[..d.b1_offset()]);
        self.b1.copy_from_slice(&p[d.b1_offset()..d.w2_offset()]);
        self.w2.copy_from_slice(&p[d.w2_offset()..d.b2_offset()]);
        self.b2 = p[d.b2_offset()];
        self.gamma.copy_from_slice(&p[d.gamma_offset()..]);
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|x| x.is_finite()) && self.slope.is_finite()
    }

    /// Checks internal dimensions and finiteness.
    pub fn validate(&self) -> Result<(), ModelError> {
        let d = self.dims;
        let checks = [
            ("W1", d.n_hidden * d.n_features, self.w1.len()),
            ("b1", d.n_hidden, self.b1.len()),
            ("w2", d.n_hidden, self.w2.len()),
            ("gamma", d.n_times, self.gamma.len()),
            ("time_grid", d.n_times, self.time_grid.len()),
            ("norm_table", d.n_features, self.norm_table.len()),
        ];
        for (what, expected, got) in checks {
            if expected != got {
                return Err(ModelError::DimensionMismatch { what: what.into(), expected, got });
            }
        }
        if !self.is_finite() {
            return Err(ModelError::NonFinite { what: "parameters".into() });
        }
        Ok(())
    }

    pub fn check_grid(&self, time_grid: &[f64]) -> Result<(), ModelError> {
        if self.time_grid != time_grid {
            return Err(ModelError::GridMismatch);
        }
        Ok(())
    }

    pub(crate) fn check_block(&self, block: &FeatureBlock) -> Result<(), ModelError> {
        if block.n_features() != self.dims.n_features {
            return Err(ModelError::DimensionMismatch {
                what: "feature row".into(),
                expected: self.dims.n_features,
                got: block.n_features(),
            });
        }
        if block.n_times() != self.dims.n_times {
            return Err(ModelError::DimensionMismatch {
                what: "feature block rows".into(),
                expected: self.dims.n_times,
                got: block.n_times(),
            });
        }
        if !block.is_finite() {
            return Err(ModelError::NonFinite { what: "feature block".into() });
        }
        Ok(())
    }

    #[inline]
    fn activate(&self, x: f64) -> f64 {
        if x >= 0.0 {
            x
        } else {
            self.slope * x
        }
    }

    #[inline]
    fn activate_slope(&self, x: f64) -> f64 {
        if x >= 0.0 {
            1.0
        } else {
            self.slope
        }
    }

    #[inline]
    fn pre_activation(&self, j: usize, row: &[f64]) -> f64 {
        let weights = &self.w1[j * self.dims.n_features..(j + 1) * self.dims.n_features];
        let mut acc = self.b1[j];
        for (w, x) in weights.iter().zip(row) {
            acc += w * x;
        }
        acc
    }

    /// Reward of one feature row without input validation.
    pub(crate) fn reward_unchecked(&self, row: &[f64]) -> f64 {
        let mut r = self.b2;
        for j in 0..self.dims.n_hidden {
            r += self.w2[j] * self.activate(self.pre_activation(j, row));
        }
        r
    }

    pub(crate) fn value_unchecked(&self, block: &FeatureBlock) -> f64 {
        let mut v = 0.0;
        for (k, row) in block.rows().enumerate() {
            v += self.gamma[k] * self.reward_unchecked(row);
        }
        v
    }

    /// Adds `weight · ∇V(block)` into `grad` and returns `V(block)`.
    pub(crate) fn accumulate_gradient(
        &self,
        block: &FeatureBlock,
        weight: f64,
        grad: &mut [f64],
    ) -> f64 {
        let d = self.dims;
        let mut hidden = vec![0.0; d.n_hidden];
        let mut pre = vec![0.0; d.n_hidden];
        let mut value = 0.0;
        for (k, row) in block.rows().enumerate() {
            let mut r = self.b2;
            for j in 0..d.n_hidden {
                pre[j] = self.pre_activation(j, row);
                hidden[j] = self.activate(pre[j]);
                r += self.w2[j] * hidden[j];
            }
            let g = self.gamma[k];
            value += g * r;
            let scaled = weight * g;
            grad[d.gamma_offset() + k] += weight * r;
            grad[d.b2_offset()] += scaled;
            for j in 0..d.n_hidden {
                grad[d.w2_offset() + j] += scaled * hidden[j];
                let delta = scaled * self.w2[j] * self.activate_slope(pre[j]);
                if delta == 0.0 {
                    continue;
                }
                grad[d.b1_offset() + j] += delta;
                let w1_grad = &mut grad[j * d.n_features..(j + 1) * d.n_features];
                for (gw, x) in w1_grad.iter_mut().zip(row) {
                    *gw += delta * x;
                }
            }
        }
        value
    }

    /// `V(a) - V(b)` accumulated unit by unit, so any hidden unit that is
    /// identical on both blocks contributes an exact zero and `b2` cancels.
    pub(crate) fn value_difference_unchecked(&self, a: &FeatureBlock, b: &FeatureBlock) -> f64 {
        let mut diff = 0.0;
        for (k, (ra, rb)) in a.rows().zip(b.rows()).enumerate() {
            let mut r = 0.0;
            for j in 0..self.dims.n_hidden {
                let ha = self.activate(self.pre_activation(j, ra));
                let hb = self.activate(self.pre_activation(j, rb));
                r += self.w2[j] * (ha - hb);
            }
            diff += self.gamma[k] * r;
        }
        diff
    }

    /// Adds `weight · ∇(V(a) - V(b))` into `grad`, term by term so that
    /// identical rows contribute exact zeros. Returns `V(a) - V(b)`.
    pub(crate) fn accumulate_difference_gradient(
        &self,
        a: &FeatureBlock,
        b: &FeatureBlock,
        weight: f64,
        grad: &mut [f64],
    ) -> f64 {
        let d = self.dims;
        let mut pre_a = vec![0.0; d.n_hidden];
        let mut pre_b = vec![0.0; d.n_hidden];
        let mut diff = 0.0;
        for (k, (ra, rb)) in a.rows().zip(b.rows()).enumerate() {
            let mut r = 0.0;
            for j in 0..d.n_hidden {
                pre_a[j] = self.pre_activation(j, ra);
                pre_b[j] = self.pre_activation(j, rb);
                r += self.w2[j] * (self.activate(pre_a[j]) - self.activate(pre_b[j]));
            }
            let g = self.gamma[k];
            diff += g * r;
            grad[d.gamma_offset() + k] += weight * r;
            let scaled = weight * g;
            for j in 0..d.n_hidden {
                let dh = self.activate(pre_a[j]) - self.activate(pre_b[j]);
                grad[d.w2_offset() + j] += scaled * dh;
                let da = scaled * self.w2[j] * self.activate_slope(pre_a[j]);
                let db = scaled * self.w2[j] * self.activate_slope(pre_b[j]);
                grad[d.b1_offset() + j] += da - db;
                let w1_grad = &mut grad[j * d.n_features..(j + 1) * d.n_features];
                for ((gw, xa), xb) in w1_grad.iter_mut().zip(ra).zip(rb) {
                    *gw += da * xa - db * xb;
                }
            }
        }
        diff
    }

    /// This model extended by one input channel and one hidden unit that
    /// passes that channel straight to the output: `R'(f, c) = R(f) + act(c)`.
    pub fn with_offset_unit(&self) -> Self {
        let d = self.dims;
        let dims = ModelDims { n_features: d.n_features + 1, n_hidden: d.n_hidden + 1, ..d };
        let mut w1 = Vec::with_capacity(dims.n_hidden * dims.n_features);
        for j in 0..d.n_hidden {
            w1.extend_from_slice(&self.w1[j * d.n_features..(j + 1) * d.n_features]);
            w1.push(0.0);
        }
        w1.extend(std::iter::repeat_n(0.0, d.n_features));
        w1.push(1.0);
        let mut b1 = self.b1.clone();
        b1.push(0.0);
        let mut w2 = self.w2.clone();
        w2.push(1.0);
        let mut norm_table = self.norm_table.clone();
        norm_table.center.push(0.0);
        norm_table.scale.push(1.0);
        Self { dims, w1, b1, w2, norm_table, ..self.clone() }
    }

    /// Hidden pre-activations of every row, used to locate rectifier kinks.
    pub fn pre_activations(&self, block: &FeatureBlock) -> Vec<Vec<f64>> {
        block
            .rows()
            .map(|row| (0..self.dims.n_hidden).map(|j| self.pre_activation(j, row)).collect())
            .collect()
    }
}

impl BlockScorer for ValueModel {
    fn score(&self, block: &FeatureBlock) -> f64 {
        self.value_unchecked(block)
    }
}

/// `w2 · act(W1 f + b1) + b2` for one feature row.
pub fn encode_reward(model: &ValueModel, row: &[f64]) -> Result<f64, ModelError> {
    if row.len() != model.dims.n_features {
        return Err(ModelError::DimensionMismatch {
            what: "feature row".into(),
            expected: model.dims.n_features,
            got: row.len(),
        });
    }
    if row.iter().any(|x| !x.is_finite()) {
        return Err(ModelError::NonFinite { what: "feature row".into() });
    }
    Ok(model.reward_unchecked(row))
}

/// `Σ_k γ_k R_θ(block[k])`.
pub fn value(model: &ValueModel, block: &FeatureBlock) -> Result<f64, ModelError> {
    model.check_block(block)?;
    Ok(model.value_unchecked(block))
}

/// `V(a) - V(b)`, computed per hidden unit.
pub fn value_difference(
    model: &ValueModel,
    a: &FeatureBlock,
    b: &FeatureBlock,
) -> Result<f64, ModelError> {
    model.check_block(a)?;
    model.check_block(b)?;
    Ok(model.value_difference_unchecked(a, b))
}

/// `V(block)` and its gradient over every parameter, in flat layout.
pub fn value_with_gradient(
    model: &ValueModel,
    block: &FeatureBlock,
) -> Result<(f64, Vec<f64>), ModelError> {
    model.check_block(block)?;
    let mut grad = vec![0.0; model.param_count()];
    let v = model.accumulate_gradient(block, 1.0, &mut grad);
    Ok((v, grad))
}
