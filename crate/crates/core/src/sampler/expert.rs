//! Synthetic expert by dynamic programming on a speed lattice.
//!
//! Speeds after `t_0` live on `{m · Δv}`; consecutive speeds define a constant
//! acceleration over the interval and stations follow by trapezoidal
//! integration, so with a uniform step every reachable station is
//! `s0 + v0 Δt / 2 + n · (Δv Δt / 2)` for an integer `n`. The DP state is
//! `(n, m)` per time step. The reward at point `k` depends on `(s_k, v_k, a_k)`
//! with `a_k` fixed by the outgoing transition, so it is charged on that
//! transition and the optimum over the lattice is exact.

use serde::{Deserialize, Serialize};

use super::{GroundTruthReward, SamplerError};
use crate::scenario::{
    assemble, project_obstacles, station_context, FeatureConfig, Occupancy, Provenance, Scenario,
    StationContext, Trajectory,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DpConfig {
    /// Lattice speed step (m/s).
    pub speed_step: f64,
    /// Top lattice speed as a multiple of the path's highest speed limit.
    pub speed_cap_factor: f64,
    pub a_min: f64,
    pub a_max: f64,
}

impl Default for DpConfig {
    fn default() -> Self {
        Self { speed_step: 0.5, speed_cap_factor: 1.25, a_min: -5.0, a_max: 3.0 }
    }
}

const ACCEL_TOL: f64 = 1e-9;

impl DpConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        let ok = self.speed_step > 0.0
            && self.speed_step.is_finite()
            && self.speed_cap_factor > 0.0
            && self.a_min < self.a_max
            && self.a_min.is_finite()
            && self.a_max.is_finite();
        if ok {
            Ok(())
        } else {
            Err(SamplerError::InvalidConfig("invalid DP lattice configuration".into()))
        }
    }

    pub fn speed_cap(&self, scenario: &Scenario) -> f64 {
        self.speed_cap_factor * scenario.path.max_speed_limit()
    }

    /// Whether `trajectory` is a path of this lattice for `scenario`:
    /// lattice speeds, lattice stations, bounded accelerations, no collision.
    pub fn admits(&self, scenario: &Scenario, trajectory: &Trajectory) -> bool {
        let Ok(lattice) = Lattice::new(scenario, self) else {
            return false;
        };
        let occupancy = project_obstacles(scenario);
        let points = &trajectory.points;
        if points.len() != scenario.time_grid.len() || points[0].v != scenario.v0 {
            return false;
        }
        let mut n = 0i64;
        let mut prev_m = 0i64;
        for k in 0..points.len() {
            let p = points[k];
            if occupancy.collides(k, p.s) {
                return false;
            }
            if k == 0 {
                continue;
            }
            let m = (p.v / self.speed_step).round() as i64;
            if m < 0 || m >= lattice.n_v as i64 || lattice.speed(m as usize) != p.v {
                return false;
            }
            n = if k == 1 { m } else { n + prev_m + m };
            if lattice.station(k, n as usize) != p.s {
                return false;
            }
            let a = (p.v - points[k - 1].v) / (scenario.time_grid[k] - scenario.time_grid[k - 1]);
            if a < self.a_min - ACCEL_TOL || a > self.a_max + ACCEL_TOL {
                return false;
            }
            prev_m = m;
        }
        true
    }
}

struct Lattice {
    s0: f64,
    v0: f64,
    dt: f64,
    dv: f64,
    n_v: usize,
}

impl Lattice {
    fn new(scenario: &Scenario, cfg: &DpConfig) -> Result<Self, SamplerError> {
        let grid = &scenario.time_grid;
        let dt = grid[1] - grid[0];
        let uniform = grid.windows(2).all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-12);
        if !uniform {
            return Err(SamplerError::NonUniformGrid(scenario.id.clone()));
        }
        let n_v = (cfg.speed_cap(scenario) / cfg.speed_step + 1e-9).floor() as usize + 1;
        Ok(Self { s0: scenario.s0_station, v0: scenario.v0, dt, dv: cfg.speed_step, n_v })
    }

    fn speed(&self, m: usize) -> f64 {
        m as f64 * self.dv
    }

    fn station(&self, k: usize, n: usize) -> f64 {
        if k == 0 {
            self.s0
        } else {
            self.s0 + 0.5 * self.v0 * self.dt + 0.5 * self.dv * self.dt * n as f64
        }
    }

    /// Largest station index reachable at step `k`.
    fn max_n(&self, k: usize) -> usize {
        if k == 0 {
            0
        } else {
            (2 * k - 1) * (self.n_v - 1)
        }
    }
}

struct ContextCache<'a> {
    cfg: FeatureConfig,
    scenario: &'a Scenario,
    occupancy: Occupancy,
    slots: Vec<Vec<Option<StationContext>>>,
}

impl<'a> ContextCache<'a> {
    fn new(scenario: &'a Scenario, lattice: &Lattice) -> Self {
        let slots = (0..scenario.time_grid.len())
            .map(|k| vec![None; lattice.max_n(k) + 1])
            .collect();
        Self {
            cfg: FeatureConfig::default(),
            occupancy: project_obstacles(scenario),
            scenario,
            slots,
        }
    }

    fn get(&mut self, lattice: &Lattice, k: usize, n: usize) -> StationContext {
        if let Some(ctx) = self.slots[k][n] {
            return ctx;
        }
        let s = lattice.station(k, n);
        let ctx = station_context(&self.cfg, self.scenario, &self.occupancy, k, s);
        self.slots[k][n] = Some(ctx);
        ctx
    }
}

struct Layer {
    value: Vec<f64>,
    parent: Vec<u32>,
    reachable: Vec<u32>,
}

impl Layer {
    fn new(size: usize) -> Self {
        Self { value: vec![f64::NEG_INFINITY; size], parent: vec![0; size], reachable: Vec::new() }
    }
}

/// The lattice trajectory maximizing `Σ_k decay^k · r(f_k)` among
/// collision-free, acceleration-bounded lattice paths.
pub fn synthetic_expert(
    scenario: &Scenario,
    reward: &GroundTruthReward,
    dp: &DpConfig,
) -> Result<Trajectory, SamplerError> {
    scenario.validate()?;
    reward.validate()?;
    dp.validate()?;
    if reward.uses_jerk() {
        return Err(SamplerError::InvalidReward(
            "the expert lattice cannot score jerk; set its weights to zero".into(),
        ));
    }
    let lattice = Lattice::new(scenario, dp)?;
    let grid = &scenario.time_grid;
    let last = grid.len() - 1;
    let n_v = lattice.n_v;
    let mut cache = ContextCache::new(scenario, &lattice);
    if cache.get(&lattice, 0, 0).collides() {
        return Err(SamplerError::OverConstrained(scenario.id.clone()));
    }
    let point_reward = |ctx: &StationContext, k: usize, s: f64, v: f64, a: f64| {
        reward.discount(k) * reward.reward(&assemble(ctx, grid[k], s, v, a, 0.0))
    };

    let mut layers: Vec<Layer> = Vec::with_capacity(grid.len());
    let mut first = Layer::new(1);
    first.value[0] = 0.0;
    first.reachable.push(0);
    layers.push(first);

    for k in 0..last {
        let dt = grid[k + 1] - grid[k];
        let mut next = Layer::new((lattice.max_n(k + 1) + 1) * n_v);
        let current = &layers[k];
        for &idx in &current.reachable {
            let idx = idx as usize;
            let base = current.value[idx];
            let (n, m) = if k == 0 { (0, 0) } else { (idx / n_v, idx % n_v) };
            let v = if k == 0 { lattice.v0 } else { lattice.speed(m) };
            let s = lattice.station(k, n);
            let ctx = cache.get(&lattice, k, n);
            let lo = ((v + dp.a_min * dt) / lattice.dv - 1e-9).ceil().max(0.0) as usize;
            let hi = ((v + dp.a_max * dt) / lattice.dv + 1e-9).floor();
            if hi < 0.0 {
                continue;
            }
            let hi = (hi as usize).min(n_v - 1);
            for m_next in lo..=hi {
                let v_next = lattice.speed(m_next);
                let a = (v_next - v) / dt;
                if a < dp.a_min - ACCEL_TOL || a > dp.a_max + ACCEL_TOL {
                    continue;
                }
                let n_next = if k == 0 { m_next } else { n + m + m_next };
                let next_ctx = cache.get(&lattice, k + 1, n_next);
                if next_ctx.collides() {
                    continue;
                }
                let mut gain = point_reward(&ctx, k, s, v, a);
                if k + 1 == last {
                    let s_next = lattice.station(k + 1, n_next);
                    gain += point_reward(&next_ctx, k + 1, s_next, v_next, a);
                }
                let candidate = base + gain;
                let slot = n_next * n_v + m_next;
                if candidate > next.value[slot] {
                    if next.value[slot] == f64::NEG_INFINITY {
                        next.reachable.push(slot as u32);
                    }
                    next.value[slot] = candidate;
                    next.parent[slot] = idx as u32;
                }
            }
        }
        if next.reachable.is_empty() {
            return Err(SamplerError::OverConstrained(scenario.id.clone()));
        }
        next.reachable.sort_unstable();
        layers.push(next);
    }

    let final_layer = &layers[last];
    let mut best = final_layer.reachable[0] as usize;
    for &idx in &final_layer.reachable {
        if final_layer.value[idx as usize] > final_layer.value[best] {
            best = idx as usize;
        }
    }
    let mut speeds = vec![0.0; grid.len()];
    let mut stations = vec![0.0; grid.len()];
    let mut idx = best;
    for k in (1..=last).rev() {
        speeds[k] = lattice.speed(idx % n_v);
        stations[k] = lattice.station(k, idx / n_v);
        idx = layers[k].parent[idx] as usize;
    }
    speeds[0] = lattice.v0;
    stations[0] = lattice.s0;
    Ok(Trajectory::from_profile(
        format!("{}/expert", scenario.id),
        Provenance::Expert,
        scenario,
        &stations,
        &speeds,
    ))
}

/// Snaps `speeds[1..]` to the lattice and rebuilds stations on it.
pub fn lattice_trajectory(
    id: impl Into<String>,
    provenance: Provenance,
    scenario: &Scenario,
    dp: &DpConfig,
    speeds: &[f64],
) -> Result<Trajectory, SamplerError> {
    let lattice = Lattice::new(scenario, dp)?;
    let mut snapped = Vec::with_capacity(speeds.len());
    let mut stations = Vec::with_capacity(speeds.len());
    snapped.push(scenario.v0);
    stations.push(scenario.s0_station);
    let mut n = 0usize;
    let mut prev_m = 0usize;
    for (k, &v) in speeds.iter().enumerate().skip(1) {
        let m = ((v / dp.speed_step).round().max(0.0) as usize).min(lattice.n_v - 1);
        n = if k == 1 { m } else { n + prev_m + m };
        snapped.push(lattice.speed(m));
        stations.push(lattice.station(k, n));
        prev_m = m;
    }
    Ok(Trajectory::from_profile(id, provenance, scenario, &stations, &snapped))
}
