use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use super::{ObstacleKind, Occupancy, Scenario, ScenarioError, StRegion, TrajectoryPoint};
use crate::NUM_FEATURES;

/// Distance reported when no obstacle of a kind is ahead (m).
pub const SENTINEL_DISTANCE: f64 = 200.0;

/// Channel indices of [`FeatureVector`].
pub mod channel {
    pub const LATERAL: usize = 0;
    pub const DL: usize = 1;
    pub const DDL: usize = 2;
    pub const CURVATURE: usize = 3;
    pub const STATION: usize = 4;
    pub const TIME: usize = 5;
    pub const VELOCITY: usize = 6;
    pub const SPEED_LIMIT: usize = 7;
    pub const ACCEL: usize = 8;
    pub const JERK: usize = 9;
    pub const COLLISION: usize = 10;
    pub const FOLLOW_DIST: usize = 11;
    pub const FOLLOW_SPEED: usize = 12;
    pub const OVERTAKE_DIST: usize = 13;
    pub const OVERTAKE_SPEED: usize = 14;
    pub const STOP_DIST: usize = 15;
    pub const VIRTUAL_DIST: usize = 16;
    pub const NUDGE_LATERAL: usize = 17;
    pub const NUDGE_SPEED: usize = 18;
    pub const LATERAL_ACCEL: usize = 19;
    pub const LATERAL_JERK: usize = 20;

    pub const NAMES: [&str; super::NUM_FEATURES] = [
        "l",
        "dl",
        "ddl",
        "curvature",
        "station",
        "time",
        "velocity",
        "speed_limit",
        "acceleration",
        "jerk",
        "collision_distance",
        "follow_distance",
        "follow_speed",
        "overtake_distance",
        "overtake_speed",
        "stop_distance",
        "virtual_distance",
        "nudge_lateral",
        "nudge_speed",
        "lateral_acceleration",
        "lateral_jerk",
    ];
}

/// The 21 raw (or normalized) features of one trajectory point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; NUM_FEATURES]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl Index<usize> for FeatureVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for FeatureVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Clip value for distance channels and the absent-obstacle sentinel (m).
    pub sentinel_distance: f64,
    /// Metres equivalent to one second when measuring collision distance.
    pub st_time_scale: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { sentinel_distance: SENTINEL_DISTANCE, st_time_scale: 10.0 }
    }
}

/// Everything about a point that depends on `(time index, station)` only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct StationContext {
    l: f64,
    dl: f64,
    ddl: f64,
    kappa: f64,
    kappa_slope: f64,
    speed_limit: f64,
    collision: f64,
    follow: (f64, f64),
    overtake: (f64, f64),
    stop: f64,
    virtual_wall: f64,
    nudge: (f64, f64),
}

impl StationContext {
    pub(crate) fn collides(&self) -> bool {
        self.collision == 0.0
    }
}

fn collision_distance(
    cfg: &FeatureConfig,
    occupancy: &Occupancy,
    k: usize,
    s: f64,
) -> f64 {
    let tk = occupancy.times[k];
    let mut best = cfg.sentinel_distance;
    for (j, &tj) in occupancy.times.iter().enumerate() {
        let dt = cfg.st_time_scale * (tk - tj).abs();
        if dt >= best {
            continue;
        }
        for region in occupancy.blocking_at(j) {
            let ds = region.station_gap(s);
            let d = (ds * ds + dt * dt).sqrt();
            if d < best {
                best = d;
            }
        }
    }
    best
}

/// Nearest region of `kind` that still extends ahead of `s`.
fn nearest_ahead(regions: &[StRegion], kind: ObstacleKind, s: f64) -> Option<(f64, &StRegion)> {
    let mut best: Option<(f64, &StRegion)> = None;
    for region in regions.iter().filter(|r| r.kind == kind && r.hi >= s) {
        let gap = (region.lo - s).max(0.0);
        if best.is_none_or(|(d, _)| gap < d) {
            best = Some((gap, region));
        }
    }
    best
}

pub(crate) fn station_context(
    cfg: &FeatureConfig,
    scenario: &Scenario,
    occupancy: &Occupancy,
    k: usize,
    s: f64,
) -> StationContext {
    let path = &scenario.path;
    let (l, dl, ddl) = path.lateral_at(s);
    let sentinel = cfg.sentinel_distance;
    let regions = occupancy.at(k);
    let distance_and_speed = |kind| match nearest_ahead(regions, kind, s) {
        Some((d, r)) => (d.min(sentinel), r.speed),
        None => (sentinel, 0.0),
    };
    let nudge = match nearest_ahead(regions, ObstacleKind::Nudge, s) {
        Some((_, r)) => (r.lateral_gap.unwrap_or(sentinel).min(sentinel), r.speed),
        None => (sentinel, 0.0),
    };
    StationContext {
        l,
        dl,
        ddl,
        kappa: path.curvature_at(s),
        kappa_slope: path.curvature_slope_at(s),
        speed_limit: path.speed_limit_at(s),
        collision: collision_distance(cfg, occupancy, k, s),
        follow: distance_and_speed(ObstacleKind::Follow),
        overtake: distance_and_speed(ObstacleKind::Overtake),
        stop: distance_and_speed(ObstacleKind::Stop).0,
        virtual_wall: distance_and_speed(ObstacleKind::Virtual).0,
        nudge,
    }
}

pub(crate) fn assemble(ctx: &StationContext, t: f64, s: f64, v: f64, a: f64, j: f64) -> FeatureVector {
    use channel::*;
    let mut f = [0.0; NUM_FEATURES];
    f[LATERAL] = ctx.l;
    f[DL] = ctx.dl;
    f[DDL] = ctx.ddl;
    f[CURVATURE] = ctx.kappa;
    f[STATION] = s;
    f[TIME] = t;
    f[VELOCITY] = v;
    f[SPEED_LIMIT] = ctx.speed_limit;
    f[ACCEL] = a;
    f[JERK] = j;
    f[COLLISION] = ctx.collision;
    f[FOLLOW_DIST] = ctx.follow.0;
    f[FOLLOW_SPEED] = ctx.follow.1;
    f[OVERTAKE_DIST] = ctx.overtake.0;
    f[OVERTAKE_SPEED] = ctx.overtake.1;
    f[STOP_DIST] = ctx.stop;
    f[VIRTUAL_DIST] = ctx.virtual_wall;
    f[NUDGE_LATERAL] = ctx.nudge.0;
    f[NUDGE_SPEED] = ctx.nudge.1;
    // d/dt (κ(s) v²) = κ'(s) v³ + 2 κ v a
    f[LATERAL_ACCEL] = ctx.kappa * v * v;
    f[LATERAL_JERK] = ctx.kappa_slope * v * v * v + 2.0 * ctx.kappa * v * a;
    FeatureVector(f)
}

/// Raw features of `point` with the default [`FeatureConfig`].
pub fn extract_features(
    scenario: &Scenario,
    occupancy: &Occupancy,
    point: &TrajectoryPoint,
) -> Result<FeatureVector, ScenarioError> {
    extract_features_with(&FeatureConfig::default(), scenario, occupancy, point)
}

/// Raw (un-normalized) features of a point lying on the scenario time grid.
pub fn extract_features_with(
    cfg: &FeatureConfig,
    scenario: &Scenario,
    occupancy: &Occupancy,
    point: &TrajectoryPoint,
) -> Result<FeatureVector, ScenarioError> {
    let k = scenario
        .time_index(point.t)
        .ok_or(ScenarioError::OffGrid { t: point.t })?;
    let ctx = station_context(cfg, scenario, occupancy, k, point.s);
    Ok(assemble(&ctx, point.t, point.s, point.v, point.a, point.j))
}

/// Raw features at every point of `trajectory`.
pub fn trajectory_features(
    scenario: &Scenario,
    occupancy: &Occupancy,
    trajectory: &super::Trajectory,
) -> Result<Vec<FeatureVector>, ScenarioError> {
    trajectory
        .points
        .iter()
        .map(|p| extract_features(scenario, occupancy, p))
        .collect()
}
