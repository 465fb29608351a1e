//! Station-time planning problems and the raw feature generator.
//!
//! A [`Scenario`] fixes the path, the obstacles and the initial kinematic
//! state. Obstacles are projected onto the station-time graph with
//! [`project_obstacles`], and every trajectory point is mapped to the 21
//! channels of [`FeatureVector`] by [`extract_features`].

mod features;
mod norm;
mod occupancy;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{DEFAULT_DT, NUM_TIMES};

pub use features::{
    channel, extract_features, extract_features_with, trajectory_features, FeatureConfig,
    FeatureVector, SENTINEL_DISTANCE,
};
pub(crate) use features::{assemble, station_context, StationContext};
pub use norm::{normalize_features, NormTable};
pub use occupancy::{project_obstacles, Occupancy, StRegion};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("invalid path profile: {0}")]
    InvalidPath(String),
    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),
    #[error("invalid obstacle `{id}`: {reason}")]
    InvalidObstacle { id: String, reason: String },
    #[error("invalid initial state: {0}")]
    InvalidInitialState(String),
    #[error("invalid trajectory `{id}`: {reason}")]
    InvalidTrajectory { id: String, reason: String },
    #[error("time {t} is not on the scenario time grid")]
    OffGrid { t: f64 },
    #[error("normalization scale for channel {channel} must be positive, got {scale}")]
    NonPositiveScale { channel: usize, scale: f64 },
    #[error("normalization table has {got} channels, expected {expected}")]
    NormDimension { expected: usize, got: usize },
}

/// Path geometry and limits sampled on a station grid.
///
/// Queries between grid points interpolate linearly; queries beyond either
/// end clamp to the boundary sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathProfile {
    pub station_grid: Vec<f64>,
    pub curvature: Vec<f64>,
    pub speed_limit: Vec<f64>,
    pub lateral_offset: Vec<f64>,
    pub dl: Vec<f64>,
    pub ddl: Vec<f64>,
}

impl PathProfile {
    /// A straight lane-centered path of `length` metres sampled every 5 m.
    pub fn straight(length: f64, speed_limit: f64) -> Self {
        let n = ((length / 5.0).ceil() as usize).max(1) + 1;
        let station_grid: Vec<f64> = (0..n).map(|i| i as f64 * 5.0).collect();
        Self {
            curvature: vec![0.0; n],
            speed_limit: vec![speed_limit; n],
            lateral_offset: vec![0.0; n],
            dl: vec![0.0; n],
            ddl: vec![0.0; n],
            station_grid,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let n = self.station_grid.len();
        if n < 2 {
            return Err(ScenarioError::InvalidPath(
                "station grid needs at least two samples".into(),
            ));
        }
        let arrays = [
            ("curvature", &self.curvature),
            ("speed_limit", &self.speed_limit),
            ("lateral_offset", &self.lateral_offset),
            ("dl", &self.dl),
            ("ddl", &self.ddl),
        ];
        for (name, values) in arrays {
            if values.len() != n {
                return Err(ScenarioError::InvalidPath(format!(
                    "{name} has {} samples, station grid has {n}",
                    values.len()
                )));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(ScenarioError::InvalidPath(format!("{name} is not finite")));
            }
        }
        if self.station_grid.iter().any(|s| !s.is_finite()) {
            return Err(ScenarioError::InvalidPath("station grid is not finite".into()));
        }
        if self.station_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ScenarioError::InvalidPath(
                "station grid must be strictly increasing".into(),
            ));
        }
        if self.speed_limit.iter().any(|&v| v <= 0.0) {
            return Err(ScenarioError::InvalidPath("speed limit must be positive".into()));
        }
        Ok(())
    }

    /// Segment index and interpolation weight for station `s`, clamped.
    fn locate(&self, s: f64) -> (usize, f64) {
        let grid = &self.station_grid;
        let last = grid.len() - 1;
        if s <= grid[0] {
            return (0, 0.0);
        }
        if s >= grid[last] {
            return (last - 1, 1.0);
        }
        let upper = grid.partition_point(|&g| g <= s);
        let i = upper - 1;
        (i, (s - grid[i]) / (grid[i + 1] - grid[i]))
    }

    fn interp(&self, values: &[f64], s: f64) -> f64 {
        let (i, w) = self.locate(s);
        (1.0 - w) * values[i] + w * values[i + 1]
    }

    pub fn curvature_at(&self, s: f64) -> f64 {
        self.interp(&self.curvature, s)
    }

    /// dκ/ds of the interpolant; zero outside the grid.
    pub fn curvature_slope_at(&self, s: f64) -> f64 {
        let grid = &self.station_grid;
        if s < grid[0] || s >= grid[grid.len() - 1] {
            return 0.0;
        }
        let (i, _) = self.locate(s);
        (self.curvature[i + 1] - self.curvature[i]) / (grid[i + 1] - grid[i])
    }

    pub fn speed_limit_at(&self, s: f64) -> f64 {
        self.interp(&self.speed_limit, s)
    }

    pub fn lateral_at(&self, s: f64) -> (f64, f64, f64) {
        (
            self.interp(&self.lateral_offset, s),
            self.interp(&self.dl, s),
            self.interp(&self.ddl, s),
        )
    }

    pub fn max_speed_limit(&self) -> f64 {
        self.speed_limit.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleKind {
    Follow,
    Overtake,
    Stop,
    Virtual,
    Nudge,
}

impl ObstacleKind {
    /// Stop lines and virtual walls occupy a fixed station.
    pub fn is_static_wall(self) -> bool {
        matches!(self, ObstacleKind::Stop | ObstacleKind::Virtual)
    }
}

/// Station interval `[rear, front]` occupied at one evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StInterval {
    pub rear: f64,
    pub front: f64,
}

/// An obstacle as seen from the ego path.
///
/// Stop and virtual obstacles carry `station`. Follow, overtake and nudge
/// obstacles carry one optional interval and one speed per evaluation time
/// (`None` when the obstacle does not interact at that time). Nudge
/// obstacles also carry the lateral gap to the ego path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub id: String,
    pub kind: ObstacleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub station: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub st_occupancy: Vec<Option<StInterval>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub speed: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lateral_gap: Option<f64>,
}

impl Obstacle {
    pub fn stop(id: impl Into<String>, station: f64) -> Self {
        Self::wall(id, ObstacleKind::Stop, station)
    }

    pub fn virtual_wall(id: impl Into<String>, station: f64) -> Self {
        Self::wall(id, ObstacleKind::Virtual, station)
    }

    fn wall(id: impl Into<String>, kind: ObstacleKind, station: f64) -> Self {
        Self {
            id: id.into(),
            kind,
            station: Some(station),
            st_occupancy: Vec::new(),
            speed: Vec::new(),
            lateral_gap: None,
        }
    }

    /// A constant-velocity obstacle whose rear is at `rear0` at `t = 0`.
    pub fn constant_velocity(
        id: impl Into<String>,
        kind: ObstacleKind,
        rear0: f64,
        length: f64,
        speed: f64,
        time_grid: &[f64],
    ) -> Self {
        let st_occupancy = time_grid
            .iter()
            .map(|&t| {
                let rear = rear0 + speed * t;
                Some(StInterval { rear, front: rear + length })
            })
            .collect();
        Self {
            id: id.into(),
            kind,
            station: None,
            st_occupancy,
            speed: vec![speed; time_grid.len()],
            lateral_gap: None,
        }
    }

    /// An obstacle that occupies `[rear, front]` only while `t_in <= t <= t_out`.
    pub fn crossing(
        id: impl Into<String>,
        rear: f64,
        front: f64,
        t_in: f64,
        t_out: f64,
        speed: f64,
        time_grid: &[f64],
    ) -> Self {
        let st_occupancy = time_grid
            .iter()
            .map(|&t| (t_in..=t_out).contains(&t).then_some(StInterval { rear, front }))
            .collect();
        Self {
            id: id.into(),
            kind: ObstacleKind::Overtake,
            station: None,
            st_occupancy,
            speed: vec![speed; time_grid.len()],
            lateral_gap: None,
        }
    }

    /// A laterally offset obstacle the ego passes beside.
    pub fn nudge(
        id: impl Into<String>,
        rear0: f64,
        length: f64,
        speed: f64,
        lateral_gap: f64,
        time_grid: &[f64],
    ) -> Self {
        let mut obstacle =
            Self::constant_velocity(id, ObstacleKind::Nudge, rear0, length, speed, time_grid);
        obstacle.lateral_gap = Some(lateral_gap);
        obstacle
    }

    /// Returns a copy translated by `ds` along the station axis.
    pub fn shifted(&self, ds: f64) -> Self {
        let mut out = self.clone();
        if let Some(s) = out.station.as_mut() {
            *s += ds;
        }
        for iv in out.st_occupancy.iter_mut().flatten() {
            iv.rear += ds;
            iv.front += ds;
        }
        out
    }

    pub fn validate(&self, n_times: usize) -> Result<(), ScenarioError> {
        let fail = |reason: &str| {
            Err(ScenarioError::InvalidObstacle {
                id: self.id.clone(),
                reason: reason.to_string(),
            })
        };
        if self.kind.is_static_wall() {
            match self.station {
                Some(s) if s.is_finite() => {}
                Some(_) => return fail("station is not finite"),
                None => return fail("stop/virtual obstacle needs a station"),
            }
            if !self.st_occupancy.is_empty() {
                return fail("stop/virtual obstacle must be time-invariant");
            }
            return Ok(());
        }
        if self.st_occupancy.len() != n_times {
            return fail("st_occupancy must have one entry per evaluation time");
        }
        if self.speed.len() != n_times {
            return fail("speed must have one entry per evaluation time");
        }
        if self.speed.iter().any(|v| !v.is_finite()) {
            return fail("speed is not finite");
        }
        for iv in self.st_occupancy.iter().flatten() {
            if !iv.rear.is_finite() || !iv.front.is_finite() {
                return fail("occupancy is not finite");
            }
            if iv.rear > iv.front {
                return fail("occupancy rear exceeds front");
            }
        }
        match (self.kind, self.lateral_gap) {
            (ObstacleKind::Nudge, Some(g)) if g.is_finite() => Ok(()),
            (ObstacleKind::Nudge, _) => fail("nudge obstacle needs a finite lateral_gap"),
            _ => Ok(()),
        }
    }
}

/// One realized initial condition of the planning problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub seed: u64,
    pub path: PathProfile,
    pub obstacles: Vec<Obstacle>,
    pub v0: f64,
    pub a0: f64,
    pub s0_station: f64,
    pub time_grid: Vec<f64>,
}

impl Scenario {
    /// The default grid: 18 points at 0.5 s spacing, `0.0..=8.5`.
    pub fn default_time_grid() -> Vec<f64> {
        (0..NUM_TIMES).map(|k| k as f64 * DEFAULT_DT).collect()
    }

    /// An obstacle-free scenario on `path` with the default time grid.
    pub fn new(id: impl Into<String>, path: PathProfile, v0: f64) -> Self {
        Self {
            id: id.into(),
            seed: 0,
            path,
            obstacles: Vec::new(),
            v0,
            a0: 0.0,
            s0_station: 0.0,
            time_grid: Self::default_time_grid(),
        }
    }

    pub fn with_obstacle(mut self, obstacle: Obstacle) -> Self {
        self.obstacles.push(obstacle);
        self
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        validate_time_grid(&self.time_grid)?;
        self.path.validate()?;
        if !self.v0.is_finite() || self.v0 < 0.0 {
            return Err(ScenarioError::InvalidInitialState(format!(
                "v0 must be finite and non-negative, got {}",
                self.v0
            )));
        }
        if !self.a0.is_finite() || !self.s0_station.is_finite() {
            return Err(ScenarioError::InvalidInitialState(
                "a0 and s0_station must be finite".into(),
            ));
        }
        for obstacle in &self.obstacles {
            obstacle.validate(self.time_grid.len())?;
        }
        Ok(())
    }

    /// Index of `t` on the time grid; exact match required.
    pub fn time_index(&self, t: f64) -> Option<usize> {
        self.time_grid.iter().position(|&g| g == t)
    }
}

pub fn validate_time_grid(grid: &[f64]) -> Result<(), ScenarioError> {
    if grid.len() != NUM_TIMES {
        return Err(ScenarioError::InvalidTimeGrid(format!(
            "expected {NUM_TIMES} points, got {}",
            grid.len()
        )));
    }
    if grid[0] != 0.0 {
        return Err(ScenarioError::InvalidTimeGrid("t_0 must be 0".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ScenarioError::InvalidTimeGrid(
            "time grid must be finite and strictly increasing".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Expert,
    Sampled,
    Selected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub s: f64,
    pub v: f64,
    pub a: f64,
    pub j: f64,
}

/// A speed profile sampled on the scenario time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: String,
    pub provenance: Provenance,
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    /// Builds a trajectory from stations and speeds on the grid.
    ///
    /// `a_k = (v_{k+1} - v_k) / Δt_k`, the last point repeats the previous
    /// acceleration, and `j_k = (a_k - a_{k-1}) / Δt` with `a_{-1}` the
    /// scenario's initial acceleration.
    pub fn from_profile(
        id: impl Into<String>,
        provenance: Provenance,
        scenario: &Scenario,
        stations: &[f64],
        speeds: &[f64],
    ) -> Self {
        let grid = &scenario.time_grid;
        let n = grid.len();
        debug_assert_eq!(stations.len(), n);
        debug_assert_eq!(speeds.len(), n);
        let mut accels = vec![0.0; n];
        for k in 0..n - 1 {
            accels[k] = (speeds[k + 1] - speeds[k]) / (grid[k + 1] - grid[k]);
        }
        accels[n - 1] = accels[n - 2];
        let points = (0..n)
            .map(|k| {
                let (prev_a, dt) = if k == 0 {
                    (scenario.a0, grid[1] - grid[0])
                } else {
                    (accels[k - 1], grid[k] - grid[k - 1])
                };
                TrajectoryPoint {
                    t: grid[k],
                    s: stations[k],
                    v: speeds[k],
                    a: accels[k],
                    j: (accels[k] - prev_a) / dt,
                }
            })
            .collect();
        Self { id: id.into(), provenance, points }
    }

    /// Builds a trajectory from grid speeds with trapezoidal station
    /// integration starting at the scenario's initial station.
    pub fn from_speeds(
        id: impl Into<String>,
        provenance: Provenance,
        scenario: &Scenario,
        speeds: &[f64],
    ) -> Self {
        let stations = integrate_stations(scenario, speeds);
        Self::from_profile(id, provenance, scenario, &stations, speeds)
    }

    pub fn speeds(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.v).collect()
    }

    pub fn validate(&self, scenario: &Scenario) -> Result<(), ScenarioError> {
        let fail = |reason: String| {
            Err(ScenarioError::InvalidTrajectory { id: self.id.clone(), reason })
        };
        if self.points.len() != scenario.time_grid.len() {
            return fail(format!(
                "expected {} points, got {}",
                scenario.time_grid.len(),
                self.points.len()
            ));
        }
        for (k, (p, &t)) in self.points.iter().zip(&scenario.time_grid).enumerate() {
            if p.t != t {
                return fail(format!("point {k} at t={} is off the time grid", p.t));
            }
            if ![p.s, p.v, p.a, p.j].iter().all(|x| x.is_finite()) {
                return fail(format!("point {k} is not finite"));
            }
            if p.v < 0.0 {
                return fail(format!("point {k} has negative speed"));
            }
        }
        if self.points.windows(2).any(|w| w[1].s < w[0].s) {
            return fail("station decreases in time".into());
        }
        Ok(())
    }
}

/// Trapezoidal stations for grid speeds, starting at `s0_station`.
pub fn integrate_stations(scenario: &Scenario, speeds: &[f64]) -> Vec<f64> {
    let grid = &scenario.time_grid;
    let mut stations = Vec::with_capacity(speeds.len());
    let mut s = scenario.s0_station;
    stations.push(s);
    for k in 1..speeds.len() {
        s += 0.5 * (speeds[k - 1] + speeds[k]) * (grid[k] - grid[k - 1]);
        stations.push(s);
    }
    stations
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curved_path() -> PathProfile {
        let mut path = PathProfile::straight(100.0, 15.0);
        for (i, k) in path.curvature.iter_mut().enumerate() {
            *k = 0.001 * i as f64;
        }
        path
    }

    #[test]
    fn interpolation_is_linear_and_clamped() {
        let path = curved_path();
        assert_eq!(path.curvature_at(0.0), 0.0);
        assert!((path.curvature_at(7.5) - 0.0015).abs() < 1e-15);
        assert_eq!(path.curvature_at(-10.0), 0.0);
        assert_eq!(path.curvature_at(1e6), *path.curvature.last().unwrap());
        assert!((path.curvature_slope_at(12.0) - 0.0002).abs() < 1e-15);
        assert_eq!(path.curvature_slope_at(1e6), 0.0);
    }

    #[test]
    fn path_validation_rejects_bad_profiles() {
        let mut path = PathProfile::straight(50.0, 10.0);
        path.station_grid[2] = path.station_grid[1];
        assert!(matches!(path.validate(), Err(ScenarioError::InvalidPath(_))));

        let mut path = PathProfile::straight(50.0, 10.0);
        path.speed_limit[0] = 0.0;
        assert!(path.validate().is_err());

        let mut path = PathProfile::straight(50.0, 10.0);
        path.dl.pop();
        assert!(path.validate().is_err());
    }

    #[test]
    fn scenario_validation() {
        let grid = Scenario::default_time_grid();
        assert_eq!(grid.len(), 18);
        assert_eq!(grid[17], 8.5);

        let sc = Scenario::new("ok", PathProfile::straight(100.0, 10.0), 5.0);
        sc.validate().unwrap();

        let mut bad = sc.clone();
        bad.v0 = -1.0;
        assert!(matches!(bad.validate(), Err(ScenarioError::InvalidInitialState(_))));

        let mut bad = sc.clone();
        bad.time_grid.pop();
        assert!(matches!(bad.validate(), Err(ScenarioError::InvalidTimeGrid(_))));

        let mut bad = sc.clone();
        bad.time_grid[0] = 0.1;
        assert!(bad.validate().is_err());

        let mut obstacle = Obstacle::constant_velocity(
            "lead",
            ObstacleKind::Follow,
            30.0,
            5.0,
            5.0,
            &sc.time_grid,
        );
        obstacle.st_occupancy[3] = Some(StInterval { rear: 10.0, front: 5.0 });
        let bad = sc.clone().with_obstacle(obstacle);
        assert!(matches!(bad.validate(), Err(ScenarioError::InvalidObstacle { .. })));

        let mut wall = Obstacle::stop("stop", 40.0);
        wall.st_occupancy = vec![None; 18];
        assert!(sc.clone().with_obstacle(wall).validate().is_err());
    }

    #[test]
    fn trajectory_kinematics_from_speeds() {
        let sc = Scenario::new("k", PathProfile::straight(200.0, 20.0), 10.0);
        let speeds: Vec<f64> = (0..18).map(|k| 10.0 + 0.5 * k as f64).collect();
        let traj = Trajectory::from_speeds("t", Provenance::Expert, &sc, &speeds);
        traj.validate(&sc).unwrap();
        for p in &traj.points {
            assert!((p.a - 1.0).abs() < 1e-12);
        }
        // first jerk is measured against a0 = 0
        assert!((traj.points[0].j - 2.0).abs() < 1e-12);
        assert!(traj.points[5].j.abs() < 1e-12);
        // s(t) = 10 t + t²/2
        let last = traj.points[17];
        assert!((last.s - (10.0 * 8.5 + 0.5 * 8.5 * 8.5)).abs() < 1e-9);
    }

    #[test]
    fn trajectory_validation_catches_reverse_driving() {
        let sc = Scenario::new("k", PathProfile::straight(200.0, 20.0), 0.0);
        let mut traj = Trajectory::from_speeds("t", Provenance::Sampled, &sc, &[0.0; 18]);
        traj.validate(&sc).unwrap();
        traj.points[4].s = -1.0;
        assert!(traj.validate(&sc).is_err());
        let mut traj = Trajectory::from_speeds("t", Provenance::Sampled, &sc, &[0.0; 18]);
        traj.points[3].t = 1.4;
        assert!(traj.validate(&sc).is_err());
    }

    #[test]
    fn scenario_json_round_trip() {
        let grid = Scenario::default_time_grid();
        let sc = Scenario::new("json", curved_path(), 7.5)
            .with_obstacle(Obstacle::stop("stop", 42.0))
            .with_obstacle(Obstacle::crossing("x", 60.0, 64.0, 2.0, 4.0, 6.0, &grid))
            .with_obstacle(Obstacle::nudge("n", 20.0, 4.0, 0.0, 1.5, &grid));
        let text = serde_json::to_string(&sc).unwrap();
        let back: Scenario = serde_json::from_str(&text).unwrap();
        assert_eq!(sc, back);
        assert!(text.contains("\"kind\":\"stop\""));
        assert!(text.contains("null"));
    }
}
