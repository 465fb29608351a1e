//! Synthetic scenario suites.
//!
//! Every scenario is drawn from its own stream `suite/<family>/<index>`, so a
//! suite is a pure function of `(config, seed)` and individual scenarios can
//! be regenerated in isolation.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SamplerError;
use crate::scenario::{Obstacle, PathProfile, Scenario};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Free road, often with a curved section.
    Cruise,
    /// Stop line or virtual wall 20–120 m ahead.
    Stop,
    /// Slower lead vehicle in the ego lane.
    Follow,
    /// Crossing traffic occupying a station interval for a time window.
    YieldOvertake,
    /// Laterally offset obstacle beside the path.
    Nudge,
}

impl Family {
    pub const ALL: [Family; 5] =
        [Family::Cruise, Family::Stop, Family::Follow, Family::YieldOvertake, Family::Nudge];

    pub fn name(self) -> &'static str {
        match self {
            Family::Cruise => "cruise",
            Family::Stop => "stop",
            Family::Follow => "follow",
            Family::YieldOvertake => "yield_overtake",
            Family::Nudge => "nudge",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub counts: BTreeMap<Family, usize>,
    /// Range of the nominal road speed limit (m/s).
    pub speed_limit: (f64, f64),
    pub path_length: f64,
    /// Lateral acceleration allowed on curves when lowering the limit (m/s²).
    pub curve_lateral_accel: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            counts: Family::ALL.iter().map(|&f| (f, 50)).collect(),
            speed_limit: (8.0, 20.0),
            path_length: 300.0,
            curve_lateral_accel: 3.0,
        }
    }
}

impl SuiteConfig {
    pub fn only(family: Family, count: usize) -> Self {
        Self { counts: BTreeMap::from([(family, count)]), ..Default::default() }
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |m: &str| Err(SamplerError::InvalidSuite(m.to_string()));
        if self.counts.is_empty() || self.total() == 0 {
            return bad("no scenario families requested");
        }
        let (lo, hi) = self.speed_limit;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad("speed_limit range must satisfy 0 < lo <= hi");
        }
        if !(self.path_length >= 150.0 && self.path_length.is_finite()) {
            return bad("path_length must be at least 150 m");
        }
        if !(self.curve_lateral_accel > 0.0) {
            return bad("curve_lateral_accel must be positive");
        }
        Ok(())
    }
}

/// All requested scenarios, families in enum order, ids `<family>-<index>`.
pub fn generate_scenario_suite(
    config: &SuiteConfig,
    seed: u64,
) -> Result<Vec<Scenario>, SamplerError> {
    config.validate()?;
    let mut suite = Vec::with_capacity(config.total());
    for (&family, &count) in &config.counts {
        for i in 0..count {
            suite.push(generate_one(config, family, i, seed));
        }
    }
    for scenario in &suite {
        scenario.validate()?;
    }
    Ok(suite)
}

fn generate_one(config: &SuiteConfig, family: Family, index: usize, seed: u64) -> Scenario {
    let label = format!("suite/{}/{index}", family.name());
    let mut rng = seed::stream(seed, &label);
    let limit = half_step(rng.random_range(config.speed_limit.0..=config.speed_limit.1));
    let mut path = PathProfile::straight(config.path_length, limit);
    let curve_chance = if family == Family::Cruise { 0.7 } else { 0.25 };
    if rng.random_bool(curve_chance) {
        add_curve(&mut path, &mut rng, config.curve_lateral_accel);
    }
    let path_limit = path.max_speed_limit();
    let mut scenario = Scenario::new(format!("{}-{index:04}", family.name()), path, 0.0);
    scenario.seed = seed::derive_seed(seed, &label);
    let grid = scenario.time_grid.clone();

    match family {
        Family::Cruise => {
            scenario.v0 = half_step(rng.random_range(0.0..=path_limit));
        }
        Family::Stop => {
            let station: f64 = rng.random_range(20.0..=120.0);
            // comfortable stop at 3 m/s² with 3 m to spare
            let v_max = (2.0 * 3.0 * (station - 3.0)).sqrt().min(path_limit);
            scenario.v0 = half_step(rng.random_range(0.0..=v_max));
            let wall = if rng.random_bool(0.3) {
                Obstacle::virtual_wall("wall", station)
            } else {
                Obstacle::stop("stop_line", station)
            };
            scenario.obstacles.push(wall);
        }
        Family::Follow => {
            let v0 = half_step(rng.random_range((0.4 * path_limit)..=path_limit));
            let lead_speed = v0 * rng.random_range(0.3..=0.8);
            // room to match the lead's speed at 3 m/s² plus 8 m
            let min_gap = (v0 - lead_speed).powi(2) / 6.0 + 8.0;
            let gap = rng.random_range(min_gap..=min_gap + 50.0);
            scenario.v0 = v0;
            scenario.obstacles.push(Obstacle::constant_velocity(
                "lead",
                crate::scenario::ObstacleKind::Follow,
                gap,
                5.0,
                lead_speed,
                &grid,
            ));
        }
        Family::YieldOvertake => {
            let v0 = half_step(rng.random_range((0.3 * path_limit)..=path_limit));
            let min_rear = v0 * v0 / 6.0 + 5.0;
            let rear = rng.random_range(min_rear.max(20.0)..=min_rear.max(20.0) + 60.0);
            let width = rng.random_range(4.0..=10.0);
            let t_in = rng.random_range(1.0..=4.0);
            let t_out = t_in + rng.random_range(1.0..=3.0);
            let speed = rng.random_range(3.0..=10.0);
            scenario.v0 = v0;
            scenario
                .obstacles
                .push(Obstacle::crossing("crossing", rear, rear + width, t_in, t_out, speed, &grid));
        }
        Family::Nudge => {
            let v0 = half_step(rng.random_range((0.3 * path_limit)..=path_limit));
            let rear0 = rng.random_range(10.0..=60.0);
            let speed = rng.random_range(0.0..=0.5 * v0);
            let gap = rng.random_range(0.8..=2.5);
            let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            scenario.v0 = v0;
            add_lateral_bump(&mut scenario.path, rear0 - 10.0, 30.0, -side * 0.3);
            scenario.obstacles.push(Obstacle::nudge("nudge", rear0, 5.0, speed, side * gap, &grid));
        }
    }
    scenario
}

fn half_step(v: f64) -> f64 {
    (v * 2.0).floor() / 2.0
}

/// A constant-curvature arc with linear entry and exit ramps; the speed
/// limit is lowered so that `κ v²` stays at or below `lateral_accel`.
fn add_curve(path: &mut PathProfile, rng: &mut ChaCha8Rng, lateral_accel: f64) {
    let kappa = rng.random_range(0.005..=0.03) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let start = rng.random_range(20.0..=150.0);
    let ramp = 20.0;
    let body = rng.random_range(20.0..=80.0);
    for i in 0..path.station_grid.len() {
        let s = path.station_grid[i];
        let w = if s < start || s > start + 2.0 * ramp + body {
            0.0
        } else if s < start + ramp {
            (s - start) / ramp
        } else if s <= start + ramp + body {
            1.0
        } else {
            (start + 2.0 * ramp + body - s) / ramp
        };
        path.curvature[i] = kappa * w;
        if w > 0.0 {
            let safe = half_step((lateral_accel / (kappa * w).abs()).sqrt()).max(1.0);
            path.speed_limit[i] = path.speed_limit[i].min(safe);
        }
    }
}

/// Raised-cosine lateral offset of height `amplitude` over `[start, start + width]`.
fn add_lateral_bump(path: &mut PathProfile, start: f64, width: f64, amplitude: f64) {
    let omega = 2.0 * PI / width;
    for i in 0..path.station_grid.len() {
        let s = path.station_grid[i] - start;
        if !(0.0..=width).contains(&s) {
            continue;
        }
        let half = 0.5 * amplitude;
        path.lateral_offset[i] = half * (1.0 - (omega * s).cos());
        path.dl[i] = half * omega * (omega * s).sin();
        path.ddl[i] = half * omega * omega * (omega * s).cos();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn cruise_only_has_no_obstacles() {
        let suite = generate_scenario_suite(&SuiteConfig::only(Family::Cruise, 3), 1).unwrap();
        assert_eq!(suite.len(), 3);
        assert!(suite.iter().all(|s| s.obstacles.is_empty()));
    }

    #[test]
    fn suites_are_deterministic() {
        let cfg = SuiteConfig::default();
        assert_eq!(generate_scenario_suite(&cfg, 9).unwrap(), generate_scenario_suite(&cfg, 9).unwrap());
        assert_ne!(generate_scenario_suite(&cfg, 9).unwrap(), generate_scenario_suite(&cfg, 10).unwrap());
    }

    #[test]
    fn default_suite_has_250_unique_ids() {
        let suite = generate_scenario_suite(&SuiteConfig::default(), 3).unwrap();
        assert_eq!(suite.len(), 250);
        let ids: BTreeSet<&str> = suite.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids.len(), 250);
    }

    #[test]
    fn empty_family_list_is_rejected() {
        let cfg = SuiteConfig { counts: BTreeMap::new(), ..Default::default() };
        assert!(matches!(generate_scenario_suite(&cfg, 0), Err(SamplerError::InvalidSuite(_))));
        let cfg = SuiteConfig::only(Family::Stop, 0);
        assert!(generate_scenario_suite(&cfg, 0).is_err());
    }

    #[test]
    fn family_shapes() {
        let suite = generate_scenario_suite(&SuiteConfig::default(), 5).unwrap();
        for sc in &suite {
            let fam = sc.id.rsplit_once('-').unwrap().0;
            match fam {
                "stop" => {
                    let s = sc.obstacles[0].station.unwrap();
                    assert!((20.0..=120.0).contains(&s));
                }
                "follow" => {
                    let lead = &sc.obstacles[0];
                    assert!(lead.speed[0] < sc.v0);
                }
                "nudge" => assert!(sc.obstacles[0].lateral_gap.unwrap().abs() >= 0.8),
                _ => {}
            }
            assert_eq!(sc.v0 * 2.0, (sc.v0 * 2.0).round());
        }
    }

    #[test]
    fn curves_respect_the_lateral_budget() {
        let suite = generate_scenario_suite(&SuiteConfig::only(Family::Cruise, 40), 2).unwrap();
        let mut curved = 0;
        for sc in &suite {
            let p = &sc.path;
            curved += p.curvature.iter().any(|&k| k != 0.0) as usize;
            for i in 0..p.station_grid.len() {
                assert!(p.curvature[i].abs() * p.speed_limit[i].powi(2) <= 3.0 + 1e-9);
            }
        }
        assert!(curved > 10);
    }
}
