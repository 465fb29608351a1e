use serde::{Deserialize, Serialize};

use super::{ObstacleKind, Scenario};

/// One obstacle's presence on the ST graph at one evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StRegion {
    pub lo: f64,
    /// `f64::INFINITY` for stop and virtual walls.
    pub hi: f64,
    pub kind: ObstacleKind,
    pub speed: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lateral_gap: Option<f64>,
}

impl StRegion {
    /// Nudge obstacles sit beside the path and never block it.
    pub fn blocks(&self) -> bool {
        self.kind != ObstacleKind::Nudge
    }

    pub fn contains(&self, s: f64) -> bool {
        self.lo <= s && s <= self.hi
    }

    /// Station gap from `s` to the interval, zero inside it.
    pub fn station_gap(&self, s: f64) -> f64 {
        if s < self.lo {
            self.lo - s
        } else if s > self.hi {
            s - self.hi
        } else {
            0.0
        }
    }
}

/// Per-time ST occupancy of a scenario.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Occupancy {
    pub times: Vec<f64>,
    pub regions: Vec<Vec<StRegion>>,
}

impl Occupancy {
    pub fn at(&self, k: usize) -> &[StRegion] {
        &self.regions[k]
    }

    pub fn blocking_at(&self, k: usize) -> impl Iterator<Item = &StRegion> {
        self.regions[k].iter().filter(|r| r.blocks())
    }

    pub fn is_empty(&self) -> bool {
        self.regions.iter().all(|r| r.is_empty())
    }

    /// Whether station `s` at time index `k` lies inside a blocking region.
    pub fn collides(&self, k: usize, s: f64) -> bool {
        self.blocking_at(k).any(|r| r.contains(s))
    }
}

/// Projects every obstacle of `scenario` onto the ST graph.
///
/// Stop and virtual walls yield `[station, +∞)` at every time. Follow,
/// overtake and nudge obstacles yield their interval at the times where they
/// interact; nudge regions are recorded but do not block.
pub fn project_obstacles(scenario: &Scenario) -> Occupancy {
    let n = scenario.time_grid.len();
    let mut regions = vec![Vec::new(); n];
    for obstacle in &scenario.obstacles {
        for (k, slot) in regions.iter_mut().enumerate() {
            if obstacle.kind.is_static_wall() {
                if let Some(station) = obstacle.station {
                    slot.push(StRegion {
                        lo: station,
                        hi: f64::INFINITY,
                        kind: obstacle.kind,
                        speed: 0.0,
                        lateral_gap: None,
                    });
                }
            } else if let Some(Some(iv)) = obstacle.st_occupancy.get(k) {
                slot.push(StRegion {
                    lo: iv.rear,
                    hi: iv.front,
                    kind: obstacle.kind,
                    speed: obstacle.speed.get(k).copied().unwrap_or(0.0),
                    lateral_gap: obstacle.lateral_gap,
                });
            }
        }
    }
    Occupancy { times: scenario.time_grid.clone(), regions }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Obstacle, PathProfile};

    fn base() -> Scenario {
        Scenario::new("occ", PathProfile::straight(200.0, 15.0), 10.0)
    }

    #[test]
    fn empty_scenario_has_empty_occupancy() {
        let occ = project_obstacles(&base());
        assert_eq!(occ.regions.len(), 18);
        assert!(occ.is_empty());
    }

    #[test]
    fn stop_blocks_half_line_at_every_time() {
        let occ = project_obstacles(&base().with_obstacle(Obstacle::stop("s", 50.0)));
        for k in 0..18 {
            let r = occ.at(k);
            assert_eq!(r.len(), 1);
            assert_eq!(r[0].lo, 50.0);
            assert_eq!(r[0].hi, f64::INFINITY);
            assert_eq!(r[0].kind, ObstacleKind::Stop);
        }
        assert!(occ.collides(3, 50.0));
        assert!(!occ.collides(3, 49.999));
    }

    #[test]
    fn constant_velocity_follow_obstacle() {
        let sc = base();
        let lead = Obstacle::constant_velocity(
            "lead",
            ObstacleKind::Follow,
            30.0,
            5.0,
            5.0,
            &sc.time_grid,
        );
        let occ = project_obstacles(&sc.with_obstacle(lead));
        // kinematics oracle: rear(t) = 30 + 5 t, front(t) = rear(t) + 5
        let k = occ.times.iter().position(|&t| t == 2.0).unwrap();
        let expected_rear = 30.0 + 5.0 * 2.0;
        assert_eq!(occ.at(k)[0].lo, expected_rear);
        assert_eq!(occ.at(k)[0].hi, expected_rear + 5.0);
        assert_eq!((occ.at(k)[0].lo, occ.at(k)[0].hi), (40.0, 45.0));
        assert_eq!(occ.at(k)[0].speed, 5.0);
    }

    #[test]
    fn crossing_obstacle_only_present_in_window() {
        let sc = base();
        let x = Obstacle::crossing("x", 40.0, 44.0, 2.0, 3.0, 4.0, &sc.time_grid);
        let occ = project_obstacles(&sc.with_obstacle(x));
        let present: Vec<f64> = occ
            .times
            .iter()
            .zip(&occ.regions)
            .filter(|(_, r)| !r.is_empty())
            .map(|(&t, _)| t)
            .collect();
        assert_eq!(present, vec![2.0, 2.5, 3.0]);
    }

    #[test]
    fn nudge_is_recorded_but_not_blocking() {
        let sc = base();
        let n = Obstacle::nudge("n", 20.0, 5.0, 0.0, 1.2, &sc.time_grid);
        let occ = project_obstacles(&sc.with_obstacle(n));
        assert_eq!(occ.at(0).len(), 1);
        assert!(!occ.collides(0, 22.0));
        assert_eq!(occ.at(0)[0].lateral_gap, Some(1.2));
    }
}
