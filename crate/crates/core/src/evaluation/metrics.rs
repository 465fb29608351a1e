use serde::{Deserialize, Serialize};

use super::{select_trajectory, EvalError, RankStats, Selection};
use crate::par;
use crate::sampler::SamplerConfig;
use crate::scenario::{channel, project_obstacles, trajectory_features, Scenario, Trajectory};
use crate::valuenet::ValueModel;

/// Comfort bounds; each check is a strict inequality on the magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub accel_station: f64,
    pub accel_lateral: f64,
    pub jerk_station: f64,
    pub jerk_lateral: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Self { accel_station: 4.0, accel_lateral: 4.0, jerk_station: 6.0, jerk_lateral: 6.0 }
    }
}

/// Point counts for one evaluated trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub scenario_id: String,
    pub trajectory_id: String,
    pub collision_free: bool,
    pub all_colliding: bool,
    pub n_points: usize,
    pub speed_under_limit: usize,
    pub accel_station_ok: usize,
    pub accel_lateral_ok: usize,
    pub jerk_station_ok: usize,
    pub jerk_lateral_ok: usize,
}

/// Counts the points of `trajectory` inside each bound.
pub fn metrics_for(
    scenario: &Scenario,
    trajectory: &Trajectory,
    bounds: &Bounds,
) -> Result<ScenarioRow, EvalError> {
    let occupancy = project_obstacles(scenario);
    let features = trajectory_features(scenario, &occupancy, trajectory)?;
    let count = |ok: &dyn Fn(usize) -> bool| (0..features.len()).filter(|&k| ok(k)).count();
    let f = |k: usize, c: usize| features[k][c];
    Ok(ScenarioRow {
        scenario_id: scenario.id.clone(),
        trajectory_id: trajectory.id.clone(),
        collision_free: features.iter().all(|r| r[channel::COLLISION] > 0.0),
        all_colliding: false,
        n_points: features.len(),
        speed_under_limit: count(&|k| f(k, channel::VELOCITY) <= f(k, channel::SPEED_LIMIT)),
        accel_station_ok: count(&|k| f(k, channel::ACCEL).abs() < bounds.accel_station),
        accel_lateral_ok: count(&|k| f(k, channel::LATERAL_ACCEL).abs() < bounds.accel_lateral),
        jerk_station_ok: count(&|k| f(k, channel::JERK).abs() < bounds.jerk_station),
        jerk_lateral_ok: count(&|k| f(k, channel::LATERAL_JERK).abs() < bounds.jerk_lateral),
    })
}

/// Suite-level rates. Collision freedom is per scenario; the comfort
/// rates are per point over every point of every scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n_scenarios: usize,
    pub n_points: usize,
    pub n_all_colliding: usize,
    pub collision_free: f64,
    pub speed_under_limit: f64,
    pub accel_station_ok: f64,
    pub accel_lateral_ok: f64,
    pub jerk_station_ok: f64,
    pub jerk_lateral_ok: f64,
    pub bounds: Bounds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expert_rank: Option<RankStats>,
    pub scenarios: Vec<ScenarioRow>,
}

impl MetricReport {
    pub fn from_rows(rows: Vec<ScenarioRow>, bounds: Bounds) -> Self {
        let n_scenarios = rows.len();
        let n_points: usize = rows.iter().map(|r| r.n_points).sum();
        let points = |f: fn(&ScenarioRow) -> usize| -> f64 {
            rows.iter().map(f).sum::<usize>() as f64 / n_points.max(1) as f64
        };
        Self {
            n_scenarios,
            n_points,
            n_all_colliding: rows.iter().filter(|r| r.all_colliding).count(),
            collision_free: rows.iter().filter(|r| r.collision_free).count() as f64
                / n_scenarios.max(1) as f64,
            speed_under_limit: points(|r| r.speed_under_limit),
            accel_station_ok: points(|r| r.accel_station_ok),
            accel_lateral_ok: points(|r| r.accel_lateral_ok),
            jerk_station_ok: points(|r| r.jerk_station_ok),
            jerk_lateral_ok: points(|r| r.jerk_lateral_ok),
            bounds,
            expert_rank: None,
            scenarios: rows,
        }
    }

    /// `(name, rate, numerator, denominator)` per metric.
    pub fn rows(&self) -> Vec<(&'static str, f64, usize, usize)> {
        let sum = |f: fn(&ScenarioRow) -> usize| self.scenarios.iter().map(f).sum::<usize>();
        let free = self.scenarios.iter().filter(|r| r.collision_free).count();
        let n = self.n_points;
        vec![
            ("collision_free", self.collision_free, free, self.n_scenarios),
            ("speed_under_limit", self.speed_under_limit, sum(|r| r.speed_under_limit), n),
            ("accel_station_ok", self.accel_station_ok, sum(|r| r.accel_station_ok), n),
            ("accel_lateral_ok", self.accel_lateral_ok, sum(|r| r.accel_lateral_ok), n),
            ("jerk_station_ok", self.jerk_station_ok, sum(|r| r.jerk_station_ok), n),
            ("jerk_lateral_ok", self.jerk_lateral_ok, sum(|r| r.jerk_lateral_ok), n),
        ]
    }

    /// One row per metric: `metric,value,numerator,denominator`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value,numerator,denominator\n");
        for (name, rate, num, den) in self.rows() {
            out.push_str(&format!("{name},{rate},{num},{den}\n"));
        }
        if let Some(rank) = &self.expert_rank {
            let top = (rank.top_decile_rate * rank.n_frames as f64).round() as usize;
            out.push_str(&format!(
                "expert_top_decile_rate,{},{top},{}\n",
                rank.top_decile_rate, rank.n_frames
            ));
            out.push_str(&format!(
                "expert_median_percentile,{},,{}\n",
                rank.median_percentile, rank.n_frames
            ));
        }
        out
    }
}

/// Selects a trajectory for every scenario and aggregates the metrics.
pub fn evaluate_suite(
    scenarios: &[Scenario],
    model: &ValueModel,
    sampler: &SamplerConfig,
) -> Result<MetricReport, EvalError> {
    if scenarios.is_empty() {
        return Err(EvalError::EmptySuite);
    }
    for s in scenarios {
        model.check_grid(&s.time_grid)?;
    }
    let bounds = Bounds::default();
    let rows = par::map(scenarios, |s| -> Result<ScenarioRow, EvalError> {
        let Selection { trajectory, all_colliding, .. } = select_trajectory(s, model, sampler)?;
        Ok(ScenarioRow { all_colliding, ..metrics_for(s, &trajectory, &bounds)? })
    });
    Ok(MetricReport::from_rows(rows.into_iter().collect::<Result<_, _>>()?, bounds))
}

/// Two-column comparison with the model names as headers.
pub fn comparison_csv(name_a: &str, a: &MetricReport, name_b: &str, b: &MetricReport) -> String {
    let mut out = format!("metric,{name_a},{name_b}\n");
    for ((name, ra, _, _), (_, rb, _, _)) in a.rows().into_iter().zip(b.rows()) {
        out.push_str(&format!("{name},{ra},{rb}\n"));
    }
    let rank = |r: &MetricReport, f: fn(&RankStats) -> f64| {
        r.expert_rank.as_ref().map(|s| f(s).to_string()).unwrap_or_default()
    };
    if a.expert_rank.is_none() && b.expert_rank.is_none() {
        return out;
    }
    out.push_str(&format!(
        "expert_top_decile_rate,{},{}\n",
        rank(a, |s| s.top_decile_rate),
        rank(b, |s| s.top_decile_rate)
    ));
    out.push_str(&format!(
        "expert_median_percentile,{},{}\n",
        rank(a, |s| s.median_percentile),
        rank(b, |s| s.median_percentile)
    ));
    out
}
